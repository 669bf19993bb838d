#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "latentgeo/datasets.hpp"
#include "latentgeo/errors.hpp"
#include "latentgeo/metrics.hpp"
#include "latentgeo/rng.hpp"

using namespace latentgeo;
namespace ds = latentgeo::data;
namespace fs = std::filesystem;

TEST_CASE("render_shape determinism and range") {
  const Tensor a = ds::render_shape(42, 30.0);
  const Tensor b = ds::render_shape(42, 30.0);
  CHECK(bitwise_equal(a, b));
  CHECK(a.shape() == std::vector<int>{32, 32});
  double lo = 1e9, hi = -1e9;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    lo = std::min(lo, a.at(i));
    hi = std::max(hi, a.at(i));
  }
  CHECK(lo >= -1.0);
  CHECK(hi <= 1.0);
  CHECK(lo == -1.0);  // background
  CHECK(hi == 1.0);   // interior

  CHECK_THROWS_AS(ds::render_shape(1, -5.0), ConfigError);
  CHECK_THROWS_AS(ds::render_shape(1, 30.0, 8), ConfigError);
}

TEST_CASE("render_shape small rotations stay closer than large ones") {
  Rng rng(5);
  int ok = 0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t seed = rng.next_u64();
    const Tensor base = ds::render_shape(seed, 45.0);
    const double near = metrics::mse(base, ds::render_shape(seed, 45.5));
    const double far = metrics::mse(base, ds::render_shape(seed, 135.0));
    if (near < far) ++ok;
  }
  CHECK(ok == trials);
}

TEST_CASE("render_shape angle continuity is monotone in the step") {
  Rng rng(6);
  int ok = 0, total = 0;
  for (int i = 0; i < 25; ++i) {
    const std::uint64_t seed = rng.next_u64();
    const double a = rng.uniform(0.0, 120.0);
    const Tensor base = ds::render_shape(seed, a);
    double prev = -1.0;
    bool monotone = true;
    for (double delta : {1.0, 5.0, 20.0, 60.0}) {
      const double m = metrics::mse(base, ds::render_shape(seed, a + delta));
      if (m < prev) monotone = false;
      prev = m;
    }
    ok += monotone;
    ++total;
  }
  CHECK(ok >= total * 9 / 10);
}

TEST_CASE("image dataset generation") {
  const ds::ImageDataset set = ds::generate_image_dataset(4, 12, 99);
  CHECK(set.objects.size() == 4);
  for (const auto& obj : set.objects) {
    CHECK(obj.samples.size() == 12);
    for (std::size_t i = 0; i < obj.samples.size(); ++i) {
      CHECK(obj.samples[i].t >= 0.0);
      CHECK(obj.samples[i].t <= 180.0);
      if (i > 0) CHECK(obj.samples[i].t > obj.samples[i - 1].t);  // sorted, unique
    }
  }
  // determinism
  const ds::ImageDataset again = ds::generate_image_dataset(4, 12, 99);
  for (std::size_t o = 0; o < set.objects.size(); ++o) {
    for (std::size_t s = 0; s < set.objects[o].samples.size(); ++s) {
      CHECK(bitwise_equal(set.objects[o].samples[s].image, again.objects[o].samples[s].image));
    }
  }
  // distinct styles differ at the same angle
  std::vector<double> cross;
  for (std::size_t a = 0; a < set.objects.size(); ++a) {
    for (std::size_t b = a + 1; b < set.objects.size(); ++b) {
      cross.push_back(metrics::mse(ds::render_shape(set.objects[a].style_seed, 60.0),
                                   ds::render_shape(set.objects[b].style_seed, 60.0)));
    }
  }
  std::sort(cross.begin(), cross.end());
  CHECK(cross[cross.size() / 2] > 0.001);

  CHECK_THROWS_AS(ds::generate_image_dataset(2, 5, 1), ConfigError);
}

TEST_CASE("citation graph invariants") {
  const ds::GraphDataset g = ds::generate_citation_graph(60, 20, 7);
  CHECK(g.n_nodes == 60);
  CHECK(g.t_max == 20);

  // monotone growth
  Tensor prev = g.snapshot(0);
  for (int t = 1; t <= g.t_max; ++t) {
    const Tensor cur = g.snapshot(t);
    for (std::int64_t i = 0; i < cur.numel(); ++i) CHECK(cur.at(i) >= prev.at(i));
    prev = cur;
  }

  // zero diagonal; every non-core node cites the core; citations point backward
  const Tensor last = g.snapshot(g.t_max);
  for (int i = 0; i < g.n_nodes; ++i) CHECK(last.at(i, i) == 0.0);
  int core_in = 0;
  for (int i = 0; i < g.n_nodes; ++i) core_in += last.at(i, 0) > 0.5;
  CHECK(core_in == g.n_nodes - 1);

  std::vector<int> birth(static_cast<std::size_t>(g.n_nodes), 0);
  for (const ds::GraphEdge& e : g.edges) {
    birth[static_cast<std::size_t>(e.src)] = std::max(birth[static_cast<std::size_t>(e.src)], e.t_birth);
  }
  for (const ds::GraphEdge& e : g.edges) {
    CHECK(e.src > e.dst);  // later nodes cite earlier ones
    CHECK(e.t_birth >= 1);
    CHECK(e.t_birth <= g.t_max);
  }

  // determinism
  const ds::GraphDataset again = ds::generate_citation_graph(60, 20, 7);
  CHECK(again.edges.size() == g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    CHECK(again.edges[i].src == g.edges[i].src);
    CHECK(again.edges[i].dst == g.edges[i].dst);
    CHECK(again.edges[i].t_birth == g.edges[i].t_birth);
  }
}

TEST_CASE("preferential attachment is heavier-tailed than uniform") {
  auto max_noncore_in_degree = [](const ds::GraphDataset& g) {
    std::vector<int> deg(static_cast<std::size_t>(g.n_nodes), 0);
    for (const ds::GraphEdge& e : g.edges) deg[static_cast<std::size_t>(e.dst)] += 1;
    int best = 0;
    for (int i = 1; i < g.n_nodes; ++i) best = std::max(best, deg[static_cast<std::size_t>(i)]);
    return best;
  };
  std::vector<int> pa, uniform;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    pa.push_back(max_noncore_in_degree(ds::generate_citation_graph(120, 40, seed, 1.0)));
    uniform.push_back(max_noncore_in_degree(ds::generate_citation_graph(120, 40, seed, 0.0)));
  }
  std::sort(pa.begin(), pa.end());
  std::sort(uniform.begin(), uniform.end());
  CHECK(pa[10] > uniform[10]);  // median comparison
}

TEST_CASE("split proportions and coverage") {
  CHECK(ds::default_split(60).train == 30);
  CHECK(ds::default_split(60).val == 15);
  CHECK(ds::default_split(60).test == 15);
  CHECK(ds::default_split(50).train == 25);
  CHECK(ds::default_split(50).val == 12);
  CHECK(ds::default_split(50).test == 13);

  ds::ImageDataset set = ds::generate_image_dataset(3, 12, 5);
  ds::assign_split(set, ds::default_split(12), 77);
  for (const auto& obj : set.objects) {
    int train = 0, val = 0, test = 0;
    for (const auto& s : obj.samples) {
      train += s.split == ds::SplitTag::Train;
      val += s.split == ds::SplitTag::Val;
      test += s.split == ds::SplitTag::Test;
    }
    CHECK(train == 6);
    CHECK(val == 3);
    CHECK(test == 3);
  }

  ds::SplitSpec bad{5, 3, 3};
  CHECK_THROWS_AS(ds::assign_split(set, bad, 1), ConfigError);
}

TEST_CASE("dataset save/load round trip is bit-exact") {
  const fs::path dir = fs::temp_directory_path() / "lg_ds_image";
  fs::remove_all(dir);

  ds::Dataset d;
  d.kind = ds::DatasetKind::Image;
  d.image = ds::generate_image_dataset(2, 10, 11);
  ds::assign_split(d.image, ds::default_split(10), 3);
  ds::save_dataset(d, dir.string());
  const ds::Dataset back = ds::load_dataset(dir.string());
  CHECK(back.kind == ds::DatasetKind::Image);
  CHECK(back.image.master_seed == d.image.master_seed);
  REQUIRE(back.image.objects.size() == 2);
  for (std::size_t o = 0; o < 2; ++o) {
    const auto& orig = d.image.objects[o];
    const auto& loaded = back.image.objects[o];
    CHECK(loaded.style_seed == orig.style_seed);
    REQUIRE(loaded.samples.size() == orig.samples.size());
    for (std::size_t s = 0; s < orig.samples.size(); ++s) {
      CHECK(loaded.samples[s].t == orig.samples[s].t);  // full precision
      CHECK(loaded.samples[s].split == orig.samples[s].split);
      CHECK(bitwise_equal(loaded.samples[s].image, orig.samples[s].image));
    }
  }
  fs::remove_all(dir);

  const fs::path gdir = fs::temp_directory_path() / "lg_ds_graph";
  fs::remove_all(gdir);
  ds::Dataset gd;
  gd.kind = ds::DatasetKind::Graph;
  gd.graph = ds::generate_citation_graph(30, 12, 9);
  ds::assign_split(gd.graph, ds::default_split(12), 4);
  ds::save_dataset(gd, gdir.string());
  const ds::Dataset gback = ds::load_dataset(gdir.string());
  CHECK(gback.graph.edges.size() == gd.graph.edges.size());
  CHECK(bitwise_equal(gback.graph.snapshot(12), gd.graph.snapshot(12)));
  CHECK(gback.graph.stamp_split == gd.graph.stamp_split);
  fs::remove_all(gdir);
}

TEST_CASE("malformed dataset inputs") {
  const fs::path dir = fs::temp_directory_path() / "lg_ds_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK_THROWS_AS(ds::load_dataset(dir.string()), IoError);
  {
    std::ofstream out(dir / "manifest.json");
    out << "{not json";
  }
  CHECK_THROWS_AS(ds::load_dataset(dir.string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("split views and sample fetch") {
  ds::Dataset d;
  d.kind = ds::DatasetKind::Image;
  d.image = ds::generate_image_dataset(3, 12, 21);
  ds::assign_split(d.image, ds::default_split(12), 8);
  const auto views = ds::split_view(d, ds::SplitTag::Test);
  CHECK(views.size() == 3);
  for (const auto& v : views) {
    CHECK(v.ts.size() == 3);
    for (std::size_t i = 1; i < v.ts.size(); ++i) CHECK(v.ts[i] > v.ts[i - 1]);
    const Tensor x = ds::fetch_sample(d, v, 0);
    CHECK(x.shape() == std::vector<int>{32, 32});
  }
}
