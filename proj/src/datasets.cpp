#include "latentgeo/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "latentgeo/errors.hpp"
#include "latentgeo/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace latentgeo::data {

namespace {

// Stream tags for deriving independent child seeds.
constexpr std::uint64_t kStyleTag = 0x5754594c45ULL;
constexpr std::uint64_t kAngleTag = 0x414e474c45ULL;
constexpr std::uint64_t kGraphTag = 0x475241ULL;

struct Point {
  double x, y;
};

bool point_in_polygon(const std::vector<Point>& poly, double x, double y) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > y) != (b.y > y)) {
      const double xint = (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
      if (x < xint) inside = !inside;
    }
  }
  return inside;
}

Point polygon_centroid(const std::vector<Point>& poly) {
  double area2 = 0.0, cx = 0.0, cy = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double cross = poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    area2 += cross;
    cx += (poly[j].x + poly[i].x) * cross;
    cy += (poly[j].y + poly[i].y) * cross;
  }
  return {cx / (3.0 * area2), cy / (3.0 * area2)};
}

struct Shape {
  std::vector<Point> poly;  // centroid at origin
  Point marker_center;
  double marker_radius;
};

Shape build_shape(std::uint64_t style_seed) {
  Rng rng(style_seed);
  const int nv = 6 + static_cast<int>(rng.uniform_int(5));  // 6..10 vertices
  std::vector<Point> poly(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    const double jitter = 0.35 * rng.uniform(-1.0, 1.0);
    const double theta = 2.0 * M_PI * (static_cast<double>(i) + jitter) / nv;
    const double radius = rng.uniform(0.35, 0.95);
    poly[static_cast<std::size_t>(i)] = {radius * std::cos(theta), radius * std::sin(theta)};
  }
  const Point c = polygon_centroid(poly);
  for (Point& p : poly) {
    p.x -= c.x;
    p.y -= c.y;
  }
  // Off-center disc; breaks any accidental symmetry so the angle stays
  // identifiable over the full [0, 180] range.
  const double dir = rng.uniform(0.0, 2.0 * M_PI);
  const double dist = rng.uniform(0.45, 0.70);
  const double mr = rng.uniform(0.10, 0.16);
  return {std::move(poly), {dist * std::cos(dir), dist * std::sin(dir)}, mr};
}

}  // namespace

std::string to_string(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "?";
}

SplitTag split_from_string(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  throw ConfigError("unknown split tag: \"" + s + "\"");
}

std::string to_string(DatasetKind k) { return k == DatasetKind::Image ? "image" : "graph"; }

SplitSpec default_split(int n) {
  SplitSpec s;
  s.train = n / 2;
  s.val = n / 4;
  s.test = n - s.train - s.val;
  return s;
}

Tensor render_shape(std::uint64_t style_seed, double angle_degrees, int size) {
  if (!(angle_degrees >= 0.0 && angle_degrees <= 180.0)) {
    throw ConfigError("render_shape: angle " + std::to_string(angle_degrees) + " outside [0, 180]");
  }
  if (size < 16) throw ConfigError("render_shape: size must be >= 16");

  const Shape shape = build_shape(style_seed);
  const double a = angle_degrees * M_PI / 180.0;
  const double ca = std::cos(-a), sa = std::sin(-a);  // rotate sample points backwards
  const double extent = 1.2;                          // world half-width
  constexpr int kSub = 4;

  Tensor img({size, size});
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double wx = ((px + (sx + 0.5) / kSub) / size * 2.0 - 1.0) * extent;
          const double wy = ((py + (sy + 0.5) / kSub) / size * 2.0 - 1.0) * extent;
          const double rx = ca * wx - sa * wy;
          const double ry = sa * wx + ca * wy;
          const double mx = rx - shape.marker_center.x;
          const double my = ry - shape.marker_center.y;
          if (point_in_polygon(shape.poly, rx, ry) ||
              mx * mx + my * my < shape.marker_radius * shape.marker_radius) {
            ++hits;
          }
        }
      }
      img.at(py, px) = 2.0 * hits / (kSub * kSub) - 1.0;
    }
  }
  return img;
}

ImageDataset generate_image_dataset(int n_objects, int n_angles, std::uint64_t master_seed) {
  if (n_angles < 9) throw ConfigError("generate_image_dataset: need at least 9 angles per object");
  if (n_objects < 1) throw ConfigError("generate_image_dataset: need at least one object");
  ImageDataset ds;
  ds.master_seed = master_seed;
  for (int obj = 0; obj < n_objects; ++obj) {
    ImageSequence seq;
    seq.object_id = obj;
    seq.style_seed = Rng::mix(Rng::mix(master_seed, kStyleTag), static_cast<std::uint64_t>(obj));
    Rng angle_rng(Rng::mix(Rng::mix(master_seed, kAngleTag), static_cast<std::uint64_t>(obj)));
    std::vector<double> angles;
    angles.reserve(static_cast<std::size_t>(n_angles));
    while (static_cast<int>(angles.size()) < n_angles) {
      const double t = angle_rng.uniform(0.0, 180.0);
      if (std::find(angles.begin(), angles.end(), t) == angles.end()) angles.push_back(t);
    }
    std::sort(angles.begin(), angles.end());
    for (double t : angles) {
      seq.samples.push_back({t, render_shape(seq.style_seed, t, ds.image_size), SplitTag::Train});
    }
    ds.objects.push_back(std::move(seq));
  }
  return ds;
}

GraphDataset generate_citation_graph(int n_nodes, int t_max, std::uint64_t master_seed,
                                     double attach_exponent) {
  if (n_nodes < 10) throw ConfigError("generate_citation_graph: need at least 10 nodes");
  if (t_max < 9) throw ConfigError("generate_citation_graph: need at least 9 stamps");
  GraphDataset ds;
  ds.master_seed = master_seed;
  ds.n_nodes = n_nodes;
  ds.t_max = t_max;
  ds.attach_exponent = attach_exponent;
  ds.stamp_split.assign(static_cast<std::size_t>(t_max), SplitTag::Train);

  // Birth stamps spread evenly over [1, t_max]; node 0 (the core) predates
  // the first stamp.
  auto birth = [&](int i) {
    return 1 + static_cast<int>((static_cast<std::int64_t>(i - 1) * t_max) / (n_nodes - 1));
  };

  Rng rng(Rng::mix(master_seed, kGraphTag));
  std::vector<int> in_degree(static_cast<std::size_t>(n_nodes), 0);
  for (int i = 1; i < n_nodes; ++i) {
    const int t = birth(i);
    ds.edges.push_back({i, 0, t});
    in_degree[0] += 1;
    const int available = i - 1;  // non-core earlier nodes
    int k = 1 + static_cast<int>(rng.poisson(2.0));
    k = std::min(k, available);
    std::vector<int> chosen;
    for (int pick = 0; pick < k; ++pick) {
      double total = 0.0;
      for (int j = 1; j < i; ++j) {
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
        total += std::pow(in_degree[static_cast<std::size_t>(j)] + 1.0, attach_exponent);
      }
      double target = rng.uniform() * total;
      int sel = -1;
      for (int j = 1; j < i; ++j) {
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
        target -= std::pow(in_degree[static_cast<std::size_t>(j)] + 1.0, attach_exponent);
        if (target <= 0.0) {
          sel = j;
          break;
        }
      }
      if (sel < 0) sel = i - 1;  // numeric edge of the cumulative scan
      chosen.push_back(sel);
      ds.edges.push_back({i, sel, t});
      in_degree[static_cast<std::size_t>(sel)] += 1;
    }
  }
  return ds;
}

Tensor GraphDataset::snapshot(int t) const {
  Tensor a({n_nodes, n_nodes});
  for (const GraphEdge& e : edges) {
    if (e.t_birth <= t) a.at(e.src, e.dst) = 1.0;
  }
  return a;
}

namespace {

std::vector<SplitTag> random_partition(int n, const SplitSpec& spec, Rng& rng) {
  if (spec.total() != n) {
    throw ConfigError("split: proportions " + std::to_string(spec.train) + "/" + std::to_string(spec.val) +
                      "/" + std::to_string(spec.test) + " do not sum to sequence length " + std::to_string(n));
  }
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<SplitTag> tags(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SplitTag tag = i < spec.train ? SplitTag::Train : (i < spec.train + spec.val ? SplitTag::Val : SplitTag::Test);
    tags[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = tag;
  }
  return tags;
}

}  // namespace

void assign_split(ImageDataset& ds, const SplitSpec& spec, std::uint64_t seed) {
  for (ImageSequence& seq : ds.objects) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(seq.object_id)));
    const auto tags = random_partition(static_cast<int>(seq.samples.size()), spec, rng);
    for (std::size_t i = 0; i < seq.samples.size(); ++i) seq.samples[i].split = tags[i];
  }
}

void assign_split(GraphDataset& ds, const SplitSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ds.stamp_split = random_partition(ds.t_max, spec, rng);
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

  json manifest;
  if (ds.kind == DatasetKind::Image) {
    manifest["kind"] = "image";
    manifest["master_seed"] = ds.image.master_seed;
    manifest["image_size"] = ds.image.image_size;
    fs::create_directories(fs::path(dir) / "images", ec);
    json objects = json::array();
    for (const ImageSequence& seq : ds.image.objects) {
      json samples = json::array();
      for (std::size_t i = 0; i < seq.samples.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "images/obj%03d_s%03d.lgt", seq.object_id, static_cast<int>(i));
        save_lgt1((fs::path(dir) / name).string(), seq.samples[i].image);
        samples.push_back({{"t", seq.samples[i].t},
                           {"file", std::string(name)},
                           {"split", to_string(seq.samples[i].split)}});
      }
      objects.push_back(
          {{"id", seq.object_id}, {"style_seed", seq.style_seed}, {"samples", std::move(samples)}});
    }
    manifest["objects"] = std::move(objects);
  } else {
    manifest["kind"] = "graph";
    manifest["master_seed"] = ds.graph.master_seed;
    manifest["n_nodes"] = ds.graph.n_nodes;
    manifest["t_max"] = ds.graph.t_max;
    manifest["attach_exponent"] = ds.graph.attach_exponent;
    json splits = json::array();
    for (SplitTag t : ds.graph.stamp_split) splits.push_back(to_string(t));
    manifest["stamp_split"] = std::move(splits);
    std::ofstream csv(fs::path(dir) / "edges.csv");
    if (!csv) throw IoError("cannot write " + (fs::path(dir) / "edges.csv").string());
    csv << "src,dst,t_birth\n";
    for (const GraphEdge& e : ds.graph.edges) csv << e.src << "," << e.dst << "," << e.t_birth << "\n";
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write " + (fs::path(dir) / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("cannot open " + (fs::path(dir) / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest.json in " + dir + ": " + e.what());
  }

  Dataset ds;
  const std::string kind = manifest.at("kind").get<std::string>();
  if (kind == "image") {
    ds.kind = DatasetKind::Image;
    ds.image.master_seed = manifest.at("master_seed").get<std::uint64_t>();
    ds.image.image_size = manifest.at("image_size").get<int>();
    for (const json& obj : manifest.at("objects")) {
      ImageSequence seq;
      seq.object_id = obj.at("id").get<int>();
      seq.style_seed = obj.at("style_seed").get<std::uint64_t>();
      for (const json& s : obj.at("samples")) {
        ImageSample sample;
        sample.t = s.at("t").get<double>();
        sample.split = split_from_string(s.at("split").get<std::string>());
        sample.image = load_lgt1((fs::path(dir) / s.at("file").get<std::string>()).string());
        seq.samples.push_back(std::move(sample));
      }
      ds.image.objects.push_back(std::move(seq));
    }
  } else if (kind == "graph") {
    ds.kind = DatasetKind::Graph;
    ds.graph.master_seed = manifest.at("master_seed").get<std::uint64_t>();
    ds.graph.n_nodes = manifest.at("n_nodes").get<int>();
    ds.graph.t_max = manifest.at("t_max").get<int>();
    ds.graph.attach_exponent = manifest.at("attach_exponent").get<double>();
    for (const json& s : manifest.at("stamp_split")) {
      ds.graph.stamp_split.push_back(split_from_string(s.get<std::string>()));
    }
    std::ifstream csv(fs::path(dir) / "edges.csv");
    if (!csv) throw IoError("cannot open " + (fs::path(dir) / "edges.csv").string());
    std::string line;
    std::getline(csv, line);
    if (line != "src,dst,t_birth") throw IoError("edges.csv: unexpected header \"" + line + "\"");
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      GraphEdge e;
      if (std::sscanf(line.c_str(), "%d,%d,%d", &e.src, &e.dst, &e.t_birth) != 3) {
        throw IoError("edges.csv: malformed row \"" + line + "\"");
      }
      ds.graph.edges.push_back(e);
    }
  } else {
    throw IoError("manifest.json: unknown dataset kind \"" + kind + "\"");
  }
  return ds;
}

std::vector<SequenceView> split_view(const Dataset& ds, SplitTag tag) {
  std::vector<SequenceView> views;
  if (ds.kind == DatasetKind::Image) {
    for (const ImageSequence& seq : ds.image.objects) {
      SequenceView v;
      v.object_id = seq.object_id;
      for (std::size_t i = 0; i < seq.samples.size(); ++i) {
        if (seq.samples[i].split == tag) {
          v.ts.push_back(seq.samples[i].t);
          v.sample_index.push_back(static_cast<int>(i));
        }
      }
      if (!v.ts.empty()) views.push_back(std::move(v));
    }
  } else {
    SequenceView v;
    v.object_id = 0;
    for (int t = 1; t <= ds.graph.t_max; ++t) {
      if (ds.graph.stamp_split[static_cast<std::size_t>(t - 1)] == tag) {
        v.ts.push_back(static_cast<double>(t));
        v.sample_index.push_back(t);
      }
    }
    if (!v.ts.empty()) views.push_back(std::move(v));
  }
  return views;
}

Tensor fetch_sample(const Dataset& ds, const SequenceView& seq, int pos) {
  const int idx = seq.sample_index[static_cast<std::size_t>(pos)];
  if (ds.kind == DatasetKind::Image) {
    return ds.image.objects[static_cast<std::size_t>(seq.object_id)].samples[static_cast<std::size_t>(idx)].image;
  }
  return ds.graph.snapshot(idx);
}

}  // namespace latentgeo::data
