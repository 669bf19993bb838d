#include <doctest.h>

#include <cmath>
#include <map>

#include "latentgeo/errors.hpp"
#include "latentgeo/gradcheck.hpp"
#include "latentgeo/iat.hpp"
#include "latentgeo/rng.hpp"

using namespace latentgeo;
namespace it = latentgeo::iat;
namespace md = latentgeo::models;

namespace {

md::VaeConfig small_vae(int d = 4) {
  md::VaeConfig cfg;
  cfg.image_size = 8;
  cfg.hidden = 12;
  cfg.latent_dim = d;
  cfg.init_seed = 5;
  return cfg;
}

data::Dataset small_image_dataset(std::uint64_t seed = 3) {
  data::Dataset d;
  d.kind = data::DatasetKind::Image;
  d.image = data::generate_image_dataset(2, 10, seed);
  d.image.image_size = 32;
  data::assign_split(d.image, data::default_split(10), 7);
  return d;
}

it::ImageTripletBatch random_triplets(const md::ImageVae& vae, int count, Rng& rng) {
  const int hw = vae.pixels();
  it::ImageTripletBatch b{Tensor({count, hw}), Tensor({count, hw}), Tensor({count, hw}),
                          Tensor({count, 1})};
  for (std::int64_t i = 0; i < b.x1.numel(); ++i) {
    b.x1.at(i) = rng.uniform(-1.0, 1.0);
    b.x2.at(i) = rng.uniform(-1.0, 1.0);
    b.x3.at(i) = rng.uniform(-1.0, 1.0);
  }
  for (int r = 0; r < count; ++r) b.lambda.at(r, 0) = rng.uniform(0.1, 0.9);
  return b;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (it::Variant v : {it::Variant::Latent, it::Variant::Decode, it::Variant::MlpLatent,
                        it::Variant::MlpDecode}) {
    CHECK(it::variant_from_string(it::to_string(v)) == v);
  }
  CHECK(it::to_string(it::Variant::MlpDecode) == "mlp_decode");
  CHECK_THROWS_AS(it::variant_from_string("bogus"), ConfigError);
}

TEST_CASE("latent loss: zero on the interpolant, nonnegative in general") {
  md::ImageVae vae(small_vae());
  Rng rng(11);

  // If x2 == x1 and lambda ~ 0, the encoded z2 sits on the interpolant.
  const int hw = vae.pixels();
  it::ImageTripletBatch b{Tensor({1, hw}), Tensor({1, hw}), Tensor({1, hw}), Tensor({1, 1})};
  for (int i = 0; i < hw; ++i) {
    b.x1.at(i) = rng.uniform(-1.0, 1.0);
    b.x3.at(i) = rng.uniform(-1.0, 1.0);
    b.x2.at(i) = b.x1.at(i);
  }
  b.lambda.at(0, 0) = 1e-12;
  CHECK(it::image_iat_loss(vae, it::Variant::Latent, interp::Kind::Linear, b) ==
        doctest::Approx(0.0).epsilon(1e-9));

  const it::ImageTripletBatch r = random_triplets(vae, 5, rng);
  for (interp::Kind k : interp::all_kinds()) {
    CHECK(it::image_iat_loss(vae, it::Variant::Latent, k, r) >= 0.0);
  }
}

TEST_CASE("decode loss decreases as the decoded image approaches x2") {
  // Probe along a line: x2 := decode(z_interp) + alpha * noise. The decode
  // loss must rise monotonically with |alpha|.
  md::ImageVae vae(small_vae());
  Rng rng(13);
  it::ImageTripletBatch b = random_triplets(vae, 1, rng);

  const auto z1 = vae.encode_map(Tensor({1, vae.pixels()}, b.x1.data()));
  const auto z3 = vae.encode_map(Tensor({1, vae.pixels()}, b.x3.data()));
  const auto zi = interp::norm_interp(z1, z3, b.lambda.at(0, 0));
  const Tensor xhat = vae.decode(zi);

  double prev = -1.0;
  for (double alpha : {0.0, 0.1, 0.2, 0.4}) {
    for (int i = 0; i < vae.pixels(); ++i) {
      b.x2.at(i) = xhat.at(i) + alpha * std::sin(0.7 * i);
    }
    const double loss = it::image_iat_loss(vae, it::Variant::Decode, interp::Kind::Norm, b);
    CHECK(loss > prev);
    prev = loss;
  }
  // perfect decode: loss at the likelihood floor (recon term zero)
  for (int i = 0; i < vae.pixels(); ++i) b.x2.at(i) = xhat.at(i);
  CHECK(it::image_iat_loss(vae, it::Variant::Decode, interp::Kind::Norm, b) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hand-set identity mlp reproduces the plain decode loss") {
  md::ImageVae vae(small_vae());
  const int d = vae.config().latent_dim;
  Rng init(1);
  it::InterpMlp::create_params(vae.params(), d, init);

  // W0 selects the third input block and adds a large positive shift so both
  // ReLU layers stay linear; the output layer subtracts the shift.
  const double c = 100.0;
  ParamStore& ps = vae.params();
  auto zero_out = [&](const char* name) {
    Tensor& t = ps.at(name);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.at(i) = 0.0;
  };
  for (const char* name : {"imlp.w0", "imlp.b0", "imlp.w1", "imlp.b1", "imlp.w2", "imlp.b2"}) zero_out(name);
  for (int i = 0; i < d; ++i) {
    ps.at("imlp.w0").at(2 * d + i, i) = 1.0;
    ps.at("imlp.b0").at(i) = c;
    ps.at("imlp.w1").at(i, i) = 1.0;
    ps.at("imlp.w2").at(i, i) = 1.0;
    ps.at("imlp.b2").at(i) = -c;
  }

  Rng rng(17);
  const it::ImageTripletBatch b = random_triplets(vae, 4, rng);
  const double plain = it::image_iat_loss(vae, it::Variant::Decode, interp::Kind::Norm, b);
  const double through_mlp = it::image_iat_loss(vae, it::Variant::MlpDecode, interp::Kind::Norm, b);
  CHECK(through_mlp == doctest::Approx(plain).epsilon(1e-9));
}

TEST_CASE("all four image variants pass the finite-difference gradient check") {
  Rng rng(23);
  for (it::Variant v : {it::Variant::Latent, it::Variant::Decode, it::Variant::MlpLatent,
                        it::Variant::MlpDecode}) {
    for (interp::Kind k : {interp::Kind::Norm, interp::Kind::Slerp}) {
      CAPTURE(it::to_string(v));
      CAPTURE(interp::to_string(k));
      md::ImageVae vae(small_vae());
      if (it::uses_mlp(v)) {
        Rng init(7);
        it::InterpMlp::create_params(vae.params(), vae.config().latent_dim, init);
      }
      const it::ImageTripletBatch b = random_triplets(vae, 2, rng);
      it::IatGraph ig = it::make_image_iat_graph(vae, v, k, 2);
      const Bindings inputs{{"x1", b.x1}, {"x2", b.x2}, {"x3", b.x3}, {"lambda", b.lambda}};
      ig.graph.forward(inputs, ig.loss);
      const NamedGrads analytic = ig.graph.backward(ig.loss);
      auto loss = [&]() {
        it::IatGraph fresh = it::make_image_iat_graph(vae, v, k, 2);
        return fresh.graph.forward_scalar(inputs, fresh.loss);
      };
      CHECK(fd_check_max_rel_error(loss, vae.params(), analytic) < 1e-4);
    }
  }
}

TEST_CASE("graph-domain iat variants pass the gradient check") {
  md::GvaeConfig cfg;
  cfg.n_nodes = 6;
  cfg.latent_dim = 4;
  cfg.gcn_hidden = 5;
  cfg.init_seed = 3;
  Rng rng(31);
  Tensor a1({6, 6}), a2({6, 6}), a3({6, 6});
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      a1.at(i, j) = rng.uniform() < 0.2;
      a2.at(i, j) = a1.at(i, j) == 1.0 || rng.uniform() < 0.1;
      a3.at(i, j) = a2.at(i, j) == 1.0 || rng.uniform() < 0.1;
    }
  }
  for (it::Variant v : {it::Variant::Latent, it::Variant::Decode, it::Variant::MlpLatent,
                        it::Variant::MlpDecode}) {
    CAPTURE(it::to_string(v));
    md::GraphVae gvae(cfg);
    if (it::uses_mlp(v)) {
      Rng init(7);
      it::InterpMlp::create_params(gvae.params(), 6 * 4, init);
    }
    Bindings inputs;
    inputs["ahat1"] = md::GraphVae::normalized_adjacency(a1);
    inputs["ahat3"] = md::GraphVae::normalized_adjacency(a3);
    inputs["lambda"] = Tensor({1, 1}, {0.4});
    if (v == it::Variant::Latent || v == it::Variant::MlpLatent) {
      inputs["ahat2"] = md::GraphVae::normalized_adjacency(a2);
    } else {
      inputs["a2"] = a2;
    }
    it::IatGraph ig = it::make_graph_iat_graph(gvae, v, interp::Kind::Slerp);
    ig.graph.forward(inputs, ig.loss);
    const NamedGrads analytic = ig.graph.backward(ig.loss);
    auto loss = [&]() {
      it::IatGraph fresh = it::make_graph_iat_graph(gvae, v, interp::Kind::Slerp);
      return fresh.graph.forward_scalar(inputs, fresh.loss);
    };
    CHECK(fd_check_max_rel_error(loss, gvae.params(), analytic) < 1e-4);
  }
}

TEST_CASE("joint loss composition") {
  md::ImageVae vae(small_vae());
  Rng rng(41);
  const it::ImageTripletBatch b = random_triplets(vae, 3, rng);
  Tensor xbatch({2, vae.pixels()});
  for (std::int64_t i = 0; i < xbatch.numel(); ++i) xbatch.at(i) = rng.uniform(-1.0, 1.0);

  const double elbo = vae.elbo(xbatch, 5).loss;
  const double iat = it::image_iat_loss(vae, it::Variant::Latent, interp::Kind::Norm, b);

  // lambda 0 is bit-identical to the plain ELBO path
  CHECK(it::joint_loss_image(vae, xbatch, it::Variant::Latent, interp::Kind::Norm, b, 0.0, 5) == elbo);
  // lambda 1 is the exact sum
  CHECK(it::joint_loss_image(vae, xbatch, it::Variant::Latent, interp::Kind::Norm, b, 1.0, 5) ==
        doctest::Approx(elbo + iat).epsilon(1e-12));
  // monotone in lambda for nonzero iat loss
  CHECK(iat > 0.0);
  double prev = elbo;
  for (double l : {0.5, 1.0, 2.0, 5.0}) {
    const double j = it::joint_loss_image(vae, xbatch, it::Variant::Latent, interp::Kind::Norm, b, l, 5);
    CHECK(j > prev);
    prev = j;
  }
  CHECK_THROWS_AS(it::joint_loss_image(vae, xbatch, it::Variant::Latent, interp::Kind::Norm, b, -1.0, 5),
                  ConfigError);
}

TEST_CASE("triplet sampling: ordering, same-object, reproducibility") {
  const data::Dataset ds = small_image_dataset();
  const auto pool = data::split_view(ds, data::SplitTag::Train);
  Rng rng(51);
  const auto batch = it::sample_triplet_batch(pool, 100, rng);
  CHECK(batch.size() == 100);
  for (const it::Triplet& t : batch) {
    CHECK(t.p1 < t.p2);
    CHECK(t.p2 < t.p3);
    CHECK(t.seq >= 0);
    CHECK(t.seq < static_cast<int>(pool.size()));
    const auto& seq = pool[static_cast<std::size_t>(t.seq)];
    CHECK(seq.ts[static_cast<std::size_t>(t.p1)] < seq.ts[static_cast<std::size_t>(t.p2)]);
    CHECK(seq.ts[static_cast<std::size_t>(t.p2)] < seq.ts[static_cast<std::size_t>(t.p3)]);
  }
  Rng rng2(51);
  const auto batch2 = it::sample_triplet_batch(pool, 100, rng2);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i].seq == batch2[i].seq);
    CHECK(batch[i].p1 == batch2[i].p1);
    CHECK(batch[i].p2 == batch2[i].p2);
    CHECK(batch[i].p3 == batch2[i].p3);
  }
}

TEST_CASE("triplet middle element matches the enumerated distribution") {
  // One 5-point sequence: enumerate all C(5,3) combinations as the oracle.
  data::SequenceView seq;
  seq.object_id = 0;
  seq.ts = {0.0, 1.0, 2.0, 3.0, 4.0};
  seq.sample_index = {0, 1, 2, 3, 4};
  std::vector<data::SequenceView> pool{seq};

  std::map<int, int> expected_counts;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      for (int k = j + 1; k < 5; ++k) expected_counts[j] += 1;
  const double total_combos = 10.0;

  Rng rng(61);
  const int n = 100000;
  std::map<int, int> observed;
  const auto batch = it::sample_triplet_batch(pool, n, rng);
  for (const it::Triplet& t : batch) observed[t.p2] += 1;

  double chi2 = 0.0;
  for (const auto& [mid, count] : expected_counts) {
    const double expect = n * count / total_combos;
    const double diff = observed[mid] - expect;
    chi2 += diff * diff / expect;
  }
  // df = 2; p > 0.01 means chi2 below the 9.21 critical value
  CHECK(chi2 < 9.21);
}

TEST_CASE("labeled budget restriction") {
  const data::Dataset ds = small_image_dataset();
  const auto pool = data::split_view(ds, data::SplitTag::Train);
  CHECK_THROWS_AS(it::restrict_budget(pool, 2, 1), ConfigError);

  const auto limited = it::restrict_budget(pool, 3, 9);
  for (const auto& seq : limited) {
    CHECK(seq.ts.size() == 3);
    for (std::size_t i = 1; i < seq.ts.size(); ++i) CHECK(seq.ts[i] > seq.ts[i - 1]);
  }

  // budget >= size keeps every sample and consumes no randomness
  const auto full = it::restrict_budget(pool, 1000, 9);
  for (std::size_t s = 0; s < pool.size(); ++s) {
    CHECK(full[s].ts == pool[s].ts);
    CHECK(full[s].sample_index == pool[s].sample_index);
  }
}

TEST_CASE("sampler rejects pools without valid sequences") {
  data::SequenceView tiny;
  tiny.object_id = 0;
  tiny.ts = {0.0, 1.0};
  tiny.sample_index = {0, 1};
  std::vector<data::SequenceView> pool{tiny};
  Rng rng(71);
  CHECK_THROWS_AS(it::sample_triplet_batch(pool, 5, rng), ConfigError);
}
