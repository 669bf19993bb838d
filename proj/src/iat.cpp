#include "latentgeo/iat.hpp"

#include <algorithm>
#include <cmath>

#include "latentgeo/errors.hpp"

namespace latentgeo::iat {

using V = Graph::Value;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Latent: return "latent";
    case Variant::Decode: return "decode";
    case Variant::MlpLatent: return "mlp_latent";
    case Variant::MlpDecode: return "mlp_decode";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "latent") return Variant::Latent;
  if (s == "decode") return Variant::Decode;
  if (s == "mlp_latent") return Variant::MlpLatent;
  if (s == "mlp_decode") return Variant::MlpDecode;
  throw ConfigError("unknown IAT variant: \"" + s + "\"");
}

bool uses_mlp(Variant v) { return v == Variant::MlpLatent || v == Variant::MlpDecode; }

namespace {

Tensor gaussian_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t k = 0; k < t.numel(); ++k) t.at(k) = std * rng.normal();
  return t;
}

}  // namespace

void InterpMlp::create_params(ParamStore& params, int latent_len, Rng& rng) {
  const int l = latent_len;
  params.create("imlp.w0", gaussian_init({3 * l, l}, 3 * l, rng));
  params.create("imlp.b0", Tensor({l}));
  params.create("imlp.w1", gaussian_init({l, l}, l, rng));
  params.create("imlp.b1", Tensor({l}));
  params.create("imlp.w2", gaussian_init({l, l}, l, rng));
  params.create("imlp.b2", Tensor({l}));
}

bool InterpMlp::params_present(const ParamStore& params) { return params.contains("imlp.w0"); }

V InterpMlp::build(Graph& g, V in) {
  auto layer = [&](V x, const char* w, const char* b) {
    V y = g.matmul(x, g.param(w));
    return g.add(y, g.broadcast(g.param(b), g.shape_of(y)));
  };
  V h0 = g.relu(layer(in, "imlp.w0", "imlp.b0"));
  V h1 = g.relu(layer(h0, "imlp.w1", "imlp.b1"));
  return layer(h1, "imlp.w2", "imlp.b2");
}

std::vector<double> MlpInterpolator::apply(const std::vector<double>& z1, const std::vector<double>& z3,
                                           const std::vector<double>& z_inter) const {
  if (!params) throw ConfigError("MlpInterpolator: no parameters attached");
  const int l = latent_len;
  if (static_cast<int>(z1.size()) != l || static_cast<int>(z3.size()) != l ||
      static_cast<int>(z_inter.size()) != l) {
    throw ShapeError("MlpInterpolator: latent length mismatch");
  }
  std::vector<double> in;
  in.reserve(static_cast<std::size_t>(3 * l));
  in.insert(in.end(), z1.begin(), z1.end());
  in.insert(in.end(), z3.begin(), z3.end());
  in.insert(in.end(), z_inter.begin(), z_inter.end());
  Graph g(params);
  V x = g.placeholder("in", {1, 3 * l});
  V out = InterpMlp::build(g, x);
  return g.forward({{"in", Tensor({1, 3 * l}, in)}}, out).data();
}

// ---------------------------------------------------------------------------
// Triplet sampling

namespace {

std::int64_t choose3(std::int64_t m) { return m < 3 ? 0 : m * (m - 1) * (m - 2) / 6; }

// Lexicographic unranking of the r-th 3-combination of [0, m).
Triplet unrank3(int seq, std::int64_t r, std::int64_t m) {
  int i = 0;
  while (true) {
    const std::int64_t block = choose3(m - i) - choose3(m - i - 1);  // combos starting at i
    if (r < block) break;
    r -= block;
    ++i;
  }
  int j = i + 1;
  while (true) {
    const std::int64_t block = m - j - 1;  // combos (i, j, *)
    if (r < block) break;
    r -= block;
    ++j;
  }
  const int k = j + 1 + static_cast<int>(r);
  return {seq, i, j, k};
}

}  // namespace

std::vector<Triplet> sample_triplet_batch(const std::vector<data::SequenceView>& pool, int n, Rng& rng) {
  std::vector<std::int64_t> cumulative;
  std::int64_t total = 0;
  for (const data::SequenceView& seq : pool) {
    total += choose3(static_cast<std::int64_t>(seq.ts.size()));
    cumulative.push_back(total);
  }
  if (total == 0) {
    throw ConfigError("sample_triplet_batch: no sequence has 3 or more usable samples");
  }
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const std::int64_t r = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(total)));
    const std::size_t seq = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    const std::int64_t base = seq == 0 ? 0 : cumulative[seq - 1];
    out.push_back(unrank3(static_cast<int>(seq), r - base,
                          static_cast<std::int64_t>(pool[seq].ts.size())));
  }
  return out;
}

std::vector<data::SequenceView> restrict_budget(const std::vector<data::SequenceView>& pool, int budget,
                                                std::uint64_t seed) {
  if (budget < 3) throw ConfigError("restrict_budget: budget must be >= 3");
  std::vector<data::SequenceView> out;
  for (const data::SequenceView& seq : pool) {
    const int m = static_cast<int>(seq.ts.size());
    if (budget >= m) {
      out.push_back(seq);  // whole sequence stays labeled; no randomness consumed
      continue;
    }
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(seq.object_id)));
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < budget; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(m - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(budget));
    std::sort(idx.begin(), idx.end());
    data::SequenceView v;
    v.object_id = seq.object_id;
    for (int i : idx) {
      v.ts.push_back(seq.ts[static_cast<std::size_t>(i)]);
      v.sample_index.push_back(seq.sample_index[static_cast<std::size_t>(i)]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss graphs

namespace {

// Mean over rows of the squared distance ||a - b||^2.
V mean_sq_dist(Graph& g, V a, V b) { return g.mean(g.row_sum(g.square(g.sub(a, b)))); }

V mlp_interpolant(Graph& g, V z1, V z3, V zint) {
  return InterpMlp::build(g, g.concat(g.concat(z1, z3), zint));
}

}  // namespace

IatGraph make_image_iat_graph(const models::ImageVae& vae, Variant v, interp::Kind kind, int batch) {
  IatGraph ig{Graph(&vae.params()), {}, v, kind, batch};
  Graph& g = ig.graph;
  const int hw = vae.pixels();
  V x1 = g.placeholder("x1", {batch, hw});
  V x2 = g.placeholder("x2", {batch, hw});
  V x3 = g.placeholder("x3", {batch, hw});
  V lambda = g.placeholder("lambda", {batch, 1});
  V z1 = vae.build_encoder_mu(g, x1);
  V z3 = vae.build_encoder_mu(g, x3);
  V zint = interp::interpolate_node(g, kind, z1, z3, lambda);
  if (uses_mlp(v)) zint = mlp_interpolant(g, z1, z3, zint);
  if (v == Variant::Latent || v == Variant::MlpLatent) {
    V z2 = vae.build_encoder_mu(g, x2);
    ig.loss = mean_sq_dist(g, z2, zint);
  } else {
    V xhat = vae.build_decoder(g, zint);
    ig.loss = vae.build_recon_nll(g, xhat, x2);
  }
  return ig;
}

IatGraph make_graph_iat_graph(const models::GraphVae& gvae, Variant v, interp::Kind kind) {
  IatGraph ig{Graph(&gvae.params()), {}, v, kind, 1};
  Graph& g = ig.graph;
  const int n = gvae.config().n_nodes;
  const int d = gvae.config().latent_dim;
  V ahat1 = g.placeholder("ahat1", {n, n});
  V ahat3 = g.placeholder("ahat3", {n, n});
  V lambda = g.placeholder("lambda", {1, 1});
  V z1 = g.reshape(gvae.build_encoder_mu(g, ahat1), {1, n * d});
  V z3 = g.reshape(gvae.build_encoder_mu(g, ahat3), {1, n * d});
  V zint = interp::interpolate_node(g, kind, z1, z3, lambda);
  if (uses_mlp(v)) zint = mlp_interpolant(g, z1, z3, zint);
  if (v == Variant::Latent || v == Variant::MlpLatent) {
    V ahat2 = g.placeholder("ahat2", {n, n});
    V z2 = g.reshape(gvae.build_encoder_mu(g, ahat2), {1, n * d});
    ig.loss = g.sum(g.row_sum(g.square(g.sub(z2, zint))));
  } else {
    V a2 = g.placeholder("a2", {n, n});
    V p = gvae.build_decoder(g, g.reshape(zint, {n, d}));
    ig.loss = gvae.build_recon_bce(g, p, a2);
  }
  return ig;
}

ImageTripletBatch materialize_image_triplets(const data::Dataset& ds,
                                             const std::vector<data::SequenceView>& pool,
                                             const std::vector<Triplet>& triplets) {
  if (ds.kind != data::DatasetKind::Image) throw ConfigError("materialize_image_triplets: not an image dataset");
  const int t = static_cast<int>(triplets.size());
  const int hw = ds.image.image_size * ds.image.image_size;
  ImageTripletBatch b{Tensor({t, hw}), Tensor({t, hw}), Tensor({t, hw}), Tensor({t, 1})};
  for (int i = 0; i < t; ++i) {
    const Triplet& tr = triplets[static_cast<std::size_t>(i)];
    const data::SequenceView& seq = pool[static_cast<std::size_t>(tr.seq)];
    const Tensor x1 = data::fetch_sample(ds, seq, tr.p1);
    const Tensor x2 = data::fetch_sample(ds, seq, tr.p2);
    const Tensor x3 = data::fetch_sample(ds, seq, tr.p3);
    for (int k = 0; k < hw; ++k) {
      b.x1.at(i, k) = x1.at(k);
      b.x2.at(i, k) = x2.at(k);
      b.x3.at(i, k) = x3.at(k);
    }
    b.lambda.at(i, 0) = interp::lambda_from_times(seq.ts[static_cast<std::size_t>(tr.p1)],
                                                  seq.ts[static_cast<std::size_t>(tr.p2)],
                                                  seq.ts[static_cast<std::size_t>(tr.p3)]);
  }
  return b;
}

double image_iat_loss(const models::ImageVae& vae, Variant v, interp::Kind kind,
                      const ImageTripletBatch& batch) {
  IatGraph ig = make_image_iat_graph(vae, v, kind, batch.x1.shape()[0]);
  return ig.graph.forward_scalar(
      {{"x1", batch.x1}, {"x2", batch.x2}, {"x3", batch.x3}, {"lambda", batch.lambda}}, ig.loss);
}

double graph_iat_loss(const models::GraphVae& gvae, Variant v, interp::Kind kind, const data::Dataset& ds,
                      const std::vector<data::SequenceView>& pool, const std::vector<Triplet>& triplets) {
  IatGraph ig = make_graph_iat_graph(gvae, v, kind);
  double total = 0.0;
  for (const Triplet& tr : triplets) {
    const data::SequenceView& seq = pool[static_cast<std::size_t>(tr.seq)];
    Bindings inputs;
    inputs["ahat1"] = models::GraphVae::normalized_adjacency(data::fetch_sample(ds, seq, tr.p1));
    inputs["ahat3"] = models::GraphVae::normalized_adjacency(data::fetch_sample(ds, seq, tr.p3));
    const double lambda = interp::lambda_from_times(seq.ts[static_cast<std::size_t>(tr.p1)],
                                                    seq.ts[static_cast<std::size_t>(tr.p2)],
                                                    seq.ts[static_cast<std::size_t>(tr.p3)]);
    inputs["lambda"] = Tensor({1, 1}, {lambda});
    const Tensor x2 = data::fetch_sample(ds, seq, tr.p2);
    if (v == Variant::Latent || v == Variant::MlpLatent) {
      inputs["ahat2"] = models::GraphVae::normalized_adjacency(x2);
    } else {
      inputs["a2"] = x2;
    }
    total += ig.graph.forward_scalar(inputs, ig.loss);
  }
  return total / static_cast<double>(triplets.size());
}

double joint_loss_image(const models::ImageVae& vae, const Tensor& xbatch, Variant v, interp::Kind kind,
                        const ImageTripletBatch& triplets, double lambda_iat, std::uint64_t noise_seed) {
  if (lambda_iat < 0.0) throw ConfigError("joint_loss: lambda_iat must be >= 0");
  const double elbo = vae.elbo(xbatch, noise_seed).loss;
  if (lambda_iat == 0.0) return elbo;
  return elbo + lambda_iat * image_iat_loss(vae, v, kind, triplets);
}

}  // namespace latentgeo::iat
