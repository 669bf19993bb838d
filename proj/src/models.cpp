#include "latentgeo/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "latentgeo/errors.hpp"

using nlohmann::json;

namespace latentgeo::models {

namespace {

constexpr double kLogvarMin = -10.0;
constexpr double kLogvarMax = 10.0;
constexpr double kProbEps = 1e-7;

Tensor gaussian_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t k = 0; k < t.numel(); ++k) t.at(k) = std * rng.normal();
  return t;
}

using V = Graph::Value;

// z = mu + exp(0.5 logvar) * eps
V reparam_node(Graph& g, V mu, V logvar, V eps) {
  V half = g.constant(Tensor::full(g.shape_of(logvar), 0.5));
  V sigma = g.exp(g.mul(half, logvar));
  return g.add(mu, g.mul(sigma, eps));
}

// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar) over the given rows; returns
// [B,1] of per-row KL values.
V kl_rows_node(Graph& g, V mu, V logvar) {
  const auto& s = g.shape_of(mu);
  V one = g.constant(Tensor::full(s, 1.0));
  V half = g.constant(Tensor::full({s[0], 1}, 0.5));
  V inner = g.sub(g.sub(g.add(g.square(mu), g.exp(logvar)), one), logvar);
  return g.mul(half, g.row_sum(inner));
}

V linear(Graph& g, V x, V w, V b) {
  V y = g.matmul(x, w);
  return g.add(y, g.broadcast(b, g.shape_of(y)));
}

}  // namespace

Tensor reparameterize(const Posterior& p, std::uint64_t seed) {
  if (!p.mu.same_shape(p.logvar)) {
    throw ShapeError("reparameterize: mu " + p.mu.shape_str() + " vs logvar " + p.logvar.shape_str());
  }
  Rng rng(seed);
  Tensor z(p.mu.shape());
  for (std::int64_t k = 0; k < z.numel(); ++k) {
    const double lv = std::clamp(p.logvar.at(k), kLogvarMin, kLogvarMax);
    z.at(k) = p.mu.at(k) + std::exp(0.5 * lv) * rng.normal();
  }
  return z;
}

// ---------------------------------------------------------------------------
// ImageVae

ImageVae::ImageVae(const VaeConfig& cfg) : cfg_(cfg) {
  if (cfg_.latent_dim < 1) throw ConfigError("vae: latent_dim must be positive");
  if (cfg_.rank < 0 || cfg_.rank > std::min(cfg_.hidden, cfg_.latent_dim)) {
    throw ConfigError("vae: rank " + std::to_string(cfg_.rank) + " outside [0, min(hidden, latent_dim)]");
  }
  const int hw = pixels();
  const int h = cfg_.hidden;
  const int d = cfg_.latent_dim;
  Rng rng(cfg_.init_seed);
  params_.create("enc.w0", gaussian_init({hw, h}, hw, rng));
  params_.create("enc.b0", Tensor({h}));
  params_.create("enc.w1", gaussian_init({h, h}, h, rng));
  params_.create("enc.b1", Tensor({h}));
  if (cfg_.rank > 0) {
    params_.create("mean.w1", gaussian_init({h, cfg_.rank}, h, rng));
    params_.create("mean.w2", gaussian_init({cfg_.rank, d}, cfg_.rank, rng));
  } else {
    params_.create("mean.w", gaussian_init({h, d}, h, rng));
  }
  params_.create("logvar.w", gaussian_init({h, d}, h, rng));
  params_.create("logvar.b", Tensor({d}));
  params_.create("dec.w0", gaussian_init({d, h}, d, rng));
  params_.create("dec.b0", Tensor({h}));
  params_.create("dec.w1", gaussian_init({h, h}, h, rng));
  params_.create("dec.b1", Tensor({h}));
  params_.create("dec.w2", gaussian_init({h, hw}, h, rng));
  params_.create("dec.b2", Tensor({hw}));
}

V ImageVae::build_trunk(Graph& g, V x) const {
  V h0 = g.leaky_relu(linear(g, x, g.param("enc.w0"), g.param("enc.b0")));
  return g.leaky_relu(linear(g, h0, g.param("enc.w1"), g.param("enc.b1")));
}

V ImageVae::build_encoder_mu(Graph& g, V x) const {
  V h = build_trunk(g, x);
  if (cfg_.rank > 0) return g.matmul(g.matmul(h, g.param("mean.w1")), g.param("mean.w2"));
  return g.matmul(h, g.param("mean.w"));
}

V ImageVae::build_encoder_logvar(Graph& g, V x) const {
  V h = build_trunk(g, x);
  return g.clamp(linear(g, h, g.param("logvar.w"), g.param("logvar.b")), kLogvarMin, kLogvarMax);
}

V ImageVae::build_decoder(Graph& g, V z) const {
  V d0 = g.leaky_relu(linear(g, z, g.param("dec.w0"), g.param("dec.b0")));
  V d1 = g.leaky_relu(linear(g, d0, g.param("dec.w1"), g.param("dec.b1")));
  return g.tanh(linear(g, d1, g.param("dec.w2"), g.param("dec.b2")));
}

V ImageVae::build_recon_nll(Graph& g, V xhat, V x) const {
  const auto& s = g.shape_of(x);
  const double scale = 0.5 / (cfg_.sigma_x * cfg_.sigma_x);
  V sq = g.square(g.sub(x, xhat));
  V rows = g.row_sum(sq);
  V c = g.constant(Tensor::full({s[0], 1}, scale));
  return g.mean(g.mul(c, rows));
}

LossGraph ImageVae::make_elbo_graph(int batch) const {
  LossGraph lg{Graph(&params_), {}, {}, {}};
  Graph& g = lg.graph;
  V x = g.placeholder("x", {batch, pixels()});
  V eps = g.placeholder("eps", {batch, cfg_.latent_dim});
  V mu = build_encoder_mu(g, x);
  V logvar = build_encoder_logvar(g, x);
  V z = reparam_node(g, mu, logvar, eps);
  V xhat = build_decoder(g, z);
  lg.recon = build_recon_nll(g, xhat, x);
  lg.kl = g.mean(kl_rows_node(g, mu, logvar));
  lg.loss = g.add(lg.recon, lg.kl);
  return lg;
}

namespace {

Tensor as_batch_rows(const Tensor& x, int pixels) {
  if (x.rank() == 2 && x.numel() == pixels && x.shape()[0] != 1) {
    return Tensor({1, pixels}, x.data());  // single H x W image
  }
  if (x.rank() == 1 && x.numel() == pixels) return Tensor({1, pixels}, x.data());
  if (x.rank() == 2 && x.shape()[1] == pixels) return x;
  throw ShapeError("vae: input shape " + x.shape_str() + " does not match " + std::to_string(pixels) +
                   " pixels");
}

}  // namespace

Posterior ImageVae::encode(const Tensor& x) const {
  const Tensor rows = as_batch_rows(x, pixels());
  Graph g(&params_);
  V xv = g.placeholder("x", rows.shape());
  V mu = build_encoder_mu(g, xv);
  V logvar = build_encoder_logvar(g, xv);
  g.forward({{"x", rows}}, logvar);
  return {g.value_of(mu), g.value_of(logvar)};
}

Vec ImageVae::encode_map(const Tensor& x) const {
  const Posterior p = encode(x);
  if (p.mu.shape()[0] != 1) throw ShapeError("encode_map: expects a single image");
  return p.mu.data();
}

Tensor ImageVae::decode(const Vec& z) const {
  if (static_cast<int>(z.size()) != cfg_.latent_dim) {
    throw ShapeError("decode: latent dimension " + std::to_string(z.size()) + ", model expects " +
                     std::to_string(cfg_.latent_dim));
  }
  Graph g(&params_);
  V zv = g.placeholder("z", {1, cfg_.latent_dim});
  V xhat = build_decoder(g, zv);
  const Tensor& out = g.forward({{"z", Tensor({1, cfg_.latent_dim}, z)}}, xhat);
  return Tensor({cfg_.image_size, cfg_.image_size}, out.data());
}

ElboParts ImageVae::elbo(const Tensor& x, std::uint64_t noise_seed) const {
  const Tensor rows = as_batch_rows(x, pixels());
  LossGraph lg = make_elbo_graph(rows.shape()[0]);
  Rng rng(noise_seed);
  Tensor eps({rows.shape()[0], cfg_.latent_dim});
  for (std::int64_t k = 0; k < eps.numel(); ++k) eps.at(k) = rng.normal();
  lg.graph.forward({{"x", rows}, {"eps", eps}}, lg.loss);
  return {lg.graph.value_of(lg.loss).at(0), lg.graph.value_of(lg.recon).at(0), lg.graph.value_of(lg.kl).at(0)};
}

json ImageVae::manifest() const {
  return json{{"model", "image_vae"},
              {"image_size", cfg_.image_size},
              {"latent_dim", cfg_.latent_dim},
              {"hidden", cfg_.hidden},
              {"rank", cfg_.rank},
              {"sigma_x", cfg_.sigma_x},
              {"init_seed", cfg_.init_seed}};
}

VaeConfig ImageVae::config_from_manifest(const json& m) {
  VaeConfig cfg;
  cfg.image_size = m.at("image_size").get<int>();
  cfg.latent_dim = m.at("latent_dim").get<int>();
  cfg.hidden = m.at("hidden").get<int>();
  cfg.rank = m.at("rank").get<int>();
  cfg.sigma_x = m.at("sigma_x").get<double>();
  cfg.init_seed = m.at("init_seed").get<std::uint64_t>();
  return cfg;
}

// ---------------------------------------------------------------------------
// GraphVae

GraphVae::GraphVae(const GvaeConfig& cfg) : cfg_(cfg) {
  if (cfg_.latent_dim < 2 || cfg_.latent_dim % 2 != 0) {
    throw ConfigError("gvae: latent_dim must be even and >= 2, got " + std::to_string(cfg_.latent_dim));
  }
  if (cfg_.rank < 0 || cfg_.rank > cfg_.latent_dim) {
    throw ConfigError("gvae: rank outside [0, latent_dim]");
  }
  const int n = cfg_.n_nodes;
  const int h = cfg_.gcn_hidden;
  const int d = cfg_.latent_dim;
  Rng rng(cfg_.init_seed);
  params_.create("gcn.w0", gaussian_init({n, h}, n, rng));
  params_.create("gcn.wmu", gaussian_init({h, d}, h, rng));
  params_.create("gcn.wsig", gaussian_init({h, d}, h, rng));
  params_.create("encmu.w0", gaussian_init({d, d}, d, rng));
  params_.create("encmu.b0", Tensor({d}));
  if (cfg_.rank > 0) {
    params_.create("encmu.w1a", gaussian_init({d, cfg_.rank}, d, rng));
    params_.create("encmu.w1b", gaussian_init({cfg_.rank, d}, cfg_.rank, rng));
  } else {
    params_.create("encmu.w1", gaussian_init({d, d}, d, rng));
  }
  params_.create("dec.w0", gaussian_init({d, d}, d, rng));
  params_.create("dec.b0", Tensor({d}));
  params_.create("dec.w1", gaussian_init({d, d}, d, rng));
  params_.create("dec.b1", Tensor({d}));
  params_.create("dec.bias", Tensor({1}));
}

Tensor GraphVae::normalized_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.shape()[0] != a.shape()[1]) {
    throw ShapeError("normalized_adjacency: adjacency not square, " + a.shape_str());
  }
  const int n = a.shape()[0];
  Tensor tilde({n, n});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) tilde.at(i, j) = a.at(i, j) + a.at(j, i);
    tilde.at(i, i) += 1.0;
  }
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += tilde.at(i, j);
    inv_sqrt_deg[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      tilde.at(i, j) *= inv_sqrt_deg[static_cast<std::size_t>(i)] * inv_sqrt_deg[static_cast<std::size_t>(j)];
    }
  }
  return tilde;
}

V GraphVae::build_encoder_mu(Graph& g, V ahat) const {
  // One-hot features make the first layer Ahat * W0.
  V h = g.relu(g.matmul(ahat, g.param("gcn.w0")));
  V emu = g.matmul(g.matmul(ahat, h), g.param("gcn.wmu"));
  V m0 = g.relu(linear(g, emu, g.param("encmu.w0"), g.param("encmu.b0")));
  if (cfg_.rank > 0) return g.matmul(g.matmul(m0, g.param("encmu.w1a")), g.param("encmu.w1b"));
  return g.matmul(m0, g.param("encmu.w1"));
}

V GraphVae::build_encoder_logvar(Graph& g, V ahat) const {
  V h = g.relu(g.matmul(ahat, g.param("gcn.w0")));
  V esig = g.matmul(g.matmul(ahat, h), g.param("gcn.wsig"));
  return g.clamp(esig, kLogvarMin, kLogvarMax);
}

V GraphVae::build_decoder(Graph& g, V z) const {
  const int d = cfg_.latent_dim;
  V d0 = g.relu(linear(g, z, g.param("dec.w0"), g.param("dec.b0")));
  V zp = linear(g, d0, g.param("dec.w1"), g.param("dec.b1"));
  V z1 = g.slice_cols(zp, 0, d / 2);
  V z2 = g.slice_cols(zp, d / 2, d / 2);
  V logits = g.matmul(z1, g.transpose(z2));
  V bias = g.broadcast(g.param("dec.bias"), g.shape_of(logits));
  return g.sigmoid(g.add(logits, bias));
}

V GraphVae::build_recon_bce(Graph& g, V p, V a) const {
  const auto& s = g.shape_of(p);
  V pc = g.clamp(p, kProbEps, 1.0 - kProbEps);
  V one = g.constant(Tensor::full(s, 1.0));
  V pos = g.mul(a, g.log(pc));
  V neg = g.mul(g.sub(one, a), g.log(g.sub(one, pc)));
  V zero = g.constant(Tensor::full({1}, 0.0));
  return g.sub(zero, g.sum(g.add(pos, neg)));
}

LossGraph GraphVae::make_elbo_graph() const {
  const int n = cfg_.n_nodes;
  LossGraph lg{Graph(&params_), {}, {}, {}};
  Graph& g = lg.graph;
  V ahat = g.placeholder("ahat", {n, n});
  V a = g.placeholder("a", {n, n});
  V eps = g.placeholder("eps", {n, cfg_.latent_dim});
  V mu = build_encoder_mu(g, ahat);
  V logvar = build_encoder_logvar(g, ahat);
  V z = reparam_node(g, mu, logvar, eps);
  V p = build_decoder(g, z);
  lg.recon = build_recon_bce(g, p, a);
  lg.kl = g.sum(kl_rows_node(g, mu, logvar));
  lg.loss = g.add(lg.recon, lg.kl);
  return lg;
}

std::pair<Tensor, Tensor> GraphVae::gcn_forward(const Tensor& a) const {
  const Tensor ahat = normalized_adjacency(a);
  Graph g(&params_);
  V av = g.placeholder("ahat", ahat.shape());
  V h = g.relu(g.matmul(av, g.param("gcn.w0")));
  V emu = g.matmul(g.matmul(av, h), g.param("gcn.wmu"));
  V esig = g.matmul(g.matmul(av, h), g.param("gcn.wsig"));
  g.forward({{"ahat", ahat}}, esig);
  return {g.value_of(emu), g.value_of(esig)};
}

Posterior GraphVae::encode(const Tensor& a) const {
  const Tensor ahat = normalized_adjacency(a);
  Graph g(&params_);
  V av = g.placeholder("ahat", ahat.shape());
  V mu = build_encoder_mu(g, av);
  V logvar = build_encoder_logvar(g, av);
  g.forward({{"ahat", ahat}}, logvar);
  return {g.value_of(mu), g.value_of(logvar)};
}

Vec GraphVae::encode_map_flat(const Tensor& a) const { return encode(a).mu.data(); }

Tensor GraphVae::decode(const Tensor& z) const {
  Graph g(&params_);
  V zv = g.placeholder("z", z.shape());
  V p = build_decoder(g, zv);
  return g.forward({{"z", z}}, p);
}

Tensor GraphVae::decode_flat(const Vec& z_flat) const {
  const int n = cfg_.n_nodes, d = cfg_.latent_dim;
  if (static_cast<int>(z_flat.size()) != n * d) {
    throw ShapeError("decode_flat: expected " + std::to_string(n * d) + " values, got " +
                     std::to_string(z_flat.size()));
  }
  return decode(Tensor({n, d}, z_flat));
}

ElboParts GraphVae::elbo(const Tensor& a, std::uint64_t noise_seed) const {
  LossGraph lg = make_elbo_graph();
  Rng rng(noise_seed);
  Tensor eps({cfg_.n_nodes, cfg_.latent_dim});
  for (std::int64_t k = 0; k < eps.numel(); ++k) eps.at(k) = rng.normal();
  lg.graph.forward({{"ahat", normalized_adjacency(a)}, {"a", a}, {"eps", eps}}, lg.loss);
  return {lg.graph.value_of(lg.loss).at(0), lg.graph.value_of(lg.recon).at(0), lg.graph.value_of(lg.kl).at(0)};
}

json GraphVae::manifest() const {
  return json{{"model", "graph_vae"}, {"n_nodes", cfg_.n_nodes},     {"latent_dim", cfg_.latent_dim},
              {"gcn_hidden", cfg_.gcn_hidden}, {"rank", cfg_.rank}, {"init_seed", cfg_.init_seed}};
}

GvaeConfig GraphVae::config_from_manifest(const json& m) {
  GvaeConfig cfg;
  cfg.n_nodes = m.at("n_nodes").get<int>();
  cfg.latent_dim = m.at("latent_dim").get<int>();
  cfg.gcn_hidden = m.at("gcn_hidden").get<int>();
  cfg.rank = m.at("rank").get<int>();
  cfg.init_seed = m.at("init_seed").get<std::uint64_t>();
  return cfg;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const json& manifest, const ParamStore& params) {
  json m = manifest;
  m["params"] = params.names();
  const std::string body = m.dump(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "LGCK1 " << body.size() << "\n" << body << "\n";
  for (const std::string& name : params.names()) write_lgt1(out, params.at(name));
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint " + path + ": empty file");
  std::istringstream hs(line);
  std::string magic;
  std::size_t body_size = 0;
  hs >> magic >> body_size;
  if (magic != "LGCK1" || !hs) throw IoError("checkpoint " + path + ": bad magic line \"" + line + "\"");
  std::string body(body_size, '\0');
  in.read(body.data(), static_cast<std::streamsize>(body_size));
  if (in.gcount() != static_cast<std::streamsize>(body_size)) {
    throw IoError("checkpoint " + path + ": truncated manifest");
  }
  in.get();  // trailing newline
  Checkpoint ck;
  try {
    ck.manifest = json::parse(body);
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path + ": bad manifest: " + e.what());
  }
  for (const json& name : ck.manifest.at("params")) {
    ck.tensors.emplace_back(name.get<std::string>(), read_lgt1(in, path));
  }
  return ck;
}

void restore_params(ParamStore& params, const Checkpoint& ck) {
  if (params.names().size() != ck.tensors.size()) {
    throw ConfigError("restore_params: checkpoint has " + std::to_string(ck.tensors.size()) +
                      " tensors, model expects " + std::to_string(params.names().size()));
  }
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    const auto& [name, tensor] = ck.tensors[i];
    if (params.names()[i] != name) {
      throw ConfigError("restore_params: parameter order mismatch at index " + std::to_string(i) + ": \"" +
                        name + "\" vs \"" + params.names()[i] + "\"");
    }
    Tensor& dst = params.at(name);
    if (dst.shape() != tensor.shape()) {
      throw ShapeError("restore_params: \"" + name + "\" shape " + tensor.shape_str() + " vs model " +
                       dst.shape_str());
    }
    dst = tensor;
  }
}

}  // namespace latentgeo::models
