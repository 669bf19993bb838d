#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latentgeo/graph.hpp"
#include "latentgeo/rng.hpp"
#include "latentgeo/tensor.hpp"

namespace latentgeo::models {

using Vec = std::vector<double>;

// Diagonal-Gaussian posterior; logvar is clamped to [-10, 10] before any
// exponentiation.
struct Posterior {
  Tensor mu;
  Tensor logvar;
};

// Posterior-mean sampling: mu + exp(0.5 logvar) * eps, eps ~ N(0, I).
Tensor reparameterize(const Posterior& p, std::uint64_t seed);

struct ElboParts {
  double loss = 0.0;
  double recon = 0.0;  // without the constant likelihood term, so recon >= 0
  double kl = 0.0;
};

// A built loss graph plus handles to its scalar parts. Placeholder names are
// fixed per builder and documented there.
struct LossGraph {
  Graph graph;
  Graph::Value loss;
  Graph::Value recon;
  Graph::Value kl;
};

struct VaeConfig {
  int image_size = 32;
  int latent_dim = 32;
  int hidden = 256;
  int rank = 0;  // 0 = full mean head; otherwise the W1*W2 bottleneck
  double sigma_x = 1.0;
  std::uint64_t init_seed = 1;
};

// Image VAE: MLP encoder trunk (two LeakyReLU layers), linear mean head
// (optionally rank-restricted, bias-free so posterior means stay in an exact
// R-dimensional linear subspace), linear log-variance head, mirrored MLP
// decoder with Tanh output.
class ImageVae {
 public:
  explicit ImageVae(const VaeConfig& cfg);
  ImageVae(const ImageVae&) = delete;
  ImageVae& operator=(const ImageVae&) = delete;
  ImageVae(ImageVae&&) = default;

  const VaeConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int pixels() const { return cfg_.image_size * cfg_.image_size; }

  Posterior encode(const Tensor& x) const;  // x [H,W] or [B,H*W]
  Vec encode_map(const Tensor& x) const;    // posterior mean of one image
  Tensor decode(const Vec& z) const;        // [H,W], entries in [-1,1]
  ElboParts elbo(const Tensor& x, std::uint64_t noise_seed) const;

  // Graph builders shared with the interpolation-aware losses.
  Graph::Value build_encoder_mu(Graph& g, Graph::Value x) const;      // [B,HW] -> [B,D]
  Graph::Value build_encoder_logvar(Graph& g, Graph::Value x) const;  // [B,HW] -> [B,D]
  Graph::Value build_decoder(Graph& g, Graph::Value z) const;         // [B,D] -> [B,HW]
  // Mean over the batch of 0.5/sigma_x^2 * ||x - xhat||^2 per row.
  Graph::Value build_recon_nll(Graph& g, Graph::Value xhat, Graph::Value x) const;

  // ELBO training graph; placeholders "x" [B,HW] and "eps" [B,D].
  LossGraph make_elbo_graph(int batch) const;

  nlohmann::json manifest() const;
  static VaeConfig config_from_manifest(const nlohmann::json& m);

 private:
  Graph::Value build_trunk(Graph& g, Graph::Value x) const;
  VaeConfig cfg_;
  ParamStore params_;
};

struct GvaeConfig {
  int n_nodes = 120;
  int latent_dim = 16;  // must be even (half-split decoder)
  int gcn_hidden = 32;
  int rank = 0;  // bottleneck on the final mean-branch layer
  std::uint64_t init_seed = 1;
};

// Directed-graph VAE: two-layer GCN encoder on one-hot node features over
// the symmetrized normalized adjacency, a two-layer MLP on the mean branch,
// and an MLP + half-split inner-product decoder with a trainable sparsity
// bias.
class GraphVae {
 public:
  explicit GraphVae(const GvaeConfig& cfg);
  GraphVae(const GraphVae&) = delete;
  GraphVae& operator=(const GraphVae&) = delete;
  GraphVae(GraphVae&&) = default;

  const GvaeConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // A_tilde = A + A^T + I, symmetrically normalized by degree.
  static Tensor normalized_adjacency(const Tensor& a);

  // Two-layer GCN: (e_mu, e_sigma), each [N,D].
  std::pair<Tensor, Tensor> gcn_forward(const Tensor& a) const;
  Posterior encode(const Tensor& a) const;        // [N,D] mu and logvar
  Vec encode_map_flat(const Tensor& a) const;     // node vectors concatenated, length N*D
  Tensor decode(const Tensor& z) const;           // [N,D] -> edge probabilities [N,N]
  Tensor decode_flat(const Vec& z_flat) const;
  ElboParts elbo(const Tensor& a, std::uint64_t noise_seed) const;

  Graph::Value build_encoder_mu(Graph& g, Graph::Value ahat) const;      // [N,N] -> [N,D]
  Graph::Value build_encoder_logvar(Graph& g, Graph::Value ahat) const;  // [N,N] -> [N,D]
  Graph::Value build_decoder(Graph& g, Graph::Value z) const;            // [N,D] -> [N,N]
  // Sum over all (i,j) of the per-entry binary cross-entropy.
  Graph::Value build_recon_bce(Graph& g, Graph::Value p, Graph::Value a) const;

  // ELBO training graph; placeholders "ahat", "a" [N,N] and "eps" [N,D].
  LossGraph make_elbo_graph() const;

  nlohmann::json manifest() const;
  static GvaeConfig config_from_manifest(const nlohmann::json& m);

 private:
  GvaeConfig cfg_;
  ParamStore params_;
};

// Checkpoint file: one-line magic with the manifest byte count, the JSON
// manifest, then the parameter tensors as LGT1 blocks in canonical
// (creation) order.
void save_checkpoint(const std::string& path, const nlohmann::json& manifest, const ParamStore& params);

struct Checkpoint {
  nlohmann::json manifest;
  std::vector<std::pair<std::string, Tensor>> tensors;
};
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into an already-shaped store; names and order
// must match exactly.
void restore_params(ParamStore& params, const Checkpoint& ck);

}  // namespace latentgeo::models
