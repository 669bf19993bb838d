#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latentgeo/datasets.hpp"
#include "latentgeo/graph.hpp"
#include "latentgeo/interp.hpp"
#include "latentgeo/models.hpp"
#include "latentgeo/rng.hpp"

namespace latentgeo::iat {

// The four supervised objectives: penalize the latent interpolant directly,
// penalize the decoded interpolant, or route either through a learned
// interpolation MLP.
enum class Variant { Latent, Decode, MlpLatent, MlpDecode };

std::string to_string(Variant v);  // "latent" | "decode" | "mlp_latent" | "mlp_decode"
Variant variant_from_string(const std::string& s);
bool uses_mlp(Variant v);

// Learned interpolation function: 3-layer MLP, input is the concatenation
// (z_t1, z_t3, z_inter), hidden width equals the latent length, ReLU
// activations, linear output. For graph models the latent length is the
// flattened N*D.
struct InterpMlp {
  static constexpr const char* kPrefix = "imlp.";
  static void create_params(ParamStore& params, int latent_len, Rng& rng);
  static bool params_present(const ParamStore& params);
  static Graph::Value build(Graph& g, Graph::Value in);  // [B, 3L] -> [B, L]
};

// Forward-only MLP application used on the evaluation path of the mlp
// variants: z_inter <- MLP(z1, z3, z_inter).
struct MlpInterpolator {
  const ParamStore* params = nullptr;
  int latent_len = 0;
  std::vector<double> apply(const std::vector<double>& z1, const std::vector<double>& z3,
                            const std::vector<double>& z_inter) const;
};

// A triplet of positions inside one sequence view, strictly ordered by
// attribute.
struct Triplet {
  int seq = 0;  // index into the pool of SequenceViews
  int p1 = 0, p2 = 0, p3 = 0;
};

// Uniform over all valid (sequence, ordered-combination) choices; never
// crosses sequences. Sequences with fewer than 3 usable samples contribute
// nothing; throws if none remain.
std::vector<Triplet> sample_triplet_batch(const std::vector<data::SequenceView>& pool, int n, Rng& rng);

// Per-sequence labeled budget for the label-budget study: keeps a seeded
// random subset of at most `budget` samples per sequence (everything when
// budget >= size, consuming no randomness). budget < 3 is an error.
std::vector<data::SequenceView> restrict_budget(const std::vector<data::SequenceView>& pool, int budget,
                                                std::uint64_t seed);

// Built IAT loss graph. Image placeholders: "x1","x2","x3" [T,HW] and
// "lambda" [T,1]. Graph-domain placeholders (one triplet per forward):
// "ahat1","ahat3" [N,N], "lambda" [1,1], plus "ahat2" (latent variants) or
// "a2" (decode variants).
struct IatGraph {
  Graph graph;
  Graph::Value loss;
  Variant variant = Variant::Latent;
  interp::Kind kind = interp::Kind::Norm;
  int batch = 1;
};

IatGraph make_image_iat_graph(const models::ImageVae& vae, Variant v, interp::Kind kind, int batch);
IatGraph make_graph_iat_graph(const models::GraphVae& gvae, Variant v, interp::Kind kind);

// Materialized triplet batch for the image losses.
struct ImageTripletBatch {
  Tensor x1, x2, x3;  // [T, HW]
  Tensor lambda;      // [T, 1]
};
ImageTripletBatch materialize_image_triplets(const data::Dataset& ds,
                                             const std::vector<data::SequenceView>& pool,
                                             const std::vector<Triplet>& triplets);

// Loss evaluation helpers (build + forward; used by tests and the joint-loss
// op). The model parameters are not modified.
double image_iat_loss(const models::ImageVae& vae, Variant v, interp::Kind kind,
                      const ImageTripletBatch& batch);
double graph_iat_loss(const models::GraphVae& gvae, Variant v, interp::Kind kind, const data::Dataset& ds,
                      const std::vector<data::SequenceView>& pool, const std::vector<Triplet>& triplets);

// L_joint = L_ELBO + lambda_iat * L_IAT. With lambda_iat == 0 the IAT term
// is skipped entirely, so the result is bit-identical to the ELBO path.
double joint_loss_image(const models::ImageVae& vae, const Tensor& xbatch, Variant v, interp::Kind kind,
                        const ImageTripletBatch& triplets, double lambda_iat, std::uint64_t noise_seed);

}  // namespace latentgeo::iat
