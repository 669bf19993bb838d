#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "latentgeo/datasets.hpp"
#include "latentgeo/iat.hpp"
#include "latentgeo/models.hpp"

namespace latentgeo::training {

struct TrainConfig {
  double lr = 5e-4;
  int batch = 40;  // data minibatch (images) / snapshots per iteration (graph)
  int iters = 4000;
  std::uint64_t seed = 1;
  // Interpolation-aware objective (Eq. joint = elbo + lambda_iat * iat).
  std::optional<iat::Variant> iat_variant;
  interp::Kind iat_kind = interp::Kind::Norm;
  double lambda_iat = 1.0;
  int triplet_batch = 20;
  int labeled_budget = 0;   // 0 = unrestricted
  int pretrain_iters = 0;   // ELBO-only iterations before the joint objective
};

struct TraceRow {
  int iter = 0;
  double loss = 0.0;   // joint objective when IAT is active, otherwise ELBO
  double recon = 0.0;
  double kl = 0.0;
  double iat = 0.0;    // 0 when inactive
};

struct TrainResult {
  std::vector<TraceRow> trace;  // one row per iteration
};

// Divergence aborts carry the partial trace so callers can persist it.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& msg, TrainResult partial)
      : DivergenceError(msg), partial_trace(std::move(partial)) {}
  TrainResult partial_trace;
};

// Adam training on the minibatch ELBO (plus the weighted IAT term when
// configured). Deterministic under cfg.seed; zero iterations leave the model
// untouched. Creates the interpolation-MLP parameters on the model when an
// mlp variant is requested and they are absent. Throws DivergenceError when
// the loss stops being finite.
TrainResult train(models::ImageVae& model, const data::Dataset& ds, const TrainConfig& cfg);
TrainResult train(models::GraphVae& model, const data::Dataset& ds, const TrainConfig& cfg);

}  // namespace latentgeo::training
