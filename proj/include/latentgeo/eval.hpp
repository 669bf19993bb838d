#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latentgeo/datasets.hpp"
#include "latentgeo/iat.hpp"
#include "latentgeo/interp.hpp"
#include "latentgeo/models.hpp"
#include "latentgeo/report.hpp"
#include "latentgeo/training.hpp"

namespace latentgeo::eval {

using Vec = std::vector<double>;

// Minimal surface the evaluation pipeline needs from a trained model. The
// latent point is flat (node vectors concatenated for graphs).
class EvalModel {
 public:
  virtual ~EvalModel() = default;
  virtual data::DatasetKind domain() const = 0;
  virtual Vec encode_map_flat(const Tensor& x) const = 0;
  virtual Tensor decode_flat(const Vec& z) const = 0;
};

class ImageVaeEval : public EvalModel {
 public:
  explicit ImageVaeEval(const models::ImageVae& m) : model_(m) {}
  data::DatasetKind domain() const override { return data::DatasetKind::Image; }
  Vec encode_map_flat(const Tensor& x) const override { return model_.encode_map(x); }
  Tensor decode_flat(const Vec& z) const override { return model_.decode(z); }

 private:
  const models::ImageVae& model_;
};

class GraphVaeEval : public EvalModel {
 public:
  explicit GraphVaeEval(const models::GraphVae& m) : model_(m) {}
  data::DatasetKind domain() const override { return data::DatasetKind::Graph; }
  Vec encode_map_flat(const Tensor& a) const override { return model_.encode_map_flat(a); }
  Tensor decode_flat(const Vec& z) const override { return model_.decode_flat(z); }

 private:
  const models::GraphVae& model_;
};

struct TripletInput {
  std::int64_t id = 0;
  int object_id = 0;
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  Tensor x1, x2, x3;
};

struct TripletResult {
  std::int64_t id = 0;
  int object_id = 0;
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  interp::Kind kind = interp::Kind::Linear;
  std::map<std::string, double> values;
};

// One pass of the evaluation pipeline on a single triplet: encode the outer
// samples to posterior means, interpolate at the attribute-derived weight
// (through the learned MLP when one is supplied), decode, and score against
// the held-out middle sample on both the data and latent sides. Images score
// mse_x/ssim_x/psnr_x, graphs bce_x/eiou_x; both add mse_z and cosdist_z.
TripletResult evaluate_triplet(const EvalModel& model, const TripletInput& t, interp::Kind kind,
                               const iat::MlpInterpolator* mlp = nullptr);

struct SuiteResult {
  std::vector<report::MetricReport> rows;  // one per kind
  std::vector<report::RawRow> raw;
  bool with_replacement = false;  // pool exhausted before n_triplets
};

// Samples n triplets from the given split (without replacement until the
// pool is exhausted, then with replacement, recorded in `with_replacement`),
// evaluates every requested kind on the same triplets, and aggregates.
SuiteResult evaluate_suite(const EvalModel& model, const data::Dataset& ds, data::SplitTag tag,
                           const std::vector<interp::Kind>& kinds, int n_triplets, std::uint64_t seed,
                           const iat::MlpInterpolator* mlp = nullptr);

// ---------------------------------------------------------------------------
// Experiment harnesses (train + evaluate)

struct HarnessConfig {
  int latent_dim = 32;
  int hidden = 256;      // image trunk width
  int gcn_hidden = 32;   // graph encoder width
  int rank = 0;
  double sigma_x = 1.0;
  training::TrainConfig train;
  int n_triplets = 2000;
  std::uint64_t eval_seed = 1;
  std::vector<std::uint64_t> seeds;  // runs; default {train.seed}
  int jobs = 1;  // cells trained in parallel; results merge in a fixed order
};

// The per-domain default algorithm used by the restriction and IAT studies.
interp::Kind default_kind(data::DatasetKind kind);

struct TrainedModel {
  std::unique_ptr<models::ImageVae> image;
  std::unique_ptr<models::GraphVae> graph;
  training::TrainResult result;

  ParamStore& params();
  const ParamStore& params() const;
  std::unique_ptr<EvalModel> eval_view() const;
  std::optional<iat::MlpInterpolator> mlp_view() const;
  nlohmann::json manifest() const;
};

// Builds and trains one model for the dataset under the harness config.
TrainedModel train_model(const data::Dataset& ds, const HarnessConfig& cfg, std::uint64_t seed);

// Loads a checkpoint written by the CLI / save_trained().
TrainedModel load_model(const std::string& path);
void save_trained(const TrainedModel& m, const std::string& path);

struct ExperimentResult {
  std::vector<report::MetricReport> rows;
  std::vector<report::RawRow> raw;
  std::vector<std::pair<std::string, std::string>> errors;  // cell -> message
};

// Latent-space restriction study: one cell per latent dimension (rank 0) and
// one per rank (base latent dimension), everything else fixed.
ExperimentResult sweep_rank_dim(const data::Dataset& ds, const HarnessConfig& base,
                                const std::vector<int>& dims, const std::vector<int>& ranks);

// Interpolation-aware training study over the requested variants ("none"
// included via std::nullopt), evaluated with the fixed per-domain algorithm.
ExperimentResult run_iat_experiment(const data::Dataset& ds, const HarnessConfig& base,
                                    const std::vector<std::optional<iat::Variant>>& variants,
                                    interp::Kind kind, double lambda_iat);

// Label-budget study: mlp_decode IAT restricted to each budget.
ExperimentResult label_budget_study(const data::Dataset& ds, const HarnessConfig& base,
                                    const std::vector<int>& budgets, interp::Kind kind, double lambda_iat);

}  // namespace latentgeo::eval
