#pragma once

#include <cstdint>
#include <map>

#include "latentgeo/graph.hpp"

namespace latentgeo {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment tensors mirror the parameter shapes;
// the step counter increases by exactly one per update.
class AdamState {
 public:
  explicit AdamState(const ParamStore& params, AdamConfig cfg = {});

  // Applies one update in place. Parameters missing from `grads` are treated
  // as zero-gradient (moments still decay). Throws DivergenceError on
  // non-finite gradients, leaving parameters untouched.
  void step(ParamStore& params, const NamedGrads& grads, double lr);

  std::int64_t step_count() const { return step_; }
  const Tensor& first_moment(const std::string& name) const { return m_.at(name); }
  const Tensor& second_moment(const std::string& name) const { return v_.at(name); }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace latentgeo
