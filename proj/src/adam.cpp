#include "latentgeo/adam.hpp"

#include <cmath>

#include "latentgeo/errors.hpp"

namespace latentgeo {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  for (const std::string& name : params.names()) {
    m_.emplace(name, Tensor(params.at(name).shape()));
    v_.emplace(name, Tensor(params.at(name).shape()));
  }
}

void AdamState::step(ParamStore& params, const NamedGrads& grads, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) {
      throw DivergenceError("adam: non-finite gradient for parameter \"" + name + "\" at step " +
                            std::to_string(step_ + 1));
    }
    if (g.shape() != params.at(name).shape()) {
      throw ShapeError("adam: gradient shape " + g.shape_str() + " does not match parameter \"" + name +
                       "\" shape " + params.at(name).shape_str());
    }
  }

  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

  for (const std::string& name : params.names()) {
    Tensor& p = params.at(name);
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    auto it = grads.find(name);
    for (std::int64_t k = 0; k < p.numel(); ++k) {
      const double g = it != grads.end() ? it->second.at(k) : 0.0;
      m.at(k) = cfg_.beta1 * m.at(k) + (1.0 - cfg_.beta1) * g;
      v.at(k) = cfg_.beta2 * v.at(k) + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m.at(k) / bc1;
      const double vhat = v.at(k) / bc2;
      p.at(k) -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace latentgeo
