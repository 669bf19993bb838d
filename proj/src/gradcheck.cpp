#include "latentgeo/gradcheck.hpp"

#include <cmath>

#include "latentgeo/errors.hpp"

namespace latentgeo {

NamedGrads finite_difference_gradient(const std::function<double()>& loss_fn, ParamStore& params,
                                      double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_difference_gradient: eps must be positive");
  NamedGrads grads;
  for (const std::string& name : params.names()) {
    Tensor& p = params.at(name);
    Tensor g(p.shape());
    for (std::int64_t k = 0; k < p.numel(); ++k) {
      const double saved = p.at(k);
      p.at(k) = saved + eps;
      const double hi = loss_fn();
      p.at(k) = saved - eps;
      const double lo = loss_fn();
      p.at(k) = saved;
      g.at(k) = (hi - lo) / (2.0 * eps);
    }
    grads[name] = std::move(g);
  }
  return grads;
}

double max_relative_error(const NamedGrads& analytic, const NamedGrads& numeric, double floor) {
  double worst = 0.0;
  for (const auto& [name, a] : analytic) {
    const Tensor& n = numeric.at(name);
    for (std::int64_t k = 0; k < a.numel(); ++k) {
      const double denom = std::max(std::abs(a.at(k)), floor);
      const double err = std::abs(a.at(k) - n.at(k)) / denom;
      if (err > worst) worst = err;
    }
  }
  return worst;
}

double fd_check_max_rel_error(const std::function<double()>& loss_fn, ParamStore& params,
                              const NamedGrads& analytic, double eps_small, double eps_large,
                              double floor) {
  const NamedGrads small = finite_difference_gradient(loss_fn, params, eps_small);
  const NamedGrads large = finite_difference_gradient(loss_fn, params, eps_large);
  double worst = 0.0;
  for (const auto& [name, a] : analytic) {
    const Tensor& s = small.at(name);
    const Tensor& l = large.at(name);
    for (std::int64_t k = 0; k < a.numel(); ++k) {
      const double denom = std::max(std::abs(a.at(k)), floor);
      const double err = std::min(std::abs(a.at(k) - s.at(k)), std::abs(a.at(k) - l.at(k))) / denom;
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace latentgeo
