#pragma once

#include <functional>

#include "latentgeo/graph.hpp"

namespace latentgeo {

// Central finite differences per scalar parameter:
// (f(p+eps) - f(p-eps)) / (2 eps). The loss function must be deterministic
// (fix any sampling noise before calling). Restores parameters afterwards.
NamedGrads finite_difference_gradient(const std::function<double()>& loss_fn, ParamStore& params,
                                      double eps = 1e-5);

// Max relative error between two gradient sets, elementwise, with
// denominator max(|analytic|, floor).
double max_relative_error(const NamedGrads& analytic, const NamedGrads& numeric, double floor = 1e-6);

// Difference against central differences evaluated at two step sizes, taking
// the better match per component: small steps are roundoff-limited when the
// loss magnitude is large, large steps can cross activation kinks. A correct
// gradient matches at least one of the two.
double fd_check_max_rel_error(const std::function<double()>& loss_fn, ParamStore& params,
                              const NamedGrads& analytic, double eps_small = 3e-5,
                              double eps_large = 3e-4, double floor = 1e-6);

}  // namespace latentgeo
