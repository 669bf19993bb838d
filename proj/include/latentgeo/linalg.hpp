#pragma once

#include <vector>

#include "latentgeo/tensor.hpp"

namespace latentgeo::linalg {

// Singular values of a 2-D tensor, descending. Used by the rank-bottleneck
// checks on stacked posterior means.
std::vector<double> singular_values(const Tensor& m);

// sigma_{r+1} / sigma_1 (0 when fewer than r+1 singular values exist).
double rank_residual(const Tensor& m, int r);

}  // namespace latentgeo::linalg
