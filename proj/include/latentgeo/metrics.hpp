#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentgeo/tensor.hpp"

namespace latentgeo::metrics {

using Vec = std::vector<double>;

enum class Direction { LowerBetter, HigherBetter };

// Fixed per metric name: mse/bce/cos-dist/KL down, ssim/psnr/eIoU up.
Direction direction_of(const std::string& metric_name);

double mse(const Tensor& a, const Tensor& b);

// Mean local SSIM over valid window positions, 11x11 Gaussian window
// sigma=1.5, C1=(0.01 L)^2, C2=(0.03 L)^2. Single-channel H x W, both >= 11.
double ssim(const Tensor& a, const Tensor& b, double data_range);

// 10 log10(L^2 / mse). Identical inputs give +infinity; aggregation excludes
// those with an excluded count.
double psnr(const Tensor& a, const Tensor& b, double data_range);

// Mean binary cross-entropy; predictions clamped to [1e-7, 1-1e-7], targets
// must be exactly 0 or 1.
double bce(const Tensor& pred, const Tensor& target);

// Edge intersection-over-union of directed edge sets. pred binarized at
// threshold (edge iff p > threshold), self-loops excluded, empty-union
// convention 1.0.
double e_iou(const Tensor& pred_adj, const Tensor& true_adj, double threshold = 0.5);

// 1 - cos(z1, z2) in [0, 2].
double cosine_distance(const Vec& z1, const Vec& z2);

// KL(N(mu, diag exp(logvar)) || N(0, I)) in closed form:
// 1/2 sum_d (mu_d^2 + exp(logvar_d) - 1 - logvar_d).
double kl_gaussian_std(const Vec& mu, const Vec& logvar);

struct McEstimate {
  double estimate;
  double std_error;
};

// Monte-Carlo estimate of the same divergence from its integral definition;
// the independent oracle for kl_gaussian_std. n_samples >= 1000.
McEstimate kl_monte_carlo(const Vec& mu, const Vec& logvar, std::int64_t n_samples, std::uint64_t seed);

}  // namespace latentgeo::metrics
