#include "latentgeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "latentgeo/errors.hpp"
#include "latentgeo/rng.hpp"

namespace latentgeo::metrics {

Direction direction_of(const std::string& name) {
  if (name == "ssim_x" || name == "psnr_x" || name == "eiou_x") return Direction::HigherBetter;
  return Direction::LowerBetter;
}

double mse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("mse: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  double s = 0.0;
  for (std::int64_t k = 0; k < a.numel(); ++k) {
    const double d = a.at(k) - b.at(k);
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

namespace {

constexpr int kWin = 11;

// Normalized 1-D Gaussian, sigma 1.5, 11 taps. The 2-D window is its outer
// product; ssim() exploits separability, the test oracle uses the 2-D form.
std::vector<double> gaussian_taps() {
  std::vector<double> w(kWin);
  const double sigma = 1.5;
  double total = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double x = i - (kWin - 1) / 2.0;
    w[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& x : w) x /= total;
  return w;
}

// Horizontal then vertical pass; output is the valid region only.
Tensor separable_filter(const Tensor& img, const std::vector<double>& taps) {
  const int h = img.shape()[0], w = img.shape()[1];
  const int vw = w - kWin + 1, vh = h - kWin + 1;
  Tensor horiz({h, vw});
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < vw; ++c) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += taps[static_cast<std::size_t>(k)] * img.at(r, c + k);
      horiz.at(r, c) = s;
    }
  }
  Tensor out({vh, vw});
  for (int r = 0; r < vh; ++r) {
    for (int c = 0; c < vw; ++c) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += taps[static_cast<std::size_t>(k)] * horiz.at(r + k, c);
      out.at(r, c) = s;
    }
  }
  return out;
}

Tensor elementwise_product(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape());
  for (std::int64_t k = 0; k < a.numel(); ++k) out.at(k) = a.at(k) * b.at(k);
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double data_range) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("ssim: expects 2-D images, got " + a.shape_str() + " and " + b.shape_str());
  }
  if (!a.same_shape(b)) {
    throw ShapeError("ssim: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  if (a.shape()[0] < kWin || a.shape()[1] < kWin) {
    throw ShapeError("ssim: image " + a.shape_str() + " smaller than the 11x11 window");
  }
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  const std::vector<double> taps = gaussian_taps();
  const Tensor mu_a = separable_filter(a, taps);
  const Tensor mu_b = separable_filter(b, taps);
  const Tensor e_aa = separable_filter(elementwise_product(a, a), taps);
  const Tensor e_bb = separable_filter(elementwise_product(b, b), taps);
  const Tensor e_ab = separable_filter(elementwise_product(a, b), taps);

  double total = 0.0;
  for (std::int64_t k = 0; k < mu_a.numel(); ++k) {
    const double ma = mu_a.at(k), mb = mu_b.at(k);
    const double va = e_aa.at(k) - ma * ma;
    const double vb = e_bb.at(k) - mb * mb;
    const double cov = e_ab.at(k) - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.numel());
}

double psnr(const Tensor& a, const Tensor& b, double data_range) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / m);
}

double bce(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) {
    throw ShapeError("bce: shape mismatch " + pred.shape_str() + " vs " + target.shape_str());
  }
  double s = 0.0;
  for (std::int64_t k = 0; k < pred.numel(); ++k) {
    const double t = target.at(k);
    if (t != 0.0 && t != 1.0) {
      throw ConfigError("bce: target entry " + std::to_string(t) + " at index " + std::to_string(k) +
                        " is not binary");
    }
    const double p = std::clamp(pred.at(k), 1e-7, 1.0 - 1e-7);
    s -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return s / static_cast<double>(pred.numel());
}

double e_iou(const Tensor& pred_adj, const Tensor& true_adj, double threshold) {
  if (pred_adj.rank() != 2 || pred_adj.shape()[0] != pred_adj.shape()[1]) {
    throw ShapeError("e_iou: pred adjacency not square, " + pred_adj.shape_str());
  }
  if (!pred_adj.same_shape(true_adj)) {
    throw ShapeError("e_iou: shape mismatch " + pred_adj.shape_str() + " vs " + true_adj.shape_str());
  }
  const int n = pred_adj.shape()[0];
  std::int64_t inter = 0, uni = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;  // a self-loop is not an edge
      const bool p = pred_adj.at(i, j) > threshold;
      const bool t = true_adj.at(i, j) > 0.5;
      inter += p && t;
      uni += p || t;
    }
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double cosine_distance(const Vec& z1, const Vec& z2) {
  if (z1.size() != z2.size()) {
    throw ShapeError("cosine_distance: dimension mismatch " + std::to_string(z1.size()) + " vs " +
                     std::to_string(z2.size()));
  }
  double d = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    d += z1[i] * z2[i];
    n1 += z1[i] * z1[i];
    n2 += z2[i] * z2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) throw ConfigError("cosine_distance: zero vector input");
  return 1.0 - d / (std::sqrt(n1) * std::sqrt(n2));
}

double kl_gaussian_std(const Vec& mu, const Vec& logvar) {
  if (mu.size() != logvar.size()) {
    throw ShapeError("kl_gaussian_std: dimension mismatch " + std::to_string(mu.size()) + " vs " +
                     std::to_string(logvar.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
  }
  return 0.5 * s;
}

McEstimate kl_monte_carlo(const Vec& mu, const Vec& logvar, std::int64_t n_samples, std::uint64_t seed) {
  if (mu.size() != logvar.size()) {
    throw ShapeError("kl_monte_carlo: dimension mismatch");
  }
  if (n_samples < 1000) throw ConfigError("kl_monte_carlo: need at least 1000 samples");
  Rng rng(seed);
  const std::size_t d = mu.size();
  std::vector<double> sigma(d);
  for (std::size_t i = 0; i < d; ++i) sigma[i] = std::exp(0.5 * logvar[i]);

  // z ~ q; average log q(z) - log p(z). The log(2 pi) terms cancel.
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    double w = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double eps = rng.normal();
      const double z = mu[i] + sigma[i] * eps;
      w += 0.5 * (-logvar[i] - eps * eps + z * z);
    }
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace latentgeo::metrics
