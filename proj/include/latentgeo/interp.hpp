#pragma once

#include <string>
#include <vector>

#include "latentgeo/graph.hpp"

namespace latentgeo::interp {

using Vec = std::vector<double>;

enum class Kind { Linear, Slerp, Norm, SlerpNorm };

std::string to_string(Kind k);                // "linear" | "slerp" | "norm" | "slerp_norm"
Kind kind_from_string(const std::string& s);
std::vector<Kind> all_kinds();

// f(z1, z2, lambda): latent-space interpolation with weight lambda in [0,1].

// Straight line: (1-l) z1 + l z2.
Vec lerp(const Vec& z1, const Vec& z2, double lambda);

// Great-circle path. Omega is the angle between z1 and z2 (cosine clamped to
// [-1,1] before arccos). Falls back to lerp when sin(Omega) < 1e-7 and the
// vectors point the same way; antipodal inputs and zero vectors are errors.
Vec slerp(const Vec& z1, const Vec& z2, double lambda);

// Linear interpolation rescaled to preserve the Gaussian prior:
// ((1-l) z1 + l z2) / sqrt((1-l)^2 + l^2).
Vec norm_interp(const Vec& z1, const Vec& z2, double lambda);

// Spherical weights with prior-preserving rescale:
// (sin((1-l)O) z1 + sin(l O) z2) / sqrt(sin^2((1-l)O) + sin^2(l O)).
// Near-parallel trigger as slerp; the limit there is norm_interp.
Vec slerp_norm(const Vec& z1, const Vec& z2, double lambda);

Vec interpolate(Kind k, const Vec& z1, const Vec& z2, double lambda);

// lambda = (t2 - t1) / (t3 - t1) for strictly ordered attributes t1 < t2 < t3.
double lambda_from_times(double t1, double t2, double t3);

// Differentiable row-wise interpolation inside an autodiff graph.
// z1, z2: [B,D]; lambda: [B,1]. Gradients flow through the angle for the
// spherical kinds. The near-parallel fallback is selected per row.
Graph::Value interpolate_node(Graph& g, Kind k, Graph::Value z1, Graph::Value z2, Graph::Value lambda);

}  // namespace latentgeo::interp
