#include "latentgeo/interp.hpp"

#include <algorithm>
#include <cmath>

#include "latentgeo/errors.hpp"

namespace latentgeo::interp {

namespace {

constexpr double kParallelEps = 1e-7;
constexpr double kAntipodalEps = 1e-7;

void check_common(const char* op, const Vec& z1, const Vec& z2, double lambda) {
  if (z1.size() != z2.size()) {
    throw ShapeError(std::string(op) + ": dimension mismatch " + std::to_string(z1.size()) + " vs " +
                     std::to_string(z2.size()));
  }
  if (z1.empty()) throw ShapeError(std::string(op) + ": empty vectors");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError(std::string(op) + ": interpolation weight " + std::to_string(lambda) +
                      " outside [0,1]");
  }
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// Angle between z1 and z2 plus the norms; shared by the spherical kinds.
struct Angle {
  double omega;
  double sin_omega;
};

Angle angle_between(const char* op, const Vec& z1, const Vec& z2) {
  const double n1 = norm(z1);
  const double n2 = norm(z2);
  if (n1 == 0.0 || n2 == 0.0) throw ConfigError(std::string(op) + ": zero vector input");
  if (z1.size() < 2) throw ShapeError(std::string(op) + ": needs dimension >= 2, got 1");
  double c = dot(z1, z2) / (n1 * n2);
  c = std::clamp(c, -1.0, 1.0);
  if (c < -1.0 + kAntipodalEps) {
    throw ConfigError(std::string(op) + ": antipodal inputs, great-circle path undefined");
  }
  const double omega = std::acos(c);
  return {omega, std::sin(omega)};
}

}  // namespace

std::string to_string(Kind k) {
  switch (k) {
    case Kind::Linear: return "linear";
    case Kind::Slerp: return "slerp";
    case Kind::Norm: return "norm";
    case Kind::SlerpNorm: return "slerp_norm";
  }
  return "?";
}

Kind kind_from_string(const std::string& s) {
  if (s == "linear") return Kind::Linear;
  if (s == "slerp") return Kind::Slerp;
  if (s == "norm") return Kind::Norm;
  if (s == "slerp_norm") return Kind::SlerpNorm;
  throw ConfigError("unknown interpolation kind: \"" + s + "\"");
}

std::vector<Kind> all_kinds() { return {Kind::Linear, Kind::Slerp, Kind::Norm, Kind::SlerpNorm}; }

Vec lerp(const Vec& z1, const Vec& z2, double lambda) {
  check_common("lerp", z1, z2, lambda);
  Vec out(z1.size());
  for (std::size_t i = 0; i < z1.size(); ++i) out[i] = (1.0 - lambda) * z1[i] + lambda * z2[i];
  return out;
}

Vec slerp(const Vec& z1, const Vec& z2, double lambda) {
  check_common("slerp", z1, z2, lambda);
  const Angle a = angle_between("slerp", z1, z2);
  if (a.sin_omega < kParallelEps) return lerp(z1, z2, lambda);
  const double w1 = std::sin((1.0 - lambda) * a.omega) / a.sin_omega;
  const double w2 = std::sin(lambda * a.omega) / a.sin_omega;
  Vec out(z1.size());
  for (std::size_t i = 0; i < z1.size(); ++i) out[i] = w1 * z1[i] + w2 * z2[i];
  return out;
}

Vec norm_interp(const Vec& z1, const Vec& z2, double lambda) {
  check_common("norm_interp", z1, z2, lambda);
  const double denom = std::sqrt((1.0 - lambda) * (1.0 - lambda) + lambda * lambda);
  Vec out(z1.size());
  for (std::size_t i = 0; i < z1.size(); ++i) {
    out[i] = ((1.0 - lambda) * z1[i] + lambda * z2[i]) / denom;
  }
  return out;
}

Vec slerp_norm(const Vec& z1, const Vec& z2, double lambda) {
  check_common("slerp_norm", z1, z2, lambda);
  const Angle a = angle_between("slerp_norm", z1, z2);
  if (a.sin_omega < kParallelEps) return norm_interp(z1, z2, lambda);  // sin(x) ~ x limit
  const double s1 = std::sin((1.0 - lambda) * a.omega);
  const double s2 = std::sin(lambda * a.omega);
  const double denom = std::sqrt(s1 * s1 + s2 * s2);
  Vec out(z1.size());
  for (std::size_t i = 0; i < z1.size(); ++i) out[i] = (s1 * z1[i] + s2 * z2[i]) / denom;
  return out;
}

Vec interpolate(Kind k, const Vec& z1, const Vec& z2, double lambda) {
  switch (k) {
    case Kind::Linear: return lerp(z1, z2, lambda);
    case Kind::Slerp: return slerp(z1, z2, lambda);
    case Kind::Norm: return norm_interp(z1, z2, lambda);
    case Kind::SlerpNorm: return slerp_norm(z1, z2, lambda);
  }
  throw ConfigError("interpolate: bad kind");
}

double lambda_from_times(double t1, double t2, double t3) {
  if (!(t1 < t3)) {
    throw ConfigError("lambda_from_times: need t1 < t3, got t1=" + std::to_string(t1) +
                      " t3=" + std::to_string(t3));
  }
  if (!(t2 > t1 && t2 < t3)) {
    throw ConfigError("lambda_from_times: t2=" + std::to_string(t2) + " outside (" + std::to_string(t1) +
                      ", " + std::to_string(t3) + ")");
  }
  return (t2 - t1) / (t3 - t1);
}

namespace {

using V = Graph::Value;

// lambda: [B,1] -> pair of row-broadcast weights for [B,D].
struct RowWeights {
  V w1;  // [B,D]
  V w2;
};

V bcast_col(Graph& g, V col, const std::vector<int>& target) { return g.broadcast(col, target); }

V linear_node(Graph& g, V z1, V z2, V lambda) {
  const auto& s = g.shape_of(z1);
  V one = g.constant(Tensor::full(g.shape_of(lambda), 1.0));
  V oml = g.sub(one, lambda);
  return g.add(g.mul(bcast_col(g, oml, s), z1), g.mul(bcast_col(g, lambda, s), z2));
}

V norm_node(Graph& g, V z1, V z2, V lambda) {
  const auto& s = g.shape_of(z1);
  V one = g.constant(Tensor::full(g.shape_of(lambda), 1.0));
  V oml = g.sub(one, lambda);
  V num = g.add(g.mul(bcast_col(g, oml, s), z1), g.mul(bcast_col(g, lambda, s), z2));
  V denom = g.sqrt(g.add(g.square(oml), g.square(lambda)));  // [B,1]
  return g.div(num, bcast_col(g, denom, s));
}

// Row-wise angle between z1 and z2: [B,1]. Cosine clamped to [-1,1].
V omega_node(Graph& g, V z1, V z2) {
  V dot = g.row_sum(g.mul(z1, z2));
  V n1 = g.sqrt(g.row_sum(g.square(z1)));
  V n2 = g.sqrt(g.row_sum(g.square(z2)));
  V cosw = g.clamp(g.div(dot, g.mul(n1, n2)), -1.0, 1.0);
  return g.acos(cosw);
}

}  // namespace

Graph::Value interpolate_node(Graph& g, Kind k, Graph::Value z1, Graph::Value z2, Graph::Value lambda) {
  const auto& s = g.shape_of(z1);
  if (s != g.shape_of(z2)) {
    throw ShapeError("interpolate_node: shape mismatch " + shape_to_string(s) + " vs " +
                     shape_to_string(g.shape_of(z2)));
  }
  if (k == Kind::Linear) return linear_node(g, z1, z2, lambda);
  if (k == Kind::Norm) return norm_node(g, z1, z2, lambda);

  // Spherical kinds. Per-row fallback where sin(omega) is numerically zero;
  // the guarded denominator keeps the untaken branch finite.
  V one = g.constant(Tensor::full(g.shape_of(lambda), 1.0));
  V oml = g.sub(one, lambda);
  V omega = omega_node(g, z1, z2);
  V sin_omega = g.sin(omega);
  V degenerate = g.less_than(sin_omega, kParallelEps);  // [B,1] of 0/1
  V s1 = g.sin(g.mul(oml, omega));
  V s2 = g.sin(g.mul(lambda, omega));

  V spherical;
  if (k == Kind::Slerp) {
    V safe = g.where(degenerate, one, sin_omega);
    V w1 = g.div(s1, safe);
    V w2 = g.div(s2, safe);
    spherical = g.add(g.mul(bcast_col(g, w1, s), z1), g.mul(bcast_col(g, w2, s), z2));
  } else {  // SlerpNorm
    V denom_sq = g.add(g.square(s1), g.square(s2));
    V safe = g.where(degenerate, one, g.sqrt(denom_sq));
    V num = g.add(g.mul(bcast_col(g, s1, s), z1), g.mul(bcast_col(g, s2, s), z2));
    spherical = g.div(num, bcast_col(g, safe, s));
  }
  V fallback = k == Kind::Slerp ? linear_node(g, z1, z2, lambda) : norm_node(g, z1, z2, lambda);
  return g.where(bcast_col(g, degenerate, s), fallback, spherical);
}

}  // namespace latentgeo::interp
