#include <doctest.h>

#include <cmath>

#include "latentgeo/errors.hpp"
#include "latentgeo/gradcheck.hpp"
#include "latentgeo/interp.hpp"
#include "latentgeo/rng.hpp"

using namespace latentgeo;
using interp::Kind;
using Vec = interp::Vec;

namespace {

Vec random_vec(int d, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vec v(static_cast<std::size_t>(d));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Independent oracle for equal-norm 2-D slerp: the result is z1 rotated
// toward z2 by lambda * Omega in the plane, same radius.
Vec rotate2d_oracle(const Vec& z1, const Vec& z2, double lambda) {
  const double a1 = std::atan2(z1[1], z1[0]);
  const double a2 = std::atan2(z2[1], z2[0]);
  double delta = a2 - a1;
  while (delta > M_PI) delta -= 2.0 * M_PI;
  while (delta < -M_PI) delta += 2.0 * M_PI;
  const double r = norm(z1);
  const double angle = a1 + lambda * delta;
  return {r * std::cos(angle), r * std::sin(angle)};
}

}  // namespace

TEST_CASE("lerp basics") {
  const Vec z1{1.0, 0.0}, z2{0.0, 1.0};
  CHECK(interp::lerp(z1, z2, 0.0) == z1);
  CHECK(interp::lerp(z1, z2, 1.0) == z2);
  const Vec mid = interp::lerp(z1, z2, 0.5);
  CHECK(mid[0] == doctest::Approx(0.5));
  CHECK(mid[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(interp::lerp({1.0, 2.0}, {1.0}, 0.5), ShapeError);
  CHECK_THROWS_AS(interp::lerp(z1, z2, 1.5), ConfigError);
}

TEST_CASE("slerp on orthogonal unit vectors") {
  const Vec z1{1.0, 0.0}, z2{0.0, 1.0};
  const Vec mid = interp::slerp(z1, z2, 0.5);
  CHECK(mid[0] == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK(mid[1] == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));

  // rotation oracle across the lambda grid (equal-norm pairs, where slerp is
  // exactly a plane rotation)
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double r = 0.2 + rng.uniform();
    const double a1 = rng.uniform(0.0, 2.0 * M_PI);
    const double a2 = a1 + rng.uniform(-0.9 * M_PI, 0.9 * M_PI);
    const Vec a{r * std::cos(a1), r * std::sin(a1)};
    const Vec b{r * std::cos(a2), r * std::sin(a2)};
    if (std::abs(a2 - a1) < 1e-3) continue;
    for (double lambda : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const Vec got = interp::slerp(a, b, lambda);
      const Vec want = rotate2d_oracle(a, b, lambda);
      CHECK(dist(got, want) < 1e-9);
    }
  }
}

TEST_CASE("slerp preserves the norm of equal-norm endpoints") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Vec z1 = random_vec(16, rng);
    Vec z2 = random_vec(16, rng);
    const double r = 0.5 + rng.uniform();
    const double n1 = norm(z1), n2 = norm(z2);
    for (std::size_t i = 0; i < z1.size(); ++i) {
      z1[i] *= r / n1;
      z2[i] *= r / n2;
    }
    for (int i = 0; i <= 10; ++i) {
      const double lambda = i / 10.0;
      CHECK(std::abs(norm(interp::slerp(z1, z2, lambda)) - r) < 1e-9);
    }
  }
}

TEST_CASE("slerp error cases") {
  CHECK_THROWS_WITH_AS(interp::slerp({1.0, 0.0}, {-1.0, 0.0}, 0.5), doctest::Contains("antipodal"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(interp::slerp({0.0, 0.0}, {1.0, 0.0}, 0.5), doctest::Contains("zero vector"),
                       ConfigError);
  CHECK_THROWS_AS(interp::slerp({1.0}, {1.0}, 0.5), ShapeError);  // angle needs D >= 2
  // near-parallel falls back to lerp
  const Vec z{0.3, 0.4, 0.5};
  const Vec out = interp::slerp(z, z, 0.5);
  CHECK(dist(out, z) < 1e-12);
}

TEST_CASE("norm_interp direct evaluations") {
  const Vec z1{1.0, 0.0}, z2{0.0, 1.0};
  CHECK(dist(interp::norm_interp(z1, z2, 0.0), z1) == 0.0);
  const Vec mid = interp::norm_interp(z1, z2, 0.5);
  CHECK(mid[0] == doctest::Approx(0.70710678118).epsilon(1e-9));
  CHECK(mid[1] == doctest::Approx(0.70710678118).epsilon(1e-9));
  // (z, z, 0.5) -> sqrt(2) z
  const Vec z{0.2, -0.7};
  const Vec same = interp::norm_interp(z, z, 0.5);
  CHECK(same[0] == doctest::Approx(std::sqrt(2.0) * z[0]).epsilon(1e-12));
  CHECK(same[1] == doctest::Approx(std::sqrt(2.0) * z[1]).epsilon(1e-12));
}

TEST_CASE("slerp_norm endpoints and the orthogonal midpoint") {
  const Vec z1{1.0, 0.0}, z2{0.0, 1.0};
  CHECK(dist(interp::slerp_norm(z1, z2, 0.0), z1) < 1e-12);
  CHECK(dist(interp::slerp_norm(z1, z2, 1.0), z2) < 1e-12);
  const Vec mid = interp::slerp_norm(z1, z2, 0.5);
  CHECK(mid[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(mid[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("endpoint preservation across kinds") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec z1 = random_vec(16, rng);
    const Vec z2 = random_vec(16, rng);
    if (norm(z1) < 0.05 || norm(z2) < 0.05) continue;
    for (Kind k : interp::all_kinds()) {
      CAPTURE(interp::to_string(k));
      CHECK(dist(interp::interpolate(k, z1, z2, 0.0), z1) < 1e-9);
      CHECK(dist(interp::interpolate(k, z1, z2, 1.0), z2) < 1e-9);
    }
  }
}

TEST_CASE("continuity in lambda") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec z1 = random_vec(8, rng);
    const Vec z2 = random_vec(8, rng);
    if (norm(z1) < 0.1 || norm(z2) < 0.1) continue;
    const double bound = 10.0 * (norm(z1) + norm(z2)) * 1e-3;
    for (Kind k : interp::all_kinds()) {
      Vec prev = interp::interpolate(k, z1, z2, 0.0);
      for (int i = 1; i <= 1000; ++i) {
        const Vec cur = interp::interpolate(k, z1, z2, i * 1e-3);
        CHECK(dist(cur, prev) <= bound);
        prev = cur;
      }
    }
  }
}

TEST_CASE("lambda_from_times") {
  CHECK(interp::lambda_from_times(0.0, 5.0, 10.0) == doctest::Approx(0.5));
  CHECK(interp::lambda_from_times(30.0, 60.0, 90.0) == doctest::Approx(0.5));
  CHECK(interp::lambda_from_times(0.0, 1.0, 10.0) == doctest::Approx(0.1));
  CHECK_THROWS_AS(interp::lambda_from_times(0.0, 0.0, 10.0), ConfigError);
  CHECK_THROWS_AS(interp::lambda_from_times(10.0, 5.0, 0.0), ConfigError);
  CHECK_THROWS_AS(interp::lambda_from_times(0.0, 11.0, 10.0), ConfigError);
}

TEST_CASE("kind names round-trip") {
  for (Kind k : interp::all_kinds()) CHECK(interp::kind_from_string(interp::to_string(k)) == k);
  CHECK_THROWS_AS(interp::kind_from_string("cubic"), ConfigError);
}

TEST_CASE("graph interpolation matches the pure functions") {
  Rng rng(29);
  const int b = 6, d = 5;
  for (Kind k : interp::all_kinds()) {
    CAPTURE(interp::to_string(k));
    Tensor z1({b, d}), z2({b, d}), lambda({b, 1});
    for (std::int64_t i = 0; i < z1.numel(); ++i) {
      z1.at(i) = rng.uniform(-1.0, 1.0);
      z2.at(i) = rng.uniform(-1.0, 1.0);
    }
    for (int r = 0; r < b; ++r) lambda.at(r, 0) = rng.uniform(0.02, 0.98);
    // row 0 exercises the near-parallel fallback
    for (int c = 0; c < d; ++c) z2.at(0, c) = 2.0 * z1.at(0, c);

    Graph g;
    auto zv1 = g.placeholder("z1", {b, d});
    auto zv2 = g.placeholder("z2", {b, d});
    auto lv = g.placeholder("lambda", {b, 1});
    auto out = interp::interpolate_node(g, k, zv1, zv2, lv);
    const Tensor& got = g.forward({{"z1", z1}, {"z2", z2}, {"lambda", lambda}}, out);

    for (int r = 0; r < b; ++r) {
      Vec a(static_cast<std::size_t>(d)), bb(static_cast<std::size_t>(d));
      for (int c = 0; c < d; ++c) {
        a[static_cast<std::size_t>(c)] = z1.at(r, c);
        bb[static_cast<std::size_t>(c)] = z2.at(r, c);
      }
      const Vec want = interp::interpolate(k, a, bb, lambda.at(r, 0));
      for (int c = 0; c < d; ++c) {
        CHECK(got.at(r, c) == doctest::Approx(want[static_cast<std::size_t>(c)]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("graph interpolation gradients match finite differences") {
  Rng rng(31);
  const int b = 3, d = 4;
  for (Kind k : interp::all_kinds()) {
    CAPTURE(interp::to_string(k));
    ParamStore ps;
    Tensor z1({b, d}), z2({b, d}), lambda({b, 1});
    for (std::int64_t i = 0; i < z1.numel(); ++i) {
      z1.at(i) = rng.uniform(-1.0, 1.0);
      z2.at(i) = rng.uniform(-1.0, 1.0);
    }
    for (int r = 0; r < b; ++r) lambda.at(r, 0) = rng.uniform(0.1, 0.9);
    ps.create("z1", z1);
    ps.create("z2", z2);

    auto build = [&](Graph& g) {
      auto out = interp::interpolate_node(g, k, g.param("z1"), g.param("z2"), g.constant(lambda));
      return g.sum(g.square(out));
    };
    Graph g(&ps);
    auto scalar = build(g);
    g.forward({}, scalar);
    const NamedGrads analytic = g.backward(scalar);
    auto loss = [&]() {
      Graph h(&ps);
      return h.forward_scalar({}, build(h));
    };
    CHECK(max_relative_error(analytic, finite_difference_gradient(loss, ps)) < 1e-4);
  }
}

TEST_CASE("norm midpoint of standard normals stays standard (light version)") {
  Rng rng(41);
  const int n = 4000, d = 8;
  double sum = 0.0, sum_sq = 0.0;
  double lerp_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec z1(d), z2(d);
    for (int j = 0; j < d; ++j) {
      z1[static_cast<std::size_t>(j)] = rng.normal();
      z2[static_cast<std::size_t>(j)] = rng.normal();
    }
    const Vec zn = interp::norm_interp(z1, z2, 0.5);
    const Vec zl = interp::lerp(z1, z2, 0.5);
    for (int j = 0; j < d; ++j) {
      sum += zn[static_cast<std::size_t>(j)];
      sum_sq += zn[static_cast<std::size_t>(j)] * zn[static_cast<std::size_t>(j)];
      lerp_sq += zl[static_cast<std::size_t>(j)] * zl[static_cast<std::size_t>(j)];
    }
  }
  const double total = static_cast<double>(n) * d;
  CHECK(std::abs(sum / total) < 0.02);
  CHECK(sum_sq / total == doctest::Approx(1.0).epsilon(0.03));   // prior preserved
  CHECK(lerp_sq / total == doctest::Approx(0.5).epsilon(0.05));  // linear shrinkage
}
