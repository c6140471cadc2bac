#include <catch2/catch_amalgamated.hpp>

#include "gfa/lbfgs.hpp"

using namespace gfa;

namespace {

// f(x) = 1/2 (x - c)^T A (x - c) with A diagonal positive.
struct Quadratic {
  Vector c;
  Vector a;
  double operator()(const Vector& x, Vector& grad) const {
    grad = a.cwiseProduct(x - c);
    return 0.5 * (x - c).cwiseProduct(grad).sum();
  }
};

double rosenbrock(const Vector& x, Vector& grad) {
  const double t1 = x[1] - x[0] * x[0];
  const double t2 = 1.0 - x[0];
  grad.resize(2);
  grad[0] = -400.0 * t1 * x[0] - 2.0 * t2;
  grad[1] = 200.0 * t1;
  return 100.0 * t1 * t1 + t2 * t2;
}

}  // namespace

TEST_CASE("lbfgs minimizes a quadratic to its center") {
  Quadratic q;
  q.c = Vector::LinSpaced(8, -2.0, 3.0);
  q.a = Vector::LinSpaced(8, 1.0, 20.0);
  Vector x = Vector::Zero(8);
  const auto res = lbfgs::minimize(q, x);

  REQUIRE(res.status == lbfgs::Status::kConverged);
  REQUIRE((x - q.c).lpNorm<Eigen::Infinity>() < 1e-5);
  REQUIRE(res.value < 1e-9);
}

TEST_CASE("lbfgs solves rosenbrock from the standard start") {
  Vector x(2);
  x << -1.2, 1.0;
  lbfgs::Options opt;
  opt.gradient_tolerance = 1e-9;
  const auto res = lbfgs::minimize(rosenbrock, x, opt);

  REQUIRE(res.status == lbfgs::Status::kConverged);
  REQUIRE_THAT(x[0], Catch::Matchers::WithinAbs(1.0, 1e-5));
  REQUIRE_THAT(x[1], Catch::Matchers::WithinAbs(1.0, 1e-5));
}

TEST_CASE("lbfgs returns immediately at a stationary start") {
  Quadratic q;
  q.c = Vector::Constant(3, 1.5);
  q.a = Vector::Constant(3, 4.0);
  Vector x = q.c;
  const auto res = lbfgs::minimize(q, x);
  REQUIRE(res.status == lbfgs::Status::kConverged);
  REQUIRE(res.iterations == 0);
  REQUIRE(x == q.c);
}

TEST_CASE("lbfgs never returns a worse point than the start") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    Quadratic q;
    q.c = random_normal(6, 1, rng).col(0);
    q.a = random_normal(6, 1, rng).col(0).cwiseAbs() + Vector::Constant(6, 0.1);
    Vector x = random_normal(6, 1, rng).col(0) * 10.0;
    Vector g(6);
    const double f0 = q(x, g);
    lbfgs::Options opt;
    opt.max_iterations = 3;  // force early stop
    const auto res = lbfgs::minimize(q, x, opt);
    REQUIRE(res.value <= f0);
    REQUIRE(q(x, g) == res.value);
  }
}

TEST_CASE("lbfgs gradient tolerance scales with the objective value") {
  // Shift the quadratic by a huge constant; an absolute gradient test at
  // 1e-6 would grind, the relative one stops quickly.
  Quadratic q;
  q.c = Vector::Constant(4, 2.0);
  q.a = Vector::Constant(4, 1.0);
  auto shifted = [&](const Vector& x, Vector& grad) {
    return q(x, grad) + 1e9;
  };
  Vector x = Vector::Zero(4);
  const auto res = lbfgs::minimize(shifted, x, {});
  REQUIRE(res.status == lbfgs::Status::kConverged);
  Vector g(4);
  shifted(x, g);
  REQUIRE(g.lpNorm<Eigen::Infinity>() <= 1e-6 * (1e9 + 1.0));
}

TEST_CASE("lbfgs value trace is strictly decreasing") {
  Vector x(2);
  x << -1.2, 1.0;
  std::vector<double> trace;
  lbfgs::Options opt;
  opt.value_trace = &trace;
  lbfgs::minimize(rosenbrock, x, opt);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    REQUIRE(trace[i] < trace[i - 1]);
  }
}

TEST_CASE("lbfgs handles an empty parameter vector") {
  Vector x(0);
  const auto res = lbfgs::minimize(
      [](const Vector&, Vector&) { return 0.0; }, x);
  REQUIRE(res.iterations == 0);
}
