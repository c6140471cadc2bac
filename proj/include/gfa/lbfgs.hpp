#ifndef GFA_LBFGS_HPP
#define GFA_LBFGS_HPP

#include <cmath>
#include <cstddef>
#include <deque>
#include <utility>
#include <vector>

#include "gfa/common.hpp"

namespace gfa::lbfgs {

struct Options {
  int memory = 10;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  // scaled by max(1, |f|)
  int max_line_search = 50;
  double armijo = 1e-4;   // sufficient-decrease constant
  double wolfe = 0.9;     // curvature constant
  std::vector<double>* value_trace = nullptr;  // f after each iteration
};

enum class Status { kConverged, kMaxIterations, kLineSearchFailed };

struct Result {
  double value = 0.0;
  int iterations = 0;
  Status status = Status::kConverged;
};

/// Limited-memory BFGS minimizer with backtracking Armijo line search.
/// `fg` evaluates the objective and writes its gradient: double(x, grad).
/// On return x holds the best iterate seen, so the result never has a
/// larger objective than the starting point.
template <class F>
Result minimize(F&& fg, Vector& x, const Options& opt = {}) {
  const Index n = x.size();
  Result res;
  if (n == 0) return res;

  Vector grad(n);
  double f = fg(x, grad);
  if (!std::isfinite(f)) {
    throw numerical_error("objective is not finite at the starting point");
  }

  Vector best_x = x;
  double best_f = f;

  std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs
  Vector direction(n), x_new(n), grad_new(n);

  auto converged = [&](double value, const Vector& g) {
    return g.lpNorm<Eigen::Infinity>() <=
           opt.gradient_tolerance * std::max(1.0, std::abs(value));
  };

  if (converged(f, grad)) {
    res.value = f;
    return res;
  }

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    // Two-loop recursion for d = -H * grad.
    direction = -grad;
    std::vector<double> alpha_coef(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      const auto& [s, y] = history[i];
      const double rho = 1.0 / y.dot(s);
      alpha_coef[i] = rho * s.dot(direction);
      direction -= alpha_coef[i] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      direction *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      const double rho = 1.0 / y.dot(s);
      const double beta = rho * y.dot(direction);
      direction += (alpha_coef[i] - beta) * s;
    }

    double descent = grad.dot(direction);
    if (!(descent < 0.0)) {
      // Curvature information went stale; restart from steepest descent.
      history.clear();
      direction = -grad;
      descent = -grad.squaredNorm();
    }

    // Weak-Wolfe line search by bisection: sufficient decrease caps the
    // step from above, the curvature condition pushes it up from below.
    // Curvature guarantees s.y > 0, keeping the inverse Hessian model
    // positive definite.
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double step = 1.0;
    double f_new = f;
    Vector x_acc, grad_acc;
    double f_acc = 0.0;
    bool have_acc = false;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = x + step * direction;
      f_new = fg(x_new, grad_new);
      if (!std::isfinite(f_new) ||
          f_new > f + opt.armijo * step * descent) {
        hi = step;
        step = 0.5 * (lo + hi);
        continue;
      }
      if (!have_acc || f_new <= f_acc) {
        x_acc = x_new;
        grad_acc = grad_new;
        f_acc = f_new;
        have_acc = true;
      }
      if (grad_new.dot(direction) < opt.wolfe * descent) {
        lo = step;
        step = std::isinf(hi) ? 2.0 * step : 0.5 * (lo + hi);
        continue;
      }
      break;  // both conditions hold at the point recorded above
    }
    if (!have_acc) {
      // No progress possible along this direction (typically the gradient
      // is accurate only to round-off here).
      res.value = best_f;
      res.iterations = iter;
      res.status = Status::kLineSearchFailed;
      x = best_x;
      return res;
    }
    x_new = std::move(x_acc);
    grad_new = std::move(grad_acc);
    f_new = f_acc;

    Vector s = x_new - x;
    Vector y = grad_new - grad;
    const double sy = s.dot(y);
    // Extra guard; bisection exhaustion can still deliver a non-curvature
    // point.
    if (sy > 1e-12 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(history.size()) > opt.memory) {
        history.pop_front();
      }
    }

    x.swap(x_new);
    grad.swap(grad_new);
    f = f_new;
    if (opt.value_trace) opt.value_trace->push_back(f);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }

    if (converged(f, grad)) {
      res.value = best_f;
      res.iterations = iter + 1;
      res.status = Status::kConverged;
      x = best_x;
      return res;
    }
  }

  res.value = best_f;
  res.iterations = opt.max_iterations;
  res.status = Status::kMaxIterations;
  x = best_x;
  return res;
}

}  // namespace gfa::lbfgs

#endif  // GFA_LBFGS_HPP
