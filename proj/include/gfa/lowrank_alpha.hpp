#ifndef GFA_LOWRANK_ALPHA_HPP
#define GFA_LOWRANK_ALPHA_HPP

#include <cmath>
#include <string>
#include <vector>

#include "gfa/common.hpp"
#include "gfa/hyperparameters.hpp"
#include "gfa/lbfgs.hpp"

namespace gfa {

/// Point-estimated low-rank decomposition of the log association strengths:
/// log alpha = u v^T + mu_u 1^T + 1 mu_v^T, with u: M x R, v: K x R.
struct LowRankAlpha {
  Matrix u;
  Matrix v;
  Vector mu_u;
  Vector mu_v;

  Index rank() const { return u.cols(); }
  int groups() const { return static_cast<int>(u.rows()); }
  Index factors() const { return v.rows(); }
};

inline Matrix log_alpha(const LowRankAlpha& p) {
  Matrix la = p.u * p.v.transpose();
  la.colwise() += p.mu_u;
  la.rowwise() += p.mu_v.transpose();
  return la;
}

/// Entries are clamped to [-cap, cap] so alpha itself stays within
/// machine-representable magnitudes; a factor driven to the cap carries
/// effectively zero loading mass.
inline Matrix clamped_log_alpha(const LowRankAlpha& p, double cap) {
  return log_alpha(p).array().min(cap).max(-cap).matrix();
}

inline Matrix expected_alpha(const LowRankAlpha& p, double cap) {
  return clamped_log_alpha(p, cap).array().exp().matrix();
}

/// Maximized objective for the decomposition parameters: twice the part of
/// the variational bound that depends on them,
///   sum_{m,k} (D_m log alpha_{mk} - ww_diags_{mk} alpha_{mk})
///     - lambda (||u||_F^2 + ||v||_F^2),
/// with log alpha clamped entrywise. ww_diags_{mk} is the posterior second
/// moment sum of group m's loadings on factor k; the mean offsets are not
/// penalized.
inline double alpha_objective(const LowRankAlpha& p, const Matrix& ww_diags,
                              const std::vector<Index>& dims, double lambda,
                              double cap) {
  const Matrix la = clamped_log_alpha(p, cap);
  const Matrix alpha = la.array().exp().matrix();
  double obj = 0.0;
  for (int m = 0; m < p.groups(); ++m) {
    const double dm = static_cast<double>(dims[m]);
    for (Index k = 0; k < p.factors(); ++k) {
      const double term = dm * la(m, k) - ww_diags(m, k) * alpha(m, k);
      if (!std::isfinite(term)) {
        throw numerical_error("association objective is not finite at group " +
                              std::to_string(m) + ", factor " +
                              std::to_string(k));
      }
      obj += term;
    }
  }
  obj -= lambda * (p.u.squaredNorm() + p.v.squaredNorm());
  return obj;
}

struct AlphaGradient {
  Matrix u;
  Matrix v;
  Vector mu_u;
  Vector mu_v;
};

/// Exact gradient of alpha_objective. Entries whose raw log alpha sits at or
/// beyond the clamp have zero sensitivity and are masked out of A.
inline AlphaGradient alpha_gradient(const LowRankAlpha& p,
                                    const Matrix& ww_diags,
                                    const std::vector<Index>& dims,
                                    double lambda, double cap) {
  const Matrix raw = log_alpha(p);
  const Matrix alpha = raw.array().min(cap).max(-cap).exp().matrix();
  Matrix a(p.groups(), p.factors());
  for (int m = 0; m < p.groups(); ++m) {
    const double dm = static_cast<double>(dims[m]);
    for (Index k = 0; k < p.factors(); ++k) {
      a(m, k) = std::abs(raw(m, k)) >= cap
                    ? 0.0
                    : dm - ww_diags(m, k) * alpha(m, k);
    }
  }
  AlphaGradient g;
  g.u = a * p.v - 2.0 * lambda * p.u;
  g.v = a.transpose() * p.u - 2.0 * lambda * p.v;
  g.mu_u = a.rowwise().sum();
  g.mu_v = a.colwise().sum().transpose();
  return g;
}

struct OptimizeUvReport {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool line_search_warning = false;
  std::vector<double> trace;  // objective after each accepted step
};

namespace detail {

inline Vector pack_alpha(const LowRankAlpha& p) {
  const Index r = p.rank();
  const Index m = p.u.rows();
  const Index k = p.v.rows();
  Vector x(m * r + k * r + m + k);
  Index pos = 0;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < r; ++j) x[pos++] = p.u(i, j);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < r; ++j) x[pos++] = p.v(i, j);
  x.segment(pos, m) = p.mu_u;
  pos += m;
  x.segment(pos, k) = p.mu_v;
  return x;
}

inline void unpack_alpha(const Vector& x, LowRankAlpha& p) {
  const Index r = p.rank();
  const Index m = p.u.rows();
  const Index k = p.v.rows();
  Index pos = 0;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < r; ++j) p.u(i, j) = x[pos++];
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < r; ++j) p.v(i, j) = x[pos++];
  p.mu_u = x.segment(pos, m);
  pos += m;
  p.mu_v = x.segment(pos, k);
}

}  // namespace detail

/// Ascends alpha_objective in place with the limited-memory quasi-Newton
/// solver. The result never has a lower objective than the input.
inline OptimizeUvReport optimize_uv(LowRankAlpha& p, const Matrix& ww_diags,
                                    const std::vector<Index>& dims,
                                    double lambda, double cap,
                                    const InnerOptSettings& settings) {
  OptimizeUvReport report;
  report.initial_objective = alpha_objective(p, ww_diags, dims, lambda, cap);

  Vector x = detail::pack_alpha(p);
  LowRankAlpha work = p;
  auto fg = [&](const Vector& xi, Vector& grad) {
    detail::unpack_alpha(xi, work);
    const AlphaGradient g =
        alpha_gradient(work, ww_diags, dims, lambda, cap);
    AlphaGradient neg{-g.u, -g.v, -g.mu_u, -g.mu_v};
    LowRankAlpha holder{neg.u, neg.v, neg.mu_u, neg.mu_v};
    grad = detail::pack_alpha(holder);
    return -alpha_objective(work, ww_diags, dims, lambda, cap);
  };

  std::vector<double> neg_trace;
  lbfgs::Options opt;
  opt.memory = settings.memory;
  opt.max_iterations = settings.max_iters;
  opt.gradient_tolerance = settings.grad_tol;
  opt.value_trace = &neg_trace;
  const lbfgs::Result res = lbfgs::minimize(fg, x, opt);

  detail::unpack_alpha(x, p);
  report.final_objective = -res.value;
  report.iterations = res.iterations;
  report.line_search_warning = res.status == lbfgs::Status::kLineSearchFailed;
  report.trace.reserve(neg_trace.size());
  for (double v : neg_trace) report.trace.push_back(-v);
  return report;
}

}  // namespace gfa

#endif  // GFA_LOWRANK_ALPHA_HPP
