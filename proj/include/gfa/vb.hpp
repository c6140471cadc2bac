#ifndef GFA_VB_HPP
#define GFA_VB_HPP

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gfa/common.hpp"
#include "gfa/dataset.hpp"
#include "gfa/hyperparameters.hpp"
#include "gfa/lowrank_alpha.hpp"
#include "gfa/state.hpp"

namespace gfa {

/// Random initialization. Draw order is fixed (factor scores, then loadings
/// group by group, then u, then v) so a seed pins the whole state.
inline PosteriorState init_state(const GroupedDataset& data,
                                 const Hyperparameters& h,
                                 std::uint64_t seed) {
  const Index n = data.samples();
  const int m_groups = data.groups();
  const Index k = h.k_init;
  Rng rng(seed);

  PosteriorState s;
  s.z_mean = random_normal(n, k, rng);
  s.z_cov = Matrix::Identity(k, k);
  s.w_mean.resize(m_groups);
  s.w_cov.resize(m_groups);
  const double k_scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (int m = 0; m < m_groups; ++m) {
    s.w_mean[m] = random_normal(data.group_dims[m], k, rng, k_scale);
    s.w_cov[m] = Matrix::Identity(k, k) / static_cast<double>(k);
  }

  s.tau_shape_post.resize(m_groups);
  s.tau_rate_post.resize(m_groups);
  for (int m = 0; m < m_groups; ++m) {
    // Rate equals shape so the initial noise precision mean is 1.
    s.tau_shape_post[m] =
        h.tau_shape + 0.5 * static_cast<double>(n * data.group_dims[m]);
    s.tau_rate_post[m] = s.tau_shape_post[m];
  }

  if (use_full_rank(h, m_groups)) {
    FullRankAlpha fr;
    fr.shape.resize(m_groups, k);
    for (int m = 0; m < m_groups; ++m) {
      fr.shape.row(m).setConstant(h.alpha_shape +
                                  0.5 * static_cast<double>(data.group_dims[m]));
    }
    fr.rate = fr.shape;
    s.alpha.value = std::move(fr);
  } else {
    LowRankAlpha lr;
    const Index r = h.rank;
    if (r > 0) {
      const double r_scale = 1.0 / std::sqrt(static_cast<double>(r));
      lr.u = random_normal(m_groups, r, rng, r_scale);
      lr.v = random_normal(k, r, rng, r_scale);
    } else {
      lr.u.resize(m_groups, 0);
      lr.v.resize(k, 0);
    }
    lr.mu_u = Vector::Zero(m_groups);
    lr.mu_v = Vector::Zero(k);
    s.alpha.value = std::move(lr);
  }
  s.active_k = static_cast<int>(k);
  return s;
}

/// Posterior expectation of ||X_m - Z W^(m)^T||_F^2 given the cached
/// second moments of the group's loadings (ww_m) and the scores (zz).
inline double expected_group_residual(const PosteriorState& s,
                                      const GroupedDataset& data, int m,
                                      const Matrix& ww_m, const Matrix& zz) {
  const auto x = data.group(m);
  const double fit_term =
      (x.array() * (s.z_mean * s.w_mean[m].transpose()).array()).sum();
  return x.squaredNorm() - 2.0 * fit_term + (ww_m.array() * zz.array()).sum();
}

/// Loading update: per group, rows share covariance
/// (tau_m <Z^T Z> + diag(alpha_m))^-1.
inline void update_w(PosteriorState& s, const GroupedDataset& data,
                     const Hyperparameters& h) {
  const Matrix zz = s.z_mean.transpose() * s.z_mean +
                    static_cast<double>(data.samples()) * s.z_cov;
  const Matrix alpha = s.alpha.expected(h.log_alpha_cap);
  const Vector tau = s.tau_mean();
  for (int m = 0; m < data.groups(); ++m) {
    Matrix precision = tau[m] * zz;
    precision.diagonal() += alpha.row(m).transpose();
    s.w_cov[m] = spd_inverse(precision, "loading update");
    s.w_mean[m] =
        tau[m] * (data.group(m).transpose() * s.z_mean) * s.w_cov[m];
  }
}

/// Factor-score update: rows share covariance
/// (I + sum_m tau_m <W^(m) W^(m)^T>)^-1.
inline void update_z(PosteriorState& s, const GroupedDataset& data) {
  const Index k = s.z_mean.cols();
  const Vector tau = s.tau_mean();
  Matrix precision = Matrix::Identity(k, k);
  Matrix projected = Matrix::Zero(data.samples(), k);
  for (int m = 0; m < data.groups(); ++m) {
    precision += tau[m] * ww_second_moment(s, m, data.group_dims[m]);
    projected += tau[m] * (data.group(m) * s.w_mean[m]);
  }
  s.z_cov = spd_inverse(precision, "factor-score update");
  s.z_mean = projected * s.z_cov;
}

/// Noise precision update: gamma posterior with rate driven by the expected
/// reconstruction residual.
inline void update_tau(PosteriorState& s, const GroupedDataset& data,
                       const Hyperparameters& h) {
  const Matrix zz = s.z_mean.transpose() * s.z_mean +
                    static_cast<double>(data.samples()) * s.z_cov;
  for (int m = 0; m < data.groups(); ++m) {
    const Matrix ww = ww_second_moment(s, m, data.group_dims[m]);
    const double resid = expected_group_residual(s, data, m, ww, zz);
    s.tau_shape_post[m] =
        h.tau_shape +
        0.5 * static_cast<double>(data.samples() * data.group_dims[m]);
    s.tau_rate_post[m] = h.tau_rate + 0.5 * resid;
    if (!(s.tau_rate_post[m] > 0.0) || !std::isfinite(s.tau_rate_post[m])) {
      throw numerical_error("noise precision update for group " +
                            data.group_names[m] +
                            " produced a non-positive rate");
    }
  }
}

/// Conjugate per-element association update, valid when the decomposition
/// rank is maximal.
inline void update_alpha_fullrank(PosteriorState& s,
                                  const GroupedDataset& data,
                                  const Hyperparameters& h) {
  auto& fr = std::get<FullRankAlpha>(s.alpha.value);
  const Index k = s.z_mean.cols();
  fr.shape.resize(data.groups(), k);
  fr.rate.resize(data.groups(), k);
  for (int m = 0; m < data.groups(); ++m) {
    const Matrix ww = ww_second_moment(s, m, data.group_dims[m]);
    fr.shape.row(m).setConstant(
        h.alpha_shape + 0.5 * static_cast<double>(data.group_dims[m]));
    fr.rate.row(m) =
        (h.alpha_rate + 0.5 * ww.diagonal().array()).transpose();
  }
}

/// Low-rank association update: quasi-Newton ascent on the bound terms that
/// depend on the decomposition.
inline OptimizeUvReport update_alpha_lowrank(PosteriorState& s,
                                             const GroupedDataset& data,
                                             const Hyperparameters& h) {
  auto& lr = std::get<LowRankAlpha>(s.alpha.value);
  Matrix ww_diags(data.groups(), s.z_mean.cols());
  for (int m = 0; m < data.groups(); ++m) {
    ww_diags.row(m) =
        ww_second_moment(s, m, data.group_dims[m]).diagonal().transpose();
  }
  return optimize_uv(lr, ww_diags, data.group_dims, h.lambda,
                     h.log_alpha_cap, h.inner_opt);
}

/// Removes factors whose mean squared score dropped below the threshold.
/// At least one factor survives. Returns the number removed.
inline int prune_factors(PosteriorState& s, const Hyperparameters& h) {
  const Index k = s.z_mean.cols();
  const double n = static_cast<double>(s.z_mean.rows());
  Vector usage = s.z_mean.colwise().squaredNorm() / n;

  std::vector<Index> keep;
  keep.reserve(k);
  for (Index j = 0; j < k; ++j) {
    if (usage[j] >= h.prune_threshold) keep.push_back(j);
  }
  if (keep.empty()) {
    Index best = 0;
    usage.maxCoeff(&best);
    keep.push_back(best);
  }
  const int removed = static_cast<int>(k) - static_cast<int>(keep.size());
  if (removed == 0) return 0;

  s.z_mean = Matrix(s.z_mean(Eigen::all, keep));
  s.z_cov = Matrix(s.z_cov(keep, keep));
  for (int m = 0; m < s.groups(); ++m) {
    s.w_mean[m] = Matrix(s.w_mean[m](Eigen::all, keep));
    s.w_cov[m] = Matrix(s.w_cov[m](keep, keep));
  }
  if (s.alpha.low_rank()) {
    auto& lr = std::get<LowRankAlpha>(s.alpha.value);
    lr.v = Matrix(lr.v(keep, Eigen::all));
    lr.mu_v = Vector(lr.mu_v(keep));
  } else {
    auto& fr = std::get<FullRankAlpha>(s.alpha.value);
    fr.shape = Matrix(fr.shape(Eigen::all, keep));
    fr.rate = Matrix(fr.rate(Eigen::all, keep));
  }
  s.active_k = static_cast<int>(keep.size());
  return removed;
}

/// Posterior expectation of log alpha per (group, factor) cell.
inline Matrix expected_log_alpha(const PosteriorState& s,
                                 const Hyperparameters& h) {
  if (s.alpha.low_rank()) {
    return clamped_log_alpha(std::get<LowRankAlpha>(s.alpha.value),
                             h.log_alpha_cap);
  }
  const auto& fr = std::get<FullRankAlpha>(s.alpha.value);
  Matrix out(fr.shape.rows(), fr.shape.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      out(i, j) = boost::math::digamma(fr.shape(i, j)) -
                  std::log(fr.rate(i, j));
    }
  }
  return out;
}

namespace detail {

/// E_q[log p(theta)] - E_q[log q(theta)] for gamma prior (a0, b0) and gamma
/// posterior (a, b).
inline double gamma_bound_term(double a, double b, double a0, double b0) {
  const double elog = boost::math::digamma(a) - std::log(b);
  const double e = a / b;
  const double prior = a0 * std::log(b0) - std::lgamma(a0) +
                       (a0 - 1.0) * elog - b0 * e;
  const double entropy_neg = a * std::log(b) - std::lgamma(a) +
                             (a - 1.0) * elog - a;
  return prior - entropy_neg;
}

inline void check_finite(double value, const char* term) {
  if (!std::isfinite(value)) {
    throw numerical_error(std::string("lower bound term '") + term +
                          "' is not finite");
  }
}

}  // namespace detail

/// Variational lower bound on the marginal likelihood of the centered data.
/// Additive constants from the priors of the decomposition parameters are
/// dropped; everything that varies during fitting is included.
inline double lower_bound(const PosteriorState& s, const GroupedDataset& data,
                          const Hyperparameters& h) {
  static constexpr double kLog2Pi = 1.8378770664093453;
  const double n = static_cast<double>(data.samples());
  const Index k = s.z_mean.cols();

  MomentCache cache;
  cache.compute(s, data.group_dims);
  const Matrix alpha_mean = s.alpha.expected(h.log_alpha_cap);
  const Matrix alpha_log = expected_log_alpha(s, h);

  double likelihood = 0.0;
  for (int m = 0; m < data.groups(); ++m) {
    const double nd = n * static_cast<double>(data.group_dims[m]);
    const double elog_tau =
        boost::math::digamma(s.tau_shape_post[m]) -
        std::log(s.tau_rate_post[m]);
    const double resid =
        expected_group_residual(s, data, m, cache.ww[m], cache.zz);
    likelihood +=
        0.5 * nd * (elog_tau - kLog2Pi) - 0.5 * cache.tau_mean[m] * resid;
  }
  detail::check_finite(likelihood, "likelihood");

  double z_term = 0.5 * n * spd_log_det(s.z_cov, "lower bound (score cov)") +
                  0.5 * n * static_cast<double>(k) -
                  0.5 * cache.zz.trace();
  detail::check_finite(z_term, "factor scores");

  double w_term = 0.0;
  for (int m = 0; m < data.groups(); ++m) {
    const double dm = static_cast<double>(data.group_dims[m]);
    w_term += 0.5 * dm *
                  spd_log_det(s.w_cov[m], "lower bound (loading cov)") +
              0.5 * dm * static_cast<double>(k);
    for (Index j = 0; j < k; ++j) {
      w_term += 0.5 * dm * alpha_log(m, j) -
                0.5 * alpha_mean(m, j) * cache.ww[m](j, j);
    }
  }
  detail::check_finite(w_term, "loadings");

  double tau_term = 0.0;
  for (int m = 0; m < data.groups(); ++m) {
    tau_term += detail::gamma_bound_term(s.tau_shape_post[m],
                                         s.tau_rate_post[m], h.tau_shape,
                                         h.tau_rate);
  }
  detail::check_finite(tau_term, "noise precision");

  double alpha_term = 0.0;
  if (s.alpha.low_rank()) {
    const auto& lr = std::get<LowRankAlpha>(s.alpha.value);
    alpha_term =
        -0.5 * h.lambda * (lr.u.squaredNorm() + lr.v.squaredNorm());
  } else {
    const auto& fr = std::get<FullRankAlpha>(s.alpha.value);
    for (Index i = 0; i < fr.shape.rows(); ++i) {
      for (Index j = 0; j < fr.shape.cols(); ++j) {
        alpha_term += detail::gamma_bound_term(fr.shape(i, j), fr.rate(i, j),
                                               h.alpha_shape, h.alpha_rate);
      }
    }
  }
  detail::check_finite(alpha_term, "association strengths");

  return likelihood + z_term + w_term + tau_term + alpha_term;
}

/// Full variational fit on raw data. Columns are centered (and optionally
/// standardized) internally; the transform is recorded on the result.
inline FittedModel fit(const GroupedDataset& raw, const Hyperparameters& h,
                       std::uint64_t seed) {
  h.validate(raw.groups());

  auto [centered, means] = center_columns(raw);
  Vector scales = Vector::Ones(centered.dims());
  if (h.standardize) {
    auto [scaled, sds] = scale_columns(std::move(centered));
    centered = std::move(scaled);
    scales = std::move(sds);
  }

  FittedModel model;
  model.state = init_state(centered, h, seed);
  model.column_means = std::move(means);
  model.column_scales = std::move(scales);
  model.seed = seed;
  model.group_dims = centered.group_dims;
  model.group_names = centered.group_names;
  model.hyper = h;
  model.elbo_trace.reserve(256);

  const bool full_rank = use_full_rank(h, centered.groups());
  for (long iter = 0; iter < h.max_iters; ++iter) {
    prune_factors(model.state, h);
    update_w(model.state, centered, h);
    update_z(model.state, centered);
    if (full_rank) {
      update_alpha_fullrank(model.state, centered, h);
    } else {
      update_alpha_lowrank(model.state, centered, h);
    }
    update_tau(model.state, centered, h);

    const double bound = lower_bound(model.state, centered, h);
    model.elbo_trace.push_back(bound);
    const std::size_t t = model.elbo_trace.size();
    if (t >= 2) {
      const double prev = model.elbo_trace[t - 2];
      if (std::abs(bound - prev) < h.elbo_rel_tol * std::abs(bound)) {
        model.converged = true;
        break;
      }
    }
  }
  model.state.active_k = static_cast<int>(model.state.z_mean.cols());
  return model;
}

}  // namespace gfa

#endif  // GFA_VB_HPP
