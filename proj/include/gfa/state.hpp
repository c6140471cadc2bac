#ifndef GFA_STATE_HPP
#define GFA_STATE_HPP

#include <string>
#include <variant>
#include <vector>

#include "gfa/common.hpp"
#include "gfa/hyperparameters.hpp"
#include "gfa/lowrank_alpha.hpp"

namespace gfa {

/// Independent gamma posteriors over association strengths, one per
/// (group, factor) cell. Used when the decomposition rank is maximal.
struct FullRankAlpha {
  Matrix shape;  // M x K
  Matrix rate;   // M x K

  Matrix mean() const { return (shape.array() / rate.array()).matrix(); }
};

/// Association strengths under either parameterization.
struct AlphaModel {
  std::variant<LowRankAlpha, FullRankAlpha> value;

  bool low_rank() const {
    return std::holds_alternative<LowRankAlpha>(value);
  }

  /// Posterior mean (full rank) or clamped point estimate (low rank) of
  /// alpha, as an M x K matrix.
  Matrix expected(double cap) const {
    if (low_rank()) {
      return expected_alpha(std::get<LowRankAlpha>(value), cap);
    }
    return std::get<FullRankAlpha>(value).mean();
  }
};

/// Variational posterior over all latent quantities. Factor-score rows share
/// one covariance; loading rows within a group share one covariance.
struct PosteriorState {
  Matrix z_mean;                 // N x K
  Matrix z_cov;                  // K x K
  std::vector<Matrix> w_mean;    // per group, D_m x K
  std::vector<Matrix> w_cov;     // per group, K x K
  Vector tau_shape_post;         // per group
  Vector tau_rate_post;          // per group
  AlphaModel alpha;
  int active_k = 0;

  int groups() const { return static_cast<int>(w_mean.size()); }

  Vector tau_mean() const {
    return (tau_shape_post.array() / tau_rate_post.array()).matrix();
  }
};

/// Posterior second moment of group m's loading matrix,
/// <W^(m) W^(m)^T> summed over the D_m rows: K x K.
inline Matrix ww_second_moment(const PosteriorState& s, int m, Index dm) {
  return s.w_mean[m].transpose() * s.w_mean[m] +
         static_cast<double>(dm) * s.w_cov[m];
}

/// Moments shared by several update equations, computed once per sweep.
struct MomentCache {
  std::vector<Matrix> ww;  // per group, K x K loading second moments
  Matrix zz;               // K x K factor-score second moment sum
  Vector tau_mean;

  void compute(const PosteriorState& s, const std::vector<Index>& dims) {
    const int m_groups = s.groups();
    ww.resize(m_groups);
    for (int m = 0; m < m_groups; ++m) {
      ww[m] = ww_second_moment(s, m, dims[m]);
    }
    zz = s.z_mean.transpose() * s.z_mean +
         static_cast<double>(s.z_mean.rows()) * s.z_cov;
    tau_mean = s.tau_mean();
  }
};

/// Result of a variational fit, together with the preprocessing transform
/// needed to map new raw data into the model's frame.
struct FittedModel {
  PosteriorState state;
  Vector column_means;
  Vector column_scales;  // all ones unless standardization was requested
  std::vector<double> elbo_trace;
  bool converged = false;
  std::uint64_t seed = 0;
  std::vector<Index> group_dims;
  std::vector<std::string> group_names;
  Hyperparameters hyper;

  double final_elbo() const { return elbo_trace.back(); }
};

}  // namespace gfa

#endif  // GFA_STATE_HPP
