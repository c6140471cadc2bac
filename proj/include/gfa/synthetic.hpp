#ifndef GFA_SYNTHETIC_HPP
#define GFA_SYNTHETIC_HPP

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfa/common.hpp"
#include "gfa/dataset.hpp"

namespace gfa {

/// Recipe for a synthetic multi-group dataset with known factor structure.
struct GenerationSpec {
  Index n = 0;
  std::vector<Index> group_dims;
  IntMatrix activity;        // M x K, 1 where a factor loads on a group
  double loading_scale = 1.0;
  double tau = 1.0;          // noise precision; +inf draws no noise
  std::vector<int> group_types;  // optional type labels used by presets

  int groups() const { return static_cast<int>(group_dims.size()); }
  Index factors() const { return activity.cols(); }

  void validate() const {
    if (n < 2) throw std::invalid_argument("need at least 2 samples");
    if (group_dims.empty()) {
      throw std::invalid_argument("need at least one group");
    }
    for (Index d : group_dims) {
      if (d <= 0) throw std::invalid_argument("group dimensions must be > 0");
    }
    if (activity.rows() != groups()) {
      throw std::invalid_argument("activity has " +
                                  std::to_string(activity.rows()) +
                                  " rows for " + std::to_string(groups()) +
                                  " groups");
    }
    if (activity.cols() < 1) {
      throw std::invalid_argument("need at least one factor");
    }
    for (Index i = 0; i < activity.rows(); ++i) {
      for (Index j = 0; j < activity.cols(); ++j) {
        if (activity(i, j) != 0 && activity(i, j) != 1) {
          throw std::invalid_argument("activity entries must be 0 or 1");
        }
      }
    }
    if (loading_scale <= 0) {
      throw std::invalid_argument("loading_scale must be positive");
    }
    if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
  }
};

struct GroundTruth {
  Matrix z_true;                // N x K
  std::vector<Matrix> w_true;   // per group D_m x K, zero where inactive
  IntMatrix activity;
  double tau = 1.0;
};

struct SyntheticData {
  GroupedDataset data;
  GroundTruth truth;
};

/// Draws scores, loadings on the active cells, and observation noise, in
/// that fixed order, so one seed pins the dataset exactly.
inline SyntheticData generate(const GenerationSpec& spec,
                              std::uint64_t seed) {
  spec.validate();
  const Index k = spec.factors();
  Rng rng(seed);

  GroundTruth truth;
  truth.activity = spec.activity;
  truth.tau = spec.tau;
  truth.z_true = random_normal(spec.n, k, rng);
  truth.w_true.resize(spec.groups());
  std::normal_distribution<double> loading(0.0, spec.loading_scale);
  for (int m = 0; m < spec.groups(); ++m) {
    Matrix w = Matrix::Zero(spec.group_dims[m], k);
    for (Index d = 0; d < spec.group_dims[m]; ++d) {
      for (Index j = 0; j < k; ++j) {
        if (spec.activity(m, j) == 1) w(d, j) = loading(rng);
      }
    }
    truth.w_true[m] = std::move(w);
  }

  Index total = 0;
  for (Index d : spec.group_dims) total += d;
  Matrix x(spec.n, total);
  const bool noise_free = std::isinf(spec.tau);
  const double noise_sd = noise_free ? 0.0 : 1.0 / std::sqrt(spec.tau);
  Index offset = 0;
  for (int m = 0; m < spec.groups(); ++m) {
    x.middleCols(offset, spec.group_dims[m]) =
        truth.z_true * truth.w_true[m].transpose();
    if (!noise_free) {
      x.middleCols(offset, spec.group_dims[m]) +=
          random_normal(spec.n, spec.group_dims[m], rng, noise_sd);
    }
    offset += spec.group_dims[m];
  }

  SyntheticData out;
  out.data = build_dataset(std::move(x), spec.group_dims);
  out.truth = std::move(truth);
  return out;
}

/// Three groups of ten variables sharing seven factors: one fully shared,
/// three shared pairwise, three private.
inline GenerationSpec three_group_toy_spec() {
  GenerationSpec spec;
  spec.n = 100;
  spec.group_dims = {10, 10, 10};
  spec.activity.resize(3, 7);
  spec.activity << 1, 1, 1, 0, 1, 0, 0,
                   1, 1, 0, 1, 0, 1, 0,
                   1, 0, 1, 1, 0, 0, 1;
  return spec;
}

/// Many small groups falling into four equal types; eighteen factors, each
/// active in exactly two of the four types (three factors per type pair).
inline GenerationSpec typed_groups_spec(int m_groups) {
  if (m_groups < 4 || m_groups % 4 != 0) {
    throw std::invalid_argument("group count must be a positive multiple of 4");
  }
  GenerationSpec spec;
  spec.n = 30;
  spec.group_dims.assign(m_groups, 7);
  spec.group_types.resize(m_groups);
  const int per_type = m_groups / 4;
  for (int m = 0; m < m_groups; ++m) spec.group_types[m] = m / per_type;

  const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  spec.activity = IntMatrix::Zero(m_groups, 18);
  for (int p = 0; p < 6; ++p) {
    for (int r = 0; r < 3; ++r) {
      const Index j = 3 * p + r;
      for (int m = 0; m < m_groups; ++m) {
        const int t = spec.group_types[m];
        if (t == pairs[p][0] || t == pairs[p][1]) spec.activity(m, j) = 1;
      }
    }
  }
  return spec;
}

/// Groups fall into n_types types with random distinct activity patterns
/// over k factors. The patterns are redrawn until they are affinely
/// independent, so the log association-strength matrix the model must
/// explain has structure rank exactly n_types - 1, and until every factor
/// is active in at least one type.
inline GenerationSpec random_typed_spec(Index n, int m_groups, int n_types,
                                        Index k, Index dim,
                                        std::uint64_t seed) {
  if (n_types < 1 || n_types > m_groups) {
    throw std::invalid_argument("n_types must be in [1, groups]");
  }
  if (n_types > k + 1) {
    throw std::invalid_argument(
        "cannot place " + std::to_string(n_types) +
        " affinely independent patterns over " + std::to_string(k) +
        " factors");
  }
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);

  IntMatrix type_rows(n_types, k);
  for (int attempt = 0;; ++attempt) {
    if (attempt > 100000) {
      throw std::runtime_error("failed to draw usable type patterns");
    }
    for (int t = 0; t < n_types; ++t) {
      for (Index j = 0; j < k; ++j) type_rows(t, j) = coin(rng) ? 1 : 0;
    }
    bool rows_ok = true;
    for (int t = 0; t < n_types && rows_ok; ++t) {
      if (type_rows.row(t).sum() == 0) rows_ok = false;
    }
    for (Index j = 0; j < k && rows_ok; ++j) {
      if (type_rows.col(j).sum() == 0) rows_ok = false;
    }
    if (!rows_ok) continue;
    // Affine independence: [patterns | 1] must have full row rank.
    Matrix aug(n_types, k + 1);
    aug.leftCols(k) = type_rows.cast<double>();
    aug.col(k).setOnes();
    if (Eigen::FullPivLU<Matrix>(aug).rank() == n_types) break;
  }

  GenerationSpec spec;
  spec.n = n;
  spec.group_dims.assign(m_groups, dim);
  spec.group_types.resize(m_groups);
  spec.activity.resize(m_groups, k);
  for (int m = 0; m < m_groups; ++m) {
    spec.group_types[m] = m % n_types;
    spec.activity.row(m) = type_rows.row(spec.group_types[m]);
  }
  return spec;
}

/// Recipe for a dataset whose log association strengths are themselves a
/// low-rank matrix: log alpha = s / sqrt(R) * U V^T with standard normal
/// U (M x R) and V (K x R). The 1/sqrt(R) factor keeps the per-cell spread
/// at `log_alpha_spread` regardless of the rank, so datasets of different
/// structure rank are comparable in signal strength.
struct RankedAlphaSpec {
  Index n = 0;
  std::vector<Index> group_dims;
  Index k = 0;
  int rank = 0;
  double tau = 1.0;               // observation precision; +inf = noise-free
  double log_alpha_spread = 2.0;  // per-cell standard deviation of log alpha

  int groups() const { return static_cast<int>(group_dims.size()); }

  void validate() const {
    if (n <= 0) throw std::invalid_argument("sample count must be positive");
    if (group_dims.empty()) {
      throw std::invalid_argument("need at least one group");
    }
    for (Index d : group_dims) {
      if (d <= 0) {
        throw std::invalid_argument("group dimensions must be positive");
      }
    }
    if (k <= 0) throw std::invalid_argument("factor count must be positive");
    if (rank < 0) {
      throw std::invalid_argument("structure rank must be non-negative");
    }
    if (!(tau > 0.0)) {
      throw std::invalid_argument("noise precision must be positive");
    }
    if (!(log_alpha_spread >= 0.0)) {
      throw std::invalid_argument("log alpha spread must be non-negative");
    }
  }
};

struct RankedAlphaTruth {
  Matrix u;                    // M x R
  Matrix v;                    // K x R
  Matrix log_alpha;            // M x K
  Matrix z_true;               // N x K
  std::vector<Matrix> w_true;  // per group D_m x K
  double tau = 1.0;
};

struct RankedAlphaData {
  GroupedDataset data;
  RankedAlphaTruth truth;
};

/// Draws U, V, the scores, then per group the loadings (factor by factor,
/// each factor's scale exp(-log alpha / 2)) and the observation noise, in
/// that fixed order, so one seed pins the dataset exactly. Rank zero gives a
/// flat zero log alpha, i.e. unit-scale loadings everywhere.
inline RankedAlphaData generate_ranked_alpha(const RankedAlphaSpec& spec,
                                             std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  RankedAlphaTruth truth;
  truth.tau = spec.tau;
  truth.u = random_normal(spec.groups(), spec.rank, rng);
  truth.v = random_normal(spec.k, spec.rank, rng);
  const double cell_scale =
      spec.log_alpha_spread / std::sqrt(double(std::max(spec.rank, 1)));
  truth.log_alpha = cell_scale * (truth.u * truth.v.transpose());
  truth.z_true = random_normal(spec.n, spec.k, rng);

  Index total = 0;
  for (Index d : spec.group_dims) total += d;
  Matrix x(spec.n, total);
  std::normal_distribution<double> unit(0.0, 1.0);
  const bool noise_free = std::isinf(spec.tau);
  const double noise_sd = noise_free ? 0.0 : 1.0 / std::sqrt(spec.tau);
  truth.w_true.resize(spec.groups());
  Index offset = 0;
  for (int m = 0; m < spec.groups(); ++m) {
    const Index dm = spec.group_dims[m];
    Matrix w(dm, spec.k);
    for (Index j = 0; j < spec.k; ++j) {
      const double sd = std::exp(-0.5 * truth.log_alpha(m, j));
      for (Index d = 0; d < dm; ++d) w(d, j) = sd * unit(rng);
    }
    x.middleCols(offset, dm) = truth.z_true * w.transpose();
    if (!noise_free) {
      for (Index i = 0; i < spec.n; ++i) {
        for (Index d = 0; d < dm; ++d) x(i, offset + d) += noise_sd * unit(rng);
      }
    }
    truth.w_true[m] = std::move(w);
    offset += dm;
  }

  RankedAlphaData out;
  out.data = build_dataset(std::move(x), spec.group_dims);
  out.truth = std::move(truth);
  return out;
}

/// Alignment of estimated components to reference components by greedy
/// bipartite matching on absolute cosine similarity of stacked loadings.
struct ComponentMatch {
  std::vector<Index> permutation;  // per reference column: matched estimate
  std::vector<double> signs;       // sign flip making the cosine positive
  std::vector<double> cosines;     // absolute cosine of each matched pair
};

inline Matrix stacked_loadings(const std::vector<Matrix>& w) {
  if (w.empty()) throw std::invalid_argument("no loading blocks");
  Index rows = 0;
  for (const Matrix& block : w) rows += block.rows();
  Matrix out(rows, w.front().cols());
  Index off = 0;
  for (const Matrix& block : w) {
    out.middleRows(off, block.rows()) = block;
    off += block.rows();
  }
  return out;
}

/// Matches each reference column to a distinct estimated column, taking the
/// globally largest remaining |cosine| first. A reference column left over
/// when estimates run out gets permutation -1 and cosine 0.
inline ComponentMatch match_components(const Matrix& estimated,
                                       const Matrix& reference) {
  if (estimated.rows() != reference.rows()) {
    throw std::invalid_argument("component matrices must share row count");
  }
  const Index ke = estimated.cols();
  const Index kr = reference.cols();
  Matrix cosine = Matrix::Zero(kr, ke);
  Matrix sign = Matrix::Ones(kr, ke);
  for (Index r = 0; r < kr; ++r) {
    const double rn = reference.col(r).norm();
    for (Index e = 0; e < ke; ++e) {
      const double en = estimated.col(e).norm();
      if (rn == 0.0 || en == 0.0) continue;
      const double c = reference.col(r).dot(estimated.col(e)) / (rn * en);
      cosine(r, e) = std::abs(c);
      sign(r, e) = c < 0.0 ? -1.0 : 1.0;
    }
  }

  ComponentMatch match;
  match.permutation.assign(kr, -1);
  match.signs.assign(kr, 1.0);
  match.cosines.assign(kr, 0.0);
  std::vector<bool> ref_used(kr, false), est_used(ke, false);
  const Index assignments = std::min(kr, ke);
  for (Index step = 0; step < assignments; ++step) {
    Index best_r = -1, best_e = -1;
    double best = -1.0;
    for (Index r = 0; r < kr; ++r) {
      if (ref_used[r]) continue;
      for (Index e = 0; e < ke; ++e) {
        if (est_used[e]) continue;
        if (cosine(r, e) > best) {
          best = cosine(r, e);
          best_r = r;
          best_e = e;
        }
      }
    }
    ref_used[best_r] = true;
    est_used[best_e] = true;
    match.permutation[best_r] = best_e;
    match.signs[best_r] = sign(best_r, best_e);
    match.cosines[best_r] = cosine(best_r, best_e);
  }
  return match;
}

/// Thresholds association strengths into a binary activity pattern: a factor
/// is active in a group when its strength is strictly below the threshold.
inline IntMatrix activity_from_alpha(const Matrix& alpha,
                                     double threshold = 10.0) {
  IntMatrix out(alpha.rows(), alpha.cols());
  for (Index i = 0; i < alpha.rows(); ++i) {
    for (Index j = 0; j < alpha.cols(); ++j) {
      out(i, j) = alpha(i, j) < threshold ? 1 : 0;
    }
  }
  return out;
}

}  // namespace gfa

#endif  // GFA_SYNTHETIC_HPP
