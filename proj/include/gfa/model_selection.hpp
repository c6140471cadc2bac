#ifndef GFA_MODEL_SELECTION_HPP
#define GFA_MODEL_SELECTION_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gfa/common.hpp"
#include "gfa/dataset.hpp"
#include "gfa/prediction.hpp"
#include "gfa/vb.hpp"

namespace gfa {

namespace detail {

inline GroupedDataset subset_rows(const GroupedDataset& ds,
                                  const std::vector<Index>& rows) {
  GroupedDataset out = ds;
  out.data = Matrix(ds.data(rows, Eigen::all));
  return out;
}

inline std::vector<int> sorted_unique(std::vector<int> ranks) {
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  return ranks;
}

}  // namespace detail

/// Runs independent fits from seeds base_seed .. base_seed + n_restarts - 1
/// and keeps the one with the highest final bound. Ties keep the earliest
/// seed. Restarts that fail numerically are skipped unless all fail.
inline FittedModel multi_restart_fit(const GroupedDataset& data,
                                     const Hyperparameters& h, int n_restarts,
                                     std::uint64_t base_seed, int jobs = 1) {
  if (n_restarts < 1) {
    throw std::invalid_argument("need at least one restart");
  }
  std::vector<std::optional<FittedModel>> fits(n_restarts);
  std::vector<std::string> failures(n_restarts);
  parallel_for(n_restarts, jobs, [&](int i) {
    try {
      fits[i] = fit(data, h, base_seed + static_cast<std::uint64_t>(i));
    } catch (const numerical_error& e) {
      failures[i] = e.what();
    }
  });

  int best = -1;
  for (int i = 0; i < n_restarts; ++i) {
    if (!fits[i]) continue;
    if (best < 0 || fits[i]->final_elbo() > fits[best]->final_elbo()) {
      best = i;
    }
  }
  if (best < 0) {
    throw numerical_error("all " + std::to_string(n_restarts) +
                          " restarts failed; first failure: " + failures[0]);
  }
  return std::move(*fits[best]);
}

struct RankScore {
  int rank = 0;
  std::optional<double> score;  // mean held-out prediction RMSE
  std::string failure;          // set when any fold failed numerically
};

struct RankSelection {
  std::optional<int> chosen_rank;
  std::vector<RankScore> scores;
};

/// Chooses the decomposition rank by k-fold cross-validation on held-out
/// samples, scoring each rank by the mean leave-one-group-out prediction
/// RMSE across folds. Lower is better; ties go to the smaller rank. The
/// fold assignment is a seeded shuffle shared by all candidate ranks.
inline RankSelection select_rank_cv(const GroupedDataset& data,
                                    const std::vector<int>& ranks, int folds,
                                    const Hyperparameters& base,
                                    std::uint64_t seed, int restarts = 10,
                                    int jobs = 1) {
  if (ranks.empty()) {
    throw std::invalid_argument("no candidate ranks given");
  }
  if (folds < 2 || folds > data.samples()) {
    throw std::invalid_argument("folds must be in [2, samples]");
  }
  const std::vector<int> grid = detail::sorted_unique(ranks);

  std::vector<Index> perm(data.samples());
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng shuffle_rng(mix_seed(seed, 0));
  std::shuffle(perm.begin(), perm.end(), shuffle_rng);

  std::vector<std::vector<Index>> fold_rows(folds);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    fold_rows[i % folds].push_back(perm[i]);
  }

  RankSelection out;
  for (std::size_t ri = 0; ri < grid.size(); ++ri) {
    RankScore rs;
    rs.rank = grid[ri];
    Hyperparameters h = base;
    h.rank = grid[ri];
    double total = 0.0;
    bool ok = true;
    for (int f = 0; f < folds && ok; ++f) {
      std::vector<Index> train_rows;
      for (int g = 0; g < folds; ++g) {
        if (g == f) continue;
        train_rows.insert(train_rows.end(), fold_rows[g].begin(),
                          fold_rows[g].end());
      }
      std::sort(train_rows.begin(), train_rows.end());
      std::vector<Index> test_rows = fold_rows[f];
      std::sort(test_rows.begin(), test_rows.end());

      try {
        const GroupedDataset train = detail::subset_rows(data, train_rows);
        const GroupedDataset test = detail::subset_rows(data, test_rows);
        const std::uint64_t fold_seed =
            mix_seed(seed, (ri + 1) * 1000 + static_cast<std::size_t>(f));
        const FittedModel model =
            multi_restart_fit(train, h, restarts, fold_seed, jobs);
        total += loo_group_evaluate(model, test).mean_rmse;
      } catch (const numerical_error& e) {
        rs.failure = "fold " + std::to_string(f) + ": " + e.what();
        ok = false;
      }
    }
    if (ok) rs.score = total / static_cast<double>(folds);
    out.scores.push_back(std::move(rs));
  }

  // Scores are visited in ascending rank order, so on ties the smaller
  // rank wins.
  double best = std::numeric_limits<double>::infinity();
  for (const RankScore& rs : out.scores) {
    if (rs.score && *rs.score < best) {
      best = *rs.score;
      out.chosen_rank = rs.rank;
    }
  }
  return out;
}

struct ElbowPoint {
  int rank = 0;
  double elbo = 0.0;
};

struct ElbowScan {
  std::vector<ElbowPoint> points;
  std::optional<int> elbow_rank;
};

/// Elbow rule on a bound-versus-rank curve (ranks ascending): find the rank
/// after which the marginal gain falls below theta times the largest gain.
/// Undefined for fewer than three points or when every gain drops below the
/// cutoff only past the end of the grid. A curve with no positive gain at
/// all bends immediately, so the smallest rank is returned.
inline std::optional<int> elbow_rule(const std::vector<ElbowPoint>& points,
                                     double theta = 0.1) {
  if (points.size() < 3) return std::nullopt;
  std::vector<double> gain(points.size() - 1);
  double max_gain = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < points.size(); ++j) {
    gain[j] = points[j + 1].elbo - points[j].elbo;
    max_gain = std::max(max_gain, gain[j]);
  }
  if (max_gain <= 0.0) return points.front().rank;
  for (std::size_t j = 0; j < gain.size(); ++j) {
    if (gain[j] < theta * max_gain) return points[j].rank;
  }
  return std::nullopt;
}

/// Fits every candidate rank on the full data (best of `restarts` seeds per
/// rank) and applies the elbow rule to the resulting bound curve.
inline ElbowScan elbow_scan(const GroupedDataset& data,
                            const std::vector<int>& ranks,
                            const Hyperparameters& base, std::uint64_t seed,
                            int restarts = 10, int jobs = 1,
                            double theta = 0.1) {
  if (ranks.empty()) {
    throw std::invalid_argument("no candidate ranks given");
  }
  const std::vector<int> grid = detail::sorted_unique(ranks);
  ElbowScan out;
  for (std::size_t ri = 0; ri < grid.size(); ++ri) {
    Hyperparameters h = base;
    h.rank = grid[ri];
    const FittedModel model = multi_restart_fit(
        data, h, restarts, mix_seed(seed, ri + 1), jobs);
    out.points.push_back({grid[ri], model.final_elbo()});
  }
  out.elbow_rank = elbow_rule(out.points, theta);
  return out;
}

}  // namespace gfa

#endif  // GFA_MODEL_SELECTION_HPP
