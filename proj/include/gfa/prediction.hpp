#ifndef GFA_PREDICTION_HPP
#define GFA_PREDICTION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gfa/common.hpp"
#include "gfa/dataset.hpp"
#include "gfa/state.hpp"

namespace gfa {

namespace detail {

/// Accepts new samples either over all columns or with the target group's
/// block removed; returns the observed columns in model order.
inline Matrix observed_columns(const FittedModel& model, const Matrix& input,
                               int target) {
  Index total = 0;
  for (Index d : model.group_dims) total += d;
  const Index d_target = model.group_dims[target];
  if (input.cols() == total - d_target) return input;
  if (input.cols() == total) {
    Matrix rest(input.rows(), total - d_target);
    Index src = 0, dst = 0;
    for (std::size_t m = 0; m < model.group_dims.size(); ++m) {
      if (static_cast<int>(m) != target) {
        rest.middleCols(dst, model.group_dims[m]) =
            input.middleCols(src, model.group_dims[m]);
        dst += model.group_dims[m];
      }
      src += model.group_dims[m];
    }
    return rest;
  }
  throw std::invalid_argument(
      "observed data has " + std::to_string(input.cols()) +
      " columns; expected " + std::to_string(total - d_target) +
      " (without group " + model.group_names[target] + ") or " +
      std::to_string(total));
}

}  // namespace detail

/// Predicts the target group for new samples from all remaining groups:
/// the observed blocks induce a posterior over the new factor scores with
/// precision I + sum_{j != target} tau_j <W^(j) W^(j)^T>, and the
/// prediction is its mean pushed through the target loadings. Input and
/// output are on the raw scale.
inline Matrix predict_group(const FittedModel& model, const Matrix& observed,
                            int target) {
  const int m_groups = static_cast<int>(model.group_dims.size());
  if (target < 0 || target >= m_groups) {
    throw std::invalid_argument("target group " + std::to_string(target) +
                                " out of range [0, " +
                                std::to_string(m_groups) + ")");
  }
  const Matrix rest = detail::observed_columns(model, observed, target);
  for (Index i = 0; i < rest.rows(); ++i) {
    for (Index j = 0; j < rest.cols(); ++j) {
      if (!std::isfinite(rest(i, j))) {
        throw std::invalid_argument("non-finite observed value at row " +
                                    std::to_string(i) + ", column " +
                                    std::to_string(j));
      }
    }
  }

  const PosteriorState& s = model.state;
  const Index k = s.z_mean.cols();
  const Vector tau = s.tau_mean();
  Matrix precision = Matrix::Identity(k, k);
  Matrix projected = Matrix::Zero(rest.rows(), k);

  Index model_off = 0;  // column offset in the model's full frame
  Index rest_off = 0;   // column offset in the observed matrix
  for (int j = 0; j < m_groups; ++j) {
    const Index dj = model.group_dims[j];
    if (j != target) {
      Matrix x = rest.middleCols(rest_off, dj);
      x.rowwise() -=
          model.column_means.segment(model_off, dj).transpose();
      x.array().rowwise() /=
          model.column_scales.segment(model_off, dj).transpose().array();
      precision += tau[j] * ww_second_moment(s, j, dj);
      projected += tau[j] * (x * s.w_mean[j]);
      rest_off += dj;
    }
    model_off += dj;
  }

  const Matrix z_new = projected * spd_inverse(precision, "prediction");
  Matrix pred = z_new * s.w_mean[target].transpose();

  const Index target_off = std::accumulate(
      model.group_dims.begin(), model.group_dims.begin() + target, Index{0});
  const Index d_target = model.group_dims[target];
  pred.array().rowwise() *=
      model.column_scales.segment(target_off, d_target).transpose().array();
  pred.rowwise() +=
      model.column_means.segment(target_off, d_target).transpose();
  return pred;
}

/// Per-group and aggregate errors of leave-one-group-out prediction.
struct PredictionReport {
  std::vector<double> per_group_rmse;
  std::vector<double> per_group_mse;
  double mean_rmse = 0.0;    // mean of per-group RMSEs
  double pooled_rmse = 0.0;  // RMSE over all predicted cells
  double mean_mse = 0.0;
  double pooled_mse = 0.0;
  std::vector<Index> per_group_dims;
  std::vector<std::string> group_names;
};

/// Predicts every group from the others on held-out samples and reports
/// the errors. The test dataset must share the training partition.
inline PredictionReport loo_group_evaluate(const FittedModel& model,
                                           const GroupedDataset& test) {
  if (test.group_dims != model.group_dims) {
    throw std::invalid_argument(
        "test partition does not match the fitted model");
  }
  PredictionReport report;
  report.per_group_dims = model.group_dims;
  report.group_names = model.group_names;

  double total_sse = 0.0;
  double total_cells = 0.0;
  for (int m = 0; m < test.groups(); ++m) {
    const Matrix pred = predict_group(model, test.data, m);
    const double sse = (pred - test.group(m)).squaredNorm();
    const double cells =
        static_cast<double>(test.samples() * test.group_dims[m]);
    report.per_group_mse.push_back(sse / cells);
    report.per_group_rmse.push_back(std::sqrt(sse / cells));
    total_sse += sse;
    total_cells += cells;
  }
  const double m_groups = static_cast<double>(test.groups());
  report.mean_rmse =
      std::accumulate(report.per_group_rmse.begin(),
                      report.per_group_rmse.end(), 0.0) /
      m_groups;
  report.mean_mse = std::accumulate(report.per_group_mse.begin(),
                                    report.per_group_mse.end(), 0.0) /
                    m_groups;
  report.pooled_mse = total_sse / total_cells;
  report.pooled_rmse = std::sqrt(report.pooled_mse);
  return report;
}

/// Ridge regression from the concatenated remaining groups onto a target
/// group, the reference point for the factor model's predictions.
struct RidgeModel {
  Matrix weights;  // (sum of observed dims) x D_target
  double gamma = 0.0;
  int target = 0;
  Vector column_means;  // over the full frame, training means
  std::vector<Index> group_dims;
};

namespace detail {

/// Solves (Y^T Y + gamma I) B = Y^T X. When Y has more columns than rows
/// the dual identity Y^T (Y Y^T + gamma I)^{-1} X gives the same B at the
/// cost of an n x n solve instead of d x d.
inline Matrix ridge_solve(const Matrix& y, const Matrix& x, double gamma) {
  if (gamma <= 0.0) {
    throw std::invalid_argument("ridge penalty must be positive");
  }
  if (y.cols() == 0) return Matrix::Zero(0, x.cols());
  if (y.cols() <= y.rows()) {
    Matrix gram = y.transpose() * y;
    gram.diagonal().array() += gamma;
    return spd_inverse(gram, "ridge solve") * (y.transpose() * x);
  }
  Matrix gram = y * y.transpose();
  gram.diagonal().array() += gamma;
  return y.transpose() * (spd_inverse(gram, "ridge solve") * x);
}

}  // namespace detail

/// Fits the ridge baseline with the penalty chosen by deterministic k-fold
/// cross-validation (sample i goes to fold i mod folds).
inline RidgeModel ridge_mlr(const GroupedDataset& train, int target,
                            const std::vector<double>& gamma_grid = {
                                1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0},
                            int folds = 5) {
  if (target < 0 || target >= train.groups()) {
    throw std::invalid_argument("target group out of range");
  }
  if (gamma_grid.empty()) {
    throw std::invalid_argument("ridge penalty grid is empty");
  }
  folds = std::min<int>(folds, static_cast<int>(train.samples()));
  if (folds < 2) {
    throw std::invalid_argument("ridge cross-validation needs >= 2 folds");
  }

  RidgeModel model;
  model.target = target;
  model.group_dims = train.group_dims;
  model.column_means = train.data.colwise().mean();

  Matrix centered = train.data;
  centered.rowwise() -= model.column_means.transpose();

  const Index d_target = train.group_dims[target];
  const Index target_off = train.group_offsets[target];
  const Index rest_cols = train.dims() - d_target;
  Matrix y(train.samples(), rest_cols);
  {
    Index dst = 0;
    for (int m = 0; m < train.groups(); ++m) {
      if (m == target) continue;
      y.middleCols(dst, train.group_dims[m]) =
          centered.middleCols(train.group_offsets[m], train.group_dims[m]);
      dst += train.group_dims[m];
    }
  }
  const Matrix x = centered.middleCols(target_off, d_target);

  double best_sse = std::numeric_limits<double>::infinity();
  double best_gamma = gamma_grid.front();
  for (double gamma : gamma_grid) {
    double sse = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<Index> in_fold, out_fold;
      for (Index i = 0; i < train.samples(); ++i) {
        (i % folds == f ? in_fold : out_fold).push_back(i);
      }
      const Matrix b = detail::ridge_solve(Matrix(y(out_fold, Eigen::all)),
                                           Matrix(x(out_fold, Eigen::all)),
                                           gamma);
      sse += (Matrix(y(in_fold, Eigen::all)) * b -
              Matrix(x(in_fold, Eigen::all)))
                 .squaredNorm();
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_gamma = gamma;
    }
  }
  model.gamma = best_gamma;
  model.weights = detail::ridge_solve(y, x, best_gamma);
  return model;
}

/// Ridge prediction for new samples; accepts full-width or rest-width input
/// on the raw scale and returns raw-scale predictions.
inline Matrix ridge_predict(const RidgeModel& model, const Matrix& observed) {
  Index total = 0;
  for (Index d : model.group_dims) total += d;
  const Index d_target = model.group_dims[model.target];

  Matrix rest;
  if (observed.cols() == total - d_target) {
    rest = observed;
  } else if (observed.cols() == total) {
    rest.resize(observed.rows(), total - d_target);
    Index src = 0, dst = 0;
    for (std::size_t m = 0; m < model.group_dims.size(); ++m) {
      if (static_cast<int>(m) != model.target) {
        rest.middleCols(dst, model.group_dims[m]) =
            observed.middleCols(src, model.group_dims[m]);
        dst += model.group_dims[m];
      }
      src += model.group_dims[m];
    }
  } else {
    throw std::invalid_argument("observed data has unexpected width " +
                                std::to_string(observed.cols()));
  }

  // Center observed columns with the training means, predict, uncenter.
  Index model_off = 0, rest_off = 0, target_off = 0;
  for (std::size_t m = 0; m < model.group_dims.size(); ++m) {
    if (static_cast<int>(m) == model.target) {
      target_off = model_off;
    } else {
      rest.middleCols(rest_off, model.group_dims[m]).rowwise() -=
          model.column_means.segment(model_off, model.group_dims[m])
              .transpose();
      rest_off += model.group_dims[m];
    }
    model_off += model.group_dims[m];
  }
  Matrix pred = rest.cols() == 0
                    ? Matrix::Zero(rest.rows(), d_target)
                    : Matrix(rest * model.weights);
  pred.rowwise() +=
      model.column_means.segment(target_off, d_target).transpose();
  return pred;
}

}  // namespace gfa

#endif  // GFA_PREDICTION_HPP
