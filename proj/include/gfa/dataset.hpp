#ifndef GFA_DATASET_HPP
#define GFA_DATASET_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gfa/common.hpp"

namespace gfa {

/// Multi-group sample matrix: N rows shared across groups, columns
/// partitioned into contiguous per-group blocks.
struct GroupedDataset {
  Matrix data;                            // N x sum(group_dims)
  std::vector<Index> group_offsets;       // column offset of each group
  std::vector<Index> group_dims;          // D_m per group
  std::vector<std::string> group_names;

  Index samples() const { return data.rows(); }
  Index dims() const { return data.cols(); }
  int groups() const { return static_cast<int>(group_dims.size()); }

  /// View of group m's column block.
  auto group(int m) const {
    return data.middleCols(group_offsets[m], group_dims[m]);
  }
};

/// Validates the partition and contents, fills default group names.
/// Throws std::invalid_argument with the offending location in the message.
inline GroupedDataset build_dataset(Matrix data, std::vector<Index> dims,
                                    std::vector<std::string> names = {}) {
  if (dims.empty()) {
    throw std::invalid_argument("dataset needs at least one group");
  }
  if (data.rows() < 2) {
    throw std::invalid_argument("dataset needs at least 2 samples, got " +
                                std::to_string(data.rows()));
  }
  Index total = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    if (dims[m] <= 0) {
      throw std::invalid_argument("group " + std::to_string(m) +
                                  " has non-positive dimension " +
                                  std::to_string(dims[m]));
    }
    total += dims[m];
  }
  if (total != data.cols()) {
    throw std::invalid_argument(
        "group partition sums to " + std::to_string(total) + " != " +
        std::to_string(data.cols()) + " matrix columns");
  }
  if (!names.empty() && names.size() != dims.size()) {
    throw std::invalid_argument(
        "got " + std::to_string(names.size()) + " group names for " +
        std::to_string(dims.size()) + " groups");
  }
  if (names.empty()) {
    names.reserve(dims.size());
    for (std::size_t m = 0; m < dims.size(); ++m) {
      names.push_back("g" + std::to_string(m));
    }
  }

  GroupedDataset out;
  out.group_offsets.resize(dims.size());
  Index offset = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    out.group_offsets[m] = offset;
    offset += dims[m];
  }
  out.group_dims = std::move(dims);
  out.group_names = std::move(names);
  out.data = std::move(data);

  for (Index j = 0; j < out.data.cols(); ++j) {
    for (Index i = 0; i < out.data.rows(); ++i) {
      if (!std::isfinite(out.data(i, j))) {
        int m = 0;
        while (m + 1 < out.groups() && out.group_offsets[m + 1] <= j) ++m;
        throw std::invalid_argument(
            "non-finite value at row " + std::to_string(i) + ", column " +
            std::to_string(j) + " (group " + out.group_names[m] + ")");
      }
    }
  }
  return out;
}

/// Subtracts per-column means; returns the centered dataset and the means.
inline std::pair<GroupedDataset, Vector> center_columns(GroupedDataset ds) {
  Vector means = ds.data.colwise().mean();
  ds.data.rowwise() -= means.transpose();
  return {std::move(ds), std::move(means)};
}

/// Divides columns by their sample standard deviation (N - 1 denominator).
/// Constant columns keep scale 1 so the transform stays invertible.
inline std::pair<GroupedDataset, Vector> scale_columns(GroupedDataset ds) {
  const Index n = ds.samples();
  Vector means = ds.data.colwise().mean();
  Vector scales(ds.dims());
  for (Index j = 0; j < ds.dims(); ++j) {
    const double ss = (ds.data.col(j).array() - means[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    scales[j] = sd > 0.0 ? sd : 1.0;
    ds.data.col(j) /= scales[j];
  }
  return {std::move(ds), std::move(scales)};
}

}  // namespace gfa

#endif  // GFA_DATASET_HPP
