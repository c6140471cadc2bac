#ifndef GFA_IO_HPP
#define GFA_IO_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gfa/common.hpp"
#include "gfa/dataset.hpp"
#include "gfa/state.hpp"
#include "gfa/synthetic.hpp"

namespace gfa {

using json = nlohmann::json;

namespace detail {

inline bool parse_double(std::string_view field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' ||
                         end[-1] == '\r')) {
    --end;
  }
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end && begin != end;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace detail

/// Reads a rectangular numeric CSV. A first line whose fields do not all
/// parse as numbers is treated as a header and skipped.
inline Matrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_fields(line);
    std::vector<double> row(fields.size());
    bool all_numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!detail::parse_double(fields[j], row[j])) {
        all_numeric = false;
        if (!first_content_line) {
          throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                   ": field " + std::to_string(j + 1) +
                                   " is not a number");
        }
        break;
      }
    }
    if (all_numeric) {
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw std::runtime_error(
            path + ":" + std::to_string(line_no) + ": expected " +
            std::to_string(rows.front().size()) + " fields, got " +
            std::to_string(row.size()));
      }
      rows.push_back(std::move(row));
    }
    first_content_line = false;
  }
  if (rows.empty()) throw std::runtime_error(path + ": no numeric rows");

  Matrix out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return out;
}

/// Writes a matrix as CSV with 17 significant digits, enough for an exact
/// double round trip.
inline void write_csv_matrix(const std::string& path, const Matrix& m,
                             const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      out << (j ? "," : "") << header[j];
    }
    out << '\n';
  }
  char buf[40];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

/// Group partition sidecar: {"groups": [{"name": ..., "dim": ...}, ...]}.
inline std::pair<std::vector<Index>, std::vector<std::string>>
read_groups_json(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("groups") || !j["groups"].is_array() ||
      j["groups"].empty()) {
    throw std::runtime_error(path + ": missing non-empty 'groups' array");
  }
  std::vector<Index> dims;
  std::vector<std::string> names;
  for (const json& g : j["groups"]) {
    if (!g.contains("dim") || !g["dim"].is_number_integer()) {
      throw std::runtime_error(path + ": group entry missing integer 'dim'");
    }
    dims.push_back(g["dim"].get<Index>());
    names.push_back(g.contains("name") ? g["name"].get<std::string>()
                                       : "g" + std::to_string(names.size()));
  }
  return {std::move(dims), std::move(names)};
}

inline void write_groups_json(const std::string& path,
                              const std::vector<Index>& dims,
                              const std::vector<std::string>& names) {
  json groups = json::array();
  for (std::size_t m = 0; m < dims.size(); ++m) {
    groups.push_back({{"name", names[m]}, {"dim", dims[m]}});
  }
  save_json(path, json{{"groups", groups}});
}

inline GroupedDataset load_dataset(const std::string& data_csv,
                                   const std::string& groups_json) {
  auto [dims, names] = read_groups_json(groups_json);
  return build_dataset(read_csv_matrix(data_csv), std::move(dims),
                       std::move(names));
}

namespace detail {

/// Shape-explicit matrix encoding; survives zero-column matrices, which a
/// nested-array form cannot represent.
inline json matrix_to_json(const Matrix& m) {
  json flat = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw std::runtime_error(where + ": expected {rows, cols, data}");
  }
  const Index rows = j["rows"].get<Index>();
  const Index cols = j["cols"].get<Index>();
  const json& flat = j["data"];
  if (rows < 0 || cols < 0 ||
      static_cast<Index>(flat.size()) != rows * cols) {
    throw std::runtime_error(where + ": data length does not match shape");
  }
  Matrix m(rows, cols);
  Index pos = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = flat[pos++].get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::runtime_error(where + ": expected an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace detail

inline constexpr const char* kModelFormat = "gfa-model/1";

inline json model_to_json(const FittedModel& model) {
  const Hyperparameters& h = model.hyper;
  json hyper{{"k_init", h.k_init},
             {"rank", h.rank},
             {"tau_shape", h.tau_shape},
             {"tau_rate", h.tau_rate},
             {"lambda", h.lambda},
             {"alpha_shape", h.alpha_shape},
             {"alpha_rate", h.alpha_rate},
             {"prune_threshold", h.prune_threshold},
             {"elbo_rel_tol", h.elbo_rel_tol},
             {"max_iters", h.max_iters},
             {"log_alpha_cap", h.log_alpha_cap},
             {"standardize", h.standardize},
             {"inner_memory", h.inner_opt.memory},
             {"inner_max_iters", h.inner_opt.max_iters},
             {"inner_grad_tol", h.inner_opt.grad_tol}};

  const PosteriorState& s = model.state;
  json alpha;
  if (s.alpha.low_rank()) {
    const auto& lr = std::get<LowRankAlpha>(s.alpha.value);
    alpha = json{{"variant", "low_rank"},
                 {"u", detail::matrix_to_json(lr.u)},
                 {"v", detail::matrix_to_json(lr.v)},
                 {"mu_u", detail::vector_to_json(lr.mu_u)},
                 {"mu_v", detail::vector_to_json(lr.mu_v)}};
  } else {
    const auto& fr = std::get<FullRankAlpha>(s.alpha.value);
    alpha = json{{"variant", "full_rank"},
                 {"shape", detail::matrix_to_json(fr.shape)},
                 {"rate", detail::matrix_to_json(fr.rate)}};
  }

  json w_mean = json::array(), w_cov = json::array();
  for (int m = 0; m < s.groups(); ++m) {
    w_mean.push_back(detail::matrix_to_json(s.w_mean[m]));
    w_cov.push_back(detail::matrix_to_json(s.w_cov[m]));
  }

  return json{
      {"format", kModelFormat},
      {"tool_version", kVersion},
      {"seed", model.seed},
      {"converged", model.converged},
      {"active_k", s.active_k},
      {"group_dims", model.group_dims},
      {"group_names", model.group_names},
      {"column_means", detail::vector_to_json(model.column_means)},
      {"column_scales", detail::vector_to_json(model.column_scales)},
      {"elbo_trace", model.elbo_trace},
      {"hyperparameters", hyper},
      {"state", json{{"z_mean", detail::matrix_to_json(s.z_mean)},
                     {"z_cov", detail::matrix_to_json(s.z_cov)},
                     {"w_mean", w_mean},
                     {"w_cov", w_cov},
                     {"tau_shape_post",
                      detail::vector_to_json(s.tau_shape_post)},
                     {"tau_rate_post",
                      detail::vector_to_json(s.tau_rate_post)},
                     {"alpha", alpha}}}};
}

inline FittedModel model_from_json(const json& j, const std::string& where) {
  if (!j.contains("format") || j["format"] != kModelFormat) {
    throw std::runtime_error(where + ": not a '" + std::string(kModelFormat) +
                             "' file");
  }
  auto need = [&](const json& obj, const char* key) -> const json& {
    if (!obj.contains(key)) {
      throw std::runtime_error(where + ": missing field '" + key + "'");
    }
    return obj[key];
  };

  FittedModel model;
  model.seed = need(j, "seed").get<std::uint64_t>();
  model.converged = need(j, "converged").get<bool>();
  model.group_dims = need(j, "group_dims").get<std::vector<Index>>();
  model.group_names =
      need(j, "group_names").get<std::vector<std::string>>();
  model.column_means =
      detail::vector_from_json(need(j, "column_means"), where);
  model.column_scales =
      detail::vector_from_json(need(j, "column_scales"), where);
  model.elbo_trace = need(j, "elbo_trace").get<std::vector<double>>();

  const json& hj = need(j, "hyperparameters");
  Hyperparameters h;
  h.k_init = need(hj, "k_init").get<int>();
  h.rank = need(hj, "rank").get<int>();
  h.tau_shape = need(hj, "tau_shape").get<double>();
  h.tau_rate = need(hj, "tau_rate").get<double>();
  h.lambda = need(hj, "lambda").get<double>();
  h.alpha_shape = need(hj, "alpha_shape").get<double>();
  h.alpha_rate = need(hj, "alpha_rate").get<double>();
  h.prune_threshold = need(hj, "prune_threshold").get<double>();
  h.elbo_rel_tol = need(hj, "elbo_rel_tol").get<double>();
  h.max_iters = need(hj, "max_iters").get<long>();
  h.log_alpha_cap = need(hj, "log_alpha_cap").get<double>();
  h.standardize = need(hj, "standardize").get<bool>();
  h.inner_opt.memory = need(hj, "inner_memory").get<int>();
  h.inner_opt.max_iters = need(hj, "inner_max_iters").get<int>();
  h.inner_opt.grad_tol = need(hj, "inner_grad_tol").get<double>();
  model.hyper = h;

  const json& sj = need(j, "state");
  PosteriorState& s = model.state;
  s.z_mean = detail::matrix_from_json(need(sj, "z_mean"), where + ": z_mean");
  s.z_cov = detail::matrix_from_json(need(sj, "z_cov"), where + ": z_cov");
  for (const json& b : need(sj, "w_mean")) {
    s.w_mean.push_back(detail::matrix_from_json(b, where + ": w_mean"));
  }
  for (const json& b : need(sj, "w_cov")) {
    s.w_cov.push_back(detail::matrix_from_json(b, where + ": w_cov"));
  }
  s.tau_shape_post =
      detail::vector_from_json(need(sj, "tau_shape_post"), where);
  s.tau_rate_post =
      detail::vector_from_json(need(sj, "tau_rate_post"), where);

  const json& aj = need(sj, "alpha");
  const std::string variant = need(aj, "variant").get<std::string>();
  if (variant == "low_rank") {
    LowRankAlpha lr;
    lr.u = detail::matrix_from_json(need(aj, "u"), where + ": alpha.u");
    lr.v = detail::matrix_from_json(need(aj, "v"), where + ": alpha.v");
    lr.mu_u = detail::vector_from_json(need(aj, "mu_u"), where);
    lr.mu_v = detail::vector_from_json(need(aj, "mu_v"), where);
    s.alpha.value = std::move(lr);
  } else if (variant == "full_rank") {
    FullRankAlpha fr;
    fr.shape =
        detail::matrix_from_json(need(aj, "shape"), where + ": alpha.shape");
    fr.rate =
        detail::matrix_from_json(need(aj, "rate"), where + ": alpha.rate");
    s.alpha.value = std::move(fr);
  } else {
    throw std::runtime_error(where + ": unknown alpha variant '" + variant +
                             "'");
  }
  s.active_k = need(j, "active_k").get<int>();

  if (s.w_mean.size() != model.group_dims.size() ||
      s.w_cov.size() != model.group_dims.size()) {
    throw std::runtime_error(where +
                             ": loading blocks do not match group count");
  }
  return model;
}

inline void save_model(const std::string& path, const FittedModel& model) {
  save_json(path, model_to_json(model));
}

inline FittedModel load_model(const std::string& path) {
  return model_from_json(load_json(path), path);
}

/// Ground truth written next to generated data so recovery can be checked
/// later without re-deriving anything.
inline void write_truth_json(const std::string& path,
                             const GroundTruth& truth,
                             const std::vector<int>& group_types = {}) {
  json w = json::array();
  for (const Matrix& block : truth.w_true) {
    w.push_back(detail::matrix_to_json(block));
  }
  json activity = json::array();
  for (Index i = 0; i < truth.activity.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < truth.activity.cols(); ++j) {
      row.push_back(truth.activity(i, j));
    }
    activity.push_back(row);
  }
  json j{{"activity", activity},
         {"tau", std::isinf(truth.tau) ? json() : json(truth.tau)},
         {"z", detail::matrix_to_json(truth.z_true)},
         {"w", w}};
  if (!group_types.empty()) j["group_types"] = group_types;
  save_json(path, j);
}

}  // namespace gfa

#endif  // GFA_IO_HPP
