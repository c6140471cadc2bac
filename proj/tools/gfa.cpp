// Command-line front end: generate synthetic data, fit models, predict
// held-out groups, evaluate against a ridge baseline, and select the
// decomposition rank. Every run writes a manifest describing what ran.
//
// Exit codes: 0 success, 1 usage or input errors, 2 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gfa/gfa.hpp"

namespace fs = std::filesystem;
using namespace gfa;

namespace {

struct GlobalFlags {
  bool quiet = false;
  bool verbose = false;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& from_cli) {
  if (from_cli) return *from_cli;
  if (const char* env = std::getenv("GFA_SEED")) {
    try {
      std::size_t used = 0;
      const std::string text(env);
      const std::uint64_t value = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return value;
    } catch (const std::exception&) {
      throw std::invalid_argument(
          std::string("GFA_SEED is set but not a non-negative integer: '") +
          env + "'");
    }
  }
  return 0;
}

class RunTimer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

json hyper_to_json(const Hyperparameters& h) {
  return json{{"k_init", h.k_init},
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
}

json manifest_base(const std::string& subcommand,
                   const std::vector<std::string>& argv, std::uint64_t seed,
                   const RunTimer& timer) {
  return json{{"tool", "gfa"},
              {"version", kVersion},
              {"subcommand", subcommand},
              {"argv", argv},
              {"seed", seed},
              {"wall_time_seconds", timer.seconds()}};
}

/// Group selector: numeric index or group name.
int resolve_group(const std::string& token,
                  const std::vector<std::string>& names) {
  for (std::size_t m = 0; m < names.size(); ++m) {
    if (names[m] == token) return static_cast<int>(m);
  }
  try {
    std::size_t used = 0;
    const int idx = std::stoi(token, &used);
    if (used == token.size() && idx >= 0 &&
        idx < static_cast<int>(names.size())) {
      return idx;
    }
  } catch (const std::exception&) {
  }
  std::string known;
  for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown group '" + token +
                              "' (have: " + known + ")");
}

int parse_rank(const std::string& token, int m_groups, int k_init) {
  if (token == "full") return std::min(m_groups, k_init);
  try {
    std::size_t used = 0;
    const int r = std::stoi(token, &used);
    if (used == token.size()) return r;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("--rank must be an integer or 'full', got '" +
                              token + "'");
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string preset = "toy3";
  int m_groups = 8;
  std::optional<Index> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  bool noise_free = false;
  std::string out_dir;
};

int run_generate(const GenerateArgs& args,
                 const std::vector<std::string>& argv, const GlobalFlags& g) {
  const RunTimer timer;
  const std::uint64_t seed = resolve_seed(args.seed);

  GenerationSpec spec;
  if (args.preset == "toy3") {
    spec = three_group_toy_spec();
  } else if (args.preset == "typed") {
    spec = typed_groups_spec(args.m_groups);
  } else {
    throw std::invalid_argument("unknown preset '" + args.preset +
                                "' (have: toy3, typed)");
  }
  if (args.n) spec.n = *args.n;
  if (args.tau) spec.tau = *args.tau;
  if (args.noise_free) spec.tau = std::numeric_limits<double>::infinity();

  const SyntheticData sd = generate(spec, seed);

  fs::create_directories(args.out_dir);
  const auto path = [&](const char* name) {
    return (fs::path(args.out_dir) / name).string();
  };
  write_csv_matrix(path("data.csv"), sd.data.data);
  write_groups_json(path("groups.json"), sd.data.group_dims,
                    sd.data.group_names);
  write_truth_json(path("truth.json"), sd.truth, spec.group_types);

  json manifest = manifest_base("generate", argv, seed, timer);
  manifest["preset"] = args.preset;
  manifest["samples"] = spec.n;
  manifest["groups"] = spec.groups();
  manifest["factors"] = spec.factors();
  manifest["noise_precision"] =
      std::isinf(spec.tau) ? json() : json(spec.tau);
  manifest["outputs"] = {path("data.csv"), path("groups.json"),
                         path("truth.json")};
  save_json(path("manifest.json"), manifest);

  if (!g.quiet) {
    std::cout << "wrote " << spec.n << " samples, " << spec.groups()
              << " groups, " << spec.factors() << " factors to "
              << args.out_dir << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data_csv;
  std::string groups_json;
  int k = 10;
  std::string rank = "full";
  int restarts = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool standardize = false;
  long max_iters = 100000;
  double tol = 1e-6;
  double lambda = 0.1;
  double prune_threshold = 1e-7;
  int jobs = 1;
};

int run_fit(const FitArgs& args, const std::vector<std::string>& argv,
            const GlobalFlags& g) {
  const RunTimer timer;
  const std::uint64_t seed = resolve_seed(args.seed);
  const GroupedDataset data = load_dataset(args.data_csv, args.groups_json);

  Hyperparameters h = default_hyperparameters(data.groups(), args.k);
  h.rank = parse_rank(args.rank, data.groups(), args.k);
  h.standardize = args.standardize;
  h.max_iters = args.max_iters;
  h.elbo_rel_tol = args.tol;
  h.lambda = args.lambda;
  h.prune_threshold = args.prune_threshold;
  h.validate(data.groups());

  if (g.verbose) {
    std::cout << "fitting " << data.samples() << " samples, "
              << data.groups() << " groups, k_init=" << h.k_init
              << ", rank=" << h.rank
              << (use_full_rank(h, data.groups()) ? " (full)" : "")
              << ", restarts=" << args.restarts << ", seed=" << seed << "\n";
  }

  const FittedModel model =
      multi_restart_fit(data, h, args.restarts, seed, args.jobs);
  save_model(args.out, model);

  json manifest = manifest_base("fit", argv, seed, timer);
  manifest["inputs"] = {{"data", args.data_csv},
                        {"groups", args.groups_json}};
  manifest["outputs"] = {args.out};
  manifest["hyperparameters"] = hyper_to_json(h);
  manifest["restarts"] = args.restarts;
  manifest["best_seed"] = model.seed;
  manifest["converged"] = model.converged;
  manifest["iterations"] = model.elbo_trace.size();
  manifest["final_elbo"] = model.final_elbo();
  manifest["active_factors"] = model.state.active_k;
  save_json(args.out + ".manifest.json", manifest);

  if (!g.quiet) {
    std::cout << "converged=" << (model.converged ? "yes" : "no")
              << " iterations=" << model.elbo_trace.size()
              << " final_elbo=" << model.final_elbo()
              << " active_factors=" << model.state.active_k << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_json;
  std::string test_csv;
  std::string group;
  std::string out;
};

int run_predict(const PredictArgs& args,
                const std::vector<std::string>& argv, const GlobalFlags& g) {
  const RunTimer timer;
  const FittedModel model = load_model(args.model_json);
  const Matrix test = read_csv_matrix(args.test_csv);
  const int target = resolve_group(args.group, model.group_names);

  const Matrix pred = predict_group(model, test, target);
  write_csv_matrix(args.out, pred);

  json manifest = manifest_base("predict", argv, model.seed, timer);
  manifest["inputs"] = {{"model", args.model_json},
                        {"test", args.test_csv}};
  manifest["outputs"] = {args.out};
  manifest["target_group"] = model.group_names[target];
  manifest["samples"] = pred.rows();
  save_json(args.out + ".manifest.json", manifest);

  if (!g.quiet) {
    std::cout << "predicted " << pred.rows() << " samples for group "
              << model.group_names[target] << " -> " << args.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string model_json;
  std::string test_csv;
  std::string out_prefix;
  std::string metric = "rmse";
  std::string ridge_train;
};

int run_evaluate(const EvaluateArgs& args,
                 const std::vector<std::string>& argv, const GlobalFlags& g) {
  const RunTimer timer;
  if (args.metric != "rmse" && args.metric != "mse") {
    throw std::invalid_argument("--metric must be rmse or mse, got '" +
                                args.metric + "'");
  }
  const FittedModel model = load_model(args.model_json);
  const GroupedDataset test =
      build_dataset(read_csv_matrix(args.test_csv), model.group_dims,
                    model.group_names);
  const PredictionReport report = loo_group_evaluate(model, test);

  json per_group = json::array();
  for (int m = 0; m < test.groups(); ++m) {
    per_group.push_back({{"group", report.group_names[m]},
                         {"dim", report.per_group_dims[m]},
                         {"rmse", report.per_group_rmse[m]},
                         {"mse", report.per_group_mse[m]}});
  }
  json out{{"per_group", per_group},
           {"mean_rmse", report.mean_rmse},
           {"pooled_rmse", report.pooled_rmse},
           {"mean_mse", report.mean_mse},
           {"pooled_mse", report.pooled_mse},
           {"samples", test.samples()}};

  // Optional reference point: ridge regression refit per target group on
  // supplied training data.
  if (!args.ridge_train.empty()) {
    const GroupedDataset train =
        build_dataset(read_csv_matrix(args.ridge_train), model.group_dims,
                      model.group_names);
    json ridge = json::array();
    int factor_model_wins = 0;
    double ridge_rmse_sum = 0.0;
    for (int m = 0; m < test.groups(); ++m) {
      const RidgeModel rm = ridge_mlr(train, m);
      const Matrix pred = ridge_predict(rm, test.data);
      const double mse = (pred - test.group(m)).squaredNorm() /
                         double(test.samples() * test.group_dims[m]);
      const double rmse = std::sqrt(mse);
      ridge.push_back({{"group", model.group_names[m]},
                       {"rmse", rmse},
                       {"mse", mse},
                       {"gamma", rm.gamma}});
      ridge_rmse_sum += rmse;
      if (report.per_group_rmse[m] < rmse) ++factor_model_wins;
    }
    out["ridge_per_group"] = ridge;
    out["ridge_mean_rmse"] = ridge_rmse_sum / double(test.groups());
    out["factor_model_wins"] = factor_model_wins;
  }

  const std::string report_path = args.out_prefix + ".report.json";
  save_json(report_path, out);

  json manifest = manifest_base("evaluate", argv, model.seed, timer);
  manifest["inputs"] = {{"model", args.model_json}, {"test", args.test_csv}};
  if (!args.ridge_train.empty()) {
    manifest["inputs"]["ridge_train"] = args.ridge_train;
  }
  manifest["outputs"] = {report_path};
  manifest["metric"] = args.metric;
  save_json(args.out_prefix + ".manifest.json", manifest);

  if (!g.quiet) {
    const bool use_rmse = args.metric == "rmse";
    for (int m = 0; m < test.groups(); ++m) {
      std::cout << report.group_names[m] << " " << args.metric << "="
                << (use_rmse ? report.per_group_rmse[m]
                             : report.per_group_mse[m]);
      if (out.contains("ridge_per_group")) {
        std::cout << " ridge="
                  << out["ridge_per_group"][m][args.metric].get<double>();
      }
      std::cout << "\n";
    }
    std::cout << "mean_" << args.metric << "="
              << (use_rmse ? report.mean_rmse : report.mean_mse)
              << " pooled_" << args.metric << "="
              << (use_rmse ? report.pooled_rmse : report.pooled_mse) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// select-rank

struct SelectRankArgs {
  std::string data_csv;
  std::string groups_json;
  std::vector<int> ranks;
  std::string method = "both";
  int folds = 5;
  int restarts = 10;
  std::optional<std::uint64_t> seed;
  double theta = 0.1;
  std::string out_prefix;
  int k = 10;
  long max_iters = 100000;
  int jobs = 1;
};

int run_select_rank(const SelectRankArgs& args,
                    const std::vector<std::string>& argv,
                    const GlobalFlags& g) {
  const RunTimer timer;
  if (args.method != "cv" && args.method != "elbow" &&
      args.method != "both") {
    throw std::invalid_argument("--method must be cv, elbow or both");
  }
  const std::uint64_t seed = resolve_seed(args.seed);
  const GroupedDataset data = load_dataset(args.data_csv, args.groups_json);

  Hyperparameters h = default_hyperparameters(data.groups(), args.k);
  h.max_iters = args.max_iters;
  for (int r : args.ranks) {
    h.rank = r;
    h.validate(data.groups());
  }

  json out{{"ranks", args.ranks}, {"method", args.method}};

  if (args.method == "cv" || args.method == "both") {
    const RankSelection sel = select_rank_cv(data, args.ranks, args.folds, h,
                                             seed, args.restarts, args.jobs);
    json scores = json::array();
    for (const RankScore& rs : sel.scores) {
      json entry{{"rank", rs.rank}};
      if (rs.score) {
        entry["mean_rmse"] = *rs.score;
      } else {
        entry["failure"] = rs.failure;
      }
      scores.push_back(entry);
    }
    out["cv"] = {{"folds", args.folds}, {"scores", scores}};
    if (sel.chosen_rank) {
      out["cv"]["chosen_rank"] = *sel.chosen_rank;
    }
    if (!g.quiet) {
      std::cout << "cv chosen rank: ";
      if (sel.chosen_rank) {
        std::cout << *sel.chosen_rank << "\n";
      } else {
        std::cout << "none (all candidates failed)\n";
      }
    }
  }

  if (args.method == "elbow" || args.method == "both") {
    const ElbowScan scan = elbow_scan(data, args.ranks, h, seed,
                                      args.restarts, args.jobs, args.theta);
    json points = json::array();
    for (const ElbowPoint& p : scan.points) {
      points.push_back({{"rank", p.rank}, {"elbo", p.elbo}});
    }
    out["elbow"] = {{"theta", args.theta}, {"points", points}};
    if (scan.elbow_rank) {
      out["elbow"]["chosen_rank"] = *scan.elbow_rank;
    }
    if (!g.quiet) {
      std::cout << "elbow rank: ";
      if (scan.elbow_rank) {
        std::cout << *scan.elbow_rank << "\n";
      } else {
        std::cout << "undefined for this grid\n";
      }
    }
  }

  const std::string sel_path = args.out_prefix + ".selection.json";
  save_json(sel_path, out);

  json manifest = manifest_base("select-rank", argv, seed, timer);
  manifest["inputs"] = {{"data", args.data_csv},
                        {"groups", args.groups_json}};
  manifest["outputs"] = {sel_path};
  manifest["hyperparameters"] = hyper_to_json(h);
  manifest["restarts"] = args.restarts;
  save_json(args.out_prefix + ".manifest.json", manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> argv_copy(argv, argv + argc);

  CLI::App app{"Group factor analysis: sparse multi-group factor models "
               "with low-rank association structure"};
  app.require_subcommand(1);
  GlobalFlags global;
  app.add_flag("--quiet", global.quiet, "suppress normal output");
  app.add_flag("--verbose", global.verbose, "print extra progress detail");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "write a synthetic dataset");
  c_gen->add_option("--preset", gen.preset, "toy3 or typed")
      ->capture_default_str();
  c_gen->add_option("--m-groups", gen.m_groups,
                    "group count for the typed preset (multiple of 4)")
      ->capture_default_str();
  c_gen->add_option("--n", gen.n, "override the preset sample count");
  c_gen->add_option("--seed", gen.seed, "rng seed (default: GFA_SEED or 0)");
  c_gen->add_option("--tau", gen.tau, "override the noise precision");
  c_gen->add_flag("--noise-free", gen.noise_free, "draw no observation noise");
  c_gen->add_option("--out", gen.out_dir, "output directory")->required();

  FitArgs fit_args;
  auto* c_fit = app.add_subcommand("fit", "fit a model by variational "
                                          "inference");
  c_fit->add_option("--data", fit_args.data_csv, "data csv")->required();
  c_fit->add_option("--groups", fit_args.groups_json, "groups sidecar json")
      ->required();
  c_fit->add_option("--k", fit_args.k, "initial factor count")
      ->capture_default_str();
  c_fit->add_option("--rank", fit_args.rank,
                    "association decomposition rank, or 'full'")
      ->capture_default_str();
  c_fit->add_option("--restarts", fit_args.restarts,
                    "independent restarts, best bound wins")
      ->capture_default_str();
  c_fit->add_option("--seed", fit_args.seed,
                    "rng seed (default: GFA_SEED or 0)");
  c_fit->add_option("--out", fit_args.out, "model output path")->required();
  c_fit->add_flag("--standardize", fit_args.standardize,
                  "scale columns to unit variance before fitting");
  c_fit->add_option("--max-iters", fit_args.max_iters, "iteration cap")
      ->capture_default_str();
  c_fit->add_option("--tol", fit_args.tol, "relative bound-change tolerance")
      ->capture_default_str();
  c_fit->add_option("--lambda", fit_args.lambda,
                    "precision of the decomposition priors")
      ->capture_default_str();
  c_fit->add_option("--prune-threshold", fit_args.prune_threshold,
                    "mean squared score below which a factor is dropped")
      ->capture_default_str();
  c_fit->add_option("--jobs", fit_args.jobs, "threads for restarts")
      ->capture_default_str();

  PredictArgs pred_args;
  auto* c_pred = app.add_subcommand("predict",
                                    "predict one group from the others");
  c_pred->add_option("--model", pred_args.model_json, "fitted model json")
      ->required();
  c_pred->add_option("--test", pred_args.test_csv,
                     "test csv (full width or with the target block removed)")
      ->required();
  c_pred->add_option("--group", pred_args.group, "target group name or index")
      ->required();
  c_pred->add_option("--out", pred_args.out, "prediction csv path")
      ->required();

  EvaluateArgs eval_args;
  auto* c_eval = app.add_subcommand(
      "evaluate", "leave-one-group-out prediction errors on held-out data");
  c_eval->add_option("--model", eval_args.model_json, "fitted model json")
      ->required();
  c_eval->add_option("--test", eval_args.test_csv, "full-width test csv")
      ->required();
  c_eval->add_option("--out-prefix", eval_args.out_prefix,
                     "prefix for report and manifest")
      ->required();
  c_eval->add_option("--metric", eval_args.metric, "rmse or mse")
      ->capture_default_str();
  c_eval->add_option("--ridge-train", eval_args.ridge_train,
                     "training csv for a ridge regression baseline");

  SelectRankArgs sel_args;
  auto* c_sel = app.add_subcommand("select-rank",
                                   "choose the decomposition rank");
  c_sel->add_option("--data", sel_args.data_csv, "data csv")->required();
  c_sel->add_option("--groups", sel_args.groups_json, "groups sidecar json")
      ->required();
  c_sel->add_option("--ranks", sel_args.ranks, "candidate ranks")
      ->required()
      ->delimiter(',');
  c_sel->add_option("--method", sel_args.method, "cv, elbow or both")
      ->capture_default_str();
  c_sel->add_option("--folds", sel_args.folds, "cross-validation folds")
      ->capture_default_str();
  c_sel->add_option("--restarts", sel_args.restarts, "restarts per fit")
      ->capture_default_str();
  c_sel->add_option("--seed", sel_args.seed,
                    "rng seed (default: GFA_SEED or 0)");
  c_sel->add_option("--theta", sel_args.theta, "elbow flatness threshold")
      ->capture_default_str();
  c_sel->add_option("--k", sel_args.k, "initial factor count")
      ->capture_default_str();
  c_sel->add_option("--max-iters", sel_args.max_iters, "iteration cap")
      ->capture_default_str();
  c_sel->add_option("--jobs", sel_args.jobs, "threads for restarts")
      ->capture_default_str();
  c_sel->add_option("--out-prefix", sel_args.out_prefix,
                    "prefix for selection report and manifest")
      ->required();

  // Let --quiet/--verbose appear after the subcommand name too.
  for (CLI::App* sub : {c_gen, c_fit, c_pred, c_eval, c_sel}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_gen->parsed()) return run_generate(gen, argv_copy, global);
    if (c_fit->parsed()) return run_fit(fit_args, argv_copy, global);
    if (c_pred->parsed()) return run_predict(pred_args, argv_copy, global);
    if (c_eval->parsed()) return run_evaluate(eval_args, argv_copy, global);
    if (c_sel->parsed()) return run_select_rank(sel_args, argv_copy, global);
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
