#ifndef GFA_HYPERPARAMETERS_HPP
#define GFA_HYPERPARAMETERS_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gfa/common.hpp"

namespace gfa {

/// Settings for the inner quasi-Newton solver used by the low-rank
/// association-strength update.
struct InnerOptSettings {
  int memory = 10;
  int max_iters = 200;
  double grad_tol = 1e-6;  // relative to max(1, |objective|)
};

struct Hyperparameters {
  int k_init = 10;   // initial number of factors
  int rank = 1;      // rank of the association-strength decomposition

  double tau_shape = 1e-14;  // noise precision prior (shape, rate)
  double tau_rate = 1e-14;
  double lambda = 0.1;       // precision of the U, V priors

  // Per-element precision prior used when rank == min(groups, k_init);
  // the decomposition then has no constraining effect and the model falls
  // back to independent conjugate updates.
  double alpha_shape = 1e-14;
  double alpha_rate = 1e-14;

  double prune_threshold = 1e-7;  // mean squared factor score below which a
                                  // factor is removed
  double elbo_rel_tol = 1e-6;
  long max_iters = 100000;
  double log_alpha_cap = std::log(1e12);  // |log alpha| clamp in the
                                          // low-rank parameterization

  bool standardize = false;  // divide columns by their std before fitting

  InnerOptSettings inner_opt;

  void validate(int m_groups) const {
    if (k_init < 1) {
      throw std::invalid_argument("k_init must be >= 1, got " +
                                  std::to_string(k_init));
    }
    if (m_groups < 1) {
      throw std::invalid_argument("need at least one group");
    }
    const int max_rank = std::min(m_groups, k_init);
    if (rank < 0 || rank > max_rank) {
      throw std::invalid_argument(
          "rank must be in [0, " + std::to_string(max_rank) + "], got " +
          std::to_string(rank));
    }
    if (tau_shape <= 0 || tau_rate <= 0 || alpha_shape <= 0 ||
        alpha_rate <= 0) {
      throw std::invalid_argument("gamma prior parameters must be positive");
    }
    if (lambda <= 0) {
      throw std::invalid_argument("lambda must be positive");
    }
    if (prune_threshold < 0) {
      throw std::invalid_argument("prune_threshold must be non-negative");
    }
    if (elbo_rel_tol <= 0) {
      throw std::invalid_argument("elbo_rel_tol must be positive");
    }
    if (max_iters < 1) {
      throw std::invalid_argument("max_iters must be >= 1");
    }
    if (log_alpha_cap <= 0) {
      throw std::invalid_argument("log_alpha_cap must be positive");
    }
    if (inner_opt.memory < 1 || inner_opt.max_iters < 1 ||
        inner_opt.grad_tol <= 0) {
      throw std::invalid_argument("invalid inner optimizer settings");
    }
  }
};

inline Hyperparameters default_hyperparameters(int m_groups, int k_init) {
  Hyperparameters h;
  h.k_init = k_init;
  h.rank = std::min(m_groups, k_init);
  return h;
}

/// Full rank removes the low-rank coupling entirely, so the conjugate
/// per-element gamma update applies.
inline bool use_full_rank(const Hyperparameters& h, int m_groups) {
  return h.rank == std::min(m_groups, h.k_init);
}

}  // namespace gfa

#endif  // GFA_HYPERPARAMETERS_HPP
