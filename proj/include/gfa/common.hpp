#ifndef GFA_COMMON_HPP
#define GFA_COMMON_HPP

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gfa {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using Index = Eigen::Index;

/// Thrown when a solve or bound evaluation stops being numerically usable
/// (loss of positive definiteness, non-finite accumulation). Maps to CLI
/// exit code 2.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Standard-normal fill in fixed row-major order, so a given seed yields a
/// bit-identical matrix regardless of how the result is used.
inline Matrix random_normal(Index rows, Index cols, Rng& rng,
                            double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      out(i, j) = normal(rng);
    }
  }
  return out;
}

/// splitmix64 step; used to derive independent sub-seeds for restarts and
/// cross-validation folds from one user-facing seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Matrix symmetrized(const Matrix& a) {
  return 0.5 * (a + a.transpose());
}

/// Inverse of a symmetric positive definite matrix via Cholesky, with
/// symmetrization of the result to control round-off drift.
inline Matrix spd_inverse(const Matrix& a, const char* what) {
  const Matrix sym = symmetrized(a);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw numerical_error(std::string(what) +
                          ": matrix is not positive definite "
                          "(non-finite values upstream?)");
  }
  return symmetrized(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

inline double spd_log_det(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(symmetrized(a));
  if (llt.info() != Eigen::Success) {
    throw numerical_error(std::string(what) +
                          ": matrix is not positive definite");
  }
  return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

/// Runs body(i) for i in [0, n). Results must be written to independent
/// slots; the aggregation a caller performs afterwards is then identical
/// for any jobs count.
template <class F>
void parallel_for(int n, int jobs, F&& body) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(jobs, n);
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace gfa

#endif  // GFA_COMMON_HPP
