#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lago {

/// Row-major dense matrix of doubles. W, U, V and Gamma are all instances.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded pseudo-random stream. Identical seeds give identical streams
/// within one build; distributions come from the standard library.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool coin() { return std::bernoulli_distribution(0.5)(engine_); }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);
  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);

  /// Independent child stream derived from this seed and a tag.
  Rng fork(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive per-trial seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

double sigmoid(double v);
/// log(sigmoid(v)) without overflow.
double log_sigmoid(double v);
/// Elementwise logistic function; throws on non-finite input.
Vector sigmoid(const Vector& v);

/// Row-wise softmax of zeta * m. Throws when zeta <= 0.
Matrix row_softmax(const Matrix& m, double zeta);

/// log(sum(exp(v))) computed stably.
double log_sum_exp(const Vector& v);

/// Sample Pearson correlation. std::nullopt when either input is constant
/// (the coefficient is undefined there).
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution for the p-value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Matrix with orthonormal columns (rows >= cols) or rows (rows < cols),
/// from the QR factorization of a Gaussian matrix.
Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0);

bool all_finite(const Matrix& m);

}  // namespace lago
