#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lago/data.hpp"
#include "lago/numerics.hpp"
#include "lago/training.hpp"

namespace lago {

/// Mean over represented classes of per-class accuracy.
double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels, int num_classes);

/// Zero-shot balanced accuracy of params on dataset, against descriptions
/// whose columns follow dataset.class_names.
double evaluate(const LagoParams& params, const Dataset& dataset, const ClassDescriptions& u);

inline constexpr double kDefaultGammaTau = 1e-3;

/// Fraction of Gamma entries strictly above tau.
double gamma_sparsity(const Matrix& gamma, double tau);

using AttributePair = std::pair<int, int>;

/// Unordered attribute pairs whose tau-thresholded Gamma rows overlap.
std::vector<AttributePair> grouped_pairs(const Matrix& gamma, double tau);

struct GammaAnalysis {
  double sparsity_fraction = 0.0;
  std::vector<AttributePair> grouped_pairs;
  /// Absent when no grouped pair has a defined correlation.
  std::optional<double> anticorr_grouped_fraction;
  double anticorr_baseline_fraction = 0.0;
  /// Grouped vs all-pairs correlation distributions; absent without grouped pairs.
  std::optional<KsResult> ks;
};

/// Correlation statistics for `pairs` against all attribute pairs.
/// Occurrence rows are observations, columns attributes.
GammaAnalysis anticorrelation_report(const Matrix& occurrence, const std::vector<AttributePair>& pairs);

/// Sparsity, grouping and anti-correlation of a learned Gamma.
GammaAnalysis analyze_gamma(const Matrix& gamma, const Matrix& occurrence, double tau = kDefaultGammaTau);

/// Per-sample attribute labels when available, else class descriptions
/// transposed to classes x attributes.
Matrix occurrence_matrix(const Dataset& dataset, const ClassDescriptions& u);

std::string to_json(const GammaAnalysis& analysis);

// -- noise robustness --------------------------------------------------------

struct NoiseArm {
  std::string name;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
};

struct NoiseData {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;  // optional, drives early stopping
  const Dataset* test = nullptr;
  /// Descriptions of every class referenced by the three datasets.
  const ClassDescriptions* u = nullptr;
  const GroupSpec* groups = nullptr;
};

struct NoiseCurvePoint {
  std::string arm;
  double ratio = 0.0;
  double mean_accuracy = 0.0;
  double relative_accuracy = 0.0;
  std::vector<double> per_seed;
};

/// For each arm and corruption ratio: salt-and-pepper the descriptions once
/// per noise seed, train, and record test balanced accuracy. Relative
/// accuracy is against the arm's own ratio-0 mean.
std::vector<NoiseCurvePoint> noise_robustness_experiment(const std::vector<NoiseArm>& arms, const NoiseData& data,
                                                         const std::vector<double>& ratios,
                                                         const std::vector<std::uint64_t>& seeds, int jobs = 1);

std::string noise_curve_csv(const std::vector<NoiseCurvePoint>& curve);

}  // namespace lago
