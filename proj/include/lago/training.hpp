#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lago/data.hpp"
#include "lago/model.hpp"

namespace lago {

/// Weights of the training objective
///   cxe_weight * CXE + alpha * BXE + beta * |W|^2 + lambda * |W U|^2 + psi * |Gamma(V) - Gamma_sem|^2.
/// cxe_weight is 1 for every LAGO model; the DAP baseline trains its
/// detectors with cxe_weight = 0.
struct LossConfig {
  double cxe_weight = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  double psi = 0.0;
  std::optional<Matrix> gamma_sem;

  void validate() const;
};

/// A set of samples materialized for one loss evaluation. Labels index the
/// columns of the description matrix the loss is evaluated against.
struct Batch {
  Matrix features;
  std::vector<int> labels;
  Matrix targets;  // per-sample attribute targets, samples x attributes
};

Batch make_batch(const Dataset& dataset, const Matrix& targets, const std::vector<std::size_t>& rows);
Batch full_batch(const Dataset& dataset, const Matrix& targets);

struct LossComponents {
  double cxe = 0.0;
  double bxe = 0.0;
  double reg_w = 0.0;
  double reg_wu = 0.0;
  double reg_gamma = 0.0;
  double total = 0.0;
};

struct Gradients {
  Matrix w;
  Matrix v;  // empty for singletons
};

/// `u` is the prepared (clamped) training description matrix.
LossComponents loss_forward(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg);

/// Exact gradients of loss_forward's total with respect to w and v.
std::pair<LossComponents, Gradients> loss_gradients(const LagoParams& params, const Batch& batch, const Matrix& u,
                                                    const LossConfig& cfg);

/// The same objective as loss_forward, evaluated with scalar loops in
/// extended precision. Used as the finite-difference reference.
long double reference_loss(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg);

struct GradCheckReport {
  double max_rel_error_w = 0.0;
  double max_rel_error_v = 0.0;
  std::size_t coords_w = 0;
  std::size_t coords_v = 0;

  double max_rel_error() const { return std::max(max_rel_error_w, max_rel_error_v); }
};

/// Central differences of reference_loss on a random subset of at least `min_coords`
/// coordinates per parameter matrix (all of them when the matrix is small).
GradCheckReport finite_diff_check(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg,
                                  double h = 1e-6, std::uint64_t seed = 0, std::size_t min_coords = 50);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Matrix first_moment;
  Matrix second_moment;
  long step = 0;
};

void adam_step(AdamState& state, Matrix& param, const Matrix& grad, double lr);

struct ModelConfig {
  Variant variant = Variant::semantic_hard;
  CompMode comp_mode = CompMode::constant;
  PriorMode prior_mode = PriorMode::uniform;
  /// Ignored by semantic-hard, which always uses 10.
  double zeta = 10.0;
  double c_comp = 0.5;
  /// Group count for k-soft.
  int num_groups = 1;
};

struct TrainConfig {
  double lr_w = 1e-3;
  double lr_v = 0.1;
  int epochs = 100;
  /// 0 means full batch.
  int batch_size = 64;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;
  /// Soft variants update W on even epochs and V on odd epochs.
  bool alternate = true;
};

struct TrainInputs {
  const Dataset* train = nullptr;
  /// Columns must follow train->class_names.
  const ClassDescriptions* u_train = nullptr;
  const Dataset* val = nullptr;
  const ClassDescriptions* u_val = nullptr;
  /// Required by the semantic variants.
  const GroupSpec* groups = nullptr;
};

struct EpochRecord {
  int epoch = 0;
  LossComponents loss;
  std::optional<double> val_balanced_acc;
};

struct TrainResult {
  LagoParams params;
  std::vector<EpochRecord> history;
  /// Epoch the returned params come from; 0 means the initialization.
  int best_epoch = 0;
};

/// Initial parameters: orthogonal detectors with a zero bias row, and V
/// one-hot on the semantic groups or near-uniform for k-soft.
LagoParams init_params(const ModelConfig& model, const TrainInputs& inputs, Rng& rng);

TrainResult train(const ModelConfig& model, const TrainInputs& inputs, const LossConfig& loss, const TrainConfig& cfg);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace lago
