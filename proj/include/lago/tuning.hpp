#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lago/data.hpp"
#include "lago/training.hpp"

namespace lago {

/// Candidate values per hyperparameter axis. Axes a variant does not use are
/// collapsed to their first value before searching.
struct SearchSpace {
  std::vector<double> lr_w{3e-6, 1e-5, 3e-5, 1e-4, 3e-4};
  std::vector<double> beta{0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  std::vector<double> lambda{0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  std::vector<double> lr_v{0.01, 0.1, 1.0};
  std::vector<double> zeta{1.0, 3.0, 10.0};
  std::vector<int> num_groups{1, 10, 20, 30, 40, 60};
  std::vector<double> psi{1e-5, 1e-4, 1e-3, 1e-2};
  /// Every surviving config is scored as its mean over these seeds.
  std::vector<std::uint64_t> seeds{0, 1, 2};

  void validate() const;
  SearchSpace restricted_to(Variant variant) const;
  std::size_t grid_size() const;
};

struct TrialConfig {
  double lr_w = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  double lr_v = 0.0;
  double zeta = 0.0;
  int num_groups = 0;
  double psi = 0.0;

  std::string key() const;
  std::uint64_t hash() const;
  bool operator==(const TrialConfig&) const = default;
};

struct TrialResult {
  TrialConfig config;
  std::vector<double> per_seed;
  std::vector<int> best_epochs;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Settings shared by every trial; trial values override the matching fields.
struct SearchBase {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
};

/// Everything a search may read. There is deliberately no test split here.
struct SearchData {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  /// Descriptions covering the train and val classes.
  const ClassDescriptions* u = nullptr;
  const GroupSpec* groups = nullptr;
};

struct SearchResult {
  /// Best first; ties broken by config hash.
  std::vector<TrialResult> trials;
  const TrialResult& best() const { return trials.front(); }
};

/// Random coarse sample of up to `budget` grid points (the whole grid when
/// it fits), then two rounds of adjacent-grid-point refinement around the
/// incumbent.
SearchResult grid_search(const SearchSpace& space, const SearchBase& base, const SearchData& data, std::size_t budget,
                         std::uint64_t master_seed, int jobs = 1);

/// Mean-over-seeds validation accuracy of one config.
TrialResult run_trial(const TrialConfig& config, const std::vector<std::uint64_t>& seeds, const SearchBase& base,
                      const SearchData& data);

std::string trial_table_csv(const std::vector<TrialResult>& trials);

struct FinalModel {
  LagoParams params;
  int epochs = 0;
  std::vector<EpochRecord> history;
  std::vector<std::string> class_names;  // train then val classes
};

/// Retrains on train + val classes for the epoch count averaged from the
/// trial's validation curves.
FinalModel finalize(const TrialResult& best, const SearchBase& base, const SearchData& data);

/// Applies a trial's values onto the base settings.
SearchBase apply(const TrialConfig& config, const SearchBase& base);

}  // namespace lago
