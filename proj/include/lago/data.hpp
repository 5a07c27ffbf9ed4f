#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lago/numerics.hpp"

namespace lago {

/// Labeled samples. Labels index into class_names; attribute_labels, when
/// present, hold one binary row per sample.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::optional<Matrix> attribute_labels;
  std::vector<std::string> class_names;
  std::vector<std::string> attribute_names;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  Eigen::Index feature_dim() const { return features.cols(); }

  /// Throws if labels or attribute entries violate the type's invariants.
  void validate() const;
};

/// u(m, z) = p(a_m = T | z). Rows are attributes, columns are classes.
struct ClassDescriptions {
  Matrix u;
  std::vector<std::string> attribute_names;
  std::vector<std::string> class_names;

  Eigen::Index num_attributes() const { return u.rows(); }
  Eigen::Index num_classes() const { return u.cols(); }
  int class_index(const std::string& name) const;
  /// Columns for the named classes, in the order given.
  ClassDescriptions select(const std::vector<std::string>& classes) const;
};

struct Group {
  std::string name;
  std::vector<int> attributes;
};

struct GroupSpec {
  std::vector<Group> groups;

  std::size_t size() const { return groups.size(); }
  bool is_partition(int num_attributes) const;
  /// Group index of every attribute; -1 where unassigned. Throws on overlap.
  std::vector<int> assignment(int num_attributes) const;
  /// Copy with every unassigned attribute wrapped as its own singleton group.
  GroupSpec with_singletons(const std::vector<std::string>& attribute_names) const;
  /// One-hot attribute x group matrix; rows of unassigned attributes are zero.
  Matrix one_hot(int num_attributes) const;
};

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  void validate() const;
};

enum class PriorMode { uniform, per_attribute };

std::string to_string(PriorMode mode);
PriorMode parse_prior_mode(const std::string& text);

/// p(a_m = T). Uniform mode keeps a single scalar.
struct AttributePrior {
  PriorMode mode = PriorMode::uniform;
  Vector values;

  /// Per-attribute vector of length n (the scalar broadcast in uniform mode).
  Vector expand(Eigen::Index n) const;
  double mean() const { return values.mean(); }
};

inline constexpr double kDescriptionFloor = 1e-6;
inline constexpr double kPriorFloor = 1e-6;

// -- file ingestion ----------------------------------------------------------

struct LoadOptions {
  /// Known class names; unknown labels are an error when non-empty.
  std::vector<std::string> class_names;
  std::vector<std::string> attribute_names;
  /// When set, rows whose label is outside this set are skipped.
  std::optional<std::set<std::string>> keep_classes;
};

Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path,
                     const std::optional<std::filesystem::path>& attr_labels_path,
                     const LoadOptions& options = {});

/// Binary feature file: "LAGO", u32 version, u64 rows, u64 cols, f32 data.
Matrix read_features(const std::filesystem::path& path);
void write_features_binary(const std::filesystem::path& path, const Matrix& features);
void write_features_csv(const std::filesystem::path& path, const Matrix& features);
void write_labels(const std::filesystem::path& path, const Dataset& dataset);
void write_attribute_labels(const std::filesystem::path& path, const Matrix& labels);

ClassDescriptions read_descriptions(const std::filesystem::path& path);
void write_descriptions(const std::filesystem::path& path, const ClassDescriptions& u);

/// Group names resolve against attribute_names; unassigned attributes are
/// wrapped as singleton groups.
GroupSpec read_groups(const std::filesystem::path& path,
                      const std::vector<std::string>& attribute_names);
void write_groups(const std::filesystem::path& path, const GroupSpec& groups,
                  const std::vector<std::string>& attribute_names);

SplitSpec read_splits(const std::filesystem::path& path);
void write_splits(const std::filesystem::path& path, const SplitSpec& split);

// -- dataset manipulation ----------------------------------------------------

/// Samples of the named classes, relabeled to positions in `classes`.
Dataset select_classes(const Dataset& dataset, const std::vector<std::string>& classes);
/// Union of two datasets with disjoint or overlapping class registries.
Dataset concat(const Dataset& a, const Dataset& b);

// -- estimation --------------------------------------------------------------

/// Maximum-likelihood u(m, z) from per-sample attribute labels.
ClassDescriptions estimate_class_descriptions(const Dataset& dataset);

AttributePrior estimate_attribute_prior(const ClassDescriptions& u, PriorMode mode);

/// Rescales each (group, class) block whose sum exceeds one down to unit sum.
ClassDescriptions normalize_group_sums(const ClassDescriptions& u, const GroupSpec& groups);

/// Entries clamped to [floor, 1 - floor] for use in the model.
Matrix clamp_descriptions(const Matrix& u, double floor = kDescriptionFloor);

/// Overwrites round(ratio * entries) distinct entries with a fair 0/1 coin.
ClassDescriptions inject_salt_pepper(const ClassDescriptions& u, double ratio, std::uint64_t seed);

/// Per-sample attribute targets: the labels if present, else each sample's
/// class description column.
Matrix attribute_targets(const Dataset& dataset, const ClassDescriptions& u);

// -- synthetic benchmarks ----------------------------------------------------

struct SyntheticConfig {
  int num_groups = 4;
  int attributes_per_group = 5;
  int train_classes = 10;
  int val_classes = 5;
  int test_classes = 5;
  int feature_dim = 32;
  int samples_per_class = 20;
  /// Rater confusion: description mass moved from the true attribute to
  /// its group siblings.
  double rho = 0.0;
  /// Feature noise standard deviation.
  double sigma = 0.0;
};

struct SyntheticBenchmark {
  Dataset train;
  Dataset val;
  Dataset test;
  ClassDescriptions descriptions;  // all classes, train then val then test
  GroupSpec groups;
  SplitSpec split;
  /// True attribute per (class, group).
  std::vector<std::vector<int>> class_attributes;
};

SyntheticBenchmark generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

/// Whole benchmark as one dataset (every split, global class registry).
Dataset merge_splits(const SyntheticBenchmark& bench);

}  // namespace lago
