#include <algorithm>
#include <numeric>
#include <set>

#include "lago/data.hpp"

namespace lago {

namespace {

std::string padded(const char* prefix, int i) {
  std::string digits = std::to_string(i);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return prefix + digits;
}

}  // namespace

SyntheticBenchmark generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.num_groups < 1) throw Error("generate_synthetic: need at least one group");
  if (cfg.attributes_per_group < 1) throw Error("generate_synthetic: attributes_per_group must be >= 1");
  if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) throw Error("generate_synthetic: rho must lie in [0,1)");
  if (cfg.sigma < 0.0) throw Error("generate_synthetic: sigma must be non-negative");
  if (cfg.feature_dim < 1 || cfg.samples_per_class < 1) throw Error("generate_synthetic: empty feature space or class");

  const int k_groups = cfg.num_groups, n_per = cfg.attributes_per_group;
  const int num_attrs = k_groups * n_per;
  const int num_classes = cfg.train_classes + cfg.val_classes + cfg.test_classes;

  double combos = 1.0;
  for (int k = 0; k < k_groups; ++k) combos *= n_per;
  if (combos < num_classes) throw Error("generate_synthetic: not enough attribute combinations for distinct classes");

  Rng rng(seed);
  SyntheticBenchmark bench;

  std::vector<std::string> attr_names;
  for (int k = 0; k < k_groups; ++k) {
    Group g{padded("g", k), {}};
    for (int j = 0; j < n_per; ++j) {
      g.attributes.push_back(k * n_per + j);
      attr_names.push_back(padded("g", k) + "_" + padded("a", j));
    }
    bench.groups.groups.push_back(std::move(g));
  }

  std::vector<std::string> class_names;
  for (int z = 0; z < num_classes; ++z) class_names.push_back(padded("class", z));

  // Each class gets a distinct choice of one true attribute per group. The
  // first training classes walk a random permutation of every group, so each
  // attribute is seen in training whenever there are enough training classes.
  std::set<std::vector<int>> used;
  std::vector<std::vector<int>> perms(k_groups, std::vector<int>(n_per));
  for (auto& perm : perms) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
  }
  for (int z = 0; z < std::min(n_per, cfg.train_classes); ++z) {
    std::vector<int> pick(k_groups);
    for (int k = 0; k < k_groups; ++k) pick[k] = perms[k][z];
    used.insert(pick);
    bench.class_attributes.push_back(std::move(pick));
  }
  while (static_cast<int>(bench.class_attributes.size()) < num_classes) {
    std::vector<int> pick(k_groups);
    for (int k = 0; k < k_groups; ++k) pick[k] = static_cast<int>(rng.index(n_per));
    if (used.insert(pick).second) bench.class_attributes.push_back(std::move(pick));
  }

  ClassDescriptions& desc = bench.descriptions;
  desc.attribute_names = attr_names;
  desc.class_names = class_names;
  desc.u = Matrix::Zero(num_attrs, num_classes);
  for (int z = 0; z < num_classes; ++z) {
    for (int k = 0; k < k_groups; ++k) {
      const int truth = bench.class_attributes[z][k];
      for (int j = 0; j < n_per; ++j) {
        double mass;
        if (n_per == 1) {
          mass = 1.0;
        } else {
          mass = j == truth ? 1.0 - cfg.rho : cfg.rho / (n_per - 1);
        }
        desc.u(k * n_per + j, z) = mass;
      }
    }
  }

  const Matrix detectors = rng.normal_matrix(num_attrs, cfg.feature_dim);

  auto make_split = [&](int first, int count) {
    Dataset ds;
    ds.attribute_names = attr_names;
    for (int z = first; z < first + count; ++z) ds.class_names.push_back(class_names[z]);
    const int n = count * cfg.samples_per_class;
    ds.features.resize(n, cfg.feature_dim);
    Matrix attrs = Matrix::Zero(n, num_attrs);
    int row = 0;
    for (int c = 0; c < count; ++c) {
      const int z = first + c;
      for (int s = 0; s < cfg.samples_per_class; ++s, ++row) {
        // One attribute per group, drawn from the class's within-group distribution.
        for (int k = 0; k < k_groups; ++k) {
          double r = rng.uniform();
          int chosen = n_per - 1;
          for (int j = 0; j < n_per; ++j) {
            r -= desc.u(k * n_per + j, z);
            if (r < 0.0) {
              chosen = j;
              break;
            }
          }
          attrs(row, k * n_per + chosen) = 1.0;
        }
        ds.labels.push_back(c);
        ds.features.row(row) = attrs.row(row) * detectors;
        if (cfg.sigma > 0.0) {
          for (int d = 0; d < cfg.feature_dim; ++d) ds.features(row, d) += rng.normal(0.0, cfg.sigma);
        }
      }
    }
    ds.attribute_labels = std::move(attrs);
    return ds;
  };

  bench.train = make_split(0, cfg.train_classes);
  bench.val = make_split(cfg.train_classes, cfg.val_classes);
  bench.test = make_split(cfg.train_classes + cfg.val_classes, cfg.test_classes);
  bench.split.train = bench.train.class_names;
  bench.split.val = bench.val.class_names;
  bench.split.test = bench.test.class_names;
  return bench;
}

Dataset merge_splits(const SyntheticBenchmark& bench) { return concat(concat(bench.train, bench.val), bench.test); }

}  // namespace lago
