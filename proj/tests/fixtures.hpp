#pragma once

#include <string>

#include "lago/training.hpp"

namespace fixtures {

/// Random loss-evaluation problem: 12 attributes in 3 groups of 4, 5 classes,
/// 8 feature dims, 20 samples.
struct Instance {
  lago::LagoParams params;
  lago::Batch batch;
  lago::Matrix u;
  lago::LossConfig cfg;
  lago::GroupSpec groups;
};

inline Instance random_instance(lago::Variant variant, lago::CompMode comp, lago::PriorMode prior_mode,
                                std::uint64_t seed) {
  using namespace lago;
  constexpr int A = 12, Z = 5, D = 8, K = 3, N = 20;
  Rng rng(seed);
  Instance in;
  for (int k = 0; k < K; ++k) {
    Group g{"g" + std::to_string(k), {}};
    for (int j = 0; j < A / K; ++j) g.attributes.push_back(k * (A / K) + j);
    in.groups.groups.push_back(g);
  }
  auto& p = in.params;
  p.variant = variant;
  p.comp_mode = comp;
  p.prior_mode = prior_mode;
  p.zeta = variant == Variant::semantic_hard ? 10.0 : 2.0;
  p.c_comp = 0.5;
  p.w = rng.normal_matrix(D + 1, A, 0.5);
  if (variant == Variant::semantic_hard) {
    p.v = in.groups.one_hot(A) + rng.normal_matrix(A, K, 0.05);
  } else if (variant != Variant::singletons) {
    p.v = rng.normal_matrix(A, K, 1.0);
  }
  if (is_semantic(variant)) p.groups = in.groups;
  in.u = clamp_descriptions(rng.uniform_matrix(A, Z, 0.0, 1.0));
  p.prior = estimate_attribute_prior({in.u, {}, {}}, prior_mode);
  in.batch.features = rng.normal_matrix(N, D);
  in.batch.targets = rng.uniform_matrix(N, A, 0.0, 1.0);
  for (int i = 0; i < N; ++i) in.batch.labels.push_back(i % Z);
  in.cfg.alpha = 0.3;
  in.cfg.beta = 0.01;
  in.cfg.lambda = 0.02;
  if (variant == Variant::semantic_soft) {
    in.cfg.psi = 0.5;
    in.cfg.gamma_sem = gamma_from_v(in.groups.one_hot(A), p.zeta).gamma;
  }
  return in;
}

}  // namespace fixtures
