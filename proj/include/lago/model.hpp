#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lago/data.hpp"
#include "lago/numerics.hpp"

namespace lago {

enum class Variant { singletons, semantic_hard, k_soft, semantic_soft };

/// How p(complementary_k = T | x) is formed: a constant, or De-Morgan over
/// the group's detections.
enum class CompMode { constant, demorgan };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& text);
std::string to_string(CompMode mode);
CompMode parse_comp_mode(const std::string& text);

inline bool is_semantic(Variant v) { return v == Variant::semantic_hard || v == Variant::semantic_soft; }
inline bool learns_groups(Variant v) { return v == Variant::k_soft || v == Variant::semantic_soft; }

/// Learned state of one model.
///
/// The group prior p(g_kz = T) and the class prior p(z) are uniform. Both
/// factor out of every class score and vanish under the normalization across
/// classes, so neither is stored.
struct LagoParams {
  /// (feature_dim + 1) x num_attributes detector weights; last row is the bias.
  Matrix w;
  /// num_attributes x K membership logits. Empty for singletons.
  Matrix v;
  double zeta = 10.0;
  double c_comp = 0.5;
  PriorMode prior_mode = PriorMode::uniform;
  CompMode comp_mode = CompMode::constant;
  Variant variant = Variant::semantic_hard;
  /// p(a_m = T), estimated from the training descriptions.
  AttributePrior prior;
  /// Semantic partition, used to normalize descriptions for semantic variants.
  std::optional<GroupSpec> groups;

  Eigen::Index feature_dim() const { return w.rows() - 1; }
  Eigen::Index num_attributes() const { return w.cols(); }
  Eigen::Index num_groups() const { return variant == Variant::singletons ? w.cols() : v.cols(); }
};

/// Row-stochastic attribute x group matrix.
struct GroupMembership {
  Matrix gamma;
};

struct ClassScores {
  Vector log_scores;
  Vector probs;
};

/// sigmoid([x; 1] . w)
Vector attribute_probs(const Matrix& w, const Vector& x);

GroupMembership gamma_from_v(const Matrix& v, double zeta);
/// Gamma for the params' variant; identity for singletons.
GroupMembership membership(const LagoParams& params);

/// prod_m (1 - gamma(m, k) * values(m)).
double complementary_description(const Vector& values, const Matrix& gamma, Eigen::Index k);

/// Soft-OR group scores, K x Z. `u` must already be clamped away from {0,1}.
Matrix group_scores(const Matrix& gamma, const Matrix& u, const AttributePrior& prior, const Vector& attr_probs,
                     CompMode comp_mode, double c_comp);

/// The same scores evaluated directly over a hard partition.
Matrix hard_group_scores(const GroupSpec& groups, const Matrix& u, const AttributePrior& prior,
                         const Vector& attr_probs, CompMode comp_mode, double c_comp);

/// Soft-AND across groups, normalized over classes.
ClassScores class_scores(const Matrix& gscores);

/// Description matrix as the model consumes it: group-sum normalized for
/// semantic variants, then clamped.
Matrix prepare_descriptions(const LagoParams& params, const ClassDescriptions& u);

/// Full forward pass for one sample against prepared descriptions.
ClassScores forward(const LagoParams& params, const Matrix& gamma, const Matrix& u_prepared, const Vector& x);

/// Argmax class over u_prepared's columns; ties go to the lowest index.
int predict(const LagoParams& params, const Matrix& u_prepared, const Vector& x);
std::vector<int> predict_all(const LagoParams& params, const Matrix& u_prepared, const Matrix& features);

/// Single-group closed form, evaluated without the group machinery.
ClassScores lago_k1_score(const LagoParams& params, const Matrix& u_prepared, const Vector& x);

// -- DAP and ESZSL baselines -------------------------------------------------

/// Entries above the matrix mean become 1, the rest 0.
Matrix binarize_descriptions(const Matrix& u);

/// prod_m p(a_m = a_m^z | x) / p(a_m = a_m^z), evaluated in log space.
Vector dap_posterior(const Matrix& u_binary, const Vector& prior, const Vector& attr_probs);

/// D x A bilinear map minimizing the ESZSL ridge objective.
Matrix eszsl_train(const Matrix& features, const std::vector<int>& labels, const Matrix& u_train, double gamma_reg,
                   double lambda_reg);

/// x^T W S
Vector eszsl_scores(const Matrix& w, const Matrix& u, const Vector& x);

}  // namespace lago
