#include "lago/model.hpp"

#include <algorithm>
#include <cmath>

namespace lago {

namespace {

constexpr double kScoreFloor = 1e-300;

}  // namespace

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::singletons: return "singletons";
    case Variant::semantic_hard: return "semantic-hard";
    case Variant::k_soft: return "k-soft";
    case Variant::semantic_soft: return "semantic-soft";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  for (auto v : {Variant::singletons, Variant::semantic_hard, Variant::k_soft, Variant::semantic_soft}) {
    if (to_string(v) == text) return v;
  }
  throw Error("unknown variant: " + text);
}

std::string to_string(CompMode mode) { return mode == CompMode::constant ? "const" : "demorgan"; }

CompMode parse_comp_mode(const std::string& text) {
  if (text == "const") return CompMode::constant;
  if (text == "demorgan") return CompMode::demorgan;
  throw Error("unknown complementary mode: " + text);
}

Vector attribute_probs(const Matrix& w, const Vector& x) {
  if (x.size() != w.rows() - 1) {
    throw Error("attribute_probs: feature length " + std::to_string(x.size()) + " does not match detector input " +
                std::to_string(w.rows() - 1));
  }
  const Vector logits = (x.transpose() * w.topRows(w.rows() - 1)).transpose() + w.row(w.rows() - 1).transpose();
  return sigmoid(logits);
}

GroupMembership gamma_from_v(const Matrix& v, double zeta) { return {row_softmax(v, zeta)}; }

GroupMembership membership(const LagoParams& params) {
  if (params.variant == Variant::singletons) return {Matrix::Identity(params.num_attributes(), params.num_attributes())};
  return gamma_from_v(params.v, params.zeta);
}

double complementary_description(const Vector& values, const Matrix& gamma, Eigen::Index k) {
  double p = 1.0;
  for (Eigen::Index m = 0; m < gamma.rows(); ++m) p *= 1.0 - gamma(m, k) * values[m];
  return p;
}

Matrix group_scores(const Matrix& gamma, const Matrix& u, const AttributePrior& prior, const Vector& attr_probs,
                    CompMode comp_mode, double c_comp) {
  const Eigen::Index A = u.rows(), Z = u.cols(), K = gamma.cols();
  if (gamma.rows() != A || attr_probs.size() != A) throw Error("group_scores: shape mismatch");
  const Vector p = prior.expand(A);
  const Matrix ratio = p.cwiseInverse().asDiagonal() * u;  // u(m,z) / p(m)

  Matrix scores = gamma.transpose() * (attr_probs.asDiagonal() * ratio);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double prior_comp =
        comp_mode == CompMode::demorgan ? complementary_description(p, gamma, k) : prior.mean();
    const double p_comp_x =
        comp_mode == CompMode::demorgan ? complementary_description(attr_probs, gamma, k) : c_comp;
    for (Eigen::Index z = 0; z < Z; ++z) {
      const double u_comp = complementary_description(u.col(z), gamma, k);
      scores(k, z) += u_comp / prior_comp * p_comp_x;
    }
  }
  return scores;
}

Matrix hard_group_scores(const GroupSpec& groups, const Matrix& u, const AttributePrior& prior,
                         const Vector& attr_probs, CompMode comp_mode, double c_comp) {
  const Vector p = prior.expand(u.rows());
  Matrix scores(static_cast<Eigen::Index>(groups.size()), u.cols());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& members = groups.groups[k].attributes;
    double prior_comp = prior.mean();
    double p_comp_x = c_comp;
    if (comp_mode == CompMode::demorgan) {
      prior_comp = 1.0;
      p_comp_x = 1.0;
      for (int m : members) {
        prior_comp *= 1.0 - p[m];
        p_comp_x *= 1.0 - attr_probs[m];
      }
    }
    for (Eigen::Index z = 0; z < u.cols(); ++z) {
      double sum = 0.0, u_comp = 1.0;
      for (int m : members) {
        sum += u(m, z) / p[m] * attr_probs[m];
        u_comp *= 1.0 - u(m, z);
      }
      scores(static_cast<Eigen::Index>(k), z) = sum + u_comp / prior_comp * p_comp_x;
    }
  }
  return scores;
}

ClassScores class_scores(const Matrix& gscores) {
  ClassScores out;
  out.log_scores = Vector::Zero(gscores.cols());
  for (Eigen::Index z = 0; z < gscores.cols(); ++z) {
    for (Eigen::Index k = 0; k < gscores.rows(); ++k) out.log_scores[z] += std::log(std::max(gscores(k, z), kScoreFloor));
  }
  const double lse = log_sum_exp(out.log_scores);
  out.probs = (out.log_scores.array() - lse).exp();
  return out;
}

Matrix prepare_descriptions(const LagoParams& params, const ClassDescriptions& u) {
  if (u.u.rows() != params.num_attributes()) throw Error("descriptions have the wrong number of attributes");
  if (is_semantic(params.variant) && params.groups) {
    return clamp_descriptions(normalize_group_sums(u, *params.groups).u);
  }
  return clamp_descriptions(u.u);
}

ClassScores forward(const LagoParams& params, const Matrix& gamma, const Matrix& u_prepared, const Vector& x) {
  const Vector q = attribute_probs(params.w, x);
  return class_scores(group_scores(gamma, u_prepared, params.prior, q, params.comp_mode, params.c_comp));
}

int predict(const LagoParams& params, const Matrix& u_prepared, const Vector& x) {
  if (u_prepared.cols() == 0) throw Error("predict: empty class set");
  const auto scores = forward(params, membership(params).gamma, u_prepared, x);
  Eigen::Index best = 0;
  for (Eigen::Index z = 1; z < scores.log_scores.size(); ++z) {
    if (scores.log_scores[z] > scores.log_scores[best]) best = z;
  }
  return static_cast<int>(best);
}

std::vector<int> predict_all(const LagoParams& params, const Matrix& u_prepared, const Matrix& features) {
  if (u_prepared.cols() == 0) throw Error("predict: empty class set");
  const Matrix gamma = membership(params).gamma;
  std::vector<int> out;
  out.reserve(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const auto scores = forward(params, gamma, u_prepared, features.row(i).transpose());
    Eigen::Index best = 0;
    for (Eigen::Index z = 1; z < scores.log_scores.size(); ++z) {
      if (scores.log_scores[z] > scores.log_scores[best]) best = z;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

ClassScores lago_k1_score(const LagoParams& params, const Matrix& u_prepared, const Vector& x) {
  const Vector q = attribute_probs(params.w, x);
  const Vector p = params.prior.expand(u_prepared.rows());
  double prior_comp = params.prior.mean();
  double p_comp_x = params.c_comp;
  if (params.comp_mode == CompMode::demorgan) {
    prior_comp = (1.0 - p.array()).prod();
    p_comp_x = (1.0 - q.array()).prod();
  }
  Vector s(u_prepared.cols());
  for (Eigen::Index z = 0; z < u_prepared.cols(); ++z) {
    const double detected = (q.array() * u_prepared.col(z).array() / p.array()).sum();
    const double absent = (1.0 - u_prepared.col(z).array()).prod();
    s[z] = detected + absent / prior_comp * p_comp_x;
  }
  ClassScores out;
  out.log_scores = s.array().max(kScoreFloor).log();
  out.probs = s / s.sum();
  return out;
}

Matrix binarize_descriptions(const Matrix& u) {
  const double threshold = u.mean();
  return (u.array() > threshold).cast<double>();
}

Vector dap_posterior(const Matrix& u_binary, const Vector& prior, const Vector& attr_probs) {
  const Eigen::Index A = u_binary.rows();
  if (prior.size() != A || attr_probs.size() != A) throw Error("dap_posterior: shape mismatch");
  for (Eigen::Index m = 0; m < A; ++m) {
    if (!(prior[m] > 0.0 && prior[m] < 1.0)) throw Error("dap_posterior: prior must lie strictly inside (0,1)");
  }
  Vector scores(u_binary.cols());
  for (Eigen::Index z = 0; z < u_binary.cols(); ++z) {
    double log_score = 0.0;
    for (Eigen::Index m = 0; m < A; ++m) {
      if (u_binary(m, z) > 0.5) {
        log_score += std::log(attr_probs[m]) - std::log(prior[m]);
      } else {
        log_score += std::log1p(-attr_probs[m]) - std::log1p(-prior[m]);
      }
    }
    scores[z] = std::exp(log_score);
  }
  return scores;
}

Matrix eszsl_train(const Matrix& features, const std::vector<int>& labels, const Matrix& u_train, double gamma_reg,
                   double lambda_reg) {
  if (!(gamma_reg > 0.0 && lambda_reg > 0.0)) throw Error("eszsl_train: regularizers must be positive");
  const Eigen::Index n = features.rows(), d = features.cols(), z = u_train.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw Error("eszsl_train: label count mismatch");
  Matrix y = Matrix::Constant(n, z, -1.0);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[i]) = 1.0;

  const Eigen::MatrixXd x = features.transpose();  // d x n
  const Eigen::MatrixXd s = u_train;               // a x z
  const Eigen::MatrixXd left = x * x.transpose() + gamma_reg * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd right = s * s.transpose() + lambda_reg * Eigen::MatrixXd::Identity(s.rows(), s.rows());
  const Eigen::MatrixXd middle = x * Eigen::MatrixXd(y) * s.transpose();  // d x a
  const Eigen::MatrixXd solved_left = left.ldlt().solve(middle);
  // (solved_left) * right^{-1} = (right^{-1} solved_left^T)^T, right is symmetric.
  const Eigen::MatrixXd w = right.ldlt().solve(solved_left.transpose()).transpose();
  return w;
}

Vector eszsl_scores(const Matrix& w, const Matrix& u, const Vector& x) {
  return (x.transpose() * w * u).transpose();
}

}  // namespace lago
