// Plain-loop evaluation of the training objective in extended precision.
// Shares no code with the Eigen forward pass; finite differences are taken
// on this function so their roundoff floor sits far below the tolerances.

#include <cmath>
#include <vector>

#include "lago/training.hpp"

namespace lago {

namespace {

using Real = long double;

Real log_sigmoid_ext(Real a) {
  if (a >= 0) return -std::log1p(std::exp(-a));
  return a - std::log1p(std::exp(a));
}

}  // namespace

long double reference_loss(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg) {
  const auto A = static_cast<std::size_t>(u.rows());
  const auto Z = static_cast<std::size_t>(u.cols());
  const auto D = static_cast<std::size_t>(params.w.rows() - 1);
  const bool singletons = params.variant == Variant::singletons;
  const std::size_t K = singletons ? A : static_cast<std::size_t>(params.v.cols());
  const bool demorgan = params.comp_mode == CompMode::demorgan;

  std::vector<std::vector<Real>> gamma(A, std::vector<Real>(K, 0));
  for (std::size_t m = 0; m < A; ++m) {
    if (singletons) {
      gamma[m][m] = 1;
      continue;
    }
    Real mx = params.v(m, 0);
    for (std::size_t k = 1; k < K; ++k) mx = std::max<Real>(mx, params.v(m, k));
    Real sum = 0;
    for (std::size_t k = 0; k < K; ++k) {
      gamma[m][k] = std::exp(static_cast<Real>(params.zeta) * (params.v(m, k) - mx));
      sum += gamma[m][k];
    }
    for (std::size_t k = 0; k < K; ++k) gamma[m][k] /= sum;
  }

  std::vector<Real> prior(A);
  for (std::size_t m = 0; m < A; ++m) {
    prior[m] = params.prior.mode == PriorMode::uniform ? params.prior.values[0] : params.prior.values[m];
  }
  Real prior_mean = 0;
  for (Eigen::Index i = 0; i < params.prior.values.size(); ++i) prior_mean += params.prior.values[i];
  prior_mean /= static_cast<Real>(params.prior.values.size());

  // Complementary description / complementary prior, per (k, z).
  std::vector<std::vector<Real>> comp(K, std::vector<Real>(Z));
  for (std::size_t k = 0; k < K; ++k) {
    Real prior_comp = prior_mean;
    if (demorgan) {
      prior_comp = 1;
      for (std::size_t m = 0; m < A; ++m) prior_comp *= 1 - gamma[m][k] * prior[m];
    }
    for (std::size_t z = 0; z < Z; ++z) {
      Real uc = 1;
      for (std::size_t m = 0; m < A; ++m) uc *= 1 - gamma[m][k] * static_cast<Real>(u(m, z));
      comp[k][z] = uc / prior_comp;
    }
  }

  const std::size_t B = batch.labels.size();
  Real cxe = 0, bxe = 0;
  std::vector<Real> logit(A), q(A), log_score(Z);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t m = 0; m < A; ++m) {
      Real a = params.w(D, m);
      for (std::size_t d = 0; d < D; ++d) a += static_cast<Real>(batch.features(i, d)) * params.w(d, m);
      logit[m] = a;
      q[m] = 1 / (1 + std::exp(-a));
      const Real t = batch.targets(i, m);
      bxe -= t * log_sigmoid_ext(a) + (1 - t) * log_sigmoid_ext(-a);
    }
    for (std::size_t z = 0; z < Z; ++z) {
      log_score[z] = 0;
      for (std::size_t k = 0; k < K; ++k) {
        Real s = 0;
        for (std::size_t m = 0; m < A; ++m) s += gamma[m][k] * static_cast<Real>(u(m, z)) / prior[m] * q[m];
        Real p_comp_x = params.c_comp;
        if (demorgan) {
          p_comp_x = 1;
          for (std::size_t m = 0; m < A; ++m) p_comp_x *= 1 - gamma[m][k] * q[m];
        }
        s += comp[k][z] * p_comp_x;
        log_score[z] += std::log(std::max<Real>(s, 1e-300L));
      }
    }
    Real mx = log_score[0];
    for (std::size_t z = 1; z < Z; ++z) mx = std::max(mx, log_score[z]);
    Real sum = 0;
    for (std::size_t z = 0; z < Z; ++z) sum += std::exp(log_score[z] - mx);
    cxe += mx + std::log(sum) - log_score[static_cast<std::size_t>(batch.labels[i])];
  }
  cxe /= static_cast<Real>(B);
  bxe /= static_cast<Real>(B * A);

  Real reg_w = 0;
  for (Eigen::Index i = 0; i < params.w.size(); ++i) reg_w += static_cast<Real>(params.w.data()[i]) * params.w.data()[i];
  Real reg_wu = 0;
  for (std::size_t r = 0; r <= D; ++r) {
    for (std::size_t z = 0; z < Z; ++z) {
      Real s = 0;
      for (std::size_t m = 0; m < A; ++m) s += static_cast<Real>(params.w(r, m)) * u(m, z);
      reg_wu += s * s;
    }
  }
  Real reg_gamma = 0;
  if (cfg.gamma_sem) {
    for (std::size_t m = 0; m < A; ++m) {
      for (std::size_t k = 0; k < K; ++k) {
        const Real d = gamma[m][k] - (*cfg.gamma_sem)(m, k);
        reg_gamma += d * d;
      }
    }
  }
  return cfg.cxe_weight * cxe + cfg.alpha * bxe + cfg.beta * reg_w + cfg.lambda * reg_wu + cfg.psi * reg_gamma;
}

}  // namespace lago
