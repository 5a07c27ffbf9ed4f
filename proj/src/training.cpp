#include "lago/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "lago/evaluation.hpp"

namespace lago {

namespace {

constexpr double kScoreFloor = 1e-300;

// Quantities that depend on Gamma and U but not on the sample.
struct SharedTerms {
  Matrix gamma;       // A x K
  Vector prior;       // A
  Matrix ratio;       // A x Z, u / prior
  Matrix u_comp;      // K x Z, prod_m (1 - gamma(m,k) u(m,z))
  Vector prior_comp;  // K
  Matrix comp;        // K x Z, u_comp / prior_comp
};

SharedTerms shared_terms(const LagoParams& params, const Matrix& u) {
  SharedTerms t;
  t.gamma = membership(params).gamma;
  const Eigen::Index A = u.rows(), Z = u.cols(), K = t.gamma.cols();
  t.prior = params.prior.expand(A);
  t.ratio = t.prior.cwiseInverse().asDiagonal() * u;
  t.u_comp.resize(K, Z);
  t.prior_comp.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index z = 0; z < Z; ++z) t.u_comp(k, z) = complementary_description(u.col(z), t.gamma, k);
    t.prior_comp[k] = params.comp_mode == CompMode::demorgan ? complementary_description(t.prior, t.gamma, k)
                                                              : params.prior.mean();
  }
  t.comp = t.prior_comp.cwiseInverse().asDiagonal() * t.u_comp;
  return t;
}

// prod over m' != m of (1 - gamma(m', k) * values(m')), for every (m, k).
Matrix leave_one_out_products(const Matrix& gamma, const Vector& values) {
  const Eigen::Index A = gamma.rows(), K = gamma.cols();
  Matrix out(A, K);
  std::vector<double> prefix(A + 1);
  for (Eigen::Index k = 0; k < K; ++k) {
    prefix[0] = 1.0;
    for (Eigen::Index m = 0; m < A; ++m) prefix[m + 1] = prefix[m] * (1.0 - gamma(m, k) * values[m]);
    double suffix = 1.0;
    for (Eigen::Index m = A - 1; m >= 0; --m) {
      out(m, k) = prefix[m] * suffix;
      suffix *= 1.0 - gamma(m, k) * values[m];
    }
  }
  return out;
}

Matrix with_bias_column(const Matrix& features) {
  Matrix x(features.rows(), features.cols() + 1);
  x.leftCols(features.cols()) = features;
  x.col(features.cols()).setOnes();
  return x;
}

LossComponents evaluate_loss(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg,
                             Gradients* grads) {
  if (batch.labels.empty()) throw Error("loss: empty batch");
  if (batch.features.cols() != params.feature_dim()) throw Error("loss: feature dimension mismatch");
  if (u.rows() != params.num_attributes()) throw Error("loss: description rows do not match attributes");
  cfg.validate();

  const SharedTerms t = shared_terms(params, u);
  const Eigen::Index A = u.rows(), Z = u.cols(), K = t.gamma.cols();
  const auto B = static_cast<Eigen::Index>(batch.labels.size());
  const bool demorgan = params.comp_mode == CompMode::demorgan;

  const Matrix x = with_bias_column(batch.features);
  const Matrix logits = x * params.w;  // B x A

  LossComponents out;
  Matrix grad_logits;      // B x A
  Matrix grad_gamma;       // A x K
  Matrix comp_weighted;    // K x Z, sum over samples of G(k,z) * P(k)
  if (grads) {
    grad_logits = Matrix::Zero(B, A);
    grad_gamma = Matrix::Zero(A, K);
    comp_weighted = Matrix::Zero(K, Z);
  }

  for (Eigen::Index i = 0; i < B; ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= Z) throw Error("loss: label outside the training classes");
    Vector q(A);
    for (Eigen::Index m = 0; m < A; ++m) q[m] = sigmoid(logits(i, m));

    Vector p_comp_x(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      p_comp_x[k] = demorgan ? complementary_description(q, t.gamma, k) : params.c_comp;
    }
    const Matrix scores = t.gamma.transpose() * (q.asDiagonal() * t.ratio) + p_comp_x.asDiagonal() * t.comp;

    Vector log_scores = Vector::Zero(Z);
    for (Eigen::Index z = 0; z < Z; ++z) {
      for (Eigen::Index k = 0; k < K; ++k) log_scores[z] += std::log(std::max(scores(k, z), kScoreFloor));
    }
    const double lse = log_sum_exp(log_scores);
    out.cxe += lse - log_scores[y];

    for (Eigen::Index m = 0; m < A; ++m) {
      const double target = batch.targets(i, m);
      out.bxe -= target * log_sigmoid(logits(i, m)) + (1.0 - target) * log_sigmoid(-logits(i, m));
    }

    if (!grads) continue;

    // d(cxe_i)/d(log_scores) = probs - onehot(y)
    Vector grad_log = (log_scores.array() - lse).exp();
    grad_log[y] -= 1.0;
    grad_log *= cfg.cxe_weight / static_cast<double>(B);

    Matrix g(K, Z);  // d/d(scores)
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index z = 0; z < Z; ++z) g(k, z) = scores(k, z) > kScoreFloor ? grad_log[z] / scores(k, z) : 0.0;
    }
    const Matrix ratio_g = t.ratio * g.transpose();  // A x K
    Vector grad_q = t.gamma.cwiseProduct(ratio_g).rowwise().sum();
    grad_gamma += q.asDiagonal() * ratio_g;
    comp_weighted += p_comp_x.asDiagonal() * g;

    if (demorgan) {
      const Vector grad_p = g.cwiseProduct(t.comp).rowwise().sum();  // K
      const Matrix loo = leave_one_out_products(t.gamma, q);
      for (Eigen::Index m = 0; m < A; ++m) {
        for (Eigen::Index k = 0; k < K; ++k) {
          grad_q[m] -= grad_p[k] * t.gamma(m, k) * loo(m, k);
          grad_gamma(m, k) -= grad_p[k] * q[m] * loo(m, k);
        }
      }
    }
    for (Eigen::Index m = 0; m < A; ++m) grad_logits(i, m) = grad_q[m] * q[m] * (1.0 - q[m]);
    if (cfg.alpha != 0.0) {
      const double scale = cfg.alpha / static_cast<double>(B * A);
      for (Eigen::Index m = 0; m < A; ++m) grad_logits(i, m) += scale * (q[m] - batch.targets(i, m));
    }
  }

  out.cxe /= static_cast<double>(B);
  out.bxe /= static_cast<double>(B * A);
  out.reg_w = params.w.squaredNorm();
  const Matrix wu = params.w * u;
  out.reg_wu = wu.squaredNorm();
  if (cfg.gamma_sem) out.reg_gamma = (t.gamma - *cfg.gamma_sem).squaredNorm();
  out.total = cfg.cxe_weight * out.cxe + cfg.alpha * out.bxe + cfg.beta * out.reg_w + cfg.lambda * out.reg_wu +
              cfg.psi * out.reg_gamma;

  if (!grads) return out;

  grads->w = x.transpose() * grad_logits;
  if (cfg.beta != 0.0) grads->w += 2.0 * cfg.beta * params.w;
  if (cfg.lambda != 0.0) grads->w += 2.0 * cfg.lambda * wu * u.transpose();

  if (params.variant == Variant::singletons) {
    grads->v = Matrix();
    return out;
  }

  // Through comp = u_comp / prior_comp.
  for (Eigen::Index k = 0; k < K; ++k) {
    double grad_prior_comp = 0.0;
    for (Eigen::Index z = 0; z < Z; ++z) {
      const double grad_u_comp = comp_weighted(k, z) / t.prior_comp[k];
      grad_prior_comp -= comp_weighted(k, z) * t.comp(k, z) / t.prior_comp[k];
      for (Eigen::Index m = 0; m < A; ++m) {
        const double others = t.u_comp(k, z) / (1.0 - t.gamma(m, k) * u(m, z));
        grad_gamma(m, k) -= grad_u_comp * u(m, z) * others;
      }
    }
    if (demorgan) {
      for (Eigen::Index m = 0; m < A; ++m) {
        const double others = t.prior_comp[k] / (1.0 - t.gamma(m, k) * t.prior[m]);
        grad_gamma(m, k) -= grad_prior_comp * t.prior[m] * others;
      }
    }
  }
  if (cfg.gamma_sem && cfg.psi != 0.0) grad_gamma += 2.0 * cfg.psi * (t.gamma - *cfg.gamma_sem);

  // Row softmax of zeta * V.
  grads->v.resize(A, K);
  for (Eigen::Index m = 0; m < A; ++m) {
    const double inner = t.gamma.row(m).dot(grad_gamma.row(m));
    for (Eigen::Index k = 0; k < K; ++k) grads->v(m, k) = params.zeta * t.gamma(m, k) * (grad_gamma(m, k) - inner);
  }
  return out;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
}

std::vector<Eigen::Index> pick_coordinates(Eigen::Index size, std::size_t min_coords, Rng& rng) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(size));
  std::iota(all.begin(), all.end(), 0);
  if (all.size() <= min_coords) return all;
  std::shuffle(all.begin(), all.end(), rng.engine());
  all.resize(min_coords);
  return all;
}

}  // namespace

void LossConfig::validate() const {
  for (double v : {cxe_weight, alpha, beta, lambda, psi}) {
    if (!(v >= 0.0)) throw Error("loss weights must be non-negative");
  }
  if (psi > 0.0 && !gamma_sem) throw Error("psi > 0 requires a semantic group prior");
}

Batch make_batch(const Dataset& dataset, const Matrix& targets, const std::vector<std::size_t>& rows) {
  Batch b;
  b.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.features.cols());
  b.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.features.row(i) = dataset.features.row(rows[i]);
    b.targets.row(i) = targets.row(rows[i]);
    b.labels.push_back(dataset.labels[rows[i]]);
  }
  return b;
}

Batch full_batch(const Dataset& dataset, const Matrix& targets) { return {dataset.features, dataset.labels, targets}; }

LossComponents loss_forward(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg) {
  return evaluate_loss(params, batch, u, cfg, nullptr);
}

std::pair<LossComponents, Gradients> loss_gradients(const LagoParams& params, const Batch& batch, const Matrix& u,
                                                    const LossConfig& cfg) {
  Gradients grads;
  const auto loss = evaluate_loss(params, batch, u, cfg, &grads);
  return {loss, std::move(grads)};
}

GradCheckReport finite_diff_check(const LagoParams& params, const Batch& batch, const Matrix& u, const LossConfig& cfg,
                                  double h, std::uint64_t seed, std::size_t min_coords) {
  if (!(h >= 1e-8 && h <= 1e-3)) throw Error("finite_diff_check: h must lie in [1e-8, 1e-3]");
  const auto [loss, grads] = loss_gradients(params, batch, u, cfg);
  (void)loss;
  Rng rng(seed);
  GradCheckReport report;
  LagoParams probe = params;

  auto central = [&](Matrix& target, Eigen::Index idx) {
    const double saved = target.data()[idx];
    const double up = saved + h;
    const double down = saved - h;
    target.data()[idx] = up;
    const long double plus = reference_loss(probe, batch, u, cfg);
    target.data()[idx] = down;
    const long double minus = reference_loss(probe, batch, u, cfg);
    target.data()[idx] = saved;
    return static_cast<double>((plus - minus) / (static_cast<long double>(up) - down));
  };

  for (Eigen::Index idx : pick_coordinates(params.w.size(), min_coords, rng)) {
    report.max_rel_error_w = std::max(report.max_rel_error_w, relative_error(grads.w.data()[idx], central(probe.w, idx)));
    ++report.coords_w;
  }
  if (params.variant != Variant::singletons) {
    for (Eigen::Index idx : pick_coordinates(params.v.size(), min_coords, rng)) {
      report.max_rel_error_v =
          std::max(report.max_rel_error_v, relative_error(grads.v.data()[idx], central(probe.v, idx)));
      ++report.coords_v;
    }
  }
  return report;
}

void adam_step(AdamState& state, Matrix& param, const Matrix& grad, double lr) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) throw Error("adam_step: shape mismatch");
  if (state.first_moment.size() == 0) {
    state.first_moment = Matrix::Zero(param.rows(), param.cols());
    state.second_moment = Matrix::Zero(param.rows(), param.cols());
  }
  ++state.step;
  state.first_moment = AdamState::kBeta1 * state.first_moment + (1.0 - AdamState::kBeta1) * grad;
  state.second_moment =
      AdamState::kBeta2 * state.second_moment + (1.0 - AdamState::kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.step));
  param.array() -=
      lr * (state.first_moment.array() / c1) / ((state.second_moment.array() / c2).sqrt() + AdamState::kEpsilon);
}

LagoParams init_params(const ModelConfig& model, const TrainInputs& inputs, Rng& rng) {
  if (!inputs.train || !inputs.u_train) throw Error("train: training data and descriptions are required");
  if (is_semantic(model.variant) && !inputs.groups) throw Error("train: " + to_string(model.variant) + " requires a group spec");
  if (!(model.zeta > 0.0)) throw Error("train: zeta must be positive");
  if (!(model.c_comp >= 0.0 && model.c_comp <= 1.0)) throw Error("train: c_comp must lie in [0,1]");

  const Eigen::Index D = inputs.train->features.cols();
  const Eigen::Index A = inputs.u_train->u.rows();

  LagoParams p;
  p.variant = model.variant;
  p.comp_mode = model.comp_mode;
  p.prior_mode = model.prior_mode;
  p.c_comp = model.c_comp;
  p.zeta = model.variant == Variant::semantic_hard ? 10.0 : model.zeta;
  if (is_semantic(model.variant)) p.groups = *inputs.groups;

  p.w = Matrix::Zero(D + 1, A);
  p.w.topRows(D) = orthogonal(D, A, rng);

  switch (model.variant) {
    case Variant::singletons:
      break;
    case Variant::semantic_hard:
    case Variant::semantic_soft:
      p.v = inputs.groups->one_hot(static_cast<int>(A));
      break;
    case Variant::k_soft:
      if (model.num_groups < 1) throw Error("train: k-soft needs at least one group");
      p.v = rng.uniform_matrix(A, model.num_groups, 0.0, 1e-3);
      break;
  }
  p.prior = estimate_attribute_prior({prepare_descriptions(p, *inputs.u_train), {}, {}}, model.prior_mode);
  return p;
}

TrainResult train(const ModelConfig& model, const TrainInputs& inputs, const LossConfig& loss_cfg,
                  const TrainConfig& cfg) {
  if (!(cfg.lr_w > 0.0 && cfg.lr_v > 0.0)) throw Error("train: learning rates must be positive");
  if (cfg.batch_size < 0) throw Error("train: batch size must be >= 1 (or 0 for full batch)");
  if (cfg.epochs < 0) throw Error("train: epochs must be non-negative");
  if (inputs.train->size() == 0) throw Error("train: empty training set");

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = init_params(model, inputs, rng);
  LagoParams params = result.params;

  LossConfig loss = loss_cfg;
  if (model.variant == Variant::semantic_soft && loss.psi > 0.0 && !loss.gamma_sem) {
    loss.gamma_sem = gamma_from_v(params.v, params.zeta).gamma;
  }
  loss.validate();

  const Matrix u = prepare_descriptions(params, *inputs.u_train);
  const Matrix targets = attribute_targets(*inputs.train, *inputs.u_train);
  if (inputs.val && !inputs.u_val) throw Error("train: validation set without descriptions");

  const std::size_t n = inputs.train->size();
  const std::size_t batch_size = cfg.batch_size == 0 ? n : static_cast<std::size_t>(cfg.batch_size);
  AdamState adam_w, adam_v;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const bool soft = learns_groups(model.variant);
    const bool even = (epoch - 1) % 2 == 0;
    const bool update_w = !soft || !cfg.alternate || even;
    const bool update_v = soft && (!cfg.alternate || !even);

    std::shuffle(order.begin(), order.end(), rng.engine());
    EpochRecord record{epoch, {}, std::nullopt};
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch_size, ++batch_index) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
      const Batch batch = make_batch(*inputs.train, targets, rows);
      const std::string where = " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      LossComponents components;
      Gradients grads;
      try {
        std::tie(components, grads) = loss_gradients(params, batch, u, loss);
      } catch (const Error& e) {
        throw Error(std::string("train: ") + e.what() + where);
      }
      if (!std::isfinite(components.total) || !grads.w.allFinite() || (update_v && !grads.v.allFinite())) {
        throw Error("train: non-finite loss" + where);
      }
      const double weight = static_cast<double>(rows.size()) / static_cast<double>(n);
      record.loss.cxe += weight * components.cxe;
      record.loss.bxe += weight * components.bxe;
      record.loss.reg_w += weight * components.reg_w;
      record.loss.reg_wu += weight * components.reg_wu;
      record.loss.reg_gamma += weight * components.reg_gamma;
      record.loss.total += weight * components.total;
      if (update_w) adam_step(adam_w, params.w, grads.w, cfg.lr_w);
      if (update_v) adam_step(adam_v, params.v, grads.v, cfg.lr_v);
    }

    if (inputs.val) {
      const double acc = evaluate(params, *inputs.val, inputs.u_val->select(inputs.val->class_names));
      record.val_balanced_acc = acc;
      if (acc > best_acc) {
        best_acc = acc;
        since_best = 0;
        result.params = params;
        result.best_epoch = epoch;
      } else {
        ++since_best;
      }
    } else {
      result.params = params;
      result.best_epoch = epoch;
    }
    result.history.push_back(record);
    if (inputs.val && cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) break;
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,cxe,bxe,reg_w,reg_wu,reg_gamma,total,val_balanced_acc\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.loss.cxe << ',' << r.loss.bxe << ',' << r.loss.reg_w << ',' << r.loss.reg_wu << ','
        << r.loss.reg_gamma << ',' << r.loss.total << ',';
    if (r.val_balanced_acc) out << *r.val_balanced_acc;
    out << '\n';
  }
  return out.str();
}

}  // namespace lago
