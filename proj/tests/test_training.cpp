#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lago/evaluation.hpp"
#include "lago/training.hpp"

using namespace lago;
using fixtures::random_instance;

namespace {

constexpr Variant kVariants[] = {Variant::singletons, Variant::semantic_hard, Variant::k_soft, Variant::semantic_soft};

}  // namespace

TEST_CASE("loss_forward isolated terms") {
  auto in = random_instance(Variant::k_soft, CompMode::constant, PriorMode::uniform, 1);
  in.params.w.setZero();
  in.u.col(1) = in.u.col(0);
  in.u = in.u.col(0).replicate(1, 5);
  LossConfig plain;
  const auto l = loss_forward(in.params, in.batch, in.u, plain);
  CHECK(l.cxe == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(l.total == l.cxe);

  auto rnd = random_instance(Variant::singletons, CompMode::demorgan, PriorMode::per_attribute, 2);
  LossConfig beta_only;
  beta_only.cxe_weight = 0.0;
  beta_only.beta = 0.3;
  const auto lb = loss_forward(rnd.params, rnd.batch, rnd.u, beta_only);
  CHECK(lb.total == doctest::Approx(0.3 * rnd.params.w.squaredNorm()).epsilon(1e-14));
  CHECK(lb.reg_w == doctest::Approx(rnd.params.w.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("loss_forward agrees with the extended-precision reference") {
  for (auto variant : kVariants) {
    for (auto comp : {CompMode::constant, CompMode::demorgan}) {
      for (auto prior : {PriorMode::uniform, PriorMode::per_attribute}) {
        const auto in = random_instance(variant, comp, prior, 3);
        const double fast = loss_forward(in.params, in.batch, in.u, in.cfg).total;
        const double ref = static_cast<double>(reference_loss(in.params, in.batch, in.u, in.cfg));
        CHECK(std::abs(fast - ref) <= 1e-10 * std::abs(ref));
      }
    }
  }
}

TEST_CASE("loss_gradients isolated terms") {
  auto in = random_instance(Variant::semantic_soft, CompMode::demorgan, PriorMode::uniform, 4);
  LossConfig psi_only;
  psi_only.cxe_weight = 0.0;
  psi_only.psi = 2.0;
  psi_only.gamma_sem = gamma_from_v(in.params.v, in.params.zeta).gamma;
  const auto [l, g] = loss_gradients(in.params, in.batch, in.u, psi_only);
  CHECK(l.total == 0.0);
  CHECK(g.v.cwiseAbs().maxCoeff() == 0.0);

  LossConfig beta_only;
  beta_only.cxe_weight = 0.0;
  beta_only.beta = 0.25;
  const auto [lb, gb] = loss_gradients(in.params, in.batch, in.u, beta_only);
  CHECK((gb.w - 2.0 * 0.25 * in.params.w).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("finite_diff_check examples") {
  auto lin = random_instance(Variant::singletons, CompMode::constant, PriorMode::uniform, 5);
  lin.cfg.alpha = 0.0;
  CHECK(finite_diff_check(lin.params, lin.batch, lin.u, lin.cfg, 1e-6).max_rel_error() <= 1e-7);

  auto flat = random_instance(Variant::k_soft, CompMode::constant, PriorMode::uniform, 6);
  flat.params.w.setZero();
  LossConfig beta_only;
  beta_only.cxe_weight = 0.0;
  beta_only.beta = 1.0;
  const auto zero = finite_diff_check(flat.params, flat.batch, flat.u, beta_only, 1e-6);
  CHECK(zero.max_rel_error() == 0.0);

  const auto full = random_instance(Variant::semantic_soft, CompMode::demorgan, PriorMode::per_attribute, 7);
  const auto report = finite_diff_check(full.params, full.batch, full.u, full.cfg, 1e-6);
  CHECK(report.max_rel_error() <= 1e-5);
  CHECK(report.coords_w >= 50);
  CHECK(report.coords_v >= 36);

  CHECK_THROWS_AS(finite_diff_check(full.params, full.batch, full.u, full.cfg, 1e-2), Error);
}

TEST_CASE("gradient check over every configuration") {
  for (std::uint64_t seed : {11, 12}) {
    for (auto variant : kVariants) {
      for (auto comp : {CompMode::constant, CompMode::demorgan}) {
        for (auto prior : {PriorMode::uniform, PriorMode::per_attribute}) {
          const auto in = random_instance(variant, comp, prior, seed);
          CAPTURE(to_string(variant));
          CAPTURE(to_string(comp));
          CHECK(finite_diff_check(in.params, in.batch, in.u, in.cfg, 1e-6, seed).max_rel_error() <= 1e-5);
        }
      }
    }
  }
}

TEST_CASE("adam_step") {
  Matrix p = Matrix::Constant(2, 2, 3.0);
  AdamState s;
  adam_step(s, p, Matrix::Zero(2, 2), 0.1);
  CHECK(p.isApproxToConstant(3.0));

  Matrix scalar = Matrix::Zero(1, 1);
  AdamState t;
  adam_step(t, scalar, Matrix::Ones(1, 1), 0.001);
  CHECK(scalar(0, 0) == doctest::Approx(-0.0009999999900000003).epsilon(1e-15));
  const double first = -scalar(0, 0);
  adam_step(t, scalar, Matrix::Ones(1, 1), 0.001);
  CHECK(-scalar(0, 0) - first <= 0.001);

  CHECK_THROWS_AS(adam_step(t, scalar, Matrix::Ones(2, 1), 0.1), Error);
}

namespace {

struct Setup {
  SyntheticBenchmark bench;
  ClassDescriptions u_train, u_val;

  explicit Setup(const SyntheticConfig& cfg, std::uint64_t seed = 0) : bench(generate_synthetic(cfg, seed)) {
    u_train = bench.descriptions.select(bench.train.class_names);
    u_val = bench.descriptions.select(bench.val.class_names);
  }
  TrainInputs inputs(bool with_val = true) const {
    return {&bench.train, &u_train, with_val ? &bench.val : nullptr, with_val ? &u_val : nullptr, &bench.groups};
  }
};

}  // namespace

TEST_CASE("init_params") {
  const Setup s{SyntheticConfig{}};
  Rng rng(1);
  ModelConfig mc;
  const LagoParams hard = init_params(mc, s.inputs(), rng);
  const Matrix block = hard.w.topRows(hard.feature_dim());
  CHECK((block.transpose() * block - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(hard.w.bottomRows(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(hard.zeta == 10.0);
  CHECK(membership(hard).gamma.rowwise().maxCoeff().minCoeff() >= 0.9995);

  mc.variant = Variant::k_soft;
  mc.num_groups = 6;
  const LagoParams soft = init_params(mc, s.inputs(), rng);
  CHECK(soft.v.cols() == 6);
  CHECK(soft.v.minCoeff() >= 0.0);
  CHECK(soft.v.maxCoeff() <= 1e-3);

  mc.variant = Variant::semantic_hard;
  TrainInputs no_groups = s.inputs();
  no_groups.groups = nullptr;
  CHECK_THROWS_AS(init_params(mc, no_groups, rng), Error);
}

TEST_CASE("train: zero epochs returns the initialization") {
  const Setup s{SyntheticConfig{}};
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 3;
  const auto r = train(ModelConfig{}, s.inputs(), LossConfig{}, tc);
  Rng rng(3);
  CHECK(r.params.w == init_params(ModelConfig{}, s.inputs(), rng).w);
  CHECK(r.history.empty());
  CHECK(r.best_epoch == 0);
}

TEST_CASE("train: noiseless semantic-hard reaches perfect validation accuracy") {
  SyntheticConfig cfg;
  cfg.train_classes = 40;
  const Setup s{cfg};
  TrainConfig tc;
  tc.lr_w = 1e-2;
  tc.epochs = 50;
  tc.early_stop_patience = 0;
  const auto r = train(ModelConfig{}, s.inputs(), LossConfig{}, tc);
  double best = 0.0;
  for (const auto& e : r.history) best = std::max(best, *e.val_balanced_acc);
  CHECK(best == 1.0);
}

TEST_CASE("train is deterministic and records history") {
  SyntheticConfig cfg;
  cfg.rho = 0.2;
  cfg.sigma = 0.3;
  const Setup s{cfg};
  ModelConfig mc;
  mc.variant = Variant::k_soft;
  mc.num_groups = 4;
  TrainConfig tc;
  tc.epochs = 6;
  tc.seed = 9;
  LossConfig lc;
  lc.alpha = 0.1;
  const auto a = train(mc, s.inputs(), lc, tc);
  const auto b = train(mc, s.inputs(), lc, tc);
  CHECK(history_csv(a.history) == history_csv(b.history));
  CHECK(a.params.w == b.params.w);
  CHECK(a.params.v == b.params.v);
  CHECK(history_csv(a.history).rfind("epoch,cxe,bxe,reg_w,reg_wu,reg_gamma,total,val_balanced_acc\n", 0) == 0);

  tc.seed = 10;
  CHECK(history_csv(train(mc, s.inputs(), lc, tc).history) != history_csv(a.history));
}

TEST_CASE("train: alternating schedule freezes V on W epochs") {
  const Setup s{SyntheticConfig{}};
  ModelConfig mc;
  mc.variant = Variant::k_soft;
  mc.num_groups = 3;
  TrainConfig tc;
  tc.epochs = 1;
  tc.seed = 2;
  const auto one = train(mc, s.inputs(false), LossConfig{}, tc);
  Rng rng(2);
  const LagoParams init = init_params(mc, s.inputs(false), rng);
  CHECK(one.params.v == init.v);
  CHECK(one.params.w != init.w);

  tc.epochs = 2;
  const auto two = train(mc, s.inputs(false), LossConfig{}, tc);
  CHECK(two.params.v != init.v);
  CHECK(two.params.w == one.params.w);
}

TEST_CASE("train: full-batch loss decreases") {
  SyntheticConfig cfg;
  cfg.sigma = 0.2;
  const Setup s{cfg};
  TrainConfig tc;
  tc.batch_size = 0;
  tc.epochs = 30;
  tc.lr_w = 1e-2;
  const auto r = train(ModelConfig{}, s.inputs(false), LossConfig{}, tc);
  double best = r.history.front().loss.total;
  for (const auto& e : r.history) best = std::min(best, e.loss.total);
  CHECK(best < 0.5 * r.history.front().loss.total);
  CHECK(r.history.back().loss.total < r.history.front().loss.total);
}

TEST_CASE("train: psi pulls Gamma toward the semantic prior") {
  SyntheticConfig cfg;
  cfg.rho = 0.2;
  const Setup s{cfg};
  ModelConfig mc;
  mc.variant = Variant::semantic_soft;
  mc.zeta = 3.0;
  TrainConfig tc;
  tc.epochs = 20;
  tc.lr_w = 1e-2;
  tc.lr_v = 0.3;
  tc.early_stop_patience = 0;
  tc.seed = 4;
  const Matrix gamma_sem = gamma_from_v(s.bench.groups.one_hot(20), 3.0).gamma;
  double previous = 1e300;
  for (double psi : {1e-3, 1e-1, 10.0}) {
    LossConfig lc;
    lc.psi = psi;
    const auto r = train(mc, s.inputs(false), lc, tc);
    const double dist = (membership(r.params).gamma - gamma_sem).norm();
    CHECK(dist < previous);
    previous = dist;
  }
}

TEST_CASE("train reports divergence with epoch and batch") {
  const Setup s{SyntheticConfig{}};
  TrainConfig tc;
  tc.lr_w = 1e300;
  tc.epochs = 5;
  try {
    train(ModelConfig{}, s.inputs(false), LossConfig{}, tc);
    FAIL("expected divergence");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("loss config validation") {
  LossConfig lc;
  lc.psi = 0.1;
  CHECK_THROWS_AS(lc.validate(), Error);
  lc.psi = 0.0;
  lc.alpha = -1.0;
  CHECK_THROWS_AS(lc.validate(), Error);
}
