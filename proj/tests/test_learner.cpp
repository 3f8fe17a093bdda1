#include <cmath>
#include <random>

#include "doctest.h"
#include "fairpath/learner.hpp"
#include "fairpath/random.hpp"
#include "fairpath/synth.hpp"

using namespace fairpath;

namespace {

struct Folds {
  EncodedView train, eval;
};

Folds folds(const Dataset& d, double fraction, std::uint64_t seed) {
  const auto plan = split(d, fraction, seed);
  const auto view = encode(d, plan);
  return {view.rows(plan.train), view.rows(plan.eval)};
}

const ConstraintFamily& canonical() {
  static const auto family = canonical_constraints({EffectId::direct, EffectId::indirect, EffectId::spurious});
  return family;
}

// A 64-row batch from a binary SCM with a confounder, so all four penalties are live.
struct Toy {
  EncodedView train;
  PropensityModel prop;
  ObjectiveBatch batch;
};

Toy toy(std::uint64_t seed) {
  const auto data = sample_discrete(random_discrete_scm(seed), 400, derive_seed(seed, 1));
  const auto f = folds(data, 0.5, seed);
  Toy t{f.train, fit_propensity(f.train), {}};
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < 64; ++i) idx[i] = i;
  const auto sub = t.train.rows(idx);
  t.batch = make_batch(sub.inputs, sub.y, raw_ipw_weights(t.prop, t.train).head(64), true);
  return t;
}

ConstraintTargets batch_values(const MlpPredictor& f, const ObjectiveBatch& b) {
  const auto fac = f.predict(b.inputs), flip = f.predict(b.flipped);
  ConstraintTargets t;
  for (const auto& c : canonical().components) {
    t.values.push_back(functional_gradient(c.functional, b.rows, fac, flip).value);
    t.se.push_back(0.0);
  }
  return t;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.restarts = 2;
  cfg.patience = 5;
  cfg.batch_size = 128;
  return cfg;
}

}  // namespace

TEST_CASE("lambda zero gives the plain base loss") {
  const auto t = toy(1);
  const MlpPredictor f({static_cast<int>(t.train.input_width()), 16, 16, 1}, OutputHead::identity, 3);
  const ConstraintTargets targets{{0.3, -0.2, 0.1, 0.4}, {0, 0, 0, 0}};
  const auto v = lagrangian_loss(f, t.batch, 0.0, canonical(), targets, LossKind::mse);
  const double mse = (f.predict(t.batch.inputs) - t.batch.y).squaredNorm() / 64.0;
  CHECK(v.objective == doctest::Approx(mse).epsilon(1e-14));
  CHECK(v.penalty == 0.0);

  const MlpPredictor g({static_cast<int>(t.train.input_width()), 16, 16, 1}, OutputHead::logistic, 3);
  const auto b = lagrangian_loss(g, t.batch, 0.0, canonical(), targets, LossKind::cross_entropy);
  const auto p = g.predict(t.batch.inputs);
  double bce = 0;
  for (int i = 0; i < 64; ++i) bce -= t.batch.y(i) * std::log(p(i)) + (1 - t.batch.y(i)) * std::log(1 - p(i));
  CHECK(b.objective == doctest::Approx(bce / 64.0).epsilon(1e-12));
}

TEST_CASE("penalty arithmetic") {
  const auto t = toy(2);
  const MlpPredictor f({static_cast<int>(t.train.input_width()), 16, 16, 1}, OutputHead::identity, 4);
  auto targets = batch_values(f, t.batch);
  const auto exact = lagrangian_loss(f, t.batch, 10.0, canonical(), targets, LossKind::mse);
  CHECK(exact.penalty == 0.0);
  CHECK(exact.objective == exact.base);

  targets.values[1] -= 0.2;
  const auto off = lagrangian_loss(f, t.batch, 10.0, canonical(), targets, LossKind::mse);
  CHECK(off.penalty == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(off.deviations[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("penalty is skipped when a batch misses a stratum") {
  const auto t = toy(3);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < t.batch.inputs.cols(); ++i)
    if (t.batch.inputs(0, i) > 0.5) keep.push_back(i);
  Eigen::MatrixXd in(t.batch.inputs.rows(), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    in.col(static_cast<Eigen::Index>(k)) = t.batch.inputs.col(keep[k]);
    y(static_cast<Eigen::Index>(k)) = t.batch.y(keep[k]);
  }
  const auto b = make_batch(in, y, Eigen::VectorXd::Ones(y.size()), true);
  const MlpPredictor f({static_cast<int>(t.train.input_width()), 8, 1}, OutputHead::identity, 1);
  const auto v = lagrangian_loss(f, b, 10.0, canonical(), {{1, 1, 1, 1}, {0, 0, 0, 0}}, LossKind::mse);
  CHECK(v.penalty_skipped);
  CHECK(v.penalty == 0.0);
}

TEST_CASE("analytic gradient matches central differences") {
  for (auto loss : {LossKind::mse, LossKind::cross_entropy}) {
    const auto t = toy(11);
    const auto head = loss == LossKind::mse ? OutputHead::identity : OutputHead::logistic;
    const MlpPredictor f({static_cast<int>(t.train.input_width()), 16, 16, 1}, head, 21);
    const ConstraintTargets targets{{0.05, -0.1, 0.02, -0.03}, {0, 0, 0, 0}};
    for (double lambda : {0.0, 10.0}) {
      const auto r = gradient_check(f, t.batch, lambda, canonical(), targets, loss, 64, 5);
      CAPTURE(lambda);
      CHECK(r.checked >= 50);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("zero network: bias gradient is the mean residual derivative") {
  const auto t = toy(4);
  MlpPredictor f({static_cast<int>(t.train.input_width()), 16, 16, 1}, OutputHead::identity, 1);
  f.set_parameters(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.parameter_count())));
  const auto v = lagrangian_loss(f, t.batch, 0.0, canonical(), {{0, 0, 0, 0}, {0, 0, 0, 0}}, LossKind::mse);
  const auto& g = v.gradient;
  CHECK(g(g.size() - 1) == doctest::Approx(-2.0 * t.batch.y.mean()).epsilon(1e-12));
  CHECK(g.head(g.size() - 1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constraint z-tests") {
  ConstraintFamily fam;
  fam.m = 1;
  fam.effect_names = {"E"};
  fam.components = {{functionals::nde(), 0}};
  auto one = [&](double est, double se, double target, double target_se) {
    return constraint_tests(fam, {{est, se}}, {{target}, {target_se}}, 0.05).tests[0];
  };
  auto a = one(0.0, 0.1, 0.0, 0.0);
  CHECK(a.z == 0.0);
  CHECK_FALSE(a.reject);
  auto b = one(0.5, 0.1, 0.0, 0.0);
  CHECK(b.z == doctest::Approx(5.0));
  CHECK(b.reject);
  auto c = one(0.25, 0.05, 0.30, 0.0);
  CHECK(c.z == doctest::Approx(-1.0));
  CHECK_FALSE(c.reject);
  auto d = one(0.3, 0.0, 0.0, 0.0);
  CHECK(d.reject);
  CHECK(d.zero_se);
  auto e = one(0.3, 0.03, 0.25, 0.04);  // SEs combine in quadrature: z = 0.05 / 0.05
  CHECK(e.z == doctest::Approx(1.0));
  // Critical value 1.959964 at the 5% level.
  CHECK(one(1.95, 1.0, 0.0, 0.0).reject == false);
  CHECK(one(1.97, 1.0, 0.0, 0.0).reject == true);
  CHECK(one(1e-14, 1e-16, 0.0, 0.0).reject == false);  // rounding-level deviation
}

TEST_CASE("bisection arithmetic") {
  CHECK(LambdaSearch{}.iterations() == 10);
  CHECK(LambdaSearch{0, 100, 1, 0.05}.iterations() == 7);
  CHECK(LambdaSearch{0, 1, 1, 0.05}.iterations() == 0);
  CHECK_THROWS_AS((LambdaSearch{5, 1, 1, 0.05}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LambdaSearch{0, 1, 0, 0.05}.validate()), std::invalid_argument);
}

TEST_CASE("targets follow the constraint set") {
  const std::vector<Estimate> outcome = {{0.3, 0.01}, {-0.2, 0.02}, {0.05, 0.01}, {0.07, 0.01}};
  const auto& fam = canonical();
  const auto none = make_targets(fam, outcome, EffectSet::empty(3));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(none.values[k] == outcome[k].value);
    CHECK(none.se[k] == outcome[k].se);
  }
  const auto ds = make_targets(fam, outcome, EffectSet(0b101, 3));
  CHECK(ds.values == std::vector<double>{0.0, -0.2, 0.0, 0.0});
  CHECK(ds.se == std::vector<double>{0.0, 0.02, 0.0, 0.0});
  // A two-effect universe keeps the spurious components at the outcome's values.
  const auto two = canonical_constraints({EffectId::direct, EffectId::indirect});
  const auto t = make_targets(two, outcome, EffectSet::full(2));
  CHECK(t.values == std::vector<double>{0.0, 0.0, 0.05, 0.07});
  CHECK_THROWS_AS(make_targets(fam, outcome, EffectSet::full(2)), std::invalid_argument);
}

TEST_CASE("auroc against pairwise counting") {
  Eigen::VectorXd s(4), y(4);
  s << 0.1, 0.2, 0.3, 0.4;
  y << 0, 0, 1, 1;
  CHECK(auroc(s, y) == 1.0);
  CHECK(auroc(-s, y) == 0.0);
  CHECK(auroc(Eigen::VectorXd::Constant(4, 0.5), y) == 0.5);
  CHECK_THROWS_AS(auroc(s, Eigen::VectorXd::Zero(4)), std::invalid_argument);

  Rng rng(3);
  std::uniform_int_distribution<int> level(0, 9);
  std::bernoulli_distribution coin(0.4);
  Eigen::VectorXd sc(300), lab(300);
  for (int i = 0; i < 300; ++i) {
    lab(i) = coin(rng);
    sc(i) = level(rng) + lab(i) * 2;
  }
  double wins = 0, pairs = 0;
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 300; ++j)
      if (lab(i) == 1 && lab(j) == 0) {
        pairs += 1;
        wins += sc(i) > sc(j) ? 1.0 : sc(i) == sc(j) ? 0.5 : 0.0;
      }
  CHECK(auroc(sc, lab) == doctest::Approx(wins / pairs).epsilon(1e-12));
  CHECK(evaluation_loss(LossKind::cross_entropy, sc, lab) == doctest::Approx(1 - wins / pairs).epsilon(1e-12));
  CHECK(evaluation_loss(LossKind::mse, s, y) == doctest::Approx((0.01 + 0.04 + 0.49 + 0.36) / 4));
}

TEST_CASE("training is deterministic and ignores targets at lambda zero") {
  const auto f = folds(sample_discrete(random_discrete_scm(6), 1500, 2), 0.7, 1);
  const auto prop = fit_propensity(f.train);
  const auto cfg = small_config();
  const ConstraintTargets a{{0.0, 0.0, 0.0, 0.0}, {0, 0, 0, 0}};
  const ConstraintTargets b{{0.5, -0.4, 0.3, 0.2}, {0, 0, 0, 0}};
  const auto r1 = train_at_lambda(f.train, 0.0, canonical(), a, prop, LossKind::mse, cfg, 42);
  const auto r2 = train_at_lambda(f.train, 0.0, canonical(), a, prop, LossKind::mse, cfg, 42);
  const auto r3 = train_at_lambda(f.train, 0.0, canonical(), b, prop, LossKind::mse, cfg, 42);
  CHECK(r1.model == r2.model);
  CHECK(r1.model == r3.model);
  CHECK(r1.best_restart >= 0);
  const auto r4 = train_at_lambda(f.train, 0.0, canonical(), a, prop, LossKind::mse, cfg, 43);
  CHECK_FALSE(r1.model == r4.model);
  CHECK_THROWS_AS(train_at_lambda(f.train, 0.0, canonical(), a, prop, LossKind::cross_entropy, cfg, 1),
                  std::invalid_argument);
}

TEST_CASE("cfcl is the canonical specialization of the generalized search") {
  const auto f = folds(sample_discrete(random_discrete_scm(8), 1500, 3), 0.7, 2);
  const auto cfg = small_config();
  const LambdaSearch search{0, 8, 1, 0.05};
  const EffectSet s(0b010, 3);
  const auto direct = cfcl(f.train, f.eval, s, LossKind::mse, cfg, search, 5);
  const auto ctx = prepare_cfcl(f.train, f.eval, canonical(), LossKind::mse, cfg, 5);
  const auto general = cfcl_generalized(ctx, s, search, derive_seed(5, 1));
  CHECK(direct.model == general.model);
  CHECK(direct.lambda_final == general.lambda_final);
  CHECK(direct.trajectory.size() == 3);
  CHECK(direct.report.tests.size() == 4);

  // Empty set: every target is the outcome's own estimate.
  const auto t = make_targets(ctx.family, ctx.outcome_eval, EffectSet::empty(3));
  for (std::size_t k = 0; k < 4; ++k) CHECK(t.values[k] == ctx.outcome_eval[k].value);
}

TEST_CASE("cfcl flags a search that never accepts") {
  const auto f = folds(sample_discrete(random_discrete_scm(12), 3000, 4), 0.7, 2);
  auto cfg = small_config();
  cfg.epochs = 3;
  cfg.restarts = 1;
  // lambda capped at 1e-3: far too weak to remove the direct effect.
  const LambdaSearch search{0, 1e-3, 2e-4, 0.05};
  const auto ctx = prepare_cfcl(f.train, f.eval, canonical(), LossKind::mse, cfg, 1);
  REQUIRE(std::abs(ctx.outcome_eval[0].value) > 4 * ctx.outcome_eval[0].se);
  const auto r = cfcl_generalized(ctx, EffectSet(0b001, 3), search, 2);
  CHECK_FALSE(r.constraints_met);
  CHECK(r.lambda_final == r.trajectory.back().lambda);
  CHECK_FALSE(r.warnings.empty());
}

// ---------------------------------------------------------------------------
// Linear system, n = 2e4, default training configuration.

TEST_CASE("linear system: unconstrained and direct-free training" * doctest::timeout(900)) {
  const LinearScmParams p;
  const auto f = folds(sample_linear(p, 20000, 2024), 0.7, 1);
  const TrainConfig cfg;
  const auto family = canonical_constraints({EffectId::direct, EffectId::indirect});
  const auto ctx = prepare_cfcl(f.train, f.eval, family, LossKind::mse, cfg, 7);
  const auto base = train_at_lambda(f.train, 0.0, family, ConstraintTargets{{0, 0, 0, 0}, {0, 0, 0, 0}},
                                    ctx.prop, LossKind::mse, cfg, 9);
  const auto pred0 = base.model.predict(f.eval.inputs);
  const double mse0 = evaluation_loss(LossKind::mse, pred0, f.eval.y);
  CHECK(mse0 == doctest::Approx(oracle_mse(p, EffectSet(0, 2))).epsilon(0.05));

  const auto targets = make_targets(family, ctx.outcome_train, EffectSet(1, 2));
  const auto fair = train_at_lambda(f.train, 1000.0, family, targets, ctx.prop, LossKind::mse, cfg, 9);
  const auto pred1 = fair.model.predict(f.eval.inputs);
  const double mse1 = evaluation_loss(LossKind::mse, pred1, f.eval.y);
  // The best predictor free of the direct effect reaches 1.25; see the oracle tests.
  CHECK(mse1 == doctest::Approx(oracle_mse(p, EffectSet(1, 2), MseConvention::constrained_optimum)).epsilon(0.05));
  const double tvd = tv_measure(pred1, f.eval.x().transpose()).value - tv_measure(pred0, f.eval.x().transpose()).value;
  CHECK(tvd == doctest::Approx(-p.alpha).epsilon(0.1));
}

TEST_CASE("linear system: demographic parity through the TV functional" * doctest::timeout(900)) {
  const LinearScmParams p;
  const auto f = folds(sample_linear(p, 20000, 77), 0.7, 1);
  const auto ctx = prepare_cfcl(f.train, f.eval, tv_constraint(), LossKind::mse, TrainConfig{}, 3);
  const auto r = cfcl_generalized(ctx, EffectSet::full(1), LambdaSearch{}, 4);
  CHECK(r.constraints_met);
  CHECK(std::abs(r.eval_tv.value - oracle_tv(p, EffectSet::full(2))) < 2.0 * r.eval_tv.se);

  // The trajectory bisects: each lambda is the midpoint of the bracket left by
  // the previous decisions.
  REQUIRE(r.trajectory.size() == 10);
  double lo = 0, hi = 1024;
  for (const auto& step : r.trajectory) {
    CHECK(step.lambda == 0.5 * (lo + hi));
    (step.rejected ? lo : hi) = step.lambda;
  }
  CHECK(hi - lo <= 1.0);
}

TEST_CASE("linear system: the empty set is accepted at the first midpoint" * doctest::timeout(1500)) {
  int accepted = 0;
  for (std::uint64_t run = 0; run < 10; ++run) {
    const auto f = folds(sample_linear({}, 20000, derive_seed(500, run)), 0.7, run);
    const auto family = canonical_constraints({EffectId::direct, EffectId::indirect});
    const auto ctx = prepare_cfcl(f.train, f.eval, family, LossKind::mse, TrainConfig{}, run);
    // A bracket as wide as epsilon stops the search after the first midpoint.
    const auto r = cfcl_generalized(ctx, EffectSet::empty(2), LambdaSearch{0, 1024, 512, 0.05}, run);
    REQUIRE(r.trajectory.size() == 1);
    CHECK(r.trajectory[0].lambda == 512.0);
    accepted += r.trajectory[0].rejected ? 0 : 1;
  }
  CHECK(accepted >= 9);
}
