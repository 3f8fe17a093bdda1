#include <cmath>
#include <random>

#include "doctest.h"
#include "fairpath/estimators.hpp"
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

// Binary Z and W are z-scored by encode; with both levels present the sign of
// the encoded value recovers the bit.
PredictionFunction table_function(const PredictionTable& table) {
  return [table](const Eigen::MatrixXd& in) {
    Eigen::VectorXd out(in.cols());
    for (Eigen::Index i = 0; i < in.cols(); ++i)
      out(i) = table[table_index(in(0, i) > 0.5, in(1, i) > 0.0, in(2, i) > 0.0)];
    return out;
  };
}

std::vector<std::pair<Estimate, double>> pairs(const EffectEstimates& est, const EffectEstimates& truth) {
  return {{est.nde, truth.nde.value},
          {est.nie, truth.nie.value},
          {est.nse_x0, truth.nse_x0.value},
          {est.nse_x1, truth.nse_x1.value},
          {est.tv, truth.tv.value}};
}

DiscreteScm independent_scm() {
  DiscreteScm scm;
  scm.exogenous = {{"u_x", 0.35}, {"u_z", 0.6}, {"u_w", 0.45}, {"u_y", 0.3}};
  scm.x = {{0}, {0, 1}};
  scm.z = {{1}, {0, 1}};
  scm.w = {{2}, {0, 0, 1, 1, 1, 1, 0, 0}};  // w = u_w xor z, independent of x
  scm.y.exogenous = {3};
  scm.y.table.resize(16);
  for (int idx = 0; idx < 16; ++idx) scm.y.table[idx] = ((idx >> 1) & 1) ^ ((idx >> 2) & 1) ^ ((idx >> 3) & 1);
  return scm;
}

}  // namespace

TEST_CASE("propensity without confounders is the base rate") {
  const auto d = sample_linear({}, 1000, 4);
  const auto f = folds(d, 0.7, 1);
  const auto prop = fit_propensity(f.train);
  CHECK(prop.constant);
  const double rate = static_cast<double>(f.train.group_count(1)) / static_cast<double>(f.train.size());
  const auto p = prop.predict(f.eval.z());
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p(i) == doctest::Approx(rate).epsilon(1e-12));
}

TEST_CASE("propensity with an independent confounder stays near the base rate") {
  const auto d = sample_discrete(independent_scm(), 20000, 5);
  const auto f = folds(d, 0.7, 2);
  const auto prop = fit_propensity(f.train);
  CHECK_FALSE(prop.constant);
  const double n = static_cast<double>(f.train.size());
  const double rate = static_cast<double>(f.train.group_count(1)) / n;
  const auto p = prop.predict(f.train.z());
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(p.size(), 50); ++i) {
    // Each z level holds about half the fold.
    CHECK(std::abs(p(i) - rate) < 3.0 * std::sqrt(rate * (1 - rate) / (0.4 * n)));
  }
}

TEST_CASE("propensity recovers a logistic model") {
  Rng rng(12);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  Column x{"X", ColumnKind::categorical, {}, {}}, z{"Z", ColumnKind::numeric, {}, {}};
  Column w{"W", ColumnKind::numeric, {}, {}}, y{"Y", ColumnKind::numeric, {}, {}};
  for (int i = 0; i < 60000; ++i) {
    const double zi = normal(rng);
    x.labels.push_back(unit(rng) < 1.0 / (1.0 + std::exp(-(0.4 + 1.1 * zi))) ? "1" : "0");
    z.numbers.push_back(zi);
    w.numbers.push_back(normal(rng));
    y.numbers.push_back(normal(rng));
  }
  const Dataset d({x, z, w, y}, {"X", "0", "1", {"Z"}, {"W"}, "Y", TaskKind::regression}, {});
  const auto f = folds(d, 0.7, 3);
  const auto prop = fit_propensity(f.train);
  const auto& enc = f.train.stats.confounders[0];
  for (double zi : {-1.5, -0.5, 0.0, 0.7, 1.8}) {
    Eigen::MatrixXd zz(1, 1);
    zz(0, 0) = (zi - enc.mean) / enc.scale;
    const double truth = 1.0 / (1.0 + std::exp(-(0.4 + 1.1 * zi)));
    CHECK(prop.predict(zz)(0) == doctest::Approx(truth).epsilon(0.03));
  }
}

TEST_CASE("propensity clipping and separation") {
  PropensityModel m;
  m.coef = Eigen::VectorXd::Constant(1, 10.0);
  CHECK(m.clip(0.001) == 0.01);
  CHECK(m.clip(0.999) == 0.99);
  Eigen::MatrixXd z(1, 2);
  z << -5.0, 5.0;
  const auto p = m.predict(z);
  CHECK(p(0) == 0.01);
  CHECK(p(1) == 0.99);

  // Z equal to X separates the groups perfectly.
  Column x{"X", ColumnKind::categorical, {}, {}}, zc{"Z", ColumnKind::numeric, {}, {}};
  Column w{"W", ColumnKind::numeric, {}, {}}, y{"Y", ColumnKind::numeric, {}, {}};
  for (int i = 0; i < 200; ++i) {
    x.labels.push_back(i % 2 ? "1" : "0");
    zc.numbers.push_back(i % 2);
    w.numbers.push_back(i % 5);
    y.numbers.push_back(i % 3);
  }
  const Dataset d({x, zc, w, y}, {"X", "0", "1", {"Z"}, {"W"}, "Y", TaskKind::regression}, {});
  const auto f = folds(d, 0.7, 1);
  const auto prop = fit_propensity(f.train);
  CHECK(prop.constant);
  CHECK_FALSE(prop.warnings.empty());
  CHECK(prop.predict(f.train.z())(0) == doctest::Approx(0.5));
}

TEST_CASE("ipw weights have mean one per stratum") {
  const auto scm = random_discrete_scm(3);
  const auto f = folds(sample_discrete(scm, 5000, 1), 0.7, 1);
  const auto prop = fit_propensity(f.train);
  const auto w = ipw_weights(prop, f.eval);
  double sum[2] = {0, 0}, count[2] = {0, 0};
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const int g = f.eval.x()(i) > 0.5;
    CHECK(w(i) > 0.0);
    sum[g] += w(i);
    count[g] += 1;
  }
  CHECK(std::abs(sum[0] / count[0] - 1.0) < 1e-12);
  CHECK(std::abs(sum[1] / count[1] - 1.0) < 1e-12);
}

TEST_CASE("effects of simple predictors") {
  const auto f = folds(sample_discrete(random_discrete_scm(8), 4000, 2), 0.7, 1);
  const auto prop = fit_propensity(f.train);
  const PredictionFunction constant = [](const Eigen::MatrixXd& in) {
    return Eigen::VectorXd::Constant(in.cols(), 3.25);
  };
  const auto c = estimate_effects_of_predictor(constant, f.eval, prop);
  for (const auto& e : {c.nde, c.nie, c.nse_x0, c.nse_x1, c.tv}) CHECK(std::abs(e.value) < 1e-12);

  const PredictionFunction identity = [](const Eigen::MatrixXd& in) -> Eigen::VectorXd {
    return in.row(0).transpose();
  };
  const auto x = estimate_effects_of_predictor(identity, f.eval, prop);
  CHECK(x.nde.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(x.nie.value) < 1e-12);
  CHECK(std::abs(x.nse_x0.value) < 1e-12);
  CHECK(std::abs(x.nse_x1.value) < 1e-12);
  CHECK(x.tv.value == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& e : {x.nde, x.nie, x.nse_x0, x.nse_x1, x.tv}) CHECK(e.se >= 0.0);
}

TEST_CASE("effects are affine equivariant") {
  const auto scm = random_discrete_scm(31);
  const auto f = folds(sample_discrete(scm, 6000, 3), 0.7, 1);
  const auto prop = fit_propensity(f.train);
  const auto g = table_function(outcome_regression_table(scm));
  const double a = -2.5, b = 0.75;
  const PredictionFunction h = [&](const Eigen::MatrixXd& in) -> Eigen::VectorXd {
    return (a * g(in).array() + b).matrix();
  };
  const auto base = estimate_effects_of_predictor(g, f.eval, prop);
  const auto scaled = estimate_effects_of_predictor(h, f.eval, prop);
  const std::pair<Estimate, Estimate> all[] = {{base.nde, scaled.nde}, {base.nie, scaled.nie}, {base.nse_x0, scaled.nse_x0},
                                              {base.nse_x1, scaled.nse_x1}, {base.tv, scaled.tv}};
  for (const auto& [u, v] : all) {
    CHECK(v.value == doctest::Approx(a * u.value).epsilon(1e-10));
    CHECK(v.se == doctest::Approx(std::abs(a) * u.se).epsilon(1e-10));
  }
}

TEST_CASE("predictor effects match enumeration") {
  int inside = 0, total = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto scm = random_discrete_scm(derive_seed(404, s));
    const auto table = outcome_regression_table(scm);
    const auto f = folds(sample_discrete(scm, 100000, s), 0.5, s);
    const auto prop = fit_propensity(f.train);
    const auto est = estimate_effects_of_predictor(table_function(table), f.eval, prop);
    for (const auto& [e, truth] : pairs(est, enumerate_effects(scm, table))) {
      ++total;
      inside += std::abs(e.value - truth) < 3.0 * e.se;
    }
  }
  CHECK(inside >= total - 1);
}

TEST_CASE("outcome effects match enumeration") {
  int inside = 0, total = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto scm = random_discrete_scm(derive_seed(505, s));
    const auto f = folds(sample_discrete(scm, 100000, s + 10), 0.5, s);
    const auto prop = fit_propensity(f.train);
    const OutcomeModel outm{table_function(outcome_regression_table(scm))};
    const auto est = estimate_effects_of_outcome(f.eval, prop, outm);
    for (const auto& [e, truth] : pairs(est, enumerate_effects(scm))) {
      ++total;
      inside += std::abs(e.value - truth) < 3.0 * e.se;
    }
  }
  CHECK(inside >= total - 1);
}

TEST_CASE("outcome with no dependence on X has null effects") {
  const auto scm = independent_scm();
  const auto truth = enumerate_effects(scm);
  CHECK(std::abs(truth.tv.value) < 1e-12);
  const auto f = folds(sample_discrete(scm, 50000, 6), 0.5, 1);
  const auto prop = fit_propensity(f.train);
  const auto est = estimate_effects_of_outcome(f.eval, prop, {table_function(outcome_regression_table(scm))});
  for (const auto& [e, t] : pairs(est, truth)) CHECK(std::abs(e.value) < 3.0 * e.se);
}

TEST_CASE("linear outcome natural direct effect") {
  const LinearScmParams p;
  const auto f = folds(sample_linear(p, 100000, 14), 0.5, 1);
  const auto prop = fit_propensity(f.train);
  const auto& enc = f.eval.stats.mediators[0];
  const OutcomeModel truth{[&](const Eigen::MatrixXd& in) {
    Eigen::VectorXd out(in.cols());
    for (Eigen::Index i = 0; i < in.cols(); ++i) out(i) = p.alpha * in(0, i) + p.gamma * (in(1, i) * enc.scale + enc.mean);
    return out;
  }};
  const auto e = estimate_effects_of_outcome(f.eval, prop, truth);
  CHECK(std::abs(e.nde.value - p.alpha) < 3.0 * e.nde.se);
  CHECK(std::abs(e.nie.value + p.beta * p.gamma) < 3.0 * e.nie.se);
  CHECK(std::abs(e.tv.value - 2.0) < 3.0 * e.tv.se);
  CHECK(std::abs(tv_decomposition_residual(e)) < 3.0 * std::sqrt(e.tv.se * e.tv.se + e.nde.se * e.nde.se +
                                                                 e.nie.se * e.nie.se + e.nse_x0.se * e.nse_x0.se +
                                                                 e.nse_x1.se * e.nse_x1.se));
}

TEST_CASE("tv measure and tvd") {
  Eigen::VectorXd pred(6), x(6);
  pred << 0.7, 0.7, 0.7, 0.4, 0.4, 0.4;
  x << 1, 1, 1, 0, 0, 0;
  CHECK(tv_measure(pred, x).value == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(tv_measure(Eigen::VectorXd::Constant(6, 2.0), x).value == 0.0);

  const auto scm = random_discrete_scm(77);
  const auto f = folds(sample_discrete(scm, 2000, 1), 0.7, 1);
  const auto g = table_function(outcome_regression_table(scm));
  CHECK(tvd(g, g, f.eval) == 0.0);
  const PredictionFunction zero = [](const Eigen::MatrixXd& in) { return Eigen::VectorXd::Zero(in.cols()); };
  CHECK(tvd(zero, g, f.eval) == doctest::Approx(-tv_measure(g, f.eval).value).epsilon(1e-12));
}

TEST_CASE("tvr sign rules and the decomposition residual") {
  EffectEstimates e;
  e.nde = {0.3, 0.01};
  e.nie = {-0.1, 0.02};
  e.nse_x0 = {0.05, 0.01};
  e.nse_x1 = {0.2, 0.01};
  CHECK(tvr(e, EffectId::direct) == doctest::Approx(-0.3));
  CHECK(tvr(e, EffectId::indirect) == doctest::Approx(-0.1));
  CHECK(tvr(e, EffectId::spurious) == doctest::Approx(-0.15));
  CHECK(tvr(e, 1) == tvr(e, EffectId::indirect));
  CHECK_THROWS_AS(tvr(e, 3), std::invalid_argument);
  CHECK(tvr_se(e, EffectId::spurious) == doctest::Approx(std::sqrt(2e-4)));
  EffectEstimates zero_nde;
  CHECK(tvr(zero_nde, EffectId::direct) == 0.0);

  for (std::uint64_t s = 0; s < 20; ++s) {
    auto exact = enumerate_effects(random_discrete_scm(derive_seed(9, s)));
    CHECK(std::abs(tv_decomposition_residual(exact)) < 1e-12);
    exact.nie.value = -exact.nie.value;
    CHECK(tv_decomposition_residual(exact) == doctest::Approx(2.0 * exact.nie.value).epsilon(1e-9));
  }
}
