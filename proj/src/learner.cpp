#include "fairpath/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "fairpath/random.hpp"

namespace fairpath {

const char* loss_name(LossKind loss) { return loss == LossKind::mse ? "mse" : "bce"; }

LossKind parse_loss(const std::string& name) {
  if (name == "mse") return LossKind::mse;
  if (name == "bce" || name == "cross-entropy") return LossKind::cross_entropy;
  throw std::invalid_argument("unknown loss '" + name + "' (expected mse or bce)");
}

LossKind default_loss(TaskKind task) {
  return task == TaskKind::regression ? LossKind::mse : LossKind::cross_entropy;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs <= 0 || batch_size <= 0 || patience <= 0 || restarts <= 0)
    throw std::invalid_argument("train config: all settings must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("train config: validation fraction must lie in (0, 1)");
  for (int h : hidden)
    if (h <= 0) throw std::invalid_argument("train config: hidden widths must be positive");
}

void LambdaSearch::validate() const {
  if (!(lambda_low >= 0.0) || !(lambda_low <= lambda_high))
    throw std::invalid_argument("lambda search: need 0 <= lambda_low <= lambda_high");
  if (!(epsilon > 0.0)) throw std::invalid_argument("lambda search: epsilon must be positive");
  if (!(alpha_level > 0.0 && alpha_level < 1.0))
    throw std::invalid_argument("lambda search: alpha must lie in (0, 1)");
}

int LambdaSearch::iterations() const {
  int count = 0;
  for (double width = lambda_high - lambda_low; width > epsilon; width /= 2.0) ++count;
  return count;
}

bool ConstraintFamily::uses_flipped() const {
  return std::any_of(components.begin(), components.end(),
                     [](const ConstraintComponent& c) { return c.functional.uses_flipped(); });
}

ConstraintFamily canonical_constraints(const std::vector<EffectId>& effects) {
  if (effects.empty()) throw std::invalid_argument("constraint family: effect list is empty");
  ConstraintFamily family;
  family.m = static_cast<int>(effects.size());
  const auto index_of = [&](EffectId id) {
    auto it = std::find(effects.begin(), effects.end(), id);
    return it == effects.end() ? -1 : static_cast<int>(it - effects.begin());
  };
  for (std::size_t k = 0; k < effects.size(); ++k) {
    if (index_of(effects[k]) != static_cast<int>(k))
      throw std::invalid_argument("constraint family: effect listed twice");
    family.effect_names.push_back(effect_short_name(effects[k]));
  }
  family.components = {
      {functionals::nde(), index_of(EffectId::direct)},
      {functionals::nie(), index_of(EffectId::indirect)},
      {functionals::nse_x0(), index_of(EffectId::spurious)},
      {functionals::nse_x1(), index_of(EffectId::spurious)},
  };
  return family;
}

ConstraintFamily tv_constraint() {
  ConstraintFamily family;
  family.m = 1;
  family.effect_names = {"TV"};
  family.components = {{functionals::tv(), 0}};
  return family;
}

ConstraintTargets make_targets(const ConstraintFamily& family,
                               const std::vector<Estimate>& outcome_values, const EffectSet& s) {
  if (outcome_values.size() != family.components.size())
    throw std::invalid_argument("make_targets: one outcome value per component required");
  if (s.universe() != family.m)
    throw std::invalid_argument("make_targets: constraint set universe does not match the family");
  ConstraintTargets t;
  for (std::size_t k = 0; k < family.components.size(); ++k) {
    const int e = family.components[k].effect;
    const bool removed = e >= 0 && s.contains(e);
    t.values.push_back(removed ? 0.0 : outcome_values[k].value);
    t.se.push_back(removed ? 0.0 : outcome_values[k].se);
  }
  return t;
}

std::vector<Estimate> outcome_functionals(const ConstraintFamily& family,
                                          const FunctionalRows& rows, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& outcome_flipped) {
  std::vector<Estimate> out;
  for (const auto& c : family.components)
    out.push_back(evaluate_functional(c.functional, rows, y, outcome_flipped));
  return out;
}

std::vector<Estimate> predictor_functionals(const ConstraintFamily& family,
                                            const PredictionFunction& f,
                                            const EncodedView& view, const FunctionalRows& rows) {
  const Eigen::VectorXd factual = f(view.inputs);
  const Eigen::VectorXd flipped =
      family.uses_flipped() ? f(view.flipped_inputs()) : Eigen::VectorXd();
  std::vector<Estimate> out;
  for (const auto& c : family.components)
    out.push_back(evaluate_functional(c.functional, rows, factual, flipped));
  return out;
}

ObjectiveBatch make_batch(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& raw_weights, bool with_flipped) {
  ObjectiveBatch b;
  b.inputs = inputs;
  b.y = y;
  if (with_flipped) {
    b.flipped = inputs;
    b.flipped.row(0) = (1.0 - inputs.row(0).array()).matrix();
  }
  b.rows.x = inputs.row(0).transpose();
  b.rows.weights = raw_weights;
  double sum[2] = {0.0, 0.0}, count[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const int g = b.rows.x(i) > 0.5 ? 1 : 0;
    sum[g] += raw_weights(i);
    count[g] += 1.0;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const int g = b.rows.x(i) > 0.5 ? 1 : 0;
    b.rows.weights(i) *= count[g] / sum[g];
  }
  return b;
}

Eigen::VectorXd raw_ipw_weights(const PropensityModel& prop, const EncodedView& view) {
  const Eigen::VectorXd p1 = prop.predict(view.z());
  Eigen::VectorXd w(p1.size());
  for (Eigen::Index i = 0; i < p1.size(); ++i)
    w(i) = 1.0 / (view.inputs(0, i) > 0.5 ? p1(i) : 1.0 - p1(i));
  return w;
}

namespace {

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

bool has_both_strata(const Eigen::VectorXd& x) {
  bool seen[2] = {false, false};
  for (Eigen::Index i = 0; i < x.size(); ++i) seen[x(i) > 0.5 ? 1 : 0] = true;
  return seen[0] && seen[1];
}

}  // namespace

LagrangianValue lagrangian_loss(const MlpPredictor& f, const ObjectiveBatch& batch, double lambda,
                                const ConstraintFamily& family, const ConstraintTargets& targets,
                                LossKind loss, bool with_gradient) {
  if (lambda < 0.0) throw std::invalid_argument("lagrangian_loss: lambda must be non-negative");
  if (targets.values.size() != family.components.size())
    throw std::invalid_argument("lagrangian_loss: one target per component required");
  const auto n = batch.y.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  LagrangianValue out;

  MlpPredictor::Cache cache_f, cache_c;
  const Eigen::VectorXd logit_f = f.forward(batch.inputs, cache_f);
  const Eigen::VectorXd pred_f = f.apply_head(logit_f);
  Eigen::VectorXd d_logit_f(n);

  if (loss == LossKind::mse) {
    const Eigen::VectorXd r = pred_f - batch.y;
    out.base = r.squaredNorm() * inv_n;
    d_logit_f = 2.0 * inv_n * r;
    if (f.head() == OutputHead::logistic)
      d_logit_f.array() *= pred_f.array() * (1.0 - pred_f.array());
  } else {
    if (f.head() != OutputHead::logistic)
      throw std::invalid_argument("lagrangian_loss: cross-entropy needs a logistic head");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += softplus(logit_f(i)) - batch.y(i) * logit_f(i);
    out.base = acc * inv_n;
    d_logit_f = inv_n * (pred_f - batch.y);
  }

  const bool penalize = lambda > 0.0 && !family.components.empty();
  Eigen::VectorXd d_pred_f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd d_pred_c;
  Eigen::VectorXd pred_c;
  bool need_flipped = false;
  if (penalize && !has_both_strata(batch.rows.x)) {
    out.penalty_skipped = true;
  } else if (penalize) {
    need_flipped = family.uses_flipped();
    if (need_flipped) {
      if (batch.flipped.cols() != n)
        throw std::invalid_argument("lagrangian_loss: batch lacks flipped inputs");
      pred_c = f.apply_head(f.forward(batch.flipped, cache_c));
      d_pred_c = Eigen::VectorXd::Zero(n);
    }
    for (std::size_t k = 0; k < family.components.size(); ++k) {
      const auto g = functional_gradient(family.components[k].functional, batch.rows, pred_f, pred_c);
      const double dev = g.value - targets.values[k];
      out.deviations.push_back(dev);
      out.penalty += dev * dev;
      if (with_gradient) {
        d_pred_f += 2.0 * lambda * dev * g.d_factual;
        if (need_flipped) d_pred_c += 2.0 * lambda * dev * g.d_flipped;
      }
    }
    out.penalty *= lambda;
  }
  out.objective = out.base + out.penalty;
  if (!with_gradient) return out;

  const auto chain = [&](const Eigen::VectorXd& pred, const Eigen::VectorXd& d_pred) {
    if (f.head() == OutputHead::identity) return Eigen::VectorXd(d_pred);
    return Eigen::VectorXd(d_pred.array() * pred.array() * (1.0 - pred.array()));
  };
  if (penalize && !out.penalty_skipped) d_logit_f += chain(pred_f, d_pred_f);
  out.gradient = f.backward(cache_f, d_logit_f);
  if (need_flipped) out.gradient += f.backward(cache_c, chain(pred_c, d_pred_c));
  return out;
}

namespace {

// Stratified carve of the training fold into fit / validation parts.
void validation_split(const EncodedView& train, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& fit, std::vector<std::size_t>& val) {
  Rng rng(seed);
  for (int g = 0; g < 2; ++g) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train.size(); ++i)
      if ((train.inputs(0, static_cast<Eigen::Index>(i)) > 0.5 ? 1 : 0) == g) rows.push_back(i);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    if (rows.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, rows.size() - 1);
    val.insert(val.end(), rows.begin(), rows.begin() + static_cast<long>(n_val));
    fit.insert(fit.end(), rows.begin() + static_cast<long>(n_val), rows.end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(val.begin(), val.end());
}

ObjectiveBatch gather_batch(const EncodedView& view, const Eigen::VectorXd& raw_weights,
                            const std::size_t* idx, std::size_t count, bool with_flipped) {
  Eigen::MatrixXd inputs(view.inputs.rows(), static_cast<Eigen::Index>(count));
  Eigen::VectorXd y(static_cast<Eigen::Index>(count)), w(static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = static_cast<Eigen::Index>(idx[k]);
    inputs.col(static_cast<Eigen::Index>(k)) = view.inputs.col(src);
    y(static_cast<Eigen::Index>(k)) = view.y(src);
    w(static_cast<Eigen::Index>(k)) = raw_weights(src);
  }
  return make_batch(inputs, y, w, with_flipped);
}

}  // namespace

TrainResult train_at_lambda(const EncodedView& train, double lambda,
                            const ConstraintFamily& family, const ConstraintTargets& targets,
                            const PropensityModel& prop, LossKind loss, const TrainConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  if (loss == LossKind::cross_entropy && train.task != TaskKind::binary_classification)
    throw std::invalid_argument("cross-entropy loss needs a binary-classification task");
  if (loss == LossKind::mse && train.task != TaskKind::regression)
    throw std::invalid_argument("mse loss needs a regression task");

  std::vector<std::size_t> fit, val;
  validation_split(train, cfg.validation_fraction, derive_seed(seed, 0x5eed0001), fit, val);
  const Eigen::VectorXd raw_w = raw_ipw_weights(prop, train);
  const bool with_flipped = lambda > 0.0 && family.uses_flipped();
  const ObjectiveBatch val_batch = gather_batch(train, raw_w, val.data(), val.size(), with_flipped);

  std::vector<int> widths{static_cast<int>(train.input_width())};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  const OutputHead head = loss == LossKind::mse ? OutputHead::identity : OutputHead::logistic;

  TrainResult result;
  double best_overall = std::numeric_limits<double>::infinity();
  std::size_t skipped_batches = 0;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int r = 0; r < cfg.restarts; ++r) {
    const auto restart_seed = derive_seed(seed, static_cast<std::uint64_t>(r) + 1);
    MlpPredictor model(widths, head, restart_seed);
    Rng shuffle_rng(derive_seed(restart_seed, 0));
    Eigen::VectorXd params = model.parameters();
    Eigen::VectorXd best_params = params;
    Adam adam(static_cast<std::size_t>(params.size()), cfg.learning_rate);
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    int epochs = 0;
    bool failed = false;
    std::vector<std::size_t> order = fit;

    for (int epoch = 0; epoch < cfg.epochs && !failed; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t count = std::min(batch, order.size() - start);
        const auto b = gather_batch(train, raw_w, order.data() + start, count, with_flipped);
        const auto value = lagrangian_loss(model, b, lambda, family, targets, loss);
        if (!std::isfinite(value.objective) || !value.gradient.allFinite()) {
          failed = true;
          break;
        }
        if (value.penalty_skipped) ++skipped_batches;
        adam.step(params, value.gradient);
        model.set_parameters(params);
      }
      if (failed) break;
      const double v =
          lagrangian_loss(model, val_batch, lambda, family, targets, loss, false).objective;
      if (!std::isfinite(v)) {
        failed = true;
        break;
      }
      if (v < best) {
        best = v;
        best_params = params;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        epochs = epoch + 1;
        break;
      }
      epochs = epoch + 1;
    }
    if (failed || !std::isfinite(best)) {
      ++result.failed_restarts;
      result.warnings.push_back("restart " + std::to_string(r) + " aborted: non-finite loss");
      continue;
    }
    if (best < best_overall) {
      best_overall = best;
      model.set_parameters(best_params);
      result.model = model;
      result.best_restart = r;
      result.validation_objective = best;
      result.epochs = epochs;
    }
  }
  if (result.best_restart < 0) throw std::runtime_error("training failed: every restart diverged");
  if (skipped_batches > 0)
    result.warnings.push_back(std::to_string(skipped_batches) +
                              " batches lacked an attribute group; their penalty was skipped");
  return result;
}

TrainResult fit_outcome_model(const EncodedView& train, LossKind loss, const TrainConfig& cfg,
                              std::uint64_t seed) {
  PropensityModel constant;
  constant.constant = true;
  constant.coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train.z_width));
  return train_at_lambda(train, 0.0, ConstraintFamily{}, ConstraintTargets{}, constant, loss, cfg,
                         seed);
}

namespace {
constexpr double kDeviationFloor = 1e-9;
}  // namespace

bool ConstraintReport::any_reject() const {
  return std::any_of(tests.begin(), tests.end(), [](const ConstraintTest& t) { return t.reject; });
}

ConstraintReport constraint_tests(const ConstraintFamily& family,
                                  const std::vector<Estimate>& predictor_values,
                                  const ConstraintTargets& targets, double alpha_level) {
  if (predictor_values.size() != family.components.size() ||
      targets.values.size() != family.components.size())
    throw std::invalid_argument("constraint_tests: one value and target per component required");
  if (!(alpha_level > 0.0 && alpha_level < 1.0))
    throw std::invalid_argument("constraint_tests: alpha must lie in (0, 1)");
  const double critical =
      boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha_level / 2.0);
  ConstraintReport report;
  for (std::size_t k = 0; k < family.components.size(); ++k) {
    ConstraintTest t;
    t.name = family.components[k].functional.name;
    t.estimate = predictor_values[k].value;
    t.se = predictor_values[k].se;
    t.target = targets.values[k];
    t.target_se = targets.se.size() > k ? targets.se[k] : 0.0;
    const double dev = t.estimate - t.target;
    const double se = std::hypot(t.se, t.target_se);
    // Deviations at rounding level (e.g. NSE with an empty Z, where plain and
    // weighted means coincide) count as exact agreement.
    const double noise_floor =
        kDeviationFloor * std::max({1.0, std::abs(t.estimate), std::abs(t.target)});
    if (std::abs(dev) <= noise_floor) {
      t.z = 0.0;
    } else if (se > 0.0) {
      t.z = dev / se;
      t.reject = std::abs(t.z) > critical;
    } else if (dev != 0.0) {
      t.z = std::copysign(std::numeric_limits<double>::infinity(), dev);
      t.reject = true;
      t.zero_se = true;
    }
    report.tests.push_back(t);
  }
  return report;
}

CfclContext prepare_cfcl(EncodedView train, EncodedView eval, ConstraintFamily family,
                         LossKind loss, const TrainConfig& cfg, std::uint64_t seed) {
  CfclContext ctx;
  ctx.train = std::move(train);
  ctx.eval = std::move(eval);
  ctx.family = std::move(family);
  ctx.loss = loss;
  ctx.cfg = cfg;
  ctx.prop = fit_propensity(ctx.train);
  ctx.warnings = ctx.prop.warnings;
  auto outcome = fit_outcome_model(ctx.train, loss, cfg, derive_seed(seed, 0x0c0e));
  ctx.outcome_model = outcome.model;
  for (auto& w : outcome.warnings) ctx.warnings.push_back("outcome model: " + w);

  const auto train_rows = functional_rows(ctx.train, ctx.prop);
  ctx.eval_rows = functional_rows(ctx.eval, ctx.prop);
  const bool flips = ctx.family.uses_flipped();
  const auto flipped = [&](const EncodedView& v) {
    return flips ? ctx.outcome_model.predict(v.flipped_inputs()) : Eigen::VectorXd();
  };
  ctx.outcome_train = outcome_functionals(ctx.family, train_rows, ctx.train.y, flipped(ctx.train));
  ctx.outcome_eval = outcome_functionals(ctx.family, ctx.eval_rows, ctx.eval.y, flipped(ctx.eval));
  return ctx;
}

double auroc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  double rank_sum = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores(static_cast<Eigen::Index>(order[j])) ==
                        scores(static_cast<Eigen::Index>(order[i])))
      ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels(static_cast<Eigen::Index>(order[k])) > 0.5) {
        rank_sum += mid_rank;
        positives += 1.0;
      }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0)
    throw std::invalid_argument("auroc: both classes must be present");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double evaluation_loss(LossKind loss, const Eigen::VectorXd& predictions, const Eigen::VectorXd& y) {
  if (loss == LossKind::mse) return (predictions - y).squaredNorm() / static_cast<double>(y.size());
  return 1.0 - auroc(predictions, y);
}

FairPredictor cfcl_generalized(const CfclContext& ctx, const EffectSet& s,
                               const LambdaSearch& search, std::uint64_t seed) {
  search.validate();
  const auto train_targets = make_targets(ctx.family, ctx.outcome_train, s);
  const auto eval_targets = make_targets(ctx.family, ctx.outcome_eval, s);

  FairPredictor out;
  out.s = s;
  bool have_accepted = false;
  MlpPredictor last_model;
  ConstraintReport last_report;
  double last_lambda = 0.0;

  const auto run = [&](double lambda) {
    auto trained =
        train_at_lambda(ctx.train, lambda, ctx.family, train_targets, ctx.prop, ctx.loss, ctx.cfg, seed);
    for (auto& w : trained.warnings)
      out.warnings.push_back("lambda " + std::to_string(lambda) + ": " + w);
    const auto values =
        predictor_functionals(ctx.family, trained.model.as_function(), ctx.eval, ctx.eval_rows);
    auto report = constraint_tests(ctx.family, values, eval_targets, search.alpha_level);
    const bool rejected = report.any_reject();
    out.trajectory.push_back({lambda, rejected, trained.validation_objective, trained.epochs});
    last_model = trained.model;
    last_report = report;
    last_lambda = lambda;
    if (!rejected) {
      have_accepted = true;
      out.model = trained.model;
      out.report = report;
      out.lambda_final = lambda;
    }
    return rejected;
  };

  double lo = search.lambda_low, hi = search.lambda_high;
  if (!(hi - lo > search.epsilon)) {
    run(hi);
  } else {
    while (hi - lo > search.epsilon) {
      const double mid = 0.5 * (lo + hi);
      if (run(mid)) lo = mid;
      else hi = mid;
    }
  }
  out.constraints_met = have_accepted;
  if (!have_accepted) {
    out.model = last_model;
    out.report = last_report;
    out.lambda_final = last_lambda;
    out.warnings.push_back("constraints unmet for " + s.label(ctx.family.effect_names) +
                           ": every lambda iterate was rejected");
  }
  const Eigen::VectorXd pred = out.model.predict(ctx.eval.inputs);
  out.eval_loss = evaluation_loss(ctx.loss, pred, ctx.eval.y);
  out.eval_tv = tv_measure(pred, ctx.eval.x().transpose());
  return out;
}

FairPredictor cfcl(const EncodedView& train, const EncodedView& eval, const EffectSet& s,
                   LossKind loss, const TrainConfig& cfg, const LambdaSearch& search,
                   std::uint64_t seed) {
  std::vector<EffectId> effects;
  for (int k = 0; k < s.universe() && k < kCanonicalEffects; ++k)
    effects.push_back(static_cast<EffectId>(k));
  const auto ctx = prepare_cfcl(train, eval, canonical_constraints(effects), loss, cfg, seed);
  auto out = cfcl_generalized(ctx, s, search, derive_seed(seed, 1));
  out.warnings.insert(out.warnings.begin(), ctx.warnings.begin(), ctx.warnings.end());
  return out;
}

namespace {

std::vector<std::vector<bool>> relu_masks(const MlpPredictor& f, const Eigen::MatrixXd& inputs) {
  MlpPredictor::Cache cache;
  f.forward(inputs, cache);
  std::vector<std::vector<bool>> masks;
  for (std::size_t k = 0; k + 1 < cache.pre.size(); ++k) {
    std::vector<bool> m(static_cast<std::size_t>(cache.pre[k].size()));
    for (Eigen::Index i = 0; i < cache.pre[k].size(); ++i)
      m[static_cast<std::size_t>(i)] = cache.pre[k].data()[i] > 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

}  // namespace

GradientCheckResult gradient_check(const MlpPredictor& f, const ObjectiveBatch& batch,
                                   double lambda, const ConstraintFamily& family,
                                   const ConstraintTargets& targets, LossKind loss,
                                   int coordinates, std::uint64_t seed) {
  constexpr double h = 1e-4;
  const auto analytic = lagrangian_loss(f, batch, lambda, family, targets, loss).gradient;
  const Eigen::VectorXd base = f.parameters();
  const auto n_params = static_cast<std::size_t>(base.size());

  std::vector<std::size_t> candidates(n_params);
  std::iota(candidates.begin(), candidates.end(), 0);
  Rng rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);

  const auto masks_of = [&](const MlpPredictor& g) {
    auto m = relu_masks(g, batch.inputs);
    if (batch.flipped.cols() > 0) {
      auto mc = relu_masks(g, batch.flipped);
      m.insert(m.end(), mc.begin(), mc.end());
    }
    return m;
  };
  const auto reference_masks = masks_of(f);

  GradientCheckResult result;
  MlpPredictor probe = f;
  for (std::size_t c : candidates) {
    if (result.checked >= coordinates) break;
    const auto k = static_cast<Eigen::Index>(c);
    Eigen::VectorXd p = base;
    p(k) = base(k) + h;
    probe.set_parameters(p);
    const bool kink_plus = masks_of(probe) != reference_masks;
    const double up = lagrangian_loss(probe, batch, lambda, family, targets, loss, false).objective;
    p(k) = base(k) - h;
    probe.set_parameters(p);
    const bool kink_minus = masks_of(probe) != reference_masks;
    const double down = lagrangian_loss(probe, batch, lambda, family, targets, loss, false).objective;
    if (kink_plus || kink_minus) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic(k);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace fairpath
