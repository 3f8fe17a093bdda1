#include "fairpath/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairpath {

double PropensityModel::clip(double p) const { return std::clamp(p, clip_low, clip_high); }

Eigen::VectorXd PropensityModel::predict(const Eigen::MatrixXd& z) const {
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    double eta = intercept;
    if (!constant && coef.size() > 0) eta += coef.dot(z.col(i));
    out(i) = clip(1.0 / (1.0 + std::exp(-eta)));
  }
  return out;
}

PropensityModel fit_propensity(const EncodedView& train, double clip_low, double clip_high) {
  if (!(0.0 < clip_low && clip_low < clip_high && clip_high < 1.0))
    throw std::invalid_argument("propensity clipping bounds must satisfy 0 < low < high < 1");
  const auto n0 = train.group_count(0);
  const auto n1 = train.group_count(1);
  if (n0 == 0 || n1 == 0) throw std::invalid_argument("fit_propensity: an attribute group is empty");

  PropensityModel model;
  model.clip_low = clip_low;
  model.clip_high = clip_high;
  const double base = static_cast<double>(n1) / static_cast<double>(n0 + n1);
  const double base_logit = std::log(base / (1.0 - base));
  const auto d = static_cast<Eigen::Index>(train.z_width);
  model.coef = Eigen::VectorXd::Zero(d);
  model.intercept = base_logit;
  if (d == 0) {
    model.constant = true;
    return model;
  }

  // Design with a leading intercept column; rows are samples.
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = train.z().transpose();
  const Eigen::VectorXd x = train.x().transpose();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  beta(0) = base_logit;
  constexpr double ridge = 1e-6;
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd p(n), curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      curvature(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    Eigen::VectorXd grad = design.transpose() * (x - p);
    Eigen::MatrixXd hess = design.transpose() * curvature.asDiagonal() * design;
    grad.tail(d) -= ridge * static_cast<double>(n) * beta.tail(d);
    hess.diagonal().tail(d).array() += ridge * static_cast<double>(n);
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) {
      converged = true;
      break;
    }
  }

  // Separation drives the slopes off to infinity; the ridge keeps them finite
  // but large. Treat a fit that classifies every row correctly, or has huge
  // slopes, like divergence.
  bool separated = true;
  if (beta.allFinite()) {
    const Eigen::VectorXd eta = design * beta;
    for (Eigen::Index i = 0; i < n && separated; ++i) separated = (2.0 * x(i) - 1.0) * eta(i) > 0.0;
  }
  if (!converged || separated || !beta.allFinite() ||
      beta.tail(d).lpNorm<Eigen::Infinity>() > 30.0) {
    model.constant = true;
    model.warnings.push_back(
        "propensity model: perfect separation of X by Z; using the group base rate");
    return model;
  }
  model.intercept = beta(0);
  model.coef = beta.tail(d);
  Eigen::VectorXd curvature(n);
  const Eigen::VectorXd eta = design * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-eta(i)));
    curvature(i) = p * (1.0 - p);
  }
  Eigen::MatrixXd hess = design.transpose() * curvature.asDiagonal() * design;
  hess.diagonal().tail(d).array() += ridge * static_cast<double>(n);
  model.covariance = hess.ldlt().solve(Eigen::MatrixXd::Identity(d + 1, d + 1));
  return model;
}

Eigen::VectorXd ipw_weights(const PropensityModel& prop, const EncodedView& view) {
  const Eigen::VectorXd p1 = prop.predict(view.z());
  const auto n = static_cast<Eigen::Index>(view.size());
  Eigen::VectorXd w(n);
  double sum[2] = {0.0, 0.0};
  double count[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = view.inputs(0, i) > 0.5 ? 1 : 0;
    w(i) = 1.0 / (g ? p1(i) : 1.0 - p1(i));
    sum[g] += w(i);
    count[g] += 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = view.inputs(0, i) > 0.5 ? 1 : 0;
    w(i) *= count[g] / sum[g];
  }
  return w;
}

bool EffectFunctional::uses_flipped() const {
  return std::any_of(terms.begin(), terms.end(),
                     [](const FunctionalTerm& t) { return t.arm == Arm::flipped; });
}

namespace functionals {

EffectFunctional nde() {
  return {"nde", {{0, Arm::flipped, true, 1.0}, {0, Arm::factual, true, -1.0}}};
}

EffectFunctional nie() {
  return {"nie", {{0, Arm::flipped, true, 1.0}, {1, Arm::factual, true, -1.0}}};
}

EffectFunctional nse_x0() {
  return {"nse_x0", {{0, Arm::factual, false, 1.0}, {0, Arm::factual, true, -1.0}}};
}

EffectFunctional nse_x1() {
  return {"nse_x1", {{1, Arm::factual, false, 1.0}, {1, Arm::factual, true, -1.0}}};
}

EffectFunctional tv() {
  return {"tv", {{1, Arm::factual, false, 1.0}, {0, Arm::factual, false, -1.0}}};
}

}  // namespace functionals

FunctionalRows functional_rows(const EncodedView& view, const PropensityModel& prop) {
  FunctionalRows rows{view.x().transpose(), ipw_weights(prop, view), {}, {}};
  if (prop.constant || prop.covariance.size() == 0) return rows;
  const auto z = view.z();
  const Eigen::Index k = prop.coef.size() + 1;
  rows.weight_score = Eigen::MatrixXd::Zero(k, z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(prop.intercept + prop.coef.dot(z.col(i)))));
    if (p < prop.clip_low || p > prop.clip_high) continue;  // clipped: locally constant
    const double r = -(rows.x(i) - p);
    rows.weight_score(0, i) = r;
    rows.weight_score.col(i).tail(k - 1) = r * z.col(i);
  }
  rows.propensity_cov = prop.covariance;
  return rows;
}

namespace {

struct TermStats {
  double mass = 0.0;  // sum of term weights over the stratum
  double mean = 0.0;
};

double term_weight(const FunctionalTerm& t, const FunctionalRows& rows, Eigen::Index i) {
  return t.weighted ? rows.weights(i) : 1.0;
}

bool in_stratum(const FunctionalTerm& t, const FunctionalRows& rows, Eigen::Index i) {
  return (rows.x(i) > 0.5 ? 1 : 0) == t.stratum;
}

const Eigen::VectorXd& term_values(const FunctionalTerm& t, const Eigen::VectorXd& factual,
                                   const Eigen::VectorXd& flipped) {
  return t.arm == Arm::factual ? factual : flipped;
}

std::vector<TermStats> term_stats(const EffectFunctional& fn, const FunctionalRows& rows,
                                  const Eigen::VectorXd& factual, const Eigen::VectorXd& flipped) {
  const Eigen::Index n = rows.x.size();
  if (rows.weights.size() != n || factual.size() != n ||
      (fn.uses_flipped() && flipped.size() != n))
    throw std::invalid_argument("effect functional: input lengths disagree");
  std::vector<TermStats> stats(fn.terms.size());
  for (std::size_t t = 0; t < fn.terms.size(); ++t) {
    const auto& term = fn.terms[t];
    const auto& v = term_values(term, factual, flipped);
    double mass = 0.0, acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!in_stratum(term, rows, i)) continue;
      const double w = term_weight(term, rows, i);
      mass += w;
      acc += w * v(i);
    }
    if (mass <= 0.0)
      throw std::invalid_argument("effect functional '" + fn.name + "': stratum " +
                                  std::to_string(term.stratum) + " is empty");
    stats[t] = {mass, acc / mass};
  }
  return stats;
}

}  // namespace

Estimate evaluate_functional(const EffectFunctional& fn, const FunctionalRows& rows,
                             const Eigen::VectorXd& factual, const Eigen::VectorXd& flipped) {
  const auto stats = term_stats(fn, rows, factual, flipped);
  Estimate out;
  for (std::size_t t = 0; t < fn.terms.size(); ++t) out.value += fn.terms[t].sign * stats[t].mean;
  double var = 0.0;
  for (Eigen::Index i = 0; i < rows.x.size(); ++i) {
    double psi = 0.0;
    for (std::size_t t = 0; t < fn.terms.size(); ++t) {
      const auto& term = fn.terms[t];
      if (!in_stratum(term, rows, i)) continue;
      const double v = term_values(term, factual, flipped)(i);
      psi += term.sign * term_weight(term, rows, i) * (v - stats[t].mean) / stats[t].mass;
    }
    var += psi * psi;
  }
  if (rows.weight_score.size() > 0) {
    // Self-normalized means are invariant to rescaling the weights, so only
    // the score's deviation from the term mean matters.
    Eigen::VectorXd g = Eigen::VectorXd::Zero(rows.weight_score.rows());
    for (std::size_t t = 0; t < fn.terms.size(); ++t) {
      const auto& term = fn.terms[t];
      if (!term.weighted) continue;
      const auto& v = term_values(term, factual, flipped);
      for (Eigen::Index i = 0; i < rows.x.size(); ++i)
        if (in_stratum(term, rows, i))
          g += (term.sign * rows.weights(i) * (v(i) - stats[t].mean) / stats[t].mass) * rows.weight_score.col(i);
    }
    var += g.dot(rows.propensity_cov * g);
  }
  out.se = std::sqrt(var);
  return out;
}

FunctionalGradient functional_gradient(const EffectFunctional& fn, const FunctionalRows& rows,
                                       const Eigen::VectorXd& factual,
                                       const Eigen::VectorXd& flipped) {
  const auto stats = term_stats(fn, rows, factual, flipped);
  const Eigen::Index n = rows.x.size();
  FunctionalGradient out;
  out.d_factual = Eigen::VectorXd::Zero(n);
  out.d_flipped = Eigen::VectorXd::Zero(n);
  for (std::size_t t = 0; t < fn.terms.size(); ++t) {
    const auto& term = fn.terms[t];
    out.value += term.sign * stats[t].mean;
    auto& target = term.arm == Arm::factual ? out.d_factual : out.d_flipped;
    for (Eigen::Index i = 0; i < n; ++i)
      if (in_stratum(term, rows, i))
        target(i) += term.sign * term_weight(term, rows, i) / stats[t].mass;
  }
  return out;
}

EffectEstimates estimate_effects(const FunctionalRows& rows, const Eigen::VectorXd& factual,
                                 const Eigen::VectorXd& flipped) {
  EffectEstimates e;
  e.nde = evaluate_functional(functionals::nde(), rows, factual, flipped);
  e.nie = evaluate_functional(functionals::nie(), rows, factual, flipped);
  e.nse_x0 = evaluate_functional(functionals::nse_x0(), rows, factual, flipped);
  e.nse_x1 = evaluate_functional(functionals::nse_x1(), rows, factual, flipped);
  e.tv = evaluate_functional(functionals::tv(), rows, factual, flipped);
  e.n_effective = 0.0;
  return e;
}

namespace {

double raw_weight_sum(const EncodedView& view, const PropensityModel& prop) {
  const Eigen::VectorXd p1 = prop.predict(view.z());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p1.size(); ++i)
    sum += 1.0 / (view.inputs(0, i) > 0.5 ? p1(i) : 1.0 - p1(i));
  return sum;
}

}  // namespace

EffectEstimates estimate_effects_of_predictor(const PredictionFunction& f,
                                              const EncodedView& view,
                                              const PropensityModel& prop) {
  const auto rows = functional_rows(view, prop);
  auto e = estimate_effects(rows, f(view.inputs), f(view.flipped_inputs()));
  e.n_effective = raw_weight_sum(view, prop);
  return e;
}

EffectEstimates estimate_effects_of_outcome(const EncodedView& view, const PropensityModel& prop,
                                            const OutcomeModel& outm) {
  const auto rows = functional_rows(view, prop);
  auto e = estimate_effects(rows, view.y, outm.predict(view.flipped_inputs()));
  e.n_effective = raw_weight_sum(view, prop);
  return e;
}

Estimate tv_measure(const Eigen::VectorXd& predictions, const Eigen::VectorXd& x) {
  FunctionalRows rows{x, Eigen::VectorXd::Ones(x.size())};
  return evaluate_functional(functionals::tv(), rows, predictions, Eigen::VectorXd());
}

Estimate tv_measure(const PredictionFunction& f, const EncodedView& view) {
  return tv_measure(f(view.inputs), view.x().transpose());
}

double tvd(const PredictionFunction& f_after, const PredictionFunction& f_before,
           const EncodedView& view) {
  return tv_measure(f_after, view).value - tv_measure(f_before, view).value;
}

double tvr(const EffectEstimates& e, EffectId effect) {
  switch (effect) {
    case EffectId::direct: return -e.nde.value;
    case EffectId::indirect: return e.nie.value;
    case EffectId::spurious: return e.nse_x0.value - e.nse_x1.value;
  }
  throw std::invalid_argument("tvr: unknown effect");
}

double tvr(const EffectEstimates& e, int effect_index) {
  if (effect_index < 0 || effect_index >= kCanonicalEffects)
    throw std::invalid_argument("tvr: unknown effect id " + std::to_string(effect_index));
  return tvr(e, static_cast<EffectId>(effect_index));
}

double tvr_se(const EffectEstimates& e, EffectId effect) {
  switch (effect) {
    case EffectId::direct: return e.nde.se;
    case EffectId::indirect: return e.nie.se;
    case EffectId::spurious: return std::hypot(e.nse_x0.se, e.nse_x1.se);
  }
  throw std::invalid_argument("tvr_se: unknown effect");
}

double tv_decomposition_residual(const EffectEstimates& e) {
  return e.tv.value - (e.nde.value - e.nie.value + e.nse_x1.value - e.nse_x0.value);
}

}  // namespace fairpath
