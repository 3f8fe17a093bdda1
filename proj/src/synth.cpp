#include "fairpath/synth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fairpath/random.hpp"

namespace fairpath {

void LinearScmParams::validate() const {
  if (!(sigma_w > 0.0) || !(sigma_y > 0.0))
    throw std::invalid_argument("linear scm: noise scales must be positive");
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma) ||
      !std::isfinite(sigma_w) || !std::isfinite(sigma_y))
    throw std::invalid_argument("linear scm: parameters must be finite");
}

Dataset sample_linear(const LinearScmParams& params, std::size_t n, std::uint64_t seed) {
  params.validate();
  if (n == 0) throw std::invalid_argument("sample_linear: n must be positive");
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Column x{"X", ColumnKind::categorical, {}, {}};
  Column w{"W", ColumnKind::numeric, {}, {}};
  Column y{"Y", ColumnKind::numeric, {}, {}};
  x.labels.reserve(n);
  w.numbers.reserve(n);
  y.numbers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int xi = coin(rng) ? 1 : 0;
    const double wi = params.beta * xi + params.sigma_w * normal(rng);
    const double yi = params.alpha * xi + params.gamma * wi + params.sigma_y * normal(rng);
    x.labels.push_back(xi ? "1" : "0");
    w.numbers.push_back(wi);
    y.numbers.push_back(yi);
  }
  SfmSpec spec{"X", "0", "1", {}, {"W"}, "Y", TaskKind::regression};
  return Dataset({std::move(x), std::move(w), std::move(y)}, spec,
                 Provenance{Provenance::Kind::synthetic, "", seed});
}

namespace {

struct LinearSubset {
  bool d = false;
  bool i = false;
};

LinearSubset linear_subset(const EffectSet& s) {
  if (s.universe() < 2 || s.universe() > 3)
    throw std::invalid_argument("linear oracle: effect universe must be {D,I} or {D,I,S}");
  if (s.universe() == 3 && s.contains(static_cast<int>(EffectId::spurious)))
    throw std::invalid_argument("linear oracle: the linear system has no spurious path");
  return {s.contains(static_cast<int>(EffectId::direct)),
          s.contains(static_cast<int>(EffectId::indirect))};
}

// (kappa + 1) / (kappa - 1) with kappa = exp(beta^2 / sigma_w^2): the cost
// factor of cancelling the indirect effect when W only partially reveals X.
double indirect_cost_ratio(double beta, double sigma_w) {
  const double r = beta * beta / (sigma_w * sigma_w);
  if (r > 700.0) return 1.0;
  const double km1 = std::expm1(r);
  return (km1 + 2.0) / km1;
}

}  // namespace

double oracle_mse(const LinearScmParams& p, const EffectSet& s, MseConvention convention) {
  p.validate();
  const auto [d, i] = linear_subset(s);
  const double sy2 = p.sigma_y * p.sigma_y;
  const double a = p.alpha;
  const double gb = p.gamma * p.beta;
  const double gsw2 = p.gamma * p.gamma * p.sigma_w * p.sigma_w;
  switch (convention) {
    case MseConvention::printed_closed_form:
      if (d && i) return sy2 + (a * a + gb * gb + a * gb) / 2.0 + gsw2;
      if (d) return sy2 + a * a / 2.0;
      if (i) return sy2 + gb * gb / 2.0 + gsw2;
      return sy2;
    case MseConvention::stated_predictors:
      if (d && i) return sy2 + (a + gb) * (a + gb) / 2.0 + gsw2;
      if (d) return sy2 + a * a / 2.0;
      if (i) return sy2 + gb * gb / 2.0 + gsw2;
      return sy2;
    case MseConvention::constrained_optimum: {
      // Projection of E[Y | x, w] onto the affine set of predictors whose
      // NDE / NIE are pinned; excess = d' G^{-1} d for the Riesz Gram matrix G.
      double excess = 0.0;
      if (d) excess += a * a / 4.0;
      if (i && gb != 0.0) {
        excess += gb * gb * indirect_cost_ratio(p.beta, p.sigma_w) / 4.0;
        if (d) excess += a * gb / 2.0;
      }
      return sy2 + excess;
    }
  }
  throw std::invalid_argument("oracle_mse: unknown convention");
}

double oracle_tv(const LinearScmParams& p, const EffectSet& s) {
  p.validate();
  const auto [d, i] = linear_subset(s);
  return (d ? 0.0 : p.alpha) + (i ? 0.0 : p.beta * p.gamma);
}

double oracle_cfur(const LinearScmParams& p, EffectId effect, CfurConvention convention,
                   MseConvention mse) {
  if (effect == EffectId::spurious)
    throw std::invalid_argument("oracle_cfur: the linear system has no spurious path");
  const auto node = [&](std::uint32_t mask) {
    const EffectSet s(mask, 2);
    return std::pair{oracle_mse(p, s, mse), oracle_tv(p, s)};
  };
  const auto [l0, t0] = node(0b00);
  const auto [ld, td] = node(0b01);
  const auto [li, ti] = node(0b10);
  const auto [ldi, tdi] = node(0b11);
  const auto ratio = [](double tvd, double psel) { return psel == 0.0 ? 0.0 : tvd / psel; };
  const bool is_d = effect == EffectId::direct;
  switch (convention) {
    case CfurConvention::path_averaged:
      return is_d ? ratio(((td - t0) + (tdi - ti)) / 2.0, ((ld - l0) + (ldi - li)) / 2.0)
                  : ratio(((ti - t0) + (tdi - td)) / 2.0, ((li - l0) + (ldi - ld)) / 2.0);
    case CfurConvention::single_path:
      // Along the chain {} -> {D} -> {D,I}.
      return is_d ? ratio(td - t0, ld - l0) : ratio(tdi - td, ldi - ld);
    case CfurConvention::printed: {
      if (is_d) return p.alpha == 0.0 ? 0.0 : -1.0 / p.alpha;
      const double gb = p.gamma * p.beta;
      const double den = gb * gb + p.alpha * gb + 2.0 * p.gamma * p.gamma * p.sigma_w * p.sigma_w;
      return den == 0.0 ? 0.0 : -2.0 * gb / den;
    }
  }
  throw std::invalid_argument("oracle_cfur: unknown convention");
}

// ---------------------------------------------------------------------------

namespace {

int lookup(const Mechanism& m, std::uint32_t parent_bits, std::size_t n_parents,
           std::uint64_t u) {
  std::size_t index = parent_bits;
  for (std::size_t k = 0; k < m.exogenous.size(); ++k)
    index |= static_cast<std::size_t>((u >> m.exogenous[k]) & 1u) << (n_parents + k);
  return m.table[index];
}

void check_mechanism(const Mechanism& m, std::size_t n_parents, std::size_t n_exo,
                     const char* name) {
  for (auto e : m.exogenous)
    if (e >= n_exo) throw std::invalid_argument(std::string("scm: mechanism ") + name +
                                                " references an unknown exogenous bit");
  const std::size_t expected = std::size_t{1} << (n_parents + m.exogenous.size());
  if (m.table.size() != expected)
    throw std::invalid_argument(std::string("scm: mechanism ") + name + " table is not total");
  for (auto v : m.table)
    if (v > 1) throw std::invalid_argument(std::string("scm: mechanism ") + name + " is not binary");
}

double config_probability(const DiscreteScm& scm, std::uint64_t u) {
  double p = 1.0;
  for (std::size_t k = 0; k < scm.exogenous.size(); ++k)
    p *= ((u >> k) & 1u) ? scm.exogenous[k].p : 1.0 - scm.exogenous[k].p;
  return p;
}

}  // namespace

void DiscreteScm::validate() const {
  if (exogenous.size() > 63) throw std::invalid_argument("scm: too many exogenous bits");
  for (const auto& e : exogenous)
    if (!(e.p > 0.0 && e.p < 1.0))
      throw std::invalid_argument("scm: exogenous bit '" + e.name + "' needs probability in (0,1)");
  check_mechanism(x, 0, exogenous.size(), "x");
  check_mechanism(z, 0, exogenous.size(), "z");
  check_mechanism(w, 2, exogenous.size(), "w");
  check_mechanism(y, 3, exogenous.size(), "y");
}

int DiscreteScm::eval_x(std::uint64_t u) const { return lookup(x, 0, 0, u); }
int DiscreteScm::eval_z(std::uint64_t u) const { return lookup(z, 0, 0, u); }

int DiscreteScm::eval_w(int xv, int zv, std::uint64_t u) const {
  return lookup(w, static_cast<std::uint32_t>(xv | (zv << 1)), 2, u);
}

int DiscreteScm::eval_y(int xv, int zv, int wv, std::uint64_t u) const {
  return lookup(y, static_cast<std::uint32_t>(xv | (zv << 1) | (wv << 2)), 3, u);
}

EffectEstimates enumerate_effects(const DiscreteScm& scm,
                                  const std::optional<PredictionTable>& predictor) {
  scm.validate();
  if (scm.exogenous.size() > kMaxEnumeratedBits)
    throw std::invalid_argument("enumerate_effects: enumeration budget exceeded (" +
                                std::to_string(scm.exogenous.size()) + " exogenous bits)");
  const auto target = [&](int xv, int zv, int wv, std::uint64_t u) -> double {
    return predictor ? (*predictor)[table_index(xv, zv, wv)] : scm.eval_y(xv, zv, wv, u);
  };
  double px[2] = {0.0, 0.0};
  double cond_sum[2] = {0.0, 0.0};  // sum of p * T over X = x
  double interv[2] = {0.0, 0.0};    // E[T_x]
  double cross = 0.0;               // E[T_{x1, W_{x0}}]
  const std::uint64_t configs = std::uint64_t{1} << scm.exogenous.size();
  for (std::uint64_t u = 0; u < configs; ++u) {
    const double p = config_probability(scm, u);
    const int xv = scm.eval_x(u);
    const int zv = scm.eval_z(u);
    const int w0 = scm.eval_w(0, zv, u);
    const int w1 = scm.eval_w(1, zv, u);
    const int w_obs = xv ? w1 : w0;
    px[xv] += p;
    cond_sum[xv] += p * target(xv, zv, w_obs, u);
    interv[0] += p * target(0, zv, w0, u);
    interv[1] += p * target(1, zv, w1, u);
    cross += p * target(1, zv, w0, u);
  }
  if (px[0] <= 0.0 || px[1] <= 0.0)
    throw std::invalid_argument("enumerate_effects: an attribute group has zero probability");
  const double cond0 = cond_sum[0] / px[0];
  const double cond1 = cond_sum[1] / px[1];
  EffectEstimates e;
  e.nde.value = cross - interv[0];
  e.nie.value = cross - interv[1];
  e.nse_x0.value = cond0 - interv[0];
  e.nse_x1.value = cond1 - interv[1];
  e.tv.value = cond1 - cond0;
  return e;
}

PredictionTable joint_probability_table(const DiscreteScm& scm) {
  scm.validate();
  if (scm.exogenous.size() > kMaxEnumeratedBits)
    throw std::invalid_argument("joint_probability_table: enumeration budget exceeded");
  PredictionTable joint{};
  const std::uint64_t configs = std::uint64_t{1} << scm.exogenous.size();
  for (std::uint64_t u = 0; u < configs; ++u) {
    const int xv = scm.eval_x(u);
    const int zv = scm.eval_z(u);
    joint[table_index(xv, zv, scm.eval_w(xv, zv, u))] += config_probability(scm, u);
  }
  return joint;
}

PredictionTable outcome_regression_table(const DiscreteScm& scm) {
  scm.validate();
  if (scm.exogenous.size() > kMaxEnumeratedBits)
    throw std::invalid_argument("outcome_regression_table: enumeration budget exceeded");
  PredictionTable mass{};
  PredictionTable sum{};
  const std::uint64_t configs = std::uint64_t{1} << scm.exogenous.size();
  for (std::uint64_t u = 0; u < configs; ++u) {
    const double p = config_probability(scm, u);
    const int xv = scm.eval_x(u);
    const int zv = scm.eval_z(u);
    const int wv = scm.eval_w(xv, zv, u);
    const auto k = table_index(xv, zv, wv);
    mass[k] += p;
    sum[k] += p * scm.eval_y(xv, zv, wv, u);
  }
  PredictionTable out{};
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = mass[k] > 0.0 ? sum[k] / mass[k] : 0.0;
  return out;
}

DiscreteScm random_discrete_scm(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> prob(0.15, 0.85);
  std::bernoulli_distribution bit(0.5);
  const auto random_table = [&](std::size_t bits) {
    std::vector<std::uint8_t> t(std::size_t{1} << bits);
    for (auto& v : t) v = bit(rng) ? 1 : 0;
    return t;
  };
  for (int attempt = 0; attempt < 10000; ++attempt) {
    DiscreteScm scm;
    for (const char* name : {"u_xz", "u_x", "u_z", "u_w", "u_y1", "u_y2"})
      scm.exogenous.push_back({name, prob(rng)});
    scm.x = {{0, 1}, random_table(2)};
    scm.z = {{0, 2}, random_table(2)};
    scm.w = {{3}, random_table(3)};
    scm.y = {{4, 5}, random_table(5)};

    const auto joint = joint_probability_table(scm);
    bool ok = true;
    for (double v : joint) ok = ok && v >= 0.01;
    for (int zv = 0; zv < 2 && ok; ++zv) {
      double pz = 0.0, pxz = 0.0;
      for (int xv = 0; xv < 2; ++xv)
        for (int wv = 0; wv < 2; ++wv) {
          pz += joint[table_index(xv, zv, wv)];
          if (xv == 1) pxz += joint[table_index(xv, zv, wv)];
        }
      const double propensity = pxz / pz;
      ok = propensity > 0.05 && propensity < 0.95;
    }
    if (ok) return scm;
  }
  throw std::runtime_error("random_discrete_scm: no SCM met the positivity requirements");
}

Dataset sample_discrete(const DiscreteScm& scm, std::size_t n, std::uint64_t seed) {
  scm.validate();
  if (n == 0) throw std::invalid_argument("sample_discrete: n must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Column x{"X", ColumnKind::categorical, {}, {}};
  Column z{"Z", ColumnKind::numeric, {}, {}};
  Column w{"W", ColumnKind::numeric, {}, {}};
  Column y{"Y", ColumnKind::numeric, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = 0;
    for (std::size_t k = 0; k < scm.exogenous.size(); ++k)
      if (unit(rng) < scm.exogenous[k].p) u |= std::uint64_t{1} << k;
    const int xv = scm.eval_x(u);
    const int zv = scm.eval_z(u);
    const int wv = scm.eval_w(xv, zv, u);
    x.labels.push_back(xv ? "1" : "0");
    z.numbers.push_back(zv);
    w.numbers.push_back(wv);
    y.numbers.push_back(scm.eval_y(xv, zv, wv, u));
  }
  SfmSpec spec{"X", "0", "1", {"Z"}, {"W"}, "Y", TaskKind::regression};
  return Dataset({std::move(x), std::move(z), std::move(w), std::move(y)}, spec,
                 Provenance{Provenance::Kind::synthetic, "", seed});
}

}  // namespace fairpath
