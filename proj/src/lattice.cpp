#include "fairpath/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fairpath {

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void check_nodes(const PselLattice& lattice, std::size_t size, const char* what) {
  if (size != lattice.nodes.size())
    throw std::invalid_argument(std::string(what) + ": expected one value per lattice node");
}

}  // namespace

PselLattice build_lattice(int m) {
  if (m < 1 || m > 6) throw std::invalid_argument("build_lattice: m must lie in [1, 6]");
  PselLattice lattice;
  lattice.m = m;
  for (std::uint32_t s = 0; s < (1u << m); ++s) {
    lattice.nodes.push_back(s);
    for (int i = 0; i < m; ++i)
      if (!((s >> i) & 1u)) lattice.edges.push_back({s, s | (1u << i), i});
  }
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  do lattice.paths.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  return lattice;
}

double edge_psel(const LossValue& loss_after, const LossValue& loss_before) {
  if (loss_after.kind != loss_before.kind)
    throw std::invalid_argument("edge_psel: losses of different kinds");
  return loss_after.value - loss_before.value;
}

std::vector<EdgeMetrics> edge_metrics(const PselLattice& lattice, const std::vector<double>& losses,
                                      const std::vector<double>& tvs) {
  check_nodes(lattice, losses.size(), "edge_metrics");
  check_nodes(lattice, tvs.size(), "edge_metrics");
  std::vector<EdgeMetrics> out;
  for (const auto& e : lattice.edges) {
    EdgeMetrics m;
    m.from = e.from;
    m.to = e.to;
    m.effect = e.effect;
    m.psel = losses[e.to] - losses[e.from];
    m.tvd = tvs[e.to] - tvs[e.from];
    out.push_back(m);
  }
  return out;
}

double tel(const PselLattice& lattice, const std::vector<double>& losses) {
  check_nodes(lattice, losses.size(), "tel");
  return losses[lattice.full()] - losses[0];
}

namespace {

// index[from * m + effect] -> position in `edges`
std::vector<std::size_t> edge_lookup(const PselLattice& lattice,
                                     const std::vector<EdgeMetrics>& edges) {
  constexpr auto missing = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(lattice.nodes.size() * static_cast<std::size_t>(lattice.m), missing);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (e.effect < 0 || e.effect >= lattice.m || e.from >= lattice.nodes.size() ||
        ((e.from >> e.effect) & 1u) || e.to != (e.from | (1u << e.effect)))
      throw std::invalid_argument("edge metrics do not belong to the lattice");
    index[e.from * static_cast<std::size_t>(lattice.m) + static_cast<std::size_t>(e.effect)] = k;
  }
  for (const auto& e : lattice.edges)
    if (index[e.from * static_cast<std::size_t>(lattice.m) + static_cast<std::size_t>(e.effect)] == missing)
      throw std::invalid_argument("edge metrics: missing lattice edge");
  return index;
}

}  // namespace

PathAverages apsel_atvd(const PselLattice& lattice, const std::vector<EdgeMetrics>& edges) {
  const auto index = edge_lookup(lattice, edges);
  const auto m = static_cast<std::size_t>(lattice.m);
  PathAverages out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  for (const auto& path : lattice.paths) {
    std::uint32_t prefix = 0;
    for (int effect : path) {
      const auto& e = edges[index[prefix * m + static_cast<std::size_t>(effect)]];
      out.apsel[static_cast<std::size_t>(effect)] += e.psel;
      out.atvd[static_cast<std::size_t>(effect)] += e.tvd;
      prefix |= 1u << effect;
    }
  }
  const double count = static_cast<double>(lattice.paths.size());
  for (std::size_t i = 0; i < m; ++i) {
    out.apsel[i] /= count;
    out.atvd[i] /= count;
  }
  return out;
}

std::vector<double> shapley(const std::vector<double>& value, int m) {
  if (m < 1 || m > 30) throw std::invalid_argument("shapley: m out of range");
  if (value.size() != (std::size_t{1} << m))
    throw std::invalid_argument("shapley: value function must cover all 2^m subsets");
  const double total = factorial(m);
  std::vector<double> phi(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    for (std::uint32_t s = 0; s < value.size(); ++s) {
      if ((s >> i) & 1u) continue;
      const int k = std::popcount(s);
      const double coef = factorial(k) * factorial(m - k - 1) / total;
      phi[static_cast<std::size_t>(i)] += coef * (value[s | (1u << i)] - value[s]);
    }
  }
  return phi;
}

double cfur(double apsel, double atvd) { return apsel == 0.0 ? 0.0 : atvd / apsel; }

LcfurTable lcfur(const PselLattice& lattice, const std::vector<EdgeMetrics>& edges, int effect) {
  if (effect < 0 || effect >= lattice.m) throw std::invalid_argument("lcfur: effect out of range");
  const auto index = edge_lookup(lattice, edges);
  const auto m = static_cast<std::size_t>(lattice.m);
  LcfurTable table;
  table.effect = effect;
  double mass = 0.0, tvd_mass = 0.0;
  for (std::uint32_t s : lattice.nodes) {
    if ((s >> effect) & 1u) continue;
    const auto& e = edges[index[s * m + static_cast<std::size_t>(effect)]];
    LcfurRow row;
    row.prefix = s;
    row.psel = e.psel;
    row.tvd = e.tvd;
    const int k = std::popcount(s);
    row.multiplicity = factorial(k) * factorial(lattice.m - k - 1);
    row.flagged = std::abs(e.psel) < kNearZeroPsel;
    row.ratio = row.flagged ? std::numeric_limits<double>::quiet_NaN() : e.tvd / e.psel;
    mass += row.multiplicity * e.psel;
    tvd_mass += row.multiplicity * e.tvd;
    table.rows.push_back(row);
  }
  if (mass == 0.0) {
    table.weights_defined = false;
    table.weighted_average = 0.0;
    for (auto& row : table.rows) {
      row.flagged = true;
      row.weight = std::numeric_limits<double>::quiet_NaN();
    }
    return table;
  }
  for (auto& row : table.rows) row.weight = row.multiplicity * row.psel / mass;
  // Equals sum(weight * ratio) over the rows; written in the form that stays
  // defined when a single row's PSEL vanishes.
  table.weighted_average = tvd_mass / mass;
  return table;
}

std::vector<ParetoPoint> pareto_points(const PselLattice& lattice,
                                       const std::vector<double>& losses,
                                       const std::vector<Estimate>& tvs) {
  check_nodes(lattice, losses.size(), "pareto_points");
  check_nodes(lattice, tvs.size(), "pareto_points");
  std::vector<ParetoPoint> out;
  for (std::uint32_t s : lattice.nodes) {
    ParetoPoint p;
    p.mask = s;
    p.excess_loss = s == 0 ? 0.0 : losses[s] - losses[0];
    p.tv = tvs[s].value;
    p.tv_se = tvs[s].se;
    p.residual_tv = s == lattice.full() && std::abs(p.tv) > 2.0 * p.tv_se;
    out.push_back(p);
  }
  return out;
}

AttributionReport attribute(const PselLattice& lattice, const std::vector<double>& losses,
                            const std::vector<Estimate>& tvs) {
  check_nodes(lattice, tvs.size(), "attribute");
  std::vector<double> tv_values;
  for (const auto& t : tvs) tv_values.push_back(t.value);

  AttributionReport r;
  r.m = lattice.m;
  r.node_loss = losses;
  r.node_tv = tvs;
  r.edges = edge_metrics(lattice, losses, tv_values);
  r.tel = tel(lattice, losses);
  r.total_tvd = tv_values[lattice.full()] - tv_values[0];
  const auto avg = apsel_atvd(lattice, r.edges);
  r.apsel = avg.apsel;
  r.atvd = avg.atvd;
  for (int i = 0; i < lattice.m; ++i) {
    r.cfur.push_back(cfur(r.apsel[static_cast<std::size_t>(i)], r.atvd[static_cast<std::size_t>(i)]));
    r.lcfur.push_back(lcfur(lattice, r.edges, i));
  }
  std::vector<double> f1(losses.size()), f2(losses.size());
  for (std::size_t s = 0; s < losses.size(); ++s) {
    f1[s] = losses[s] - losses[0];
    f2[s] = tv_values[s] - tv_values[0];
  }
  r.shapley_psel = shapley(f1, lattice.m);
  r.shapley_tvd = shapley(f2, lattice.m);
  r.pareto = pareto_points(lattice, losses, tvs);
  return r;
}

}  // namespace fairpath
