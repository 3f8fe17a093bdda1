#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpath/effects.hpp"
#include "fairpath/learner.hpp"

namespace fairpath {

/// Subset lattice over m effects. Nodes are bit masks 0 .. 2^m - 1; an edge
/// adds one effect; a path is an ordering of all m effects.
struct PselLattice {
  struct Edge {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    int effect = 0;
  };

  int m = 0;
  std::vector<std::uint32_t> nodes;
  std::vector<Edge> edges;              // sorted by (from, effect)
  std::vector<std::vector<int>> paths;  // lexicographic permutations

  std::uint32_t full() const { return (1u << m) - 1u; }
};

PselLattice build_lattice(int m);  // 1 <= m <= 6

struct LossValue {
  double value = 0.0;
  LossKind kind = LossKind::mse;
};

/// loss_after - loss_before.
double edge_psel(const LossValue& loss_after, const LossValue& loss_before);

struct EdgeMetrics {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  int effect = 0;
  double psel = 0.0;
  double tvd = 0.0;
  double psel_sd = 0.0;  // across bootstrap replicates, filled by aggregation
  double tvd_sd = 0.0;
};

/// Per-edge differences of node losses and TVs (both indexed by mask).
std::vector<EdgeMetrics> edge_metrics(const PselLattice& lattice, const std::vector<double>& losses,
                                      const std::vector<double>& tvs);

/// loss(full) - loss(empty).
double tel(const PselLattice& lattice, const std::vector<double>& losses);

struct PathAverages {
  std::vector<double> apsel;
  std::vector<double> atvd;
};

/// Averages over all m! paths of the edge that adds each effect.
PathAverages apsel_atvd(const PselLattice& lattice, const std::vector<EdgeMetrics>& edges);

/// Shapley values of a set function given on all 2^m masks.
std::vector<double> shapley(const std::vector<double>& value, int m);

/// atvd / apsel, and 0 whenever apsel is exactly 0.
double cfur(double apsel, double atvd);

struct LcfurRow {
  std::uint32_t prefix = 0;  // S, the set the effect is added to
  double psel = 0.0;
  double tvd = 0.0;
  double ratio = 0.0;         // NaN when flagged
  double multiplicity = 0.0;  // number of paths through this edge
  double weight = 0.0;        // multiplicity * psel / sum(multiplicity * psel)
  bool flagged = false;       // |psel| < 1e-9, or the weights are undefined
};

struct LcfurTable {
  int effect = 0;
  std::vector<LcfurRow> rows;
  double weighted_average = 0.0;
  bool weights_defined = true;
};

inline constexpr double kNearZeroPsel = 1e-9;

/// Local ratios TVD/PSEL on every edge adding `effect`, with path-count
/// weights so that the weighted average reproduces CFUR.
LcfurTable lcfur(const PselLattice& lattice, const std::vector<EdgeMetrics>& edges, int effect);

struct ParetoPoint {
  std::uint32_t mask = 0;
  double excess_loss = 0.0;
  double tv = 0.0;
  double tv_se = 0.0;
  bool residual_tv = false;  // full set only: |tv| > 2 SE
};

std::vector<ParetoPoint> pareto_points(const PselLattice& lattice,
                                       const std::vector<double>& losses,
                                       const std::vector<Estimate>& tvs);

/// All attribution outputs of one replicate.
struct AttributionReport {
  int m = 0;
  std::vector<double> node_loss;
  std::vector<Estimate> node_tv;
  std::vector<EdgeMetrics> edges;
  double tel = 0.0;
  double total_tvd = 0.0;
  std::vector<double> apsel, atvd, cfur, shapley_psel, shapley_tvd;
  std::vector<LcfurTable> lcfur;
  std::vector<ParetoPoint> pareto;
};

AttributionReport attribute(const PselLattice& lattice, const std::vector<double>& losses,
                            const std::vector<Estimate>& tvs);

}  // namespace fairpath
