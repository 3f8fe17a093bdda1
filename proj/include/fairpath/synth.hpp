#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpath/dataset.hpp"
#include "fairpath/effects.hpp"

namespace fairpath {

/// X ~ Bernoulli(0.5), W = beta X + eps_w, Y = alpha X + gamma W + eps_y.
struct LinearScmParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double sigma_w = 1.0;
  double sigma_y = 1.0;

  void validate() const;
};

/// Columns X (labels "0"/"1"), W, Y; Z empty; regression task.
Dataset sample_linear(const LinearScmParams& params, std::size_t n, std::uint64_t seed);

/// Which closed form oracle_mse reports.
///   printed_closed_form  the published expressions, reproduced verbatim
///   stated_predictors    exact MSE of the no-intercept predictors 0, aX, gW, aX+gW
///   constrained_optimum  minimum MSE over all measurable f(x, w) (with intercept)
///                        subject to the S-fairness equality constraints
enum class MseConvention { printed_closed_form, stated_predictors, constrained_optimum };

/// `s` is a subset of {D, I} (m = 2 universe, or m = 3 without S).
double oracle_mse(const LinearScmParams& params, const EffectSet& s,
                  MseConvention convention = MseConvention::printed_closed_form);
double oracle_tv(const LinearScmParams& params, const EffectSet& s);

enum class CfurConvention {
  path_averaged,  // ATVD/APSEL over both orderings
  single_path,    // ratio on the edge out of the empty set
  printed,        // the published per-effect expressions
};

/// CFUR of D or I for the linear system, with losses from `mse`.
double oracle_cfur(const LinearScmParams& params, EffectId effect, CfurConvention convention,
                   MseConvention mse = MseConvention::printed_closed_form);

// ---------------------------------------------------------------------------
// Binary SCMs over the standard fairness model with one confounder bit Z and
// one mediator bit W. X and Z share an exogenous bit (the bidirected edge).

struct ExogenousBit {
  std::string name;
  double p = 0.5;  // P(U = 1)
};

/// Lookup table over parent values and exogenous bits. The table index packs
/// bits least-significant first: the endogenous parents in their fixed order,
/// then the listed exogenous bits.
struct Mechanism {
  std::vector<std::size_t> exogenous;
  std::vector<std::uint8_t> table;
};

struct DiscreteScm {
  std::vector<ExogenousBit> exogenous;
  Mechanism x;  // parents: none
  Mechanism z;  // parents: none
  Mechanism w;  // parents: x, z
  Mechanism y;  // parents: x, z, w

  void validate() const;

  int eval_x(std::uint64_t u) const;
  int eval_z(std::uint64_t u) const;
  int eval_w(int x, int z, std::uint64_t u) const;
  int eval_y(int x, int z, int w, std::uint64_t u) const;
};

/// f(x, z, w) stored at index x*4 + z*2 + w.
using PredictionTable = std::array<double, 8>;

inline std::size_t table_index(int x, int z, int w) {
  return static_cast<std::size_t>(x * 4 + z * 2 + w);
}

inline constexpr std::size_t kMaxEnumeratedBits = 20;

/// Exact effects by summing over every exogenous configuration. With a table,
/// the effects are those of the predictor f evaluated on the SCM's potential
/// responses; otherwise of Y itself. Standard errors are zero.
EffectEstimates enumerate_effects(const DiscreteScm& scm,
                                  const std::optional<PredictionTable>& predictor = std::nullopt);

/// E[Y | x, z, w] by enumeration. Cells with zero probability read 0.
PredictionTable outcome_regression_table(const DiscreteScm& scm);

/// P(X = x, Z = z, W = w) by enumeration, same indexing.
PredictionTable joint_probability_table(const DiscreteScm& scm);

/// Random SCM with bits {u_xz, u_x, u_z, u_w, u_y1, u_y2}, rejection-sampled
/// until 0.05 < P(x1 | z) < 0.95 and every (x, z, w) cell has probability of
/// at least 0.01.
DiscreteScm random_discrete_scm(std::uint64_t seed);

/// n draws; columns X ("0"/"1"), Z, W, Y numeric 0/1; regression task.
Dataset sample_discrete(const DiscreteScm& scm, std::size_t n, std::uint64_t seed);

}  // namespace fairpath
