#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairpath/dataset.hpp"
#include "fairpath/effects.hpp"

namespace fairpath {

/// Evaluates a predictor on a design matrix laid out like EncodedView::inputs
/// (one column per row) and returns one prediction per column.
using PredictionFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Logistic model of P(X = x1 | Z), clipped to [clip_low, clip_high].
struct PropensityModel {
  Eigen::VectorXd coef;  // one per encoded Z column
  double intercept = 0.0;
  double clip_low = 0.01;
  double clip_high = 0.99;
  bool constant = false;  // base-rate model (no Z, or separation fallback)
  Eigen::MatrixXd covariance;  // of (intercept, coef) on the training fold; empty when constant
  std::vector<std::string> warnings;

  /// Clipped P(X = x1 | z) for each column of `z`.
  Eigen::VectorXd predict(const Eigen::MatrixXd& z) const;
  double clip(double p) const;
};

/// Fits by Newton-Raphson on the penalized log-likelihood (ridge 1e-6 on the
/// slopes). `train` must be the training fold only.
PropensityModel fit_propensity(const EncodedView& train, double clip_low = 0.01,
                               double clip_high = 0.99);

/// 1 / P(x_i | z_i), rescaled to mean exactly 1 within each attribute stratum.
Eigen::VectorXd ipw_weights(const PropensityModel& prop, const EncodedView& view);

/// An effect functional is a signed sum of stratum means of f. Each term
/// averages f over the rows of one attribute stratum, either on the observed
/// inputs (factual) or with x replaced by 1 - x (flipped), and either plainly
/// or with the stratum's IPW weights.
enum class Arm { factual, flipped };

struct FunctionalTerm {
  int stratum = 0;
  Arm arm = Arm::factual;
  bool weighted = false;
  double sign = 1.0;
};

struct EffectFunctional {
  std::string name;
  std::vector<FunctionalTerm> terms;

  bool uses_flipped() const;
};

namespace functionals {
EffectFunctional nde();     // E[f_{x1,W_x0}] - E[f_x0]
EffectFunctional nie();     // E[f_{x1,W_x0}] - E[f_x1]
EffectFunctional nse_x0();  // E[f | x0] - E[f_x0]
EffectFunctional nse_x1();  // E[f | x1] - E[f_x1]
EffectFunctional tv();      // E[f | x1] - E[f | x0]
}  // namespace functionals

/// Inputs shared by every functional on one set of rows. When the propensity
/// model was fitted, `weight_score` holds d log w_i / d(intercept, coef) per
/// column and `propensity_cov` the fit's covariance, so that standard errors
/// carry the propensity's estimation noise by the delta method.
struct FunctionalRows {
  Eigen::VectorXd x;        // 0/1 codes
  Eigen::VectorXd weights;  // stratum-normalized IPW weights
  Eigen::MatrixXd weight_score;
  Eigen::MatrixXd propensity_cov;
};

FunctionalRows functional_rows(const EncodedView& view, const PropensityModel& prop);

/// Point estimate and influence-function standard error. The propensity model
/// comes from the other fold, so its delta-method variance adds on top.
Estimate evaluate_functional(const EffectFunctional& functional, const FunctionalRows& rows,
                             const Eigen::VectorXd& factual, const Eigen::VectorXd& flipped);

/// Value and its partial derivatives with respect to each factual and each
/// flipped prediction.
struct FunctionalGradient {
  double value = 0.0;
  Eigen::VectorXd d_factual;
  Eigen::VectorXd d_flipped;
};

FunctionalGradient functional_gradient(const EffectFunctional& functional,
                                       const FunctionalRows& rows, const Eigen::VectorXd& factual,
                                       const Eigen::VectorXd& flipped);

/// E[Y | x, z, w] (regression) or P(Y = 1 | x, z, w) (classification).
struct OutcomeModel {
  PredictionFunction predict;
};

/// All five effects from precomputed factual / flipped values.
EffectEstimates estimate_effects(const FunctionalRows& rows, const Eigen::VectorXd& factual,
                                 const Eigen::VectorXd& flipped);

EffectEstimates estimate_effects_of_predictor(const PredictionFunction& f,
                                              const EncodedView& view,
                                              const PropensityModel& prop);

/// Factual terms use the observed Y; counterfactual terms use the outcome
/// model at the flipped attribute.
EffectEstimates estimate_effects_of_outcome(const EncodedView& view, const PropensityModel& prop,
                                            const OutcomeModel& outm);

Estimate tv_measure(const Eigen::VectorXd& predictions, const Eigen::VectorXd& x);
Estimate tv_measure(const PredictionFunction& f, const EncodedView& view);

/// tv(after) - tv(before) on the same rows.
double tvd(const PredictionFunction& f_after, const PredictionFunction& f_before,
           const EncodedView& view);

/// Reduction in TV predicted by removing one effect of the outcome:
/// -NDE for D, +NIE for I, NSE_x0 - NSE_x1 for S.
double tvr(const EffectEstimates& effects_of_y, EffectId effect);
double tvr(const EffectEstimates& effects_of_y, int effect_index);
/// Standard error of tvr, with the S components combined in quadrature.
double tvr_se(const EffectEstimates& effects_of_y, EffectId effect);

/// tv - (nde - nie + nse_x1 - nse_x0).
double tv_decomposition_residual(const EffectEstimates& e);

}  // namespace fairpath
