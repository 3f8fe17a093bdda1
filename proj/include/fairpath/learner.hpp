#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairpath/dataset.hpp"
#include "fairpath/effects.hpp"
#include "fairpath/estimators.hpp"
#include "fairpath/mlp.hpp"

namespace fairpath {

/// Training loss. Cross-entropy is the surrogate for classification, whose
/// reported metric is 1 - AUROC.
enum class LossKind { mse, cross_entropy };

const char* loss_name(LossKind loss);
LossKind parse_loss(const std::string& name);  // "mse" | "bce"
LossKind default_loss(TaskKind task);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 500;
  int batch_size = 512;
  int patience = 20;
  int restarts = 5;
  double validation_fraction = 0.2;  // carved from the training fold for early stopping
  std::vector<int> hidden = {16, 16};

  void validate() const;
};

struct LambdaSearch {
  double lambda_low = 0.0;
  double lambda_high = 1024.0;
  double epsilon = 1.0;
  double alpha_level = 0.05;

  void validate() const;
  /// Bisection steps until the bracket is no wider than epsilon.
  int iterations() const;
};

/// One penalized functional. `effect` is the index in the constraint universe
/// that switches its target to zero; -1 keeps it at the outcome's value for
/// every constraint set.
struct ConstraintComponent {
  EffectFunctional functional;
  int effect = -1;
};

struct ConstraintFamily {
  int m = 0;
  std::vector<std::string> effect_names;
  std::vector<ConstraintComponent> components;

  bool uses_flipped() const;
};

/// NDE, NIE, NSE_x0 and NSE_x1 tied to the listed effects (in order);
/// canonical effects left out of the list keep their outcome targets.
ConstraintFamily canonical_constraints(const std::vector<EffectId>& effects);

/// m = 1 with the TV functional (demographic parity when removed).
ConstraintFamily tv_constraint();

/// Per-component target and its standard error.
struct ConstraintTargets {
  std::vector<double> values;
  std::vector<double> se;
};

/// target_k = outcome_k * 1(effect_k not in s); the SE is zeroed alongside.
ConstraintTargets make_targets(const ConstraintFamily& family,
                               const std::vector<Estimate>& outcome_values, const EffectSet& s);

/// Outcome functionals: observed Y on factual arms, the outcome model on
/// flipped arms.
std::vector<Estimate> outcome_functionals(const ConstraintFamily& family,
                                          const FunctionalRows& rows, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& outcome_flipped);

/// A batch prepared for the objective; weights are normalized within the batch.
struct ObjectiveBatch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd flipped;  // empty when the family never uses flipped arms
  Eigen::VectorXd y;
  FunctionalRows rows;
};

/// `raw_weights` are unnormalized 1/P(x|z) for the columns of `inputs`.
ObjectiveBatch make_batch(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& raw_weights, bool with_flipped);

struct LagrangianValue {
  double objective = 0.0;
  double base = 0.0;
  double penalty = 0.0;
  std::vector<double> deviations;  // functional minus target, per component
  bool penalty_skipped = false;    // a stratum was missing
  Eigen::VectorXd gradient;
};

/// base loss + lambda * sum_k (F_k(f) - target_k)^2 on one batch.
LagrangianValue lagrangian_loss(const MlpPredictor& f, const ObjectiveBatch& batch, double lambda,
                                const ConstraintFamily& family, const ConstraintTargets& targets,
                                LossKind loss, bool with_gradient = true);

/// Unnormalized inverse-propensity weights 1 / P(x_i | z_i).
Eigen::VectorXd raw_ipw_weights(const PropensityModel& prop, const EncodedView& view);

struct TrainResult {
  MlpPredictor model;
  double validation_objective = 0.0;
  int best_restart = -1;
  int failed_restarts = 0;
  int epochs = 0;  // epochs run by the selected restart
  std::vector<std::string> warnings;
};

/// Best of cfg.restarts early-stopped Adam runs on the Lagrangian objective.
TrainResult train_at_lambda(const EncodedView& train, double lambda,
                            const ConstraintFamily& family, const ConstraintTargets& targets,
                            const PropensityModel& prop, LossKind loss, const TrainConfig& cfg,
                            std::uint64_t seed);

/// Unconstrained network for E[Y | x, z, w].
TrainResult fit_outcome_model(const EncodedView& train, LossKind loss, const TrainConfig& cfg,
                              std::uint64_t seed);

struct ConstraintTest {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double target = 0.0;
  double target_se = 0.0;
  double z = 0.0;
  bool reject = false;
  bool zero_se = false;  // rejected because the deviation had no uncertainty
};

struct ConstraintReport {
  std::vector<ConstraintTest> tests;
  bool any_reject() const;
};

/// Two-sided z-test of estimate == target per component at level alpha.
ConstraintReport constraint_tests(const ConstraintFamily& family,
                                  const std::vector<Estimate>& predictor_values,
                                  const ConstraintTargets& targets, double alpha_level);

/// Predictor functionals on a view.
std::vector<Estimate> predictor_functionals(const ConstraintFamily& family,
                                            const PredictionFunction& f,
                                            const EncodedView& view, const FunctionalRows& rows);

/// Everything CFCL needs that does not depend on the constraint set: folds,
/// propensity and outcome models, and the outcome's functionals on both folds.
struct CfclContext {
  EncodedView train;
  EncodedView eval;
  ConstraintFamily family;
  LossKind loss = LossKind::mse;
  TrainConfig cfg;
  PropensityModel prop;
  MlpPredictor outcome_model;
  FunctionalRows eval_rows;
  std::vector<Estimate> outcome_train;
  std::vector<Estimate> outcome_eval;
  std::vector<std::string> warnings;
};

CfclContext prepare_cfcl(EncodedView train, EncodedView eval, ConstraintFamily family,
                         LossKind loss, const TrainConfig& cfg, std::uint64_t seed);

struct LambdaStep {
  double lambda = 0.0;
  bool rejected = false;
  double validation_objective = 0.0;
  int epochs = 0;
};

struct FairPredictor {
  MlpPredictor model;
  EffectSet s;
  double lambda_final = 0.0;
  bool constraints_met = false;  // false: no iterate passed every test
  ConstraintReport report;       // tests of the returned model
  double eval_loss = 0.0;        // MSE, or 1 - AUROC for cross-entropy
  Estimate eval_tv;
  std::vector<LambdaStep> trajectory;
  std::vector<std::string> warnings;
};

/// Bisection over lambda with out-of-sample tests; the returned predictor is
/// the last iterate whose tests all accepted.
FairPredictor cfcl_generalized(const CfclContext& ctx, const EffectSet& s,
                               const LambdaSearch& search, std::uint64_t seed);

/// Canonical D/I/S problem: builds the context and runs the search.
FairPredictor cfcl(const EncodedView& train, const EncodedView& eval, const EffectSet& s,
                   LossKind loss, const TrainConfig& cfg, const LambdaSearch& search,
                   std::uint64_t seed);

/// Eval-fold loss of predictions: MSE, or 1 - AUROC for cross-entropy.
double evaluation_loss(LossKind loss, const Eigen::VectorXd& predictions, const Eigen::VectorXd& y);

/// Area under the ROC curve with tied scores counted as one half.
double auroc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  int skipped_kinks = 0;  // coordinates whose perturbation crossed a ReLU kink
};

/// Central differences (step 1e-4) on at least `coordinates` random
/// parameters; relative error |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const MlpPredictor& f, const ObjectiveBatch& batch,
                                   double lambda, const ConstraintFamily& family,
                                   const ConstraintTargets& targets, LossKind loss,
                                   int coordinates = 64, std::uint64_t seed = 0);

}  // namespace fairpath
