#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fairpath/dataset.hpp"
#include "fairpath/effects.hpp"
#include "fairpath/lattice.hpp"
#include "fairpath/learner.hpp"
#include "fairpath/synth.hpp"

namespace fairpath {

inline constexpr const char* kReportSchema = "fairpath.report/1";

struct CsvSource {
  std::filesystem::path data;
  std::filesystem::path sfm;
};

struct LinearSource {
  LinearScmParams params;
  std::size_t n = 20000;
  std::uint64_t seed = 0;
};

struct InMemorySource {
  std::shared_ptr<const Dataset> data;
  std::string description = "in-memory";
};

using DataSource = std::variant<CsvSource, LinearSource, InMemorySource>;

struct RunConfig {
  DataSource source;
  std::optional<LossKind> loss;  // defaults from the task
  std::vector<EffectId> effects = {EffectId::direct, EffectId::indirect, EffectId::spurious};
  int bootstrap = 10;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  TrainConfig train;
  LambdaSearch search;
  int threads = 1;  // scheduling only; results do not depend on it

  void validate() const;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample SD over replicates; NaN with one replicate
};

Summary summarize(const std::vector<double>& values);

struct NodeResult {
  std::uint32_t mask = 0;
  double lambda_final = 0.0;
  bool constraints_met = false;
  double eval_loss = 0.0;
  Estimate eval_tv;
  std::vector<LambdaStep> trajectory;
  std::vector<ConstraintTest> tests;
};

struct ReplicateResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  EffectEstimates outcome_effects;  // eval fold
  double decomposition_residual = 0.0;
  std::vector<double> tvr;  // per listed effect
  std::vector<NodeResult> nodes;
  AttributionReport attribution;
  std::vector<std::string> warnings;
};

struct TvdTvrRow {
  int effect = 0;
  Summary atvd;
  Summary tvr;
  double difference = 0.0;   // |atvd mean - tvr mean|
  double standardized = 0.0;  // difference / sqrt(sd_atvd^2 + sd_tvr^2)
};

struct Report {
  std::string schema = kReportSchema;
  RunConfig config;
  LossKind loss = LossKind::mse;
  std::vector<std::string> effect_names;
  std::string source_description;
  std::size_t rows = 0;
  std::size_t dropped_rows = 0;
  std::vector<ReplicateResult> replicates;

  // Aggregates over replicates.
  std::vector<Summary> node_loss, node_tv, node_excess_loss;
  std::vector<int> residual_tv_count;  // per node: replicates flagging |tv| > 2 SE
  std::vector<Summary> edge_psel, edge_tvd;
  Summary tel, total_tvd;
  std::vector<Summary> apsel, atvd, cfur, shapley_psel, shapley_tvd, tvr, lcfur_average;
  std::vector<double> cfur_of_means;  // cfur(mean apsel, mean atvd)
  std::vector<TvdTvrRow> tvd_vs_tvr;

  std::vector<std::string> warnings;
  bool partial = false;
  std::vector<std::string> errors;
};

/// Thrown when a replicate fails entirely; carries the partial report.
class AnalysisError : public std::runtime_error {
 public:
  AnalysisError(const std::string& what, Report partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Report& partial() const { return partial_; }

 private:
  Report partial_;
};

/// Resample -> split -> encode -> CFCL on every constraint set -> lattice
/// attributions, per bootstrap replicate; then aggregates.
Report run_analysis(const RunConfig& cfg);

std::vector<TvdTvrRow> compare_tvd_tvr(const Report& report);

/// report.json, edges.csv, attributions.csv, pareto.csv, tvd_vs_tvr.csv,
/// lattice.json.
void emit_report(const Report& report, const std::filesystem::path& dir);
std::string report_json(const Report& report);

/// Runs body(0..count-1) on up to `threads` workers. Exceptions are rethrown
/// (the first by task index) after every task has finished.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace fairpath
