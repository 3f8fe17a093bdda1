#include "fairpath/analysis.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "fairpath/random.hpp"
#include "json.hpp"

namespace fairpath {

using nlohmann::ordered_json;

void RunConfig::validate() const {
  if (bootstrap < 1) throw std::invalid_argument("bootstrap reps must be at least 1");
  if (effects.empty()) throw std::invalid_argument("effect list is empty");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  train.validate();
  search.validate();
  (void)canonical_constraints(effects);  // rejects duplicates
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                              std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(count);
  const auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) guarded(i);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

struct LoadedData {
  Dataset data;
  std::string description;
};

LoadedData load_source(const DataSource& source) {
  if (const auto* csv = std::get_if<CsvSource>(&source)) {
    const auto spec = load_sfm_spec(csv->sfm);
    return {load_csv(csv->data, spec), "csv:" + csv->data.filename().string()};
  }
  if (const auto* lin = std::get_if<LinearSource>(&source))
    return {sample_linear(lin->params, lin->n, lin->seed), "synthetic-linear"};
  const auto& mem = std::get<InMemorySource>(source);
  if (!mem.data) throw std::invalid_argument("in-memory source holds no dataset");
  return {*mem.data, mem.description};
}

std::string error_text(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

std::vector<std::string> effect_names(const std::vector<EffectId>& effects) {
  std::vector<std::string> names;
  for (auto e : effects) names.push_back(effect_short_name(e));
  return names;
}

void aggregate(Report& report, const PselLattice& lattice) {
  const auto& reps = report.replicates;
  if (reps.empty()) return;
  const auto over = [&](const auto& getter) {
    std::vector<double> v;
    for (const auto& r : reps) v.push_back(getter(r));
    return summarize(v);
  };
  const auto m = static_cast<std::size_t>(lattice.m);
  for (std::uint32_t s : lattice.nodes) {
    report.node_loss.push_back(over([&](const ReplicateResult& r) { return r.attribution.node_loss[s]; }));
    report.node_tv.push_back(over([&](const ReplicateResult& r) { return r.attribution.node_tv[s].value; }));
    report.node_excess_loss.push_back(
        over([&](const ReplicateResult& r) { return r.attribution.pareto[s].excess_loss; }));
    int flagged = 0;
    for (const auto& r : reps) flagged += r.attribution.pareto[s].residual_tv ? 1 : 0;
    report.residual_tv_count.push_back(flagged);
  }
  for (std::size_t k = 0; k < lattice.edges.size(); ++k) {
    report.edge_psel.push_back(over([&](const ReplicateResult& r) { return r.attribution.edges[k].psel; }));
    report.edge_tvd.push_back(over([&](const ReplicateResult& r) { return r.attribution.edges[k].tvd; }));
  }
  report.tel = over([](const ReplicateResult& r) { return r.attribution.tel; });
  report.total_tvd = over([](const ReplicateResult& r) { return r.attribution.total_tvd; });
  for (std::size_t i = 0; i < m; ++i) {
    report.apsel.push_back(over([&](const ReplicateResult& r) { return r.attribution.apsel[i]; }));
    report.atvd.push_back(over([&](const ReplicateResult& r) { return r.attribution.atvd[i]; }));
    report.cfur.push_back(over([&](const ReplicateResult& r) { return r.attribution.cfur[i]; }));
    report.shapley_psel.push_back(
        over([&](const ReplicateResult& r) { return r.attribution.shapley_psel[i]; }));
    report.shapley_tvd.push_back(
        over([&](const ReplicateResult& r) { return r.attribution.shapley_tvd[i]; }));
    report.tvr.push_back(over([&](const ReplicateResult& r) { return r.tvr[i]; }));
    report.lcfur_average.push_back(
        over([&](const ReplicateResult& r) { return r.attribution.lcfur[i].weighted_average; }));
    report.cfur_of_means.push_back(fairpath::cfur(report.apsel.back().mean, report.atvd.back().mean));
  }
  report.tvd_vs_tvr = compare_tvd_tvr(report);
}

}  // namespace

std::vector<TvdTvrRow> compare_tvd_tvr(const Report& report) {
  std::vector<TvdTvrRow> rows;
  for (std::size_t i = 0; i < report.atvd.size() && i < report.tvr.size(); ++i) {
    TvdTvrRow row;
    row.effect = static_cast<int>(i);
    row.atvd = report.atvd[i];
    row.tvr = report.tvr[i];
    row.difference = std::abs(row.atvd.mean - row.tvr.mean);
    const double combined = std::hypot(row.atvd.sd, row.tvr.sd);
    row.standardized = combined > 0.0 ? row.difference / combined
                                      : (row.difference == 0.0 ? 0.0
                                                               : std::numeric_limits<double>::quiet_NaN());
    rows.push_back(row);
  }
  return rows;
}

Report run_analysis(const RunConfig& cfg) {
  cfg.validate();
  auto loaded = load_source(cfg.source);
  const Dataset& data = loaded.data;

  Report report;
  report.config = cfg;
  report.loss = cfg.loss.value_or(default_loss(data.spec().task));
  report.effect_names = effect_names(cfg.effects);
  report.source_description = loaded.description;
  report.rows = data.n();
  report.dropped_rows = data.dropped_rows();
  if (data.dropped_rows() > 0)
    report.warnings.push_back(std::to_string(data.dropped_rows()) +
                              " rows with missing values were dropped");

  const auto family = canonical_constraints(cfg.effects);
  const auto lattice = build_lattice(family.m);
  const auto reps = static_cast<std::size_t>(cfg.bootstrap);
  const auto n_nodes = lattice.nodes.size();

  // Phase 1: per replicate, resample, split, encode and fit the shared models.
  std::vector<std::optional<CfclContext>> contexts(reps);
  std::vector<ReplicateResult> results(reps);
  std::vector<std::string> rep_errors(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t r) {
    try {
      const auto seed = derive_seed(cfg.seed, r);
      auto& res = results[r];
      res.index = static_cast<int>(r);
      res.seed = seed;
      const Dataset sample = bootstrap_resample(data, derive_seed(seed, 1));
      const auto plan = split(sample, cfg.train_fraction, derive_seed(seed, 2));
      auto view = encode(sample, plan);
      res.warnings = view.warnings;
      res.n_train = plan.train.size();
      res.n_eval = plan.eval.size();
      auto ctx = prepare_cfcl(view.rows(plan.train), view.rows(plan.eval), family, report.loss,
                              cfg.train, derive_seed(seed, 3));
      res.warnings.insert(res.warnings.end(), ctx.warnings.begin(), ctx.warnings.end());
      res.outcome_effects = estimate_effects_of_outcome(
          ctx.eval, ctx.prop, OutcomeModel{ctx.outcome_model.as_function()});
      res.decomposition_residual = tv_decomposition_residual(res.outcome_effects);
      for (auto e : cfg.effects) res.tvr.push_back(tvr(res.outcome_effects, e));
      res.nodes.resize(n_nodes);
      contexts[r] = std::move(ctx);
    } catch (...) {
      rep_errors[r] = error_text(std::current_exception());
    }
  });

  // Phase 2: one CFCL run per (replicate, constraint set).
  std::vector<std::vector<std::string>> node_warnings(reps * n_nodes);
  std::vector<std::string> node_errors(reps * n_nodes);
  parallel_for(reps * n_nodes, cfg.threads, [&](std::size_t task) {
    const std::size_t r = task / n_nodes;
    const auto mask = static_cast<std::uint32_t>(task % n_nodes);
    if (!contexts[r]) return;
    try {
      const auto fp = cfcl_generalized(*contexts[r], EffectSet(mask, family.m), cfg.search,
                                       derive_seed(results[r].seed, 100 + mask));
      NodeResult node;
      node.mask = mask;
      node.lambda_final = fp.lambda_final;
      node.constraints_met = fp.constraints_met;
      node.eval_loss = fp.eval_loss;
      node.eval_tv = fp.eval_tv;
      node.trajectory = fp.trajectory;
      node.tests = fp.report.tests;
      results[r].nodes[mask] = std::move(node);
      node_warnings[task] = fp.warnings;
    } catch (...) {
      node_errors[task] = error_text(std::current_exception());
    }
  });

  for (std::size_t r = 0; r < reps; ++r) {
    auto& res = results[r];
    std::string failure = rep_errors[r];
    for (std::size_t s = 0; s < n_nodes && failure.empty(); ++s)
      if (!node_errors[r * n_nodes + s].empty())
        failure = EffectSet(static_cast<std::uint32_t>(s), family.m).label(report.effect_names) +
                  ": " + node_errors[r * n_nodes + s];
    if (!failure.empty()) {
      report.errors.push_back("replicate " + std::to_string(r) + ": " + failure);
      continue;
    }
    std::vector<double> losses;
    std::vector<Estimate> tvs;
    for (const auto& node : res.nodes) {
      losses.push_back(node.eval_loss);
      tvs.push_back(node.eval_tv);
    }
    res.attribution = attribute(lattice, losses, tvs);
    for (std::size_t s = 0; s < n_nodes; ++s)
      for (const auto& w : node_warnings[r * n_nodes + s])
        res.warnings.push_back(EffectSet(static_cast<std::uint32_t>(s), family.m).label(report.effect_names) +
                               ": " + w);
    for (const auto& w : res.warnings)
      report.warnings.push_back("replicate " + std::to_string(r) + ": " + w);
    report.replicates.push_back(std::move(res));
  }

  aggregate(report, lattice);
  if (!report.errors.empty()) {
    report.partial = true;
    throw AnalysisError("analysis failed: " + report.errors.front(), report);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json summary_json(const Summary& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

ordered_json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

ordered_json config_json(const Report& report) {
  const auto& cfg = report.config;
  ordered_json source;
  if (const auto* csv = std::get_if<CsvSource>(&cfg.source)) {
    source = {{"kind", "csv"}, {"data", csv->data.filename().string()},
              {"sfm", csv->sfm.filename().string()}};
  } else if (const auto* lin = std::get_if<LinearSource>(&cfg.source)) {
    source = {{"kind", "synthetic-linear"},
              {"alpha", lin->params.alpha},
              {"beta", lin->params.beta},
              {"gamma", lin->params.gamma},
              {"sigma_w", lin->params.sigma_w},
              {"sigma_y", lin->params.sigma_y},
              {"n", lin->n},
              {"seed", lin->seed}};
  } else {
    source = {{"kind", "in-memory"}, {"description", report.source_description}};
  }
  return {{"source", source},
          {"loss", loss_name(report.loss)},
          {"effects", report.effect_names},
          {"bootstrap", cfg.bootstrap},
          {"seed", cfg.seed},
          {"train_fraction", cfg.train_fraction},
          {"train",
           {{"learning_rate", cfg.train.learning_rate},
            {"epochs", cfg.train.epochs},
            {"batch_size", cfg.train.batch_size},
            {"patience", cfg.train.patience},
            {"restarts", cfg.train.restarts},
            {"validation_fraction", cfg.train.validation_fraction},
            {"hidden", cfg.train.hidden}}},
          {"lambda_search",
           {{"lambda_low", cfg.search.lambda_low},
            {"lambda_high", cfg.search.lambda_high},
            {"epsilon", cfg.search.epsilon},
            {"alpha_level", cfg.search.alpha_level}}}};
}

ordered_json oracle_json(const Report& report) {
  const auto* lin = std::get_if<LinearSource>(&report.config.source);
  if (!lin) return nullptr;
  const std::vector<std::string> names = {"D", "I"};
  ordered_json out;
  const std::pair<const char*, MseConvention> conventions[] = {
      {"printed_closed_form", MseConvention::printed_closed_form},
      {"stated_predictors", MseConvention::stated_predictors},
      {"constrained_optimum", MseConvention::constrained_optimum}};
  ordered_json mse, tv;
  for (const auto& [name, conv] : conventions) {
    ordered_json block;
    for (std::uint32_t s = 0; s < 4; ++s)
      block[EffectSet(s, 2).label(names)] = oracle_mse(lin->params, EffectSet(s, 2), conv);
    mse[name] = block;
  }
  for (std::uint32_t s = 0; s < 4; ++s)
    tv[EffectSet(s, 2).label(names)] = oracle_tv(lin->params, EffectSet(s, 2));
  ordered_json cfur_block;
  for (auto e : {EffectId::direct, EffectId::indirect}) {
    cfur_block[effect_short_name(e)] = {
        {"path_averaged", oracle_cfur(lin->params, e, CfurConvention::path_averaged)},
        {"single_path", oracle_cfur(lin->params, e, CfurConvention::single_path)},
        {"printed", oracle_cfur(lin->params, e, CfurConvention::printed)},
        {"path_averaged_constrained_optimum",
         oracle_cfur(lin->params, e, CfurConvention::path_averaged,
                     MseConvention::constrained_optimum)}};
  }
  out["mse"] = mse;
  out["tv"] = tv;
  out["cfur"] = cfur_block;
  out["note"] =
      "CFUR here is ATVD/APSEL over all orderings. The printed CFUR(D) = -1/alpha agrees with "
      "neither the path-averaged ratio nor the single-edge ratio -2/alpha; the printed MSE of the "
      "fully fair predictor halves the cross term 2*alpha*gamma*beta of E[Y^2].";
  return out;
}

ordered_json attribution_json(const AttributionReport& a, const std::vector<std::string>& names) {
  ordered_json edges = ordered_json::array();
  for (const auto& e : a.edges)
    edges.push_back({{"from", e.from}, {"to", e.to}, {"effect", names[static_cast<std::size_t>(e.effect)]},
                     {"psel", e.psel}, {"tvd", e.tvd}});
  ordered_json lcfur = ordered_json::array();
  for (const auto& t : a.lcfur) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows)
      rows.push_back({{"prefix", r.prefix},
                      {"set", EffectSet(r.prefix, a.m).label(names)},
                      {"psel", r.psel},
                      {"tvd", r.tvd},
                      {"ratio", r.ratio},
                      {"multiplicity", r.multiplicity},
                      {"weight", r.weight},
                      {"flagged", r.flagged}});
    lcfur.push_back({{"effect", names[static_cast<std::size_t>(t.effect)]},
                     {"weighted_average", t.weighted_average},
                     {"weights_defined", t.weights_defined},
                     {"rows", rows}});
  }
  ordered_json pareto = ordered_json::array();
  for (const auto& p : a.pareto)
    pareto.push_back({{"mask", p.mask}, {"excess_loss", p.excess_loss}, {"tv", p.tv},
                      {"tv_se", p.tv_se}, {"residual_tv", p.residual_tv}});
  return {{"tel", a.tel},
          {"total_tvd", a.total_tvd},
          {"apsel", a.apsel},
          {"atvd", a.atvd},
          {"cfur", a.cfur},
          {"shapley_psel", a.shapley_psel},
          {"shapley_tvd", a.shapley_tvd},
          {"edges", edges},
          {"lcfur", lcfur},
          {"pareto", pareto}};
}

ordered_json effects_json(const EffectEstimates& e) {
  return {{"nde", estimate_json(e.nde)},
          {"nie", estimate_json(e.nie)},
          {"nse_x0", estimate_json(e.nse_x0)},
          {"nse_x1", estimate_json(e.nse_x1)},
          {"tv", estimate_json(e.tv)},
          {"n_effective", e.n_effective}};
}

ordered_json replicate_json(const ReplicateResult& r, const std::vector<std::string>& names, int m) {
  ordered_json nodes = ordered_json::array();
  for (const auto& n : r.nodes) {
    ordered_json traj = ordered_json::array();
    for (const auto& s : n.trajectory)
      traj.push_back({{"lambda", s.lambda}, {"rejected", s.rejected},
                      {"validation_objective", s.validation_objective}, {"epochs", s.epochs}});
    ordered_json tests = ordered_json::array();
    for (const auto& t : n.tests)
      tests.push_back({{"name", t.name}, {"estimate", t.estimate}, {"se", t.se},
                       {"target", t.target}, {"target_se", t.target_se}, {"z", t.z},
                       {"reject", t.reject}, {"zero_se", t.zero_se}});
    nodes.push_back({{"mask", n.mask},
                     {"set", EffectSet(n.mask, m).label(names)},
                     {"lambda_final", n.lambda_final},
                     {"constraints_met", n.constraints_met},
                     {"eval_loss", n.eval_loss},
                     {"tv", estimate_json(n.eval_tv)},
                     {"trajectory", traj},
                     {"tests", tests}});
  }
  return {{"index", r.index},
          {"seed", r.seed},
          {"n_train", r.n_train},
          {"n_eval", r.n_eval},
          {"outcome_effects", effects_json(r.outcome_effects)},
          {"decomposition_residual", r.decomposition_residual},
          {"tvr", r.tvr},
          {"nodes", nodes},
          {"attribution", attribution_json(r.attribution, names)},
          {"warnings", r.warnings}};
}

ordered_json aggregate_json(const Report& report, int m) {
  const auto& names = report.effect_names;
  ordered_json out;
  out["tel"] = summary_json(report.tel);
  out["total_tvd"] = summary_json(report.total_tvd);
  ordered_json attributions = ordered_json::array();
  for (std::size_t i = 0; i < report.apsel.size(); ++i)
    attributions.push_back({{"effect", names[i]},
                            {"apsel", summary_json(report.apsel[i])},
                            {"atvd", summary_json(report.atvd[i])},
                            {"cfur", report.cfur_of_means[i]},
                            {"cfur_replicates", summary_json(report.cfur[i])},
                            {"shapley_psel", summary_json(report.shapley_psel[i])},
                            {"shapley_tvd", summary_json(report.shapley_tvd[i])},
                            {"lcfur_weighted_average", summary_json(report.lcfur_average[i])},
                            {"tvr", summary_json(report.tvr[i])}});
  out["attributions"] = attributions;
  ordered_json nodes = ordered_json::array();
  for (std::size_t s = 0; s < report.node_loss.size(); ++s)
    nodes.push_back({{"mask", s},
                     {"set", EffectSet(static_cast<std::uint32_t>(s), m).label(names)},
                     {"loss", summary_json(report.node_loss[s])},
                     {"tv", summary_json(report.node_tv[s])},
                     {"excess_loss", summary_json(report.node_excess_loss[s])},
                     {"residual_tv_replicates", report.residual_tv_count[s]}});
  out["nodes"] = nodes;
  ordered_json edges = ordered_json::array();
  const auto lattice = build_lattice(m);
  for (std::size_t k = 0; k < report.edge_psel.size(); ++k) {
    const auto& e = lattice.edges[k];
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"from_set", EffectSet(e.from, m).label(names)},
                     {"to_set", EffectSet(e.to, m).label(names)},
                     {"effect", names[static_cast<std::size_t>(e.effect)]},
                     {"psel", summary_json(report.edge_psel[k])},
                     {"tvd", summary_json(report.edge_tvd[k])}});
  }
  out["edges"] = edges;
  ordered_json cmp = ordered_json::array();
  for (const auto& row : report.tvd_vs_tvr)
    cmp.push_back({{"effect", names[static_cast<std::size_t>(row.effect)]},
                   {"atvd", summary_json(row.atvd)},
                   {"tvr", summary_json(row.tvr)},
                   {"difference", row.difference},
                   {"standardized_difference", row.standardized}});
  out["tvd_vs_tvr"] = cmp;
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string report_json(const Report& report) {
  const int m = static_cast<int>(report.effect_names.size());
  ordered_json doc;
  doc["schema"] = report.schema;
  doc["config"] = config_json(report);
  doc["data"] = {{"description", report.source_description},
                 {"rows", report.rows},
                 {"dropped_rows", report.dropped_rows}};
  doc["effects"] = report.effect_names;
  doc["aggregate"] = aggregate_json(report, m);
  ordered_json reps = ordered_json::array();
  for (const auto& r : report.replicates) reps.push_back(replicate_json(r, report.effect_names, m));
  doc["replicates"] = reps;
  doc["oracle"] = oracle_json(report);
  doc["warnings"] = report.warnings;
  doc["partial"] = report.partial;
  doc["errors"] = report.errors;
  return doc.dump(2) + "\n";
}

void emit_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const int m = static_cast<int>(report.effect_names.size());
  const auto& names = report.effect_names;
  const auto label = [&](std::uint32_t s) { return "\"" + EffectSet(s, m).label(names) + "\""; };

  open_output(dir / "report.json") << report_json(report);

  if (report.node_loss.empty()) return;  // nothing aggregated (every replicate failed)
  const auto lattice = build_lattice(m);

  auto edges = open_output(dir / "edges.csv");
  edges << "S,S_prime,effect,psel,tvd,psel_sd,tvd_sd\n";
  for (std::size_t k = 0; k < lattice.edges.size(); ++k) {
    const auto& e = lattice.edges[k];
    edges << label(e.from) << "," << label(e.to) << "," << names[static_cast<std::size_t>(e.effect)]
          << "," << fmt(report.edge_psel[k].mean) << "," << fmt(report.edge_tvd[k].mean) << ","
          << fmt(report.edge_psel[k].sd) << "," << fmt(report.edge_tvd[k].sd) << "\n";
  }

  auto attr = open_output(dir / "attributions.csv");
  attr << "effect,apsel,atvd,cfur,shapley_psel,shapley_tvd,apsel_sd,atvd_sd,cfur_sd\n";
  for (std::size_t i = 0; i < report.apsel.size(); ++i)
    attr << names[i] << "," << fmt(report.apsel[i].mean) << "," << fmt(report.atvd[i].mean) << ","
         << fmt(report.cfur_of_means[i]) << "," << fmt(report.shapley_psel[i].mean) << ","
         << fmt(report.shapley_tvd[i].mean) << "," << fmt(report.apsel[i].sd) << ","
         << fmt(report.atvd[i].sd) << "," << fmt(report.cfur[i].sd) << "\n";

  auto pareto = open_output(dir / "pareto.csv");
  pareto << "mask,set,excess_loss,tv,excess_loss_sd,tv_sd,residual_tv_replicates\n";
  for (std::uint32_t s : lattice.nodes)
    pareto << s << "," << label(s) << "," << fmt(report.node_excess_loss[s].mean) << ","
           << fmt(report.node_tv[s].mean) << "," << fmt(report.node_excess_loss[s].sd) << ","
           << fmt(report.node_tv[s].sd) << "," << report.residual_tv_count[s] << "\n";

  auto cmp = open_output(dir / "tvd_vs_tvr.csv");
  cmp << "effect,atvd_mean,atvd_sd,tvr_mean,tvr_sd,standardized_difference\n";
  for (const auto& row : report.tvd_vs_tvr)
    cmp << names[static_cast<std::size_t>(row.effect)] << "," << fmt(row.atvd.mean) << ","
        << fmt(row.atvd.sd) << "," << fmt(row.tvr.mean) << "," << fmt(row.tvr.sd) << ","
        << fmt(row.standardized) << "\n";

  ordered_json lat;
  lat["m"] = m;
  lat["effects"] = names;
  ordered_json nodes = ordered_json::array();
  for (std::uint32_t s : lattice.nodes)
    nodes.push_back({{"mask", s}, {"set", EffectSet(s, m).label(names)},
                     {"loss", report.node_loss[s].mean}, {"tv", report.node_tv[s].mean}});
  ordered_json ledges = ordered_json::array();
  for (std::size_t k = 0; k < lattice.edges.size(); ++k) {
    const auto& e = lattice.edges[k];
    ledges.push_back({{"from", e.from}, {"to", e.to},
                      {"effect", names[static_cast<std::size_t>(e.effect)]},
                      {"psel", report.edge_psel[k].mean}, {"tvd", report.edge_tvd[k].mean},
                      {"psel_sd", report.edge_psel[k].sd}, {"tvd_sd", report.edge_tvd[k].sd}});
  }
  lat["nodes"] = nodes;
  lat["edges"] = ledges;
  ordered_json paths = ordered_json::array();
  for (const auto& p : lattice.paths) {
    std::vector<std::string> order;
    for (int e : p) order.push_back(names[static_cast<std::size_t>(e)]);
    paths.push_back(order);
  }
  lat["paths"] = paths;
  open_output(dir / "lattice.json") << lat.dump(2) << "\n";
}

}  // namespace fairpath
