#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "fairpath/analysis.hpp"
#include "fairpath/learner.hpp"
#include "fairpath/random.hpp"
#include "fairpath/synth.hpp"
#include "json.hpp"

using namespace fairpath;

namespace {

std::vector<EffectId> parse_effect_list(const std::string& text) {
  std::vector<EffectId> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ','))
    if (!token.empty()) out.push_back(parse_effect(token));
  if (out.empty()) throw std::invalid_argument("--effects lists no effect");
  return out;
}

void print_summary(const Report& report) {
  const auto& names = report.effect_names;
  std::printf("replicates: %zu   loss: %s   rows: %zu\n", report.replicates.size(),
              loss_name(report.loss), report.rows);
  std::printf("TEL %.4f (sd %.4f)   total TVD %.4f (sd %.4f)\n", report.tel.mean, report.tel.sd,
              report.total_tvd.mean, report.total_tvd.sd);
  std::printf("%-6s %10s %10s %10s %10s %10s\n", "effect", "APSEL", "ATVD", "CFUR", "TVR", "sd(ATVD)");
  for (std::size_t i = 0; i < names.size(); ++i)
    std::printf("%-6s %10.4f %10.4f %10.4f %10.4f %10.4f\n", names[i].c_str(), report.apsel[i].mean,
                report.atvd[i].mean, report.cfur_of_means[i], report.tvr[i].mean, report.atvd[i].sd);
}

struct LinearArgs {
  LinearScmParams params;
  void add(CLI::App* app) {
    app->add_option("--alpha", params.alpha, "direct coefficient");
    app->add_option("--beta", params.beta, "X -> W coefficient");
    app->add_option("--gamma", params.gamma, "W -> Y coefficient");
    app->add_option("--sigma-w", params.sigma_w, "noise sd of W");
    app->add_option("--sigma-y", params.sigma_y, "noise sd of Y");
  }
};

int run_gradcheck(std::uint64_t seed, int rows, double tolerance) {
  const auto data = sample_discrete(random_discrete_scm(seed), 400, derive_seed(seed, 1));
  const auto plan = split(data, 0.5, derive_seed(seed, 2));
  const auto view = encode(data, plan);
  const auto train = view.rows(plan.train);
  const auto prop = fit_propensity(train);
  const auto family = canonical_constraints({EffectId::direct, EffectId::indirect, EffectId::spurious});
  ConstraintTargets targets{{0.05, -0.1, 0.02, -0.03}, {0, 0, 0, 0}};
  const auto raw = raw_ipw_weights(prop, train);
  std::vector<std::size_t> idx;
  for (int i = 0; i < rows && static_cast<std::size_t>(i) < train.size(); ++i)
    idx.push_back(static_cast<std::size_t>(i));
  const auto sub = train.rows(idx);
  const auto batch = make_batch(sub.inputs, sub.y, raw.head(static_cast<Eigen::Index>(idx.size())), true);
  bool ok = true;
  for (auto loss : {LossKind::mse, LossKind::cross_entropy}) {
    MlpPredictor f({static_cast<int>(train.input_width()), 16, 16, 1},
                   loss == LossKind::mse ? OutputHead::identity : OutputHead::logistic, seed);
    for (double lambda : {0.0, 10.0}) {
      const auto r = gradient_check(f, batch, lambda, family, targets, loss, 64, seed);
      const bool pass = r.max_relative_error < tolerance && r.checked >= 50;
      ok = ok && pass;
      std::printf("%-4s lambda=%-4g checked=%d skipped_kinks=%d max_rel_err=%.3e %s\n",
                  loss_name(loss), lambda, r.checked, r.skipped_kinks, r.max_relative_error,
                  pass ? "ok" : "FAIL");
    }
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairpath: causal fairness / accuracy trade-off analysis"};
  app.require_subcommand(1);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "run the lattice analysis on a CSV dataset");
  std::string data_path, sfm_path, loss_text, effects_text = "d,i,s", out_dir = "fairpath_out";
  RunConfig cfg;
  cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  analyze->add_option("--data", data_path, "CSV file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--sfm", sfm_path, "SFM spec JSON")->required()->check(CLI::ExistingFile);
  analyze->add_option("--loss", loss_text, "mse or bce (default from the task)")
      ->check(CLI::IsMember({"mse", "bce"}));
  analyze->add_option("--effects", effects_text, "comma separated subset of d,i,s");
  analyze->add_option("--bootstrap", cfg.bootstrap, "bootstrap replicates")->check(CLI::PositiveNumber);
  analyze->add_option("--seed", cfg.seed, "master seed");
  analyze->add_option("--out", out_dir, "output directory");
  analyze->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber);
  analyze->add_option("--train-fraction", cfg.train_fraction, "share of rows in the training fold");
  analyze->add_option("--epochs", cfg.train.epochs, "maximum epochs");
  analyze->add_option("--restarts", cfg.train.restarts, "random restarts per fit");
  analyze->add_option("--patience", cfg.train.patience, "early-stopping patience");
  analyze->add_option("--batch-size", cfg.train.batch_size, "minibatch size");
  analyze->add_option("--learning-rate", cfg.train.learning_rate, "Adam step size");
  analyze->add_option("--lambda-high", cfg.search.lambda_high, "upper end of the lambda bracket");
  analyze->add_option("--epsilon", cfg.search.epsilon, "bisection precision");
  analyze->add_option("--alpha-level", cfg.search.alpha_level, "per-test significance level");

  // synth
  auto* synth = app.add_subcommand("synth", "sample the linear system to CSV plus an SFM spec");
  LinearArgs synth_args;
  synth_args.add(synth);
  std::size_t synth_n = 20000;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "synthetic";
  synth->add_option("--n", synth_n, "rows")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "seed");
  synth->add_option("--out", synth_out, "output directory (data.csv, sfm.json)");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "closed-form values for the linear system");
  LinearArgs oracle_args;
  oracle_args.add(oracle);
  bool oracle_json = false;
  oracle->add_flag("--json", oracle_json, "print JSON");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the objective gradient");
  std::uint64_t grad_seed = 1;
  int grad_rows = 64;
  double grad_tol = 1e-4;
  gradcheck->add_option("--seed", grad_seed, "seed");
  gradcheck->add_option("--rows", grad_rows, "batch rows")->check(CLI::Range(4, 64));
  gradcheck->add_option("--tolerance", grad_tol, "maximum relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      cfg.source = CsvSource{data_path, sfm_path};
      if (!loss_text.empty()) cfg.loss = parse_loss(loss_text);
      cfg.effects = parse_effect_list(effects_text);
      try {
        const auto report = run_analysis(cfg);
        emit_report(report, out_dir);
        print_summary(report);
        for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        std::printf("wrote %s\n", out_dir.c_str());
        return report.warnings.empty() ? 0 : 2;
      } catch (const AnalysisError& e) {
        emit_report(e.partial(), out_dir);
        std::fprintf(stderr, "error: %s (partial results in %s)\n", e.what(), out_dir.c_str());
        return 1;
      }
    }
    if (*synth) {
      const auto data = sample_linear(synth_args.params, synth_n, synth_seed);
      std::filesystem::create_directories(synth_out);
      write_csv(data, std::filesystem::path(synth_out) / "data.csv");
      save_sfm_spec(data.spec(), std::filesystem::path(synth_out) / "sfm.json");
      std::printf("wrote %zu rows to %s\n", data.n(), synth_out.c_str());
      return 0;
    }
    if (*oracle) {
      const auto& p = oracle_args.params;
      const std::vector<std::string> names = {"D", "I"};
      nlohmann::ordered_json doc;
      const std::pair<const char*, MseConvention> conventions[] = {
          {"printed_closed_form", MseConvention::printed_closed_form},
          {"stated_predictors", MseConvention::stated_predictors},
          {"constrained_optimum", MseConvention::constrained_optimum}};
      for (const auto& [name, conv] : conventions)
        for (std::uint32_t s = 0; s < 4; ++s)
          doc["mse"][name][EffectSet(s, 2).label(names)] = oracle_mse(p, EffectSet(s, 2), conv);
      for (std::uint32_t s = 0; s < 4; ++s)
        doc["tv"][EffectSet(s, 2).label(names)] = oracle_tv(p, EffectSet(s, 2));
      for (auto e : {EffectId::direct, EffectId::indirect}) {
        doc["cfur"][effect_short_name(e)]["path_averaged"] =
            oracle_cfur(p, e, CfurConvention::path_averaged);
        doc["cfur"][effect_short_name(e)]["single_path"] = oracle_cfur(p, e, CfurConvention::single_path);
        doc["cfur"][effect_short_name(e)]["printed"] = oracle_cfur(p, e, CfurConvention::printed);
      }
      if (oracle_json) {
        std::cout << doc.dump(2) << "\n";
      } else {
        for (const auto& [conv, block] : doc["mse"].items()) {
          std::printf("mse (%s):", conv.c_str());
          for (const auto& [set, v] : block.items()) std::printf("  %s=%.6g", set.c_str(), v.get<double>());
          std::printf("\n");
        }
        std::printf("tv:");
        for (const auto& [set, v] : doc["tv"].items()) std::printf("  %s=%.6g", set.c_str(), v.get<double>());
        std::printf("\n");
        for (const auto& [eff, block] : doc["cfur"].items())
          std::printf("cfur(%s): path_averaged=%.6g single_path=%.6g printed=%.6g\n", eff.c_str(),
                      block["path_averaged"].get<double>(), block["single_path"].get<double>(),
                      block["printed"].get<double>());
      }
      return 0;
    }
    if (*gradcheck) return run_gradcheck(grad_seed, grad_rows, grad_tol);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
