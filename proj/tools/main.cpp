// Command-line surface: explain | gen-cf | max-sparse | metrics | verify.
// All randomness flows from --seed; reruns with the same config produce
// byte-identical outputs.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfattr/cli.hpp"

namespace {

void add_common_flags(CLI::App* app, cfattr::cli::run_config& cfg, bool needs_inputs = true) {
  auto* data = app->add_option("--data", cfg.data_path, "dataset CSV (header row, numeric cells)");
  auto* model = app->add_option("--model", cfg.model_path, "model document (JSON)");
  if (needs_inputs) {
    data->required();
    model->required();
  }
  app->add_option("--out", cfg.out_dir, "output directory");
  app->add_option("--k", cfg.k, "number of K-NN counterfactuals per instance");
  app->add_option("--topk", cfg.topk, "top-k grid for agreement and quality metrics");
  app->add_flag("--max-sparse", cfg.max_sparse, "pass counterfactuals through MaxSparse");
  app->add_option("--query-fn", cfg.query_fn, "query function: f (output) or F (decision)")
      ->check(CLI::IsMember({"f", "F"}));
  app->add_option("--concept", cfg.concept_tag, "solution concept for the generic method")
      ->check(CLI::IsMember({"shapley", "banzhaf", "deegan-packel", "holler-packel"}));
  app->add_option("--cost", cfg.cost, "MaxSparse cost function")
      ->check(CLI::IsMember({"quantile", "uniform"}));
  app->add_option("--action", cfg.action, "recourse action function")
      ->check(CLI::IsMember({"random", "proportional"}));
  app->add_option("--seed", cfg.seed, "master seed for all randomness");
  app->add_option("--jobs", cfg.jobs, "instance-level parallelism");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Game-theoretic feature attributions and counterfactual importances"};
  app.require_subcommand(1);

  cfattr::cli::run_config cfg;
  std::vector<std::string> methods_opt;
  std::vector<std::string> suites;
  int trials = 0;

  auto* explain = app.add_subcommand("explain", "compute explanation files per instance");
  add_common_flags(explain, cfg);
  explain->add_option("--methods", methods_opt,
                      "methods: shap, cf-shap, bin-cf-shap, cf-freq, norm-cf-freq, generic");

  auto* gen_cf = app.add_subcommand("gen-cf", "generate K-NN counterfactual sets");
  add_common_flags(gen_cf, cfg);

  auto* max_sparse = app.add_subcommand("max-sparse", "induce maximally sparse counterfactuals");
  add_common_flags(max_sparse, cfg);

  auto* metrics = app.add_subcommand("metrics", "pairwise matrices and quality rates");
  add_common_flags(metrics, cfg);
  metrics->add_option("--methods", methods_opt, "methods to compare");

  auto* verify = app.add_subcommand("verify", "run a theorem-verification suite");
  verify->add_option("--suite", suites,
                     "suites: theorem-4.2 theorem-4.3 corollary-5.2 sparsity-hierarchy "
                     "efficiency oracles (default: all)");
  verify->add_option("--trials", trials, "trial count override (0 = suite default)");
  verify->add_option("--seed", cfg.seed, "master seed");

  CLI11_PARSE(app, argc, argv);
  if (!methods_opt.empty()) cfg.methods = methods_opt;

  try {
    if (explain->parsed()) return cfattr::cli::cmd_explain(cfg);
    if (gen_cf->parsed()) return cfattr::cli::cmd_gen_cf(cfg);
    if (max_sparse->parsed()) return cfattr::cli::cmd_max_sparse(cfg);
    if (metrics->parsed()) return cfattr::cli::cmd_metrics(cfg);
    if (verify->parsed()) return cfattr::cli::cmd_verify(suites, trials, cfg.seed);
  } catch (const cfattr::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cfattr::cli::kExitInputError;
  } catch (const cfattr::contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cfattr::cli::kExitInputError;
  } catch (const cfattr::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cfattr::cli::kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cfattr::cli::kExitInputError;
  }
  return cfattr::cli::kExitOk;
}
