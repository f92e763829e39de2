// Command-line front end: run single experiments, lambda sweeps,
// verification suites and post-hoc analysis of run directories.

#include "grokflow/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

namespace {

using grokflow::ExperimentConfig;
using grokflow::Scalar;

std::vector<Scalar> parse_lambdas(const std::string& csv) {
  std::vector<Scalar> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t pos = 0;
    const Scalar v = std::stod(tok, &pos);
    if (pos != tok.size())
      throw grokflow::RejectedInputError("bad lambda value: " + tok);
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grokflow: gradient flow with weight decay, two-timescale "
               "diagnostics and verification suites"};
  app.require_subcommand(1);

  std::string config_path, out_dir, lambdas_csv, suite, run_dir;
  std::string scale = "ci";

  auto* run = app.add_subcommand("run", "Run one experiment from a config");
  run->add_option("config", config_path, "experiment config (json)")
      ->required();
  run->add_option("--out", out_dir, "output directory");

  auto* sweep =
      app.add_subcommand("sweep", "Run a lambda grid plus a lambda=0 baseline");
  sweep->add_option("config", config_path, "experiment config (json)")
      ->required();
  sweep->add_option("--lambdas", lambdas_csv, "comma-separated lambda grid")
      ->required();
  sweep->add_option("--out", out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify
      ->add_option("suite", suite,
                   "fast_phase | junction | slow_phase | kkt | end_to_end")
      ->required();
  verify->add_option("--scale", scale, "ci (default) or paper")
      ->check(CLI::IsMember({"ci", "paper"}));

  auto* analyze =
      app.add_subcommand("analyze", "Analyze a completed run directory");
  analyze->add_option("run_dir", run_dir, "directory written by `run`")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentConfig cfg = ExperimentConfig::load(config_path);
      if (out_dir.empty())
        out_dir = cfg.output.empty() ? "runs/out" : cfg.output;
      auto report = grokflow::harness::cmd_run(cfg, out_dir);
      std::printf("%s\n", report.to_json().dump(2).c_str());
      if (report.integration_failed) {
        std::fprintf(stderr, "integration failed: %s\n",
                     report.failure.c_str());
        return 1;
      }
      return 0;
    }
    if (sweep->parsed()) {
      ExperimentConfig cfg = ExperimentConfig::load(config_path);
      auto lambdas = parse_lambdas(lambdas_csv);
      if (out_dir.empty())
        out_dir = cfg.output.empty() ? "runs/sweep" : cfg.output;
      auto summary = grokflow::harness::cmd_sweep(cfg, lambdas, out_dir);
      std::printf("%s\n", summary.to_json().dump(2).c_str());
      return 0;
    }
    if (verify->parsed()) {
      auto checks = grokflow::harness::cmd_verify(suite, scale);
      bool all_pass = true;
      for (const auto& c : checks) {
        std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
        all_pass = all_pass && c.pass;
      }
      return all_pass ? 0 : 1;
    }
    if (analyze->parsed()) {
      auto analysis = grokflow::harness::cmd_analyze(run_dir);
      std::printf("%s\n", analysis.dump(2).c_str());
      return 0;
    }
  } catch (const grokflow::RejectedInputError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
