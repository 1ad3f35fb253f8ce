#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bfln/bfln.h"

namespace {

int report(bfln_status s, const char* what) {
  std::fprintf(stderr, "bfln %s: %s: %s\n", what, bfln_status_string(s), bfln_last_error());
  return s == BFLN_CONFIG || s == BFLN_INVALID_ARGUMENT ? 2 : 1;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::string seeds;
  std::string mode;
  std::string k;
  std::string skew;
  std::string rounds;
  std::size_t jobs = 1;
};

int cmd_run(const RunArgs& a) {
  bfln_experiment* e = nullptr;
  bfln_status s = bfln_experiment_load(a.config.c_str(), &e);
  if (s != BFLN_OK) {
    report(s, "run");
    return 2;
  }
  const std::pair<const char*, const std::string*> overrides[] = {
      {"seeds", &a.seeds}, {"mode", &a.mode}, {"k", &a.k}, {"skew", &a.skew}, {"rounds", &a.rounds}, {"out", &a.out}};
  for (const auto& [key, value] : overrides) {
    if (value->empty()) continue;
    s = bfln_experiment_set(e, key, value->c_str());
    if (s != BFLN_OK) {
      report(s, "run");
      bfln_experiment_destroy(e);
      return 2;
    }
  }
  std::size_t runs = 0;
  s = bfln_experiment_run_count(e, &runs);
  if (s != BFLN_OK) {
    report(s, "run");
    bfln_experiment_destroy(e);
    return 2;
  }
  std::fprintf(stderr, "running %zu run(s) into %s\n", runs, bfln_experiment_output_dir(e));
  s = bfln_experiment_run(e, a.jobs);
  bfln_experiment_destroy(e);
  if (s != BFLN_OK) {
    report(s, "run");
    return 1;
  }
  return 0;
}

int cmd_summarize(const std::string& dir) {
  bfln_status s = bfln_summarize(dir.c_str());
  if (s != BFLN_OK) return report(s, "summarize") == 2 ? 2 : 1;
  if (*bfln_last_error()) std::fprintf(stderr, "%s\n", bfln_last_error());
  std::printf("wrote %s/accuracy_grid.csv and %s/rewards.csv\n", dir.c_str(), dir.c_str());
  return 0;
}

int cmd_verify(const std::string& path) {
  std::size_t blocks = 0;
  int64_t failing = -1;
  bfln_status s = bfln_verify_chain(path.c_str(), &blocks, &failing);
  if (s == BFLN_OK) {
    std::printf("ok: %zu blocks verified\n", blocks);
    return 0;
  }
  if (failing >= 0) {
    std::fprintf(stderr, "chain verification failed at block height %lld: %s\n", static_cast<long long>(failing),
                 bfln_last_error());
  } else {
    report(s, "verify-chain");
  }
  return 1;
}

int cmd_gradcheck(std::size_t networks, std::uint64_t seed, double threshold) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  double worst = 0.0;
  for (std::size_t i = 0; i < networks; ++i) {
    const std::size_t input = pick(2, 6);
    std::vector<std::size_t> hidden(pick(1, 3));
    for (auto& h : hidden) h = pick(2, 8);
    const std::size_t classes = pick(2, 5);
    const std::size_t samples = pick(1, 8);
    double err = 0.0;
    bfln_status s = bfln_gradcheck(input, hidden.data(), hidden.size(), classes, samples, seed + i, &err);
    if (s != BFLN_OK) return report(s, "gradcheck");
    std::printf("network %zu: max relative error %.3e\n", i, err);
    if (err > worst) worst = err;
  }
  std::printf("worst %.3e (threshold %.1e)\n", worst, threshold);
  return worst < threshold ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered federated learning simulator with a token ledger"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Execute an experiment and write its run directories");
  run_cmd->add_option("--config", run.config, "Experiment or simulation config (JSON)")->required();
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--seeds", run.seeds, "Comma separated seeds");
  run_cmd->add_option("--mode", run.mode, "bfln or fedavg");
  run_cmd->add_option("--k", run.k, "Cluster count");
  run_cmd->add_option("--skew", run.skew, "Dirichlet concentration");
  run_cmd->add_option("--rounds", run.rounds, "Rounds per run");
  run_cmd->add_option("--jobs", run.jobs, "Runs executed concurrently");

  std::string summary_dir;
  auto* sum_cmd = app.add_subcommand("summarize", "Aggregate finished runs into accuracy and reward tables");
  auto* sum_pos = sum_cmd->add_option("dir", summary_dir, "Directory holding run directories");
  sum_cmd->add_option("--out", summary_dir, "Same as the positional directory")->excludes(sum_pos);

  std::string chain_path;
  auto* ver_cmd = app.add_subcommand("verify-chain", "Recompute every block hash of an exported chain");
  ver_cmd->add_option("chain", chain_path, "chain.ndjson")->required();

  std::size_t networks = 20;
  std::uint64_t seed = 0;
  double threshold = 1e-4;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare backprop with central differences on random networks");
  grad_cmd->add_option("--networks", networks, "Number of random networks");
  grad_cmd->add_option("--seed", seed, "Base seed");
  grad_cmd->add_option("--threshold", threshold, "Maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*run_cmd) return cmd_run(run);
  if (*sum_cmd) {
    if (summary_dir.empty()) {
      std::fprintf(stderr, "summarize: a run directory is required\n");
      return 2;
    }
    return cmd_summarize(summary_dir);
  }
  if (*ver_cmd) return cmd_verify(chain_path);
  if (*grad_cmd) return cmd_gradcheck(networks, seed, threshold);
  return 2;
}
