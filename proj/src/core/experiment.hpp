#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "sim.hpp"

namespace bfln::experiment {

struct ExperimentSpec {
  sim::SimConfig base;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> k_values;
  std::vector<double> skews;
  std::vector<sim::Mode> modes;
  std::string output_dir = "runs";
};

// Either {"base": {...}, "seeds": [...], "sweep": {...}, "output_dir": "..."}
// or a flat simulation config carrying the same optional keys alongside.
ExperimentSpec spec_from_json(const config::Json& j);
ExperimentSpec load_spec(const std::string& path);

// Keys: seeds (comma list), mode, k, skew, rounds, out.
void apply_override(ExperimentSpec& spec, const std::string& key, const std::string& value);

struct RunPlan {
  std::string slug;
  sim::SimConfig config;
};

// Cross product of modes x k x skew x seeds. The baseline ignores k, so it
// contributes one run per (skew, seed).
std::vector<RunPlan> plan_runs(const ExperimentSpec& spec);
std::string run_slug(const sim::SimConfig& cfg);

struct RunResult {
  std::string slug;
  std::filesystem::path dir;
  double final_mean_accuracy = 0.0;
};

// Writes config.json, trace.csv, chain.ndjson and final_balances.csv.
RunResult run_one(const RunPlan& plan, const std::filesystem::path& dir);
std::vector<RunResult> run_experiment(const ExperimentSpec& spec, std::size_t jobs = 1);

void write_trace_csv(const std::filesystem::path& path, const std::vector<sim::RoundTrace>& traces);

struct SummaryReport {
  std::vector<std::string> runs;        // completed, in directory order
  std::vector<std::string> incomplete;  // skipped, with the reason
  std::filesystem::path accuracy_grid;
  std::filesystem::path rewards;
};

// Reads every run directory under run_dir and writes accuracy_grid.csv and
// rewards.csv next to them.
SummaryReport summarize(const std::filesystem::path& run_dir);

}  // namespace bfln::experiment
