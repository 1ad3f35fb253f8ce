#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "chain_io.hpp"
#include "error.hpp"

namespace bfln::experiment {

namespace fs = std::filesystem;
using config::Json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  fail(ErrorKind::configuration, "field '" + field + "': " + why);
}

template <class T, class F>
std::vector<T> read_list(const Json& j, const std::string& field, F&& convert) {
  if (!j.is_array() || j.empty()) bad(field, "expected a non-empty array");
  std::vector<T> out;
  for (const auto& e : j) out.push_back(convert(e));
  return out;
}

std::uint64_t as_seed(const Json& e, const std::string& field) {
  if (!config::non_negative_integer(e)) bad(field, "expected non-negative integers");
  return e.get<std::uint64_t>();
}

void read_experiment_keys(const Json& j, ExperimentSpec& spec) {
  for (const auto& [key, value] : j.items()) {
    if (key == "seeds") {
      spec.seeds = read_list<std::uint64_t>(value, "seeds", [](const Json& e) { return as_seed(e, "seeds"); });
    } else if (key == "output_dir") {
      if (!value.is_string()) bad("output_dir", "expected a string");
      spec.output_dir = value.get<std::string>();
    } else if (key == "sweep") {
      if (!value.is_object()) bad("sweep", "expected an object");
      for (const auto& [axis, list] : value.items()) {
        if (axis == "k_clusters") {
          spec.k_values = read_list<std::size_t>(list, "sweep.k_clusters", [](const Json& e) {
            if (!config::non_negative_integer(e)) bad("sweep.k_clusters", "expected positive integers");
            return e.get<std::size_t>();
          });
        } else if (axis == "skew") {
          spec.skews = read_list<double>(list, "sweep.skew", [](const Json& e) {
            if (!e.is_number()) bad("sweep.skew", "expected numbers");
            return e.get<double>();
          });
        } else if (axis == "mode") {
          spec.modes = read_list<sim::Mode>(list, "sweep.mode", [](const Json& e) {
            auto m = e.is_string() ? sim::parse_mode(e.get<std::string>()) : std::nullopt;
            if (!m) bad("sweep.mode", "expected 'bfln' or 'fedavg'");
            return *m;
          });
        } else {
          bad("sweep." + axis, "unknown sweep axis");
        }
      }
    } else if (key != "base") {
      bad(key, "unknown field");
    }
  }
}

void fill_defaults(ExperimentSpec& spec) {
  if (spec.seeds.empty()) spec.seeds = {spec.base.seed};
  if (spec.k_values.empty()) spec.k_values = {spec.base.k_clusters};
  if (spec.skews.empty()) spec.skews = {spec.base.skew};
  if (spec.modes.empty()) spec.modes = {spec.base.mode};
}

}  // namespace

ExperimentSpec spec_from_json(const Json& j) {
  if (!j.is_object()) bad("<root>", "expected an object");
  ExperimentSpec spec;
  if (j.contains("base")) {
    spec.base = config::sim_from_json(j.at("base"));
    read_experiment_keys(j, spec);
  } else {
    Json flat = j;
    for (const char* k : {"seeds", "sweep", "output_dir"}) flat.erase(k);
    spec.base = config::sim_from_json(flat);
    Json extra = Json::object();
    for (const char* k : {"seeds", "sweep", "output_dir"}) {
      if (j.contains(k)) extra[k] = j.at(k);
    }
    read_experiment_keys(extra, spec);
  }
  fill_defaults(spec);
  return spec;
}

ExperimentSpec load_spec(const std::string& path) { return spec_from_json(config::read_json_file(path)); }

void apply_override(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  auto to_u64 = [&](const std::string& s, const std::string& field) -> std::uint64_t {
    std::size_t pos = 0;
    try {
      if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
      auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      bad(field, "expected a non-negative integer, got '" + s + "'");
    }
  };
  if (key == "seeds") {
    spec.seeds.clear();
    for (const auto& s : split(value, ',')) spec.seeds.push_back(to_u64(s, "seeds"));
    if (spec.seeds.empty()) bad("seeds", "expected a comma separated list");
  } else if (key == "mode") {
    auto m = sim::parse_mode(value);
    if (!m) bad("mode", "expected 'bfln' or 'fedavg', got '" + value + "'");
    spec.modes = {*m};
    spec.base.mode = *m;
  } else if (key == "k") {
    spec.k_values = {static_cast<std::size_t>(to_u64(value, "k"))};
    spec.base.k_clusters = spec.k_values[0];
  } else if (key == "skew") {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != value.size()) bad("skew", "expected a number, got '" + value + "'");
    spec.skews = {v};
    spec.base.skew = v;
  } else if (key == "rounds") {
    spec.base.rounds = static_cast<std::size_t>(to_u64(value, "rounds"));
  } else if (key == "out") {
    spec.output_dir = value;
  } else {
    fail(ErrorKind::configuration, "unknown override '" + key + "'");
  }
}

std::string run_slug(const sim::SimConfig& cfg) {
  return std::string(sim::to_string(cfg.mode)) + "-k" + std::to_string(cfg.k_clusters) + "-skew" +
         fmt("%g", cfg.skew) + "-seed" + std::to_string(cfg.seed);
}

std::vector<RunPlan> plan_runs(const ExperimentSpec& spec) {
  std::vector<RunPlan> plans;
  for (auto mode : spec.modes) {
    const std::vector<std::size_t> ks =
        mode == sim::Mode::fedavg_baseline ? std::vector<std::size_t>{spec.k_values.front()} : spec.k_values;
    for (auto k : ks) {
      for (auto skew : spec.skews) {
        for (auto seed : spec.seeds) {
          sim::SimConfig c = spec.base;
          c.mode = mode;
          c.k_clusters = k;
          c.skew = skew;
          c.seed = seed;
          c.train.seed = seed;
          c.validate();
          plans.push_back({run_slug(c), c});
        }
      }
    }
  }
  return plans;
}

void write_trace_csv(const fs::path& path, const std::vector<sim::RoundTrace>& traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << "round,client,accuracy,cluster,representative,balance\n";
  for (const auto& t : traces) {
    for (std::size_t c = 0; c < t.accuracy.size(); ++c) {
      out << t.round.value << ',' << c << ',' << fmt("%.17g", t.accuracy[c]) << ',' << t.cluster[c] << ','
          << t.representative_of[c].index << ',' << fmt("%.17g", t.balances[c]) << '\n';
    }
  }
  if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

RunResult run_one(const RunPlan& plan, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json", std::ios::binary);
    if (!cfg) fail(ErrorKind::io, "cannot write '" + (dir / "config.json").string() + "'");
    cfg << config::sim_to_json(plan.config).dump(2) << '\n';
  }
  sim::Simulation s(plan.config);
  auto traces = s.run_all();
  write_trace_csv(dir / "trace.csv", traces);
  chain_io::write_ndjson(dir / "chain.ndjson", s.chain().blocks());
  {
    std::ofstream out(dir / "final_balances.csv", std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + (dir / "final_balances.csv").string() + "'");
    out << "client,balance\n";
    const auto& b = s.chain().tokens().balances();
    for (std::size_t c = 0; c < b.size(); ++c) out << c << ',' << fmt("%.17g", b[c]) << '\n';
  }
  RunResult r{plan.slug, dir, 0.0};
  if (!traces.empty()) r.final_mean_accuracy = traces.back().mean_accuracy;
  return r;
}

std::vector<RunResult> run_experiment(const ExperimentSpec& spec, std::size_t jobs) {
  const auto plans = plan_runs(spec);
  const fs::path root(spec.output_dir);
  fs::create_directories(root);
  std::vector<RunResult> results(plans.size());
  std::vector<std::exception_ptr> errors(plans.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < plans.size();) {
      try {
        results[i] = run_one(plans[i], root / plans[i].slug);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(plans.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "run " + plans[i].slug + ": " + e.what());
    }
  }
  return results;
}

namespace {

struct RunData {
  std::string slug;
  sim::SimConfig cfg;
  double final_accuracy = 0.0;
  std::vector<std::vector<double>> cumulative;  // [round][client]
};

// Returns an empty string on success, otherwise the reason the run is unusable.
std::string load_run(const fs::path& dir, RunData& run) {
  for (const char* f : {"config.json", "trace.csv", "chain.ndjson", "final_balances.csv"}) {
    if (!fs::is_regular_file(dir / f)) return std::string("missing ") + f;
  }
  try {
    run.cfg = config::sim_from_json(config::read_json_file((dir / "config.json").string()));
  } catch (const Error& e) {
    return std::string("bad config.json: ") + e.what();
  }
  run.slug = dir.filename().string();
  const std::size_t n = run.cfg.clients;
  const std::size_t rounds = run.cfg.rounds;

  std::ifstream trace(dir / "trace.csv");
  std::string line;
  std::getline(trace, line);
  std::vector<double> last(n, 0.0);
  std::size_t rows = 0;
  while (std::getline(trace, line)) {
    if (line.empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != 6) return "malformed trace.csv row " + std::to_string(rows + 1);
    try {
      const auto r = std::stoull(cols[0]);
      const auto c = std::stoull(cols[1]);
      if (c >= n || r >= rounds) return "trace.csv row out of range";
      if (r + 1 == rounds) last[c] = std::stod(cols[2]);
    } catch (const std::exception&) {
      return "malformed trace.csv row " + std::to_string(rows + 1);
    }
    ++rows;
  }
  if (rows != n * rounds) {
    return "trace.csv has " + std::to_string(rows) + " rows, expected " + std::to_string(n * rounds);
  }
  double sum = 0.0;
  for (double a : last) sum += a;
  run.final_accuracy = n ? sum / static_cast<double>(n) : 0.0;

  run.cumulative.assign(rounds, std::vector<double>(n, 0.0));
  std::vector<double> total(n, 0.0);
  std::vector<bool> posted(rounds, false);
  std::ifstream chain(dir / "chain.ndjson");
  try {
    while (std::getline(chain, line)) {
      if (line.empty()) continue;
      const auto block = chain_io::block_from_json(line);
      for (const auto& tx : block.transactions) {
        if (const auto* p = std::get_if<ledger::RewardPosting>(&tx)) {
          if (p->round.value >= rounds) return "chain.ndjson reward posting for unknown round";
          for (const auto& e : p->rewards) {
            if (e.client.index >= n) return "chain.ndjson reward for unknown client";
            total[e.client.index] += e.amount;
          }
          run.cumulative[p->round.value] = total;
          posted[p->round.value] = true;
        }
      }
    }
  } catch (const Error& e) {
    return std::string("bad chain.ndjson: ") + e.what();
  }
  for (std::size_t r = 0; r < rounds; ++r) {
    if (!posted[r]) return "chain.ndjson has no reward posting for round " + std::to_string(r);
  }
  return {};
}

}  // namespace

SummaryReport summarize(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) fail(ErrorKind::io, "not a directory: '" + run_dir.string() + "'");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  SummaryReport report;
  std::vector<RunData> runs;
  for (const auto& d : dirs) {
    RunData run;
    auto why = load_run(d, run);
    if (why.empty()) {
      report.runs.push_back(run.slug);
      runs.push_back(std::move(run));
    } else {
      report.incomplete.push_back(d.filename().string() + ": " + why);
    }
  }
  if (runs.empty()) fail(ErrorKind::io, "no completed runs under '" + run_dir.string() + "'");

  // Rows: bfln by K, then the baseline. Columns: skew ascending.
  using RowKey = std::pair<int, std::size_t>;
  std::map<RowKey, std::map<double, std::vector<double>>> cells;
  std::vector<double> skews;
  for (const auto& r : runs) {
    const RowKey key = r.cfg.mode == sim::Mode::bfln ? RowKey{0, r.cfg.k_clusters} : RowKey{1, 0};
    cells[key][r.cfg.skew].push_back(r.final_accuracy);
    skews.push_back(r.cfg.skew);
  }
  std::sort(skews.begin(), skews.end());
  skews.erase(std::unique(skews.begin(), skews.end()), skews.end());

  report.accuracy_grid = run_dir / "accuracy_grid.csv";
  {
    std::ofstream out(report.accuracy_grid, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + report.accuracy_grid.string() + "'");
    out << "method";
    for (double s : skews) out << ",skew=" << fmt("%g", s);
    out << '\n';
    for (const auto& [key, row] : cells) {
      out << (key.first == 0 ? "bfln-k" + std::to_string(key.second) : std::string("fedavg"));
      for (double s : skews) {
        out << ',';
        auto it = row.find(s);
        if (it == row.end()) continue;
        const auto& v = it->second;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        out << fmt("%.6f", mean) << "+-" << fmt("%.6f", std::sqrt(var));
      }
      out << '\n';
    }
  }

  report.rewards = run_dir / "rewards.csv";
  {
    std::ofstream out(report.rewards, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + report.rewards.string() + "'");
    out << "run,round,client,tokens\n";
    for (const auto& r : runs) {
      for (std::size_t round = 0; round < r.cumulative.size(); ++round) {
        for (std::size_t c = 0; c < r.cumulative[round].size(); ++c) {
          out << r.slug << ',' << round << ',' << c << ',' << fmt("%.17g", r.cumulative[round][c]) << '\n';
        }
      }
    }
  }
  return report;
}

}  // namespace bfln::experiment
