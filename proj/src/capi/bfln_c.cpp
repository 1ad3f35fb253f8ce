#include "bfln/bfln.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <random>
#include <string>

#include "core/chain_io.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/experiment.hpp"
#include "core/ledger.hpp"
#include "core/paa.hpp"
#include "core/rng.hpp"
#include "core/sim.hpp"
#include "core/trainer.hpp"

struct bfln_experiment {
  bfln::experiment::ExperimentSpec spec;
};

struct bfln_simulation {
  std::unique_ptr<bfln::sim::Simulation> sim;
  std::vector<std::size_t> clusters;
};

namespace {

thread_local std::string last_error;

bfln_status status_of(bfln::ErrorKind k) {
  using bfln::ErrorKind;
  switch (k) {
    case ErrorKind::validation: return BFLN_VALIDATION;
    case ErrorKind::configuration: return BFLN_CONFIG;
    case ErrorKind::shape: return BFLN_VALIDATION;
    case ErrorKind::training: return BFLN_TRAINING;
    case ErrorKind::divergence: return BFLN_DIVERGENCE;
    case ErrorKind::load: return BFLN_LOAD;
    case ErrorKind::chain: return BFLN_CHAIN;
    case ErrorKind::io: return BFLN_IO;
  }
  return BFLN_INTERNAL;
}

template <class F>
bfln_status guarded(F&& f) {
  last_error.clear();
  try {
    return f();
  } catch (const bfln::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return BFLN_INTERNAL;
}

bfln_status invalid(const char* what) {
  last_error = what;
  return BFLN_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* bfln_status_string(bfln_status s) {
  switch (s) {
    case BFLN_OK: return "ok";
    case BFLN_INVALID_ARGUMENT: return "invalid argument";
    case BFLN_CONFIG: return "configuration error";
    case BFLN_VALIDATION: return "validation error";
    case BFLN_IO: return "i/o error";
    case BFLN_LOAD: return "load error";
    case BFLN_TRAINING: return "training error";
    case BFLN_DIVERGENCE: return "divergence";
    case BFLN_CHAIN: return "chain error";
    case BFLN_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bfln_last_error(void) { return last_error.c_str(); }

bfln_status bfln_experiment_load(const char* path, bfln_experiment** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto e = std::make_unique<bfln_experiment>();
    e->spec = bfln::experiment::load_spec(path);
    *out = e.release();
    return BFLN_OK;
  });
}

bfln_status bfln_experiment_from_json(const char* json, bfln_experiment** out) {
  if (!json || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    bfln::config::Json j;
    try {
      j = bfln::config::Json::parse(json);
    } catch (const std::exception& ex) {
      bfln::fail(bfln::ErrorKind::configuration, std::string("invalid JSON: ") + ex.what());
    }
    auto e = std::make_unique<bfln_experiment>();
    e->spec = bfln::experiment::spec_from_json(j);
    *out = e.release();
    return BFLN_OK;
  });
}

bfln_status bfln_experiment_set(bfln_experiment* e, const char* key, const char* value) {
  if (!e || !key || !value) return invalid("null argument");
  return guarded([&] {
    auto spec = e->spec;
    bfln::experiment::apply_override(spec, key, value);
    e->spec = std::move(spec);
    return BFLN_OK;
  });
}

bfln_status bfln_experiment_run_count(const bfln_experiment* e, size_t* out) {
  if (!e || !out) return invalid("null argument");
  return guarded([&] {
    *out = bfln::experiment::plan_runs(e->spec).size();
    return BFLN_OK;
  });
}

bfln_status bfln_experiment_run(bfln_experiment* e, size_t jobs) {
  if (!e) return invalid("null argument");
  return guarded([&] {
    bfln::experiment::run_experiment(e->spec, jobs);
    return BFLN_OK;
  });
}

const char* bfln_experiment_output_dir(const bfln_experiment* e) { return e ? e->spec.output_dir.c_str() : ""; }

void bfln_experiment_destroy(bfln_experiment* e) { delete e; }

bfln_status bfln_simulation_create(const char* config_json, bfln_simulation** out) {
  if (!config_json || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    bfln::config::Json j;
    try {
      j = bfln::config::Json::parse(config_json);
    } catch (const std::exception& ex) {
      bfln::fail(bfln::ErrorKind::configuration, std::string("invalid JSON: ") + ex.what());
    }
    auto s = std::make_unique<bfln_simulation>();
    s->sim = std::make_unique<bfln::sim::Simulation>(bfln::config::sim_from_json(j));
    *out = s.release();
    return BFLN_OK;
  });
}

bfln_status bfln_simulation_step(bfln_simulation* s, double* mean_accuracy) {
  if (!s) return invalid("null argument");
  return guarded([&] {
    auto t = s->sim->step();
    s->clusters = t.cluster;
    if (mean_accuracy) *mean_accuracy = t.mean_accuracy;
    return BFLN_OK;
  });
}

size_t bfln_simulation_rounds_completed(const bfln_simulation* s) { return s ? s->sim->rounds_completed() : 0; }

size_t bfln_simulation_clients(const bfln_simulation* s) { return s ? s->sim->config().clients : 0; }

bfln_status bfln_simulation_balances(const bfln_simulation* s, double* out, size_t n) {
  if (!s || (!out && n)) return invalid("null argument");
  const auto& b = s->sim->chain().tokens().balances();
  for (size_t i = 0; i < n && i < b.size(); ++i) out[i] = b[i];
  return BFLN_OK;
}

bfln_status bfln_simulation_clusters(const bfln_simulation* s, size_t* out, size_t n) {
  if (!s || (!out && n)) return invalid("null argument");
  if (s->clusters.empty()) return invalid("no round has completed");
  for (size_t i = 0; i < n && i < s->clusters.size(); ++i) out[i] = s->clusters[i];
  return BFLN_OK;
}

bfln_status bfln_simulation_chain_height(const bfln_simulation* s, size_t* out) {
  if (!s || !out) return invalid("null argument");
  *out = s->sim->chain().height();
  return BFLN_OK;
}

bfln_status bfln_simulation_conservation_error(const bfln_simulation* s, double* out) {
  if (!s || !out) return invalid("null argument");
  *out = s->sim->chain().tokens().conservation_error();
  return BFLN_OK;
}

bfln_status bfln_simulation_export_chain(const bfln_simulation* s, const char* path) {
  if (!s || !path) return invalid("null argument");
  return guarded([&] {
    bfln::chain_io::write_ndjson(std::filesystem::path(path), s->sim->chain().blocks());
    return BFLN_OK;
  });
}

void bfln_simulation_destroy(bfln_simulation* s) { delete s; }

bfln_status bfln_summarize(const char* run_dir) {
  if (!run_dir) return invalid("null argument");
  return guarded([&] {
    auto report = bfln::experiment::summarize(run_dir);
    if (!report.incomplete.empty()) {
      std::string msg = "skipped:";
      for (const auto& r : report.incomplete) msg += " [" + r + "]";
      last_error = msg;
    }
    return BFLN_OK;
  });
}

bfln_status bfln_verify_chain(const char* path, size_t* blocks, int64_t* failing_height) {
  if (!path) return invalid("null argument");
  if (failing_height) *failing_height = -1;
  return guarded([&] {
    std::ifstream in(path);
    if (!in) bfln::fail(bfln::ErrorKind::io, std::string("cannot open '") + path + "'");
    auto r = bfln::chain_io::verify_ndjson(in);
    if (blocks) *blocks = r.blocks;
    if (r.ok) return BFLN_OK;
    if (failing_height && r.failing_height) *failing_height = static_cast<int64_t>(*r.failing_height);
    last_error = r.message;
    return BFLN_CHAIN;
  });
}

bfln_status bfln_gradcheck(size_t input_dim, const size_t* hidden, size_t hidden_count, size_t classes,
                           size_t samples, uint64_t seed, double* max_rel_error) {
  if ((!hidden && hidden_count) || !max_rel_error) return invalid("null argument");
  if (samples == 0) return invalid("samples must be positive");
  return guarded([&] {
    bfln::trainer::ModelArchitecture arch;
    arch.input_dim = input_dim;
    arch.hidden_dims.assign(hidden, hidden + hidden_count);
    arch.classes = static_cast<int>(classes);
    arch.validate();
    auto params = bfln::trainer::init_parameters(arch, bfln::derive_seed(seed, {bfln::stream::init}));
    bfln::data::Dataset batch;
    batch.dim = input_dim;
    batch.classes = static_cast<int>(classes);
    bfln::Rng rng(bfln::derive_seed(seed, {bfln::stream::gradcheck}));
    std::normal_distribution<double> x(0.0, 1.0);
    std::uniform_int_distribution<int> y(0, static_cast<int>(classes) - 1);
    for (size_t i = 0; i < samples * input_dim; ++i) batch.features.push_back(x(rng));
    for (size_t i = 0; i < samples; ++i) batch.labels.push_back(y(rng));
    bfln::trainer::GradientCheckOptions opt;
    opt.seed = seed;
    *max_rel_error = bfln::trainer::gradient_check(params, arch, batch, opt);
    return BFLN_OK;
  });
}

bfln_status bfln_pearson(const double* a, const double* b, size_t n, double* out) {
  if (!a || !b || !out) return invalid("null argument");
  return guarded([&] {
    auto r = bfln::paa::pearson({a, n}, {b, n});
    *out = r.value_or(0.0);
    if (!r) {
      last_error = "degenerate input: zero variance";
      return BFLN_VALIDATION;
    }
    return BFLN_OK;
  });
}

bfln_status bfln_incentive(const size_t* sizes, size_t count, double total_reward, double rho, size_t submitters,
                           double* kappa, double* allocation, double* per_client, double* fee) {
  if (!sizes && count) return invalid("null argument");
  return guarded([&] {
    bfln::ledger::IncentiveConfig cfg{total_reward, rho};
    cfg.validate();
    const double k = bfln::ledger::compute_kappa({sizes, count}, cfg);
    if (kappa) *kappa = k;
    for (size_t i = 0; i < count; ++i) {
      if (allocation) allocation[i] = bfln::ledger::group_allocation(sizes[i], k, rho);
      if (per_client) per_client[i] = bfln::ledger::per_client_reward(sizes[i], k, rho);
    }
    if (fee) *fee = bfln::ledger::aggregation_fee(k, submitters);
    return BFLN_OK;
  });
}

bfln_status bfln_model_hash(const double* values, size_t n, uint8_t out[32]) {
  if ((!values && n) || !out) return invalid("null argument");
  return guarded([&] {
    auto pv = bfln::ParameterVector::flat(std::vector<double>(values, values + n));
    const auto d = bfln::model_hash(pv);
    std::memcpy(out, d.data(), d.size());
    return BFLN_OK;
  });
}

}  // extern "C"
