#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccca.hpp"
#include "data.hpp"
#include "domain.hpp"
#include "ledger.hpp"
#include "paa.hpp"
#include "trainer.hpp"

namespace bfln::sim {

enum class Mode { bfln, fedavg_baseline };

const char* to_string(Mode m);
// Accepts "bfln", "fedavg" and "fedavg_baseline".
std::optional<Mode> parse_mode(const std::string& s);

struct ProbeConfig {
  std::size_t psi = 32;
  int label = -1;  // -1: most frequent class of the aggregation client
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx | csv
  int classes = 10;
  std::size_t dim = 16;
  std::size_t per_class = 400;
  double separation = 4.0;
  // Planted class-conditional feature distributions. Group g relabels its
  // data by a rotation of g * classes / groups.
  std::size_t groups = 1;
  std::vector<std::size_t> group_sizes;  // clients per group; empty splits evenly
  std::string images;
  std::string labels;
  std::string csv;
  double holdout = 0.2;
  std::size_t min_samples_per_client = 0;  // 0: twice the batch size
};

struct SimConfig {
  std::size_t clients = 20;
  std::size_t aggregators = 1;
  std::size_t aggregator_client = 0;
  std::size_t rounds = 50;
  std::size_t k_clusters = 2;
  double skew = 0.1;
  std::uint64_t seed = 0;
  Mode mode = Mode::bfln;
  bool rotating_aggregator = false;
  bool weighted_cluster_average = false;
  std::size_t workers = 1;
  ProbeConfig probe;
  trainer::TrainConfig train;
  ledger::IncentiveConfig incentive;
  paa::SpectralConfig spectral;
  double initial_stake = 5.0;
  std::vector<std::size_t> hidden_dims = {32, 16};
  DataConfig data;

  void validate() const;
  std::vector<std::size_t> resolved_group_sizes() const;
};

struct RoundTrace {
  RoundIndex round;
  ClientId aggregator;
  ClientId producer;
  std::uint64_t block_height = 0;
  std::vector<double> accuracy;  // per client, held-out split
  double mean_accuracy = 0.0;
  std::vector<std::size_t> cluster;            // per client
  std::vector<ClientId> representatives;       // per cluster
  std::vector<ClientId> representative_of;     // per client
  std::vector<std::size_t> cluster_sizes;
  std::vector<std::size_t> eligible_sizes;
  std::vector<bool> eligible;
  std::vector<double> rewards;   // minted to each client this round
  std::vector<double> balances;  // after this round's block
  double kappa = 0.0;
  double fee = 0.0;
  std::vector<std::string> diagnostics;
};

struct ClientData {
  data::Dataset train;
  data::Dataset test;
  std::size_t group = 0;
};

struct Hooks {
  // Called on the copy the aggregator receives, after the client committed
  // the hash of its trained model.
  std::function<void(RoundIndex, ClientId, ParameterVector&)> on_model_received;
};

std::vector<ClientData> build_client_data(const SimConfig& cfg);

// Accuracy of models[c] on clients[c].test.
std::vector<double> evaluate_round(const std::vector<ParameterVector>& models, const std::vector<ClientData>& clients,
                                   const trainer::ModelArchitecture& arch);

class Simulation {
 public:
  explicit Simulation(SimConfig cfg, Hooks hooks = {});

  const SimConfig& config() const { return cfg_; }
  const trainer::ModelArchitecture& architecture() const { return arch_; }
  const std::vector<ClientData>& clients() const { return clients_; }
  const std::vector<ParameterVector>& models() const { return models_; }
  const ledger::Chain& chain() const { return chain_; }
  const ccca::PackingQueue& queue() const { return queue_; }
  std::size_t rounds_completed() const { return next_round_; }
  bool finished() const { return next_round_ >= cfg_.rounds; }

  RoundTrace step();
  std::vector<RoundTrace> run_all();

 private:
  const paa::ProbeSet& probe_for(ClientId aggregator);

  SimConfig cfg_;
  Hooks hooks_;
  trainer::ModelArchitecture arch_;
  std::vector<ClientData> clients_;
  std::vector<ParameterVector> models_;
  ledger::Chain chain_;
  ccca::PackingQueue queue_;
  ClientId aggregator_;
  std::map<std::size_t, paa::ProbeSet> probes_;
  std::size_t next_round_ = 0;
};

std::vector<RoundTrace> run(const SimConfig& cfg);

}  // namespace bfln::sim
