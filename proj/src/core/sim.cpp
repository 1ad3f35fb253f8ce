#include "sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "rng.hpp"

namespace bfln::sim {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::bfln: return "bfln";
    case Mode::fedavg_baseline: return "fedavg";
  }
  return "bfln";
}

std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "bfln") return Mode::bfln;
  if (s == "fedavg" || s == "fedavg_baseline") return Mode::fedavg_baseline;
  return std::nullopt;
}

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) fail(ErrorKind::configuration, "field '" + field + "': " + why);
}

}  // namespace

std::vector<std::size_t> SimConfig::resolved_group_sizes() const {
  if (!data.group_sizes.empty()) return data.group_sizes;
  std::vector<std::size_t> sizes(data.groups, clients / data.groups);
  for (std::size_t g = 0; g < clients % data.groups; ++g) ++sizes[g];
  return sizes;
}

void SimConfig::validate() const {
  require(clients >= 2, "clients", "must be at least 2");
  require(aggregators == 1, "aggregators", "only a single aggregation client is supported");
  require(aggregator_client < clients, "aggregator_client", "must be a valid client index");
  require(k_clusters >= 1 && k_clusters <= clients, "k_clusters", "must be in [1, clients]");
  require(std::isfinite(skew) && skew > 0.0, "skew", "must be positive");
  require(probe.psi >= 2, "probe.psi", "must be at least 2");
  require(train.batch_size >= 1, "train.batch_size", "must be positive");
  require(std::isfinite(train.learning_rate) && train.learning_rate >= 0.0, "train.learning_rate",
          "must be finite and non-negative");
  require(std::isfinite(incentive.total_reward) && incentive.total_reward >= 0.0, "incentive.total_reward",
          "must be finite and non-negative");
  require(std::isfinite(incentive.rho) && incentive.rho > 1.0, "incentive.rho", "must be greater than 1");
  require(std::isfinite(initial_stake) && initial_stake >= 0.0, "initial_stake", "must be finite and non-negative");
  require(spectral.kmeans_restarts >= 1, "spectral.kmeans_restarts", "must be positive");
  require(spectral.kmeans_max_iters >= 1, "spectral.kmeans_max_iters", "must be positive");
  require(spectral.eigen_tolerance > 0.0, "spectral.eigen_tolerance", "must be positive");
  require(!hidden_dims.empty(), "model.hidden_dims", "needs at least one hidden layer");
  for (auto h : hidden_dims) require(h >= 1, "model.hidden_dims", "widths must be positive");
  require(data.source == "synthetic" || data.source == "idx" || data.source == "csv", "data.source",
          "must be one of synthetic, idx, csv");
  if (data.source == "synthetic") {
    require(data.classes >= 2, "data.classes", "must be at least 2");
    require(data.dim >= 1, "data.dim", "must be positive");
    require(data.per_class >= 1, "data.per_class", "must be positive");
    require(std::isfinite(data.separation) && data.separation >= 0.0, "data.separation", "must be non-negative");
  } else if (data.source == "idx") {
    require(!data.images.empty(), "data.images", "path required for idx source");
    require(!data.labels.empty(), "data.labels", "path required for idx source");
  } else {
    require(!data.csv.empty(), "data.csv", "path required for csv source");
  }
  require(data.holdout >= 0.0 && data.holdout < 1.0, "data.holdout", "must be in [0, 1)");
  require(data.groups >= 1 && data.groups <= clients, "data.groups", "must be in [1, clients]");
  if (!data.group_sizes.empty()) {
    require(data.group_sizes.size() == data.groups, "data.group_sizes", "needs one entry per group");
    require(std::accumulate(data.group_sizes.begin(), data.group_sizes.end(), std::size_t{0}) == clients,
            "data.group_sizes", "must sum to clients");
    for (auto g : data.group_sizes) require(g >= 1, "data.group_sizes", "entries must be positive");
  }
}

std::vector<ClientData> build_client_data(const SimConfig& cfg) {
  const auto group_sizes = cfg.resolved_group_sizes();
  const std::size_t min_samples =
      cfg.data.min_samples_per_client ? cfg.data.min_samples_per_client : data::default_min_samples(cfg.train.batch_size);
  const auto data_seed = derive_seed(cfg.seed, {stream::data});

  std::vector<data::Dataset> group_data;
  if (cfg.data.source == "synthetic") {
    for (std::size_t g = 0; g < cfg.data.groups; ++g) {
      const int shift = static_cast<int>(g * static_cast<std::size_t>(cfg.data.classes) / cfg.data.groups);
      group_data.push_back(data::generate_synthetic(data_seed, cfg.data.classes, cfg.data.dim, cfg.data.per_class,
                                                    cfg.data.separation, shift));
    }
  } else {
    auto all = cfg.data.source == "idx" ? data::load_idx(cfg.data.images, cfg.data.labels) : data::load_csv(cfg.data.csv);
    all.validate();
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(data_seed, {cfg.data.groups}));
    if (cfg.data.groups > 1) std::shuffle(order.begin(), order.end(), rng);
    std::size_t start = 0;
    for (std::size_t g = 0; g < cfg.data.groups; ++g) {
      const std::size_t end =
          g + 1 == cfg.data.groups ? order.size()
                                   : start + order.size() * group_sizes[g] / cfg.clients;
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(idx.begin(), idx.end());
      auto part = all.subset(idx);
      const int shift = static_cast<int>(g * static_cast<std::size_t>(all.classes) / cfg.data.groups);
      for (auto& l : part.labels) l = ((l - shift) % all.classes + all.classes) % all.classes;
      group_data.push_back(std::move(part));
      start = end;
    }
  }

  std::vector<ClientData> out;
  out.reserve(cfg.clients);
  // With several groups the label mix is drawn once per group and every member
  // of a group receives a uniform share of it.
  const bool group_split = cfg.data.groups > 1;
  const std::size_t largest = *std::max_element(group_sizes.begin(), group_sizes.end());
  for (std::size_t g = 0; g < group_data.size(); ++g) {
    const auto& ds = group_data[g];
    data::Partition part;
    if (group_split) {
      auto mix = data::partition_dirichlet(ds, cfg.data.groups, cfg.skew, derive_seed(cfg.seed, {stream::partition}),
                                           min_samples * largest);
      auto idx = std::move(mix.clients[g]);
      Rng rng(derive_seed(cfg.seed, {stream::partition, g}));
      std::shuffle(idx.begin(), idx.end(), rng);
      const std::size_t n = group_sizes[g];
      part.clients.resize(n);
      for (std::size_t c = 0; c < n; ++c) {
        part.clients[c].assign(idx.begin() + static_cast<std::ptrdiff_t>(c * idx.size() / n),
                               idx.begin() + static_cast<std::ptrdiff_t>((c + 1) * idx.size() / n));
        std::sort(part.clients[c].begin(), part.clients[c].end());
      }
    } else if (group_sizes[g] == 1) {
      part.clients.resize(1);
      part.clients[0].resize(ds.size());
      std::iota(part.clients[0].begin(), part.clients[0].end(), 0);
    } else {
      part = data::partition_dirichlet(ds, group_sizes[g], cfg.skew, derive_seed(cfg.seed, {stream::partition, g}),
                                       min_samples);
    }
    auto splits = data::split_holdout(part, cfg.data.holdout, derive_seed(cfg.seed, {stream::holdout, g}));
    for (auto& s : splits) out.push_back({ds.subset(s.train), ds.subset(s.test), g});
  }
  return out;
}

std::vector<double> evaluate_round(const std::vector<ParameterVector>& models, const std::vector<ClientData>& clients,
                                   const trainer::ModelArchitecture& arch) {
  if (models.size() != clients.size()) fail(ErrorKind::validation, "one model per client required");
  std::vector<double> acc(models.size());
  for (std::size_t c = 0; c < models.size(); ++c) {
    const auto& eval = clients[c].test.size() ? clients[c].test : clients[c].train;
    acc[c] = trainer::evaluate(models[c], arch, eval);
  }
  return acc;
}

Simulation::Simulation(SimConfig cfg, Hooks hooks)
    : cfg_(std::move(cfg)), hooks_(std::move(hooks)), chain_(cfg_.clients, cfg_.initial_stake) {
  cfg_.validate();
  cfg_.train.seed = cfg_.seed;
  clients_ = build_client_data(cfg_);
  for (auto& c : clients_) {
    if (c.train.size() == 0) fail(ErrorKind::configuration, "a client received no training data");
  }
  arch_.input_dim = clients_.front().train.dim;
  arch_.hidden_dims = cfg_.hidden_dims;
  arch_.classes = clients_.front().train.classes;
  arch_.validate();
  // Every client starts from the same initial model.
  const auto init = trainer::init_parameters(arch_, derive_seed(cfg_.seed, {stream::init}));
  models_.assign(cfg_.clients, init);
  aggregator_ = ClientId{cfg_.aggregator_client};
}

const paa::ProbeSet& Simulation::probe_for(ClientId aggregator) {
  auto it = probes_.find(aggregator.index);
  if (it != probes_.end()) return it->second;
  const auto& local = clients_[aggregator.index].train;
  std::vector<std::size_t> all(local.size());
  std::iota(all.begin(), all.end(), 0);
  const int label = cfg_.probe.label >= 0 ? cfg_.probe.label : paa::most_frequent_label(local, all);
  auto probe = paa::draw_probe(local, all, label, cfg_.probe.psi,
                               derive_seed(cfg_.seed, {stream::probe, aggregator.index}));
  return probes_.emplace(aggregator.index, std::move(probe)).first->second;
}

namespace {

template <class F>
auto stage(std::size_t round, const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), "round " + std::to_string(round) + ", " + name + ": " + e.what());
  }
}

}  // namespace

RoundTrace Simulation::step() {
  if (finished()) fail(ErrorKind::configuration, "simulation already ran all rounds");
  const RoundIndex round{next_round_};
  const std::size_t n = cfg_.clients;
  RoundTrace t;
  t.round = round;
  t.aggregator = aggregator_;

  // (1) local training, fanned out; slots keep the result order fixed.
  std::vector<ParameterVector> trained(n);
  stage(round.value, "local training", [&] {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
      for (std::size_t c; (c = cursor.fetch_add(1)) < n;) {
        try {
          trained[c] = trainer::train_local(models_[c], arch_, clients_[c].train, cfg_.train, round, ClientId{c});
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    };
    std::size_t workers = cfg_.workers ? cfg_.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  });

  // (2) hash commits, then transmission to the aggregator.
  std::vector<ledger::ModelHashCommit> commits;
  std::vector<ParameterVector> received = trained;
  stage(round.value, "commit", [&] {
    for (std::size_t c = 0; c < n; ++c) {
      commits.push_back({ClientId{c}, round, model_hash(trained[c])});
      if (hooks_.on_model_received) hooks_.on_model_received(round, ClientId{c}, received[c]);
    }
  });

  std::vector<ClientId> ids(n);
  for (std::size_t c = 0; c < n; ++c) ids[c] = ClientId{c};

  ClusterAssignment assignment;
  ClientId producer = aggregator_;
  if (cfg_.mode == Mode::bfln) {
    // (3) prototypes from the shared probe.
    SimilarityMatrix sim;
    stage(round.value, "prototype extraction", [&] {
      const auto& probe = probe_for(aggregator_);
      if (probe.psi < cfg_.probe.psi) {
        t.diagnostics.push_back("probe uses " + std::to_string(probe.psi) + " of " + std::to_string(cfg_.probe.psi) +
                                " requested samples");
      }
      std::vector<Prototype> protos;
      protos.reserve(n);
      for (std::size_t c = 0; c < n; ++c) protos.push_back(paa::extract_prototype(received[c], arch_, probe, ids[c], round));
      auto res = paa::similarity_matrix(protos);
      for (const auto& d : res.diagnostics) {
        t.diagnostics.push_back("similarity(" + std::to_string(d.i) + "," + std::to_string(d.j) + "): " + d.reason);
      }
      sim = std::move(res.matrix);
    });

    // (4) clustering and per-cluster averaging.
    stage(round.value, "clustering", [&] {
      auto spectral = cfg_.spectral;
      spectral.k = std::min(cfg_.k_clusters, n);
      assignment = paa::spectral_cluster(sim, spectral, derive_seed(cfg_.seed, {stream::kmeans, round.value}));
      std::vector<double> weights;
      if (cfg_.weighted_cluster_average) {
        for (const auto& c : clients_) weights.push_back(static_cast<double>(c.train.size()));
      }
      auto aggregated = paa::aggregate_clusters(received, assignment, weights);
      for (std::size_t c = 0; c < n; ++c) models_[c] = aggregated[assignment.labels[c]];
    });

    // (6, first half) representatives and the block producer.
    stage(round.value, "centroid selection", [&] {
      auto report = ccca::centroid_report(sim, assignment, ids);
      queue_ = ccca::build_queue(report, queue_);
      producer = queue_.next_producer();
    });
  } else {
    stage(round.value, "federated averaging", [&] {
      assignment = ClusterAssignment::from_labels(std::vector<std::size_t>(n, 0), 1);
      assignment.centroids = {aggregator_};
      std::vector<double> weights;
      for (const auto& c : clients_) weights.push_back(static_cast<double>(c.train.size()));
      auto global = paa::aggregate_clusters(received, assignment, weights);
      for (std::size_t c = 0; c < n; ++c) models_[c] = global[0];
    });
  }

  // (5) aggregation record over the models actually received.
  ledger::AggregationRecord record;
  stage(round.value, "aggregation record", [&] {
    record.round = round;
    record.aggregator = aggregator_;
    record.k = assignment.k;
    for (std::size_t c = 0; c < n; ++c) record.entries.push_back({ids[c], model_hash(received[c]), assignment.labels[c]});
  });

  // (6) verification, rewards, fees, block.
  stage(round.value, "block production", [&] {
    auto settlement = ledger::settle_round(record, commits, assignment, cfg_.incentive, chain_.tokens(), aggregator_);
    std::vector<ledger::Transaction> txs;
    txs.reserve(commits.size() + 2 + settlement.fees.size());
    for (const auto& c : commits) txs.emplace_back(c);
    txs.emplace_back(record);
    txs.emplace_back(settlement.reward.posting);
    for (const auto& f : settlement.fees) txs.emplace_back(f);
    chain_.append(ledger::seal_block(chain_.height(), producer, chain_.tip_hash(), std::move(txs)));

    t.kappa = settlement.reward.kappa;
    t.fee = settlement.fee;
    t.eligible = settlement.reward.eligible;
    t.eligible_sizes = settlement.reward.eligible_sizes;
    t.rewards.assign(n, 0.0);
    for (const auto& r : settlement.reward.posting.rewards) t.rewards[r.client.index] = r.amount;
    for (auto& a : settlement.reward.audit) t.diagnostics.push_back(std::move(a));
  });

  t.accuracy = stage(round.value, "evaluation", [&] { return evaluate_round(models_, clients_, arch_); });
  t.mean_accuracy = std::accumulate(t.accuracy.begin(), t.accuracy.end(), 0.0) / static_cast<double>(n);
  t.producer = producer;
  t.block_height = chain_.height() - 1;
  t.cluster = assignment.labels;
  t.cluster_sizes = assignment.sizes();
  t.representatives = assignment.centroids;
  t.representative_of.resize(n);
  for (std::size_t c = 0; c < n; ++c) t.representative_of[c] = assignment.centroids[assignment.labels[c]];
  t.balances = chain_.tokens().balances();

  if (cfg_.rotating_aggregator && cfg_.mode == Mode::bfln) aggregator_ = producer;
  ++next_round_;
  return t;
}

std::vector<RoundTrace> Simulation::run_all() {
  std::vector<RoundTrace> traces;
  traces.reserve(cfg_.rounds);
  while (!finished()) traces.push_back(step());
  return traces;
}

std::vector<RoundTrace> run(const SimConfig& cfg) {
  Simulation s(cfg);
  return s.run_all();
}

}  // namespace bfln::sim
