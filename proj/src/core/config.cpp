#include "config.hpp"

#include <fstream>
#include <limits>
#include <set>

#include "error.hpp"

namespace bfln::config {

bool non_negative_integer(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail(ErrorKind::configuration, "field '" + where() + "': expected an object");
  }

  std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void get(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!non_negative_integer(v)) bad(key, "expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void get(const std::string& key, std::uint64_t& out, bool) {
    std::size_t tmp = out;
    get(key, tmp);
    out = tmp;
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) bad(key, "expected an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad(key, "out of range");
    out = static_cast<int>(x);
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) bad(key, "expected a number");
    out = v.get<double>();
  }

  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) bad(key, "expected a boolean");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) bad(key, "expected a string");
    out = v.get<std::string>();
  }

  void get(const std::string& key, std::vector<std::size_t>& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) bad(key, "expected an array of non-negative integers");
    out.clear();
    for (const auto& e : v) {
      if (!non_negative_integer(e)) bad(key, "expected an array of non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
  }

  template <class F>
  void child(const std::string& key, F&& f) {
    if (!has(key)) return;
    Reader r(j_.at(key), field(key));
    f(r);
    r.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(ErrorKind::configuration, "field '" + field(k) + "': unknown field");
    }
  }

  [[noreturn]] void bad(const std::string& key, const std::string& why) const {
    fail(ErrorKind::configuration, "field '" + field(key) + "': " + why);
  }

 private:
  std::string where() const { return prefix_.empty() ? "<root>" : prefix_; }

  const Json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace

sim::SimConfig sim_from_json(const Json& j) {
  sim::SimConfig c;
  Reader r(j, "");
  r.get("clients", c.clients);
  r.get("aggregators", c.aggregators);
  r.get("aggregator_client", c.aggregator_client);
  r.get("rounds", c.rounds);
  r.get("k_clusters", c.k_clusters);
  r.get("skew", c.skew);
  r.get("seed", c.seed, true);
  if (r.has("mode")) {
    std::string m;
    r.get("mode", m);
    auto mode = sim::parse_mode(m);
    if (!mode) r.bad("mode", "expected 'bfln' or 'fedavg'");
    c.mode = *mode;
  }
  r.get("rotating_aggregator", c.rotating_aggregator);
  r.get("weighted_cluster_average", c.weighted_cluster_average);
  r.get("workers", c.workers);
  r.get("initial_stake", c.initial_stake);
  r.child("probe", [&](Reader& p) {
    p.get("psi", c.probe.psi);
    p.get("label", c.probe.label);
  });
  r.child("train", [&](Reader& t) {
    t.get("batch_size", c.train.batch_size);
    t.get("learning_rate", c.train.learning_rate);
    t.get("local_epochs", c.train.local_epochs);
  });
  r.child("model", [&](Reader& m) { m.get("hidden_dims", c.hidden_dims); });
  r.child("incentive", [&](Reader& i) {
    i.get("total_reward", c.incentive.total_reward);
    i.get("rho", c.incentive.rho);
  });
  r.child("spectral", [&](Reader& s) {
    s.get("kmeans_restarts", c.spectral.kmeans_restarts);
    s.get("kmeans_max_iters", c.spectral.kmeans_max_iters);
    s.get("eigen_tolerance", c.spectral.eigen_tolerance);
    s.get("eigen_max_sweeps", c.spectral.eigen_max_sweeps);
  });
  r.child("data", [&](Reader& d) {
    d.get("source", c.data.source);
    d.get("classes", c.data.classes);
    d.get("dim", c.data.dim);
    d.get("per_class", c.data.per_class);
    d.get("separation", c.data.separation);
    d.get("groups", c.data.groups);
    d.get("group_sizes", c.data.group_sizes);
    d.get("images", c.data.images);
    d.get("labels", c.data.labels);
    d.get("csv", c.data.csv);
    d.get("holdout", c.data.holdout);
    d.get("min_samples_per_client", c.data.min_samples_per_client);
  });
  r.finish();
  c.train.seed = c.seed;
  c.validate();
  return c;
}

Json sim_to_json(const sim::SimConfig& c) {
  Json j;
  j["clients"] = c.clients;
  j["aggregators"] = c.aggregators;
  j["aggregator_client"] = c.aggregator_client;
  j["rounds"] = c.rounds;
  j["k_clusters"] = c.k_clusters;
  j["skew"] = c.skew;
  j["seed"] = c.seed;
  j["mode"] = sim::to_string(c.mode);
  j["rotating_aggregator"] = c.rotating_aggregator;
  j["weighted_cluster_average"] = c.weighted_cluster_average;
  j["workers"] = c.workers;
  j["initial_stake"] = c.initial_stake;
  j["probe"] = {{"psi", c.probe.psi}, {"label", c.probe.label}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"local_epochs", c.train.local_epochs}};
  j["model"] = {{"hidden_dims", c.hidden_dims}};
  j["incentive"] = {{"total_reward", c.incentive.total_reward}, {"rho", c.incentive.rho}};
  j["spectral"] = {{"kmeans_restarts", c.spectral.kmeans_restarts},
                   {"kmeans_max_iters", c.spectral.kmeans_max_iters},
                   {"eigen_tolerance", c.spectral.eigen_tolerance},
                   {"eigen_max_sweeps", c.spectral.eigen_max_sweeps}};
  Json d;
  d["source"] = c.data.source;
  d["classes"] = c.data.classes;
  d["dim"] = c.data.dim;
  d["per_class"] = c.data.per_class;
  d["separation"] = c.data.separation;
  d["groups"] = c.data.groups;
  d["group_sizes"] = c.data.group_sizes;
  d["images"] = c.data.images;
  d["labels"] = c.data.labels;
  d["csv"] = c.data.csv;
  d["holdout"] = c.data.holdout;
  d["min_samples_per_client"] = c.data.min_samples_per_client;
  j["data"] = std::move(d);
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::configuration, "cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::configuration, "config file '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace bfln::config
