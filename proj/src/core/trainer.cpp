#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "rng.hpp"

namespace bfln::trainer {

std::size_t ModelArchitecture::parameter_count() const {
  std::size_t total = 0;
  std::size_t in = input_dim;
  for (auto h : hidden_dims) {
    total += h * in + h;
    in = h;
  }
  return total + static_cast<std::size_t>(classes) * in + static_cast<std::size_t>(classes);
}

std::vector<LayerSpan> ModelArchitecture::layout() const {
  std::vector<LayerSpan> out;
  std::size_t offset = 0;
  std::size_t in = input_dim;
  auto add = [&](std::string name, std::size_t len) {
    out.push_back({std::move(name), offset, len});
    offset += len;
  };
  for (std::size_t l = 0; l < hidden_dims.size(); ++l) {
    add("repr" + std::to_string(l) + ".weight", hidden_dims[l] * in);
    add("repr" + std::to_string(l) + ".bias", hidden_dims[l]);
    in = hidden_dims[l];
  }
  add("head.weight", static_cast<std::size_t>(classes) * in);
  add("head.bias", static_cast<std::size_t>(classes));
  return out;
}

void ModelArchitecture::validate() const {
  if (input_dim == 0) fail(ErrorKind::configuration, "model input_dim must be positive");
  if (hidden_dims.empty()) fail(ErrorKind::configuration, "model needs at least one hidden layer");
  for (auto h : hidden_dims) {
    if (h == 0) fail(ErrorKind::configuration, "hidden layer widths must be positive");
  }
  if (classes < 2) fail(ErrorKind::configuration, "model needs at least 2 classes");
}

namespace {

// Forward/backward workspace over a flat parameter vector.
class Network {
 public:
  explicit Network(const ModelArchitecture& arch) : arch_(arch) {
    std::size_t in = arch.input_dim;
    std::size_t offset = 0;
    auto add_layer = [&](std::size_t out) {
      layers_.push_back({in, out, offset, offset + out * in});
      offset += out * in + out;
      in = out;
    };
    for (auto h : arch.hidden_dims) add_layer(h);
    add_layer(static_cast<std::size_t>(arch.classes));
    act_.resize(layers_.size() + 1);
    act_[0].resize(arch.input_dim);
    for (std::size_t l = 0; l < layers_.size(); ++l) act_[l + 1].resize(layers_[l].out);
    delta_.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) delta_[l].resize(layers_[l].out);
  }

  std::size_t hidden_layers() const { return layers_.size() - 1; }

  // Runs layers [0, upto). act_[upto] holds the result.
  void forward(std::span<const double> w, std::span<const double> x, std::size_t upto) {
    std::copy(x.begin(), x.end(), act_[0].begin());
    for (std::size_t l = 0; l < upto; ++l) {
      const auto& L = layers_[l];
      const double* W = w.data() + L.w_off;
      const double* b = w.data() + L.b_off;
      const auto& in = act_[l];
      auto& out = act_[l + 1];
      const bool hidden = l + 1 < layers_.size();
      for (std::size_t o = 0; o < L.out; ++o) {
        double z = b[o];
        const double* row = W + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) z += row[i] * in[i];
        out[o] = hidden ? (z > 0.0 ? z : 0.0) : z;
      }
    }
  }

  std::span<const double> output(std::size_t layer) const { return act_[layer]; }

  // Loss of one sample; adds d loss / d w into grad when grad is non-empty.
  double loss_and_grad(std::span<const double> w, std::span<const double> x, int label, std::span<double> grad) {
    forward(w, x, layers_.size());
    const auto& z = act_.back();
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    const double loss = lse - z[static_cast<std::size_t>(label)];
    if (grad.empty()) return loss;

    auto& top = delta_.back();
    for (std::size_t c = 0; c < z.size(); ++c) top[c] = std::exp(z[c] - lse);
    top[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& L = layers_[l];
      const auto& in = act_[l];
      const auto& d = delta_[l];
      double* gW = grad.data() + L.w_off;
      double* gb = grad.data() + L.b_off;
      for (std::size_t o = 0; o < L.out; ++o) {
        gb[o] += d[o];
        if (d[o] == 0.0) continue;
        double* grow = gW + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) grow[i] += d[o] * in[i];
      }
      if (l == 0) break;
      // Propagate to the previous hidden layer through its rectifier.
      const double* W = w.data() + L.w_off;
      auto& prev = delta_[l - 1];
      const auto& prev_act = act_[l];
      std::fill(prev.begin(), prev.end(), 0.0);
      for (std::size_t o = 0; o < L.out; ++o) {
        if (d[o] == 0.0) continue;
        const double* row = W + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) prev[i] += row[i] * d[o];
      }
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (!(prev_act[i] > 0.0)) prev[i] = 0.0;
      }
    }
    return loss;
  }

 private:
  struct Layer {
    std::size_t in, out, w_off, b_off;
  };
  const ModelArchitecture& arch_;
  std::vector<Layer> layers_;
  std::vector<std::vector<double>> act_;
  std::vector<std::vector<double>> delta_;
};

void check_params(const ParameterVector& params, const ModelArchitecture& arch) {
  if (params.values.size() != arch.parameter_count()) {
    fail(ErrorKind::shape, "parameter vector has " + std::to_string(params.values.size()) +
                               " values, architecture needs " + std::to_string(arch.parameter_count()));
  }
}

void check_inputs(const ModelArchitecture& arch, const data::Dataset& d) {
  if (d.dim != arch.input_dim) {
    fail(ErrorKind::shape, "data has " + std::to_string(d.dim) + " features, model expects " +
                               std::to_string(arch.input_dim));
  }
}

}  // namespace

ParameterVector init_parameters(const ModelArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  ParameterVector p;
  p.layout = arch.layout();
  p.values.resize(arch.parameter_count());
  Rng rng(derive_seed(seed, {stream::init}));
  std::size_t in = arch.input_dim;
  auto dims = arch.hidden_dims;
  dims.push_back(static_cast<std::size_t>(arch.classes));
  std::size_t offset = 0;
  for (auto out : dims) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < out * in + out; ++i) p.values[offset + i] = u(rng);
    offset += out * in + out;
    in = out;
  }
  return p;
}

ParameterVector zero_parameters(const ModelArchitecture& arch) {
  arch.validate();
  ParameterVector p;
  p.layout = arch.layout();
  p.values.assign(arch.parameter_count(), 0.0);
  return p;
}

ParameterVector train_local(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& data,
                            const TrainConfig& cfg, RoundIndex round, ClientId client) {
  check_params(params, arch);
  if (data.size() == 0) {
    fail(ErrorKind::training, "client " + std::to_string(client.index) + " has no training data in round " +
                                  std::to_string(round.value));
  }
  check_inputs(arch, data);
  if (cfg.batch_size == 0) fail(ErrorKind::configuration, "batch_size must be positive");

  ParameterVector out = params;
  Network net(arch);
  std::vector<double> grad(out.values.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, {stream::batches, client.index, round.value}));

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t s = start; s < end; ++s) {
        loss += net.loss_and_grad(out.values, data.row(order[s]), data.labels[order[s]], grad);
      }
      if (!std::isfinite(loss)) {
        fail(ErrorKind::divergence, "loss diverged for client " + std::to_string(client.index) + " in round " +
                                        std::to_string(round.value));
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < grad.size(); ++i) out.values[i] -= scale * grad[i];
    }
  }
  for (double v : out.values) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::divergence, "parameters diverged for client " + std::to_string(client.index) + " in round " +
                                      std::to_string(round.value));
    }
  }
  return out;
}

std::vector<std::vector<double>> embed(const ParameterVector& params, const ModelArchitecture& arch,
                                       std::span<const double> inputs) {
  check_params(params, arch);
  if (inputs.size() % arch.input_dim != 0) {
    fail(ErrorKind::shape, "input batch of " + std::to_string(inputs.size()) + " values is not a multiple of " +
                               std::to_string(arch.input_dim));
  }
  Network net(arch);
  const std::size_t rows = inputs.size() / arch.input_dim;
  std::vector<std::vector<double>> out;
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    net.forward(params.values, inputs.subspan(r * arch.input_dim, arch.input_dim), net.hidden_layers());
    auto h = net.output(net.hidden_layers());
    out.emplace_back(h.begin(), h.end());
  }
  return out;
}

std::vector<double> logits(const ParameterVector& params, const ModelArchitecture& arch, std::span<const double> x) {
  check_params(params, arch);
  if (x.size() != arch.input_dim) fail(ErrorKind::shape, "input row has wrong dimension");
  Network net(arch);
  net.forward(params.values, x, net.hidden_layers() + 1);
  auto z = net.output(net.hidden_layers() + 1);
  return {z.begin(), z.end()};
}

double evaluate(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& data) {
  check_params(params, arch);
  if (data.size() == 0) fail(ErrorKind::training, "cannot evaluate on empty data");
  check_inputs(arch, data);
  Network net(arch);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    net.forward(params.values, data.row(i), net.hidden_layers() + 1);
    auto z = net.output(net.hidden_layers() + 1);
    auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_loss(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& batch) {
  check_params(params, arch);
  check_inputs(arch, batch);
  Network net(arch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) total += net.loss_and_grad(params.values, batch.row(i), batch.labels[i], {});
  return total / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const ParameterVector& params, const ModelArchitecture& arch,
                                  const data::Dataset& batch) {
  check_params(params, arch);
  check_inputs(arch, batch);
  Network net(arch);
  std::vector<double> grad(params.values.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) net.loss_and_grad(params.values, batch.row(i), batch.labels[i], grad);
  for (auto& g : grad) g /= static_cast<double>(batch.size());
  return grad;
}

double gradient_check(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& batch,
                      const GradientCheckOptions& options) {
  const auto analytic = options.analytic ? options.analytic(params, arch, batch) : loss_gradient(params, arch, batch);
  const std::size_t n = params.values.size();

  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), 0);
  if (n > options.coordinates) {
    Rng rng(derive_seed(options.seed, {stream::gradcheck}));
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.coordinates);
    std::sort(coords.begin(), coords.end());
  }

  ParameterVector probe = params;
  double worst = 0.0;
  for (auto c : coords) {
    const double orig = probe.values[c];
    probe.values[c] = orig + options.step;
    const double up = mean_loss(probe, arch, batch);
    probe.values[c] = orig - options.step;
    const double down = mean_loss(probe, arch, batch);
    probe.values[c] = orig;
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::abs(analytic[c]), std::abs(numeric), 1e-5});
    worst = std::max(worst, std::abs(analytic[c] - numeric) / denom);
  }
  return worst;
}

}  // namespace bfln::trainer
