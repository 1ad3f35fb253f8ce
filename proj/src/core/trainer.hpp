#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "data.hpp"
#include "domain.hpp"

namespace bfln::trainer {

// Feed-forward rectifier network. The hidden stack is the representation;
// the final linear layer is the decision head.
struct ModelArchitecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  int classes = 0;

  std::size_t repr_dim() const { return hidden_dims.empty() ? 0 : hidden_dims.back(); }
  std::size_t parameter_count() const;
  std::vector<LayerSpan> layout() const;
  void validate() const;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t local_epochs = 5;
  std::uint64_t seed = 0;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
ParameterVector init_parameters(const ModelArchitecture& arch, std::uint64_t seed);
ParameterVector zero_parameters(const ModelArchitecture& arch);

// Mini-batch SGD on mean cross-entropy. Batch order is a function of
// (cfg.seed, client, round) only.
ParameterVector train_local(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& data,
                            const TrainConfig& cfg, RoundIndex round, ClientId client);

// Row-major batch in, one repr_dim() vector per row out.
std::vector<std::vector<double>> embed(const ParameterVector& params, const ModelArchitecture& arch,
                                       std::span<const double> inputs);

std::vector<double> logits(const ParameterVector& params, const ModelArchitecture& arch, std::span<const double> x);

// Fraction of rows whose argmax logit (lowest index on ties) equals the label.
double evaluate(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& data);

double mean_loss(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& batch);

// Gradient of mean_loss with respect to every parameter.
std::vector<double> loss_gradient(const ParameterVector& params, const ModelArchitecture& arch,
                                  const data::Dataset& batch);

using GradientFn =
    std::function<std::vector<double>(const ParameterVector&, const ModelArchitecture&, const data::Dataset&)>;

struct GradientCheckOptions {
  std::size_t coordinates = 50;
  double step = 1e-5;
  std::uint64_t seed = 0;
  GradientFn analytic;  // defaults to loss_gradient
};

// Max over sampled coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-5).
// When the network has no more parameters than `coordinates`, all are checked.
double gradient_check(const ParameterVector& params, const ModelArchitecture& arch, const data::Dataset& batch,
                      const GradientCheckOptions& options = {});

}  // namespace bfln::trainer
