#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "domain.hpp"

namespace bfln::data {

struct Dataset {
  std::vector<double> features;  // row-major, size() x dim
  std::vector<int> labels;
  std::size_t dim = 0;
  int classes = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }

  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;
};

// Gaussian mixture with identity covariance. Class means lie on a sphere of
// radius `class_separation` and depend only on (seed, classes, dim).
// `label_shift` rotates the class-to-mean mapping: class c is drawn around
// the mean of class (c + label_shift) mod classes, which plants a second
// feature distribution over the same label set.
Dataset generate_synthetic(std::uint64_t seed, int classes, std::size_t dim, std::size_t per_class,
                           double class_separation, int label_shift = 0);

struct Partition {
  std::vector<std::vector<std::size_t>> clients;
  double skew = 0.0;
};

inline std::size_t default_min_samples(std::size_t batch_size) { return 2 * batch_size; }

// Per class, Dirichlet(skew) proportions decide how that class's samples are
// spread over clients. Clients below `min_samples` are topped up from the
// currently largest client.
Partition partition_dirichlet(const Dataset& d, std::size_t clients, double skew, std::uint64_t seed,
                              std::size_t min_samples = default_min_samples(64));

struct ClientSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Shuffles each client's indices and holds out `fraction` (at least one
// sample when the client has two or more).
std::vector<ClientSplit> split_holdout(const Partition& p, double fraction, std::uint64_t seed);

// MNIST-style IDX files. Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Header `label,f0,f1,...`, one sample per row.
Dataset load_csv(const std::filesystem::path& path);

}  // namespace bfln::data
