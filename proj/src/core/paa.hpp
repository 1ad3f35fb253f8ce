#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "domain.hpp"
#include "trainer.hpp"

namespace bfln::paa {

// psi same-class inputs taken from the aggregation client's local data.
struct ProbeSet {
  std::vector<double> inputs;  // row-major psi x dim
  std::size_t dim = 0;
  int label = 0;
  std::size_t psi = 0;

  void validate() const;
};

// Draws up to `psi` samples labelled `label` from `indices` of `d`. Fewer
// are used when the client holds fewer; none is a configuration error.
ProbeSet draw_probe(const data::Dataset& d, std::span<const std::size_t> indices, int label, std::size_t psi,
                    std::uint64_t seed);

// Most common label among `indices`, lowest label on ties.
int most_frequent_label(const data::Dataset& d, std::span<const std::size_t> indices);

struct SpectralConfig {
  std::size_t k = 2;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_max_iters = 100;
  double eigen_tolerance = 1e-10;
  std::size_t eigen_max_sweeps = 100;
};

Prototype extract_prototype(const ParameterVector& model, const trainer::ModelArchitecture& arch,
                            const ProbeSet& probe, ClientId source = {}, RoundIndex round = {});

// Population Pearson correlation clamped to [-1, 1]. Empty when either
// vector is constant.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct SimilarityDiagnostic {
  std::size_t i = 0;
  std::size_t j = 0;
  std::string reason;
};

struct SimilarityResult {
  SimilarityMatrix matrix;
  std::vector<SimilarityDiagnostic> diagnostics;
};

// Constant prototypes contribute similarity 0.0 and a diagnostic.
SimilarityResult similarity_matrix(std::span<const Prototype> prototypes);

// I - D^{-1/2} A D^{-1/2} with A = (S + 1) / 2 and unit diagonal.
std::vector<double> normalized_laplacian(const SimilarityMatrix& s);

// Rows of the eigenvectors for the k smallest Laplacian eigenvalues,
// each row scaled to unit length (zero rows stay zero).
std::vector<std::vector<double>> spectral_embedding(const SimilarityMatrix& s, std::size_t k, double tolerance,
                                                    std::size_t max_sweeps);

struct KMeansResult {
  std::vector<std::size_t> labels;
  double wcss = 0.0;
  std::size_t restart = 0;
};

// k-means++ seeding, Lloyd iterations, best restart by within-cluster sum of
// squares (earliest restart wins ties). Empty clusters take the point
// farthest from its center among clusters that can spare one.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::size_t restarts,
                    std::size_t max_iters, std::uint64_t seed);

ClusterAssignment spectral_cluster(const SimilarityMatrix& s, const SpectralConfig& cfg, std::uint64_t seed);

// Per-cluster mean of member models. Uniform when `weights` is empty,
// otherwise weighted by weights[model]. Singletons are returned unchanged.
std::vector<ParameterVector> aggregate_clusters(std::span<const ParameterVector> models,
                                                const ClusterAssignment& assignment,
                                                std::span<const double> weights = {});

}  // namespace bfln::paa
