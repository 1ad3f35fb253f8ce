#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace bfln {

struct ClientId {
  std::size_t index = 0;
  auto operator<=>(const ClientId&) const = default;
};

struct RoundIndex {
  std::size_t value = 0;
  auto operator<=>(const RoundIndex&) const = default;
};

using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(std::span<const std::uint8_t> bytes);
// Accepts lowercase or uppercase hex; throws validation error otherwise.
Digest digest_from_hex(std::string_view hex);

Digest sha256(std::span<const std::uint8_t> bytes);

struct LayerSpan {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const LayerSpan&) const = default;
};

// Flat model weights plus the map from spans to layers. The layout is shared
// by every client in a simulation.
struct ParameterVector {
  std::vector<double> values;
  std::vector<LayerSpan> layout;

  // Layout must tile `values` exactly and every value must be finite.
  void validate() const;
  bool same_layout(const ParameterVector& other) const { return layout == other.layout; }

  // Single anonymous span covering all values.
  static ParameterVector flat(std::vector<double> values) {
    ParameterVector p;
    p.layout.push_back({"flat", 0, values.size()});
    p.values = std::move(values);
    return p;
  }
};

struct Prototype {
  std::vector<double> values;
  ClientId source;
  RoundIndex round;
  int probe_label = 0;
};

// Dense row-major M x M matrix. Symmetric by construction in similarity_matrix.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t m) : m_(m), entries_(m * m, 0.0) {}

  std::size_t size() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * m_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * m_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * m_, m_};
  }
  std::span<const double> entries() const { return entries_; }

  // Symmetric, unit diagonal, entries in [-1, 1].
  bool well_formed() const;

 private:
  std::size_t m_ = 0;
  std::vector<double> entries_;
};

// Partition of M positions into k clusters. Labels are normalized so that
// cluster c is the c-th cluster in order of its smallest member.
struct ClusterAssignment {
  std::vector<std::size_t> labels;
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> members;
  std::vector<ClientId> centroids;
  bool degenerate = false;

  static ClusterAssignment from_labels(std::vector<std::size_t> labels, std::size_t k);
  std::vector<std::size_t> sizes() const;
};

// Relabel so clusters are numbered by first appearance.
std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels);

// 8-byte little-endian count, then each value as little-endian IEEE-754.
std::vector<std::uint8_t> canonical_encode(const ParameterVector& p);
std::vector<double> canonical_decode(std::span<const std::uint8_t> bytes);

Digest model_hash(const ParameterVector& p);

// Little-endian primitive writers shared by the ledger's transaction encoding.
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

}  // namespace bfln
