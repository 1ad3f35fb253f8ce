#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "domain.hpp"

namespace bfln::ccca {

// A member's point is its full row of the similarity matrix. Member lists
// hold matrix positions.
std::vector<double> cluster_centroid(const SimilarityMatrix& s, std::span<const std::size_t> members);

// Distances within this relative tolerance count as ties and go to the lower
// position.
inline constexpr double kTieTolerance = 1e-12;

struct Representative {
  std::size_t position = 0;  // index into members
  std::vector<double> distances;  // parallel to members
};

Representative select_representative(const SimilarityMatrix& s, std::span<const std::size_t> members);

struct ClusterCentroid {
  std::vector<double> centroid;
  std::vector<std::size_t> members;
  std::vector<double> distances;
  ClientId selected;
};

struct CentroidReport {
  std::vector<ClusterCentroid> clusters;

  std::vector<ClientId> representatives() const;
};

// `clients[p]` is the ClientId at matrix position p. Fills
// assignment.centroids as a side effect.
CentroidReport centroid_report(const SimilarityMatrix& s, ClusterAssignment& assignment,
                               std::span<const ClientId> clients);

class PackingQueue {
 public:
  PackingQueue() = default;
  explicit PackingQueue(std::vector<ClientId> producers);

  const std::vector<ClientId>& producers() const { return producers_; }
  std::size_t cursor() const { return cursor_; }
  bool empty() const { return producers_.empty(); }

  std::optional<ClientId> current() const;
  // Returns the producer for the next block and advances the cursor.
  ClientId next_producer();

 private:
  friend PackingQueue build_queue(const CentroidReport&, const PackingQueue&);
  std::vector<ClientId> producers_;
  std::size_t cursor_ = 0;
};

// Representatives in cluster order. When the set of representatives is the
// same as in `previous`, the previous order and cursor carry over; any change
// resets the cursor to 0.
PackingQueue build_queue(const CentroidReport& report, const PackingQueue& previous);

}  // namespace bfln::ccca
