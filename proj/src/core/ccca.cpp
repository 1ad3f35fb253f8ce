#include "ccca.hpp"

#include <algorithm>
#include <cmath>

namespace bfln::ccca {

std::vector<double> cluster_centroid(const SimilarityMatrix& s, std::span<const std::size_t> members) {
  if (members.empty()) fail(ErrorKind::validation, "cluster_centroid: empty cluster");
  auto first = s.row(members.front());
  std::vector<double> c(first.begin(), first.end());
  for (std::size_t n = 1; n < members.size(); ++n) {
    auto r = s.row(members[n]);
    const double f = 1.0 / static_cast<double>(n + 1);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += f * (r[i] - c[i]);
  }
  return c;
}

Representative select_representative(const SimilarityMatrix& s, std::span<const std::size_t> members) {
  const auto centroid = cluster_centroid(s, members);
  Representative rep;
  rep.distances.reserve(members.size());
  for (auto m : members) {
    auto r = s.row(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = r[i] - centroid[i];
      sum += d * d;
    }
    rep.distances.push_back(std::sqrt(sum));
  }
  std::size_t best = 0;
  for (std::size_t n = 1; n < members.size(); ++n) {
    const double cur = rep.distances[n];
    const double top = rep.distances[best];
    const bool tie = std::abs(cur - top) <= kTieTolerance * std::max({1.0, cur, top});
    if (tie) {
      if (members[n] < members[best]) best = n;
    } else if (cur < top) {
      best = n;
    }
  }
  rep.position = best;
  return rep;
}

std::vector<ClientId> CentroidReport::representatives() const {
  std::vector<ClientId> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(c.selected);
  return out;
}

CentroidReport centroid_report(const SimilarityMatrix& s, ClusterAssignment& assignment,
                               std::span<const ClientId> clients) {
  if (clients.size() != s.size()) fail(ErrorKind::validation, "client list does not match similarity matrix");
  CentroidReport report;
  assignment.centroids.clear();
  for (const auto& members : assignment.members) {
    if (members.empty()) continue;
    auto rep = select_representative(s, members);
    ClusterCentroid cc;
    cc.centroid = cluster_centroid(s, members);
    cc.members = members;
    cc.distances = std::move(rep.distances);
    cc.selected = clients[members[rep.position]];
    assignment.centroids.push_back(cc.selected);
    report.clusters.push_back(std::move(cc));
  }
  return report;
}

PackingQueue::PackingQueue(std::vector<ClientId> producers) : producers_(std::move(producers)) {
  auto sorted = producers_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(ErrorKind::validation, "packing queue contains a duplicate client");
  }
}

std::optional<ClientId> PackingQueue::current() const {
  if (producers_.empty()) return std::nullopt;
  return producers_[cursor_];
}

ClientId PackingQueue::next_producer() {
  if (producers_.empty()) fail(ErrorKind::validation, "packing queue is empty");
  ClientId id = producers_[cursor_];
  cursor_ = (cursor_ + 1) % producers_.size();
  return id;
}

PackingQueue build_queue(const CentroidReport& report, const PackingQueue& previous) {
  if (report.clusters.empty()) fail(ErrorKind::validation, "build_queue: report has no clusters");
  PackingQueue next(report.representatives());
  auto a = next.producers_;
  auto b = previous.producers_;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a == b) return previous;
  return next;
}

}  // namespace bfln::ccca
