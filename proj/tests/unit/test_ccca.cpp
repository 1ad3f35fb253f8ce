#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "core/ccca.hpp"
#include "core/error.hpp"

using namespace bfln;
using namespace bfln::ccca;

namespace {

SimilarityMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  SimilarityMatrix s(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) s(i, j) = rows[i][j];
  return s;
}

SimilarityMatrix random_matrix(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SimilarityMatrix s(m);
  for (std::size_t i = 0; i < m; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) s(i, j) = s(j, i) = u(rng);
  }
  return s;
}

std::size_t brute_force_argmin(const SimilarityMatrix& s, const std::vector<std::size_t>& members) {
  const std::size_t m = s.size();
  std::vector<double> mean(m, 0.0);
  for (auto i : members)
    for (std::size_t j = 0; j < m; ++j) mean[j] += s(i, j) / static_cast<double>(members.size());
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t p = 0; p < members.size(); ++p) {
    double d = 0;
    for (std::size_t j = 0; j < m; ++j) d += (s(members[p], j) - mean[j]) * (s(members[p], j) - mean[j]);
    d = std::sqrt(d);
    if (p == 0 || d < best_d - 1e-12 * std::max(1.0, best_d)) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

}  // namespace

TEST(Centroid, SingletonAndPair) {
  auto s = random_matrix(5, 1);
  std::vector<std::size_t> one = {3};
  auto c = cluster_centroid(s, one);
  EXPECT_EQ(c, std::vector<double>(s.row(3).begin(), s.row(3).end()));
  std::vector<std::size_t> two = {1, 4};
  auto c2 = cluster_centroid(s, two);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(c2[j], (s(1, j) + s(4, j)) / 2);
}

TEST(Centroid, MatchesNaiveMean) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = random_matrix(9, seed);
    std::vector<std::size_t> members = {0, 2, 5, 8};
    auto c = cluster_centroid(s, members);
    for (std::size_t j = 0; j < 9; ++j) {
      double sum = 0;
      for (auto i : members) sum += s(i, j);
      EXPECT_NEAR(c[j], sum / 4.0, 1e-12);
    }
  }
  std::vector<std::size_t> none;
  EXPECT_THROW(cluster_centroid(random_matrix(3, 0), none), Error);
}

TEST(Representative, SingletonHasZeroDistance) {
  auto s = random_matrix(4, 2);
  std::vector<std::size_t> one = {2};
  auto r = select_representative(s, one);
  EXPECT_EQ(r.position, 0u);
  EXPECT_EQ(r.distances[0], 0.0);
}

TEST(Representative, PairPicksLowerClient) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = random_matrix(6, seed);
    std::vector<std::size_t> pair = {1, 4};
    EXPECT_EQ(select_representative(s, pair).position, 0u) << seed;
  }
}

TEST(Representative, ThreeMemberExample) {
  auto s = from_rows({{1, 0.9, 0.1}, {0.9, 1, 0.1}, {0.1, 0.1, 1}});
  std::vector<std::size_t> members = {0, 1, 2};
  auto r = select_representative(s, members);
  EXPECT_EQ(r.position, brute_force_argmin(s, members));
  EXPECT_EQ(r.position, 0u);
}

TEST(Representative, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto s = random_matrix(10, seed);
    std::vector<std::size_t> members = {1, 3, 4, 7, 9};
    auto r = select_representative(s, members);
    EXPECT_EQ(r.position, brute_force_argmin(s, members)) << seed;
    double avg = 0;
    for (double d : r.distances) avg += d / 5.0;
    EXPECT_LE(r.distances[r.position], avg);
  }
}

TEST(Representative, TranslationInvariant) {
  auto s = random_matrix(6, 3);
  std::vector<std::size_t> members = {0, 2, 3, 5};
  const auto base = select_representative(s, members).position;
  SimilarityMatrix shifted = s;
  // Adding the same vector to every member row leaves distances unchanged.
  for (auto i : members)
    for (std::size_t j = 0; j < 6; ++j) shifted(i, j) += 0.01 * static_cast<double>(j);
  EXPECT_EQ(select_representative(shifted, members).position, base);
}

TEST(Report, FillsCentroidsWithMembers) {
  auto s = random_matrix(6, 4);
  auto a = ClusterAssignment::from_labels({0, 1, 0, 2, 1, 0}, 3);
  std::vector<ClientId> ids;
  for (std::size_t i = 0; i < 6; ++i) ids.push_back(ClientId{i + 10});
  auto rep = centroid_report(s, a, ids);
  ASSERT_EQ(rep.clusters.size(), 3u);
  ASSERT_EQ(a.centroids.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    bool member = false;
    for (auto m : a.members[k]) member |= ids[m] == a.centroids[k];
    EXPECT_TRUE(member);
    EXPECT_EQ(rep.clusters[k].selected, a.centroids[k]);
  }
  EXPECT_EQ(rep.clusters[2].selected.index, 13u);
}

TEST(Queue, RoundRobin) {
  PackingQueue q({ClientId{4}, ClientId{1}, ClientId{9}});
  std::vector<std::size_t> got;
  for (int i = 0; i < 5; ++i) got.push_back(q.next_producer().index);
  EXPECT_EQ(got, std::vector<std::size_t>({4, 1, 9, 4, 1}));
  PackingQueue single({ClientId{2}});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(single.next_producer().index, 2u);
  EXPECT_THROW(PackingQueue({ClientId{1}, ClientId{1}}), Error);
}

TEST(Queue, CursorContinuesWhenSetUnchangedAndResetsOtherwise) {
  CentroidReport r;
  r.clusters.resize(2);
  r.clusters[0].selected = ClientId{3};
  r.clusters[1].selected = ClientId{5};
  auto q = build_queue(r, PackingQueue{});
  EXPECT_EQ(q.next_producer().index, 3u);
  auto q2 = build_queue(r, q);
  EXPECT_EQ(q2.cursor(), 1u);
  EXPECT_EQ(q2.next_producer().index, 5u);
  r.clusters[1].selected = ClientId{6};
  auto q3 = build_queue(r, q2);
  EXPECT_EQ(q3.cursor(), 0u);
  EXPECT_EQ(q3.next_producer().index, 3u);
}

TEST(Queue, FairnessOverStableQueue) {
  CentroidReport r;
  r.clusters.resize(4);
  for (std::size_t k = 0; k < 4; ++k) r.clusters[k].selected = ClientId{k * 2};
  PackingQueue q;
  std::vector<int> counts(8, 0);
  for (int t = 0; t < 30; ++t) {
    q = build_queue(r, q);
    ++counts[q.next_producer().index];
  }
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_GE(counts[k * 2], 7);
    EXPECT_LE(counts[k * 2], 8);
  }
}
