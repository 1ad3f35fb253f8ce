#include <gtest/gtest.h>

#include <bit>
#include <numeric>

#include "core/error.hpp"
#include "core/sim.hpp"

using namespace bfln;
using namespace bfln::sim;

namespace {

SimConfig small(std::size_t rounds = 3) {
  SimConfig c;
  c.clients = 6;
  c.rounds = rounds;
  c.k_clusters = 2;
  c.skew = 0.5;
  c.hidden_dims = {8, 6};
  c.train.batch_size = 8;
  c.train.learning_rate = 0.05;
  c.train.local_epochs = 1;
  c.probe.psi = 8;
  c.data.classes = 4;
  c.data.dim = 6;
  c.data.per_class = 60;
  return c;
}

bool same_traces(const std::vector<RoundTrace>& a, const std::vector<RoundTrace>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].accuracy != b[r].accuracy || a[r].cluster != b[r].cluster || a[r].balances != b[r].balances ||
        a[r].producer != b[r].producer)
      return false;
  }
  return true;
}

}  // namespace

TEST(Sim, ZeroRoundsLeavesGenesisOnly) {
  Simulation s(small(0));
  EXPECT_TRUE(s.run_all().empty());
  EXPECT_EQ(s.chain().height(), 1u);
}

TEST(Sim, SingleClusterGivesIdenticalModels) {
  auto c = small(2);
  c.k_clusters = 1;
  Simulation s(c);
  auto t = s.run_all();
  for (const auto& m : s.models()) EXPECT_EQ(m.values, s.models()[0].values);
  EXPECT_EQ(t.back().cluster, std::vector<std::size_t>(6, 0));
}

TEST(Sim, TraceShapeAndOrdering) {
  Simulation s(small(3));
  auto traces = s.run_all();
  ASSERT_EQ(traces.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(traces[r].round.value, r);
    EXPECT_EQ(traces[r].block_height, r + 1);
    EXPECT_EQ(traces[r].accuracy.size(), 6u);
    EXPECT_EQ(traces[r].cluster.size(), 6u);
  }
  // Within each block: commits, then the record, then the posting.
  const auto& blocks = s.chain().blocks();
  ASSERT_EQ(blocks.size(), 4u);
  for (std::size_t h = 1; h < blocks.size(); ++h) {
    int record_at = -1, posting_at = -1;
    for (std::size_t i = 0; i < blocks[h].transactions.size(); ++i) {
      const auto& tx = blocks[h].transactions[i];
      if (std::holds_alternative<ledger::AggregationRecord>(tx)) {
        record_at = static_cast<int>(i);
        EXPECT_EQ(std::get<ledger::AggregationRecord>(tx).round.value, h - 1);
      }
      if (std::holds_alternative<ledger::RewardPosting>(tx)) posting_at = static_cast<int>(i);
    }
    EXPECT_GE(record_at, 6);
    EXPECT_GT(posting_at, record_at);
  }
  EXPECT_LT(s.chain().tokens().conservation_error(), 1e-9);
  EXPECT_TRUE(s.chain().verify_integrity());
}

TEST(Sim, DeterministicAndWorkerInvariant) {
  auto c = small(3);
  Simulation a(c), b(c);
  auto ta = a.run_all(), tb = b.run_all();
  EXPECT_TRUE(same_traces(ta, tb));
  EXPECT_EQ(a.chain().tip_hash(), b.chain().tip_hash());
  c.workers = 4;
  Simulation p(c);
  auto tp = p.run_all();
  EXPECT_TRUE(same_traces(ta, tp));
  EXPECT_EQ(a.chain().tip_hash(), p.chain().tip_hash());
}

TEST(Sim, BaselineIsOneGlobalModelWithFlatRewards) {
  auto c = small(2);
  c.mode = Mode::fedavg_baseline;
  Simulation s(c);
  auto t = s.run_all();
  for (const auto& m : s.models()) EXPECT_EQ(m.values, s.models()[0].values);
  for (double r : t.back().rewards) EXPECT_NEAR(r, 20.0 / 6.0, 1e-12);
  EXPECT_EQ(t.back().producer, ClientId{0});
}

TEST(Sim, OutOfClusterPerturbationDoesNotLeak) {
  // Head parameters do not feed the prototypes, so clustering is unchanged
  // and only the perturbed client's cluster model may move.
  auto c = small(1);
  Simulation base(c);
  auto t = base.run_all();
  const std::size_t victim = 2;
  Hooks hooks;
  hooks.on_model_received = [&](RoundIndex, ClientId id, ParameterVector& p) {
    if (id.index == victim) p.values.back() += 0.5;
  };
  Simulation pert(c, hooks);
  auto tp = pert.run_all();
  ASSERT_EQ(t[0].cluster, tp[0].cluster);
  for (std::size_t i = 0; i < c.clients; ++i) {
    if (t[0].cluster[i] == t[0].cluster[victim]) {
      EXPECT_NE(base.models()[i].values, pert.models()[i].values);
    } else {
      EXPECT_EQ(base.models()[i].values, pert.models()[i].values);
    }
  }
  // The tampered client fails verification and earns nothing.
  EXPECT_EQ(tp[0].rewards[victim], 0.0);
  EXPECT_FALSE(tp[0].eligible[victim]);
}

TEST(Sim, RotatingAggregatorFollowsProducer) {
  auto c = small(4);
  c.rotating_aggregator = true;
  Simulation s(c);
  auto t = s.run_all();
  for (std::size_t r = 1; r < t.size(); ++r) EXPECT_EQ(t[r].aggregator, t[r - 1].producer);
}

TEST(Sim, UntrainedModelNearChance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig c = small(0);
    c.seed = seed;
    c.data.classes = 10;
    c.data.per_class = 50;
    c.clients = 4;
    c.skew = 1e6;
    c.train.batch_size = 4;
    Simulation s(c);
    auto acc = evaluate_round(s.models(), s.clients(), s.architecture());
    ASSERT_EQ(acc.size(), 4u);
    const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / 4.0;
    EXPECT_GE(mean, 0.0);
    EXPECT_LE(mean, 0.3);
  }
}

TEST(Sim, HeldOutSplitIsTwentyPercent) {
  Simulation s(small(0));
  for (const auto& cd : s.clients()) {
    const double n = static_cast<double>(cd.train.size() + cd.test.size());
    EXPECT_NEAR(static_cast<double>(cd.test.size()), 0.2 * n, 0.5 + 1e-9);
  }
}

TEST(Sim, PlantedGroupsAreRecovered) {
  std::size_t matched = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig c;
    c.clients = 8;
    c.rounds = 10;
    c.k_clusters = 2;
    c.skew = 0.05;
    c.seed = seed;
    c.hidden_dims = {16, 8};
    c.train.batch_size = 16;
    c.train.learning_rate = 0.05;
    c.train.local_epochs = 2;
    c.probe.psi = 16;
    c.data.classes = 4;
    c.data.dim = 8;
    c.data.per_class = 200;
    c.data.groups = 2;
    Simulation s(c);
    auto traces = s.run_all();
    std::vector<std::size_t> truth;
    for (const auto& cd : s.clients()) truth.push_back(cd.group);
    // From round 3 onward.
    for (std::size_t r = 3; r < traces.size(); ++r) {
      matched += canonical_labels(traces[r].cluster) == canonical_labels(truth);
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(matched), 0.9 * static_cast<double>(total));
}

TEST(Sim, ErrorsIdentifyRoundAndStep) {
  auto c = small(2);
  c.train.learning_rate = 1e200;
  Simulation s(c);
  try {
    s.run_all();
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("round 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("local training"), std::string::npos) << msg;
  }
}

TEST(Sim, InvalidConfigNamesField) {
  auto c = small(1);
  c.aggregators = 2;
  try {
    Simulation s(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
    EXPECT_NE(std::string(e.what()).find("aggregators"), std::string::npos);
  }
  c = small(1);
  c.k_clusters = 7;
  EXPECT_THROW(Simulation{c}, Error);
}
