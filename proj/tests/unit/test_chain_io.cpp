#include <gtest/gtest.h>

#include <sstream>

#include "core/chain_io.hpp"
#include "core/error.hpp"

using namespace bfln;
using namespace bfln::ledger;

namespace {

std::vector<Block> sample_chain() {
  std::vector<Block> blocks = {genesis_block()};
  const auto d = model_hash(ParameterVector::flat({1.0, 2.0}));
  AggregationRecord rec{RoundIndex{0}, ClientId{0}, 2, {{ClientId{0}, d, 0}, {ClientId{1}, d, 1}}};
  blocks.push_back(seal_block(1, ClientId{1}, blocks.back().block_hash,
                              {ModelHashCommit{ClientId{0}, RoundIndex{0}, d}, ModelHashCommit{ClientId{1}, RoundIndex{0}, d},
                               rec, RewardPosting{RoundIndex{0}, {{ClientId{0}, 10.0}, {ClientId{1}, 0.1 + 0.2}}},
                               FeeCharge{RoundIndex{0}, ClientId{1}, 1.0 / 3.0, ClientId{0}}}));
  blocks.push_back(seal_block(2, ClientId{0}, blocks.back().block_hash, {}));
  return blocks;
}

}  // namespace

TEST(ChainIo, FieldOrderAndLowercaseHex) {
  auto line = chain_io::block_to_json(sample_chain()[1]);
  const auto h = line.find("\"height\""), p = line.find("\"producer\""), ph = line.find("\"prev_hash\""),
             t = line.find("\"transactions\""), bh = line.find("\"block_hash\"");
  EXPECT_LT(h, p);
  EXPECT_LT(p, ph);
  EXPECT_LT(ph, t);
  EXPECT_LT(t, bh);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  for (char c : std::string("ABCDEF")) EXPECT_EQ(line.find(std::string("\"") + c), std::string::npos);
}

TEST(ChainIo, RoundTripPreservesHashes) {
  for (const auto& b : sample_chain()) {
    auto back = chain_io::block_from_json(chain_io::block_to_json(b));
    EXPECT_EQ(back.block_hash, b.block_hash);
    EXPECT_EQ(compute_block_hash(back), b.block_hash);
    EXPECT_EQ(chain_io::block_to_json(back), chain_io::block_to_json(b));
  }
}

TEST(ChainIo, VerifyAcceptsUntampered) {
  std::stringstream ss;
  chain_io::write_ndjson(ss, sample_chain());
  auto r = chain_io::verify_ndjson(ss);
  EXPECT_TRUE(r.ok) << r.message;
  EXPECT_EQ(r.blocks, 3u);
  EXPECT_EQ(r.tip, sample_chain().back().block_hash);
}

TEST(ChainIo, VerifyReportsEditedHeight) {
  std::stringstream ss;
  chain_io::write_ndjson(ss, sample_chain());
  auto text = ss.str();
  // Edit one hex digit inside block 1's transactions.
  const auto line1 = text.find('\n') + 1;
  const auto pos = text.find("\"digest\":\"", line1) + 10;
  text[pos] = text[pos] == '0' ? '1' : '0';
  std::stringstream in(text);
  auto r = chain_io::verify_ndjson(in);
  EXPECT_FALSE(r.ok);
  ASSERT_TRUE(r.failing_height.has_value());
  EXPECT_EQ(*r.failing_height, 1u);
}

TEST(ChainIo, VerifyReportsBrokenLink) {
  auto blocks = sample_chain();
  blocks[2] = seal_block(2, ClientId{0}, Digest{}, {});
  std::stringstream ss;
  chain_io::write_ndjson(ss, blocks);
  auto r = chain_io::verify_ndjson(ss);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failing_height.value(), 2u);
}

TEST(ChainIo, MalformedLineIsChainError) {
  EXPECT_THROW(chain_io::block_from_json("{\"height\": 1}"), Error);
  EXPECT_THROW(chain_io::block_from_json("not json"), Error);
}
