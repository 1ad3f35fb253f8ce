#include "chain_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace bfln::chain_io {

using ordered_json = nlohmann::ordered_json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ordered_json tx_to_json(const ledger::Transaction& tx) {
  return std::visit(
      overloaded{
          [](const ledger::ModelHashCommit& c) {
            ordered_json j;
            j["kind"] = "model_hash_commit";
            j["client"] = c.client.index;
            j["round"] = c.round.value;
            j["digest"] = to_hex(c.digest);
            return j;
          },
          [](const ledger::AggregationRecord& r) {
            ordered_json j;
            j["kind"] = "aggregation_record";
            j["round"] = r.round.value;
            j["aggregator"] = r.aggregator.index;
            j["k"] = r.k;
            ordered_json entries = ordered_json::array();
            for (const auto& e : r.entries) {
              ordered_json je;
              je["client"] = e.client.index;
              je["digest"] = to_hex(e.digest);
              je["cluster"] = e.cluster;
              entries.push_back(std::move(je));
            }
            j["entries"] = std::move(entries);
            return j;
          },
          [](const ledger::RewardPosting& p) {
            ordered_json j;
            j["kind"] = "reward_posting";
            j["round"] = p.round.value;
            ordered_json rewards = ordered_json::array();
            for (const auto& e : p.rewards) {
              ordered_json je;
              je["client"] = e.client.index;
              je["amount"] = e.amount;
              rewards.push_back(std::move(je));
            }
            j["rewards"] = std::move(rewards);
            return j;
          },
          [](const ledger::FeeCharge& f) {
            ordered_json j;
            j["kind"] = "fee_charge";
            j["round"] = f.round.value;
            j["payer"] = f.payer.index;
            j["amount"] = f.amount;
            j["payee"] = f.payee.index;
            return j;
          },
      },
      tx);
}

ledger::Transaction tx_from_json(const ordered_json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "model_hash_commit") {
    return ledger::ModelHashCommit{ClientId{j.at("client").get<std::size_t>()},
                                   RoundIndex{j.at("round").get<std::size_t>()},
                                   digest_from_hex(j.at("digest").get<std::string>())};
  }
  if (kind == "aggregation_record") {
    ledger::AggregationRecord r;
    r.round = RoundIndex{j.at("round").get<std::size_t>()};
    r.aggregator = ClientId{j.at("aggregator").get<std::size_t>()};
    r.k = j.at("k").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      r.entries.push_back({ClientId{e.at("client").get<std::size_t>()},
                           digest_from_hex(e.at("digest").get<std::string>()), e.at("cluster").get<std::size_t>()});
    }
    return r;
  }
  if (kind == "reward_posting") {
    ledger::RewardPosting p;
    p.round = RoundIndex{j.at("round").get<std::size_t>()};
    for (const auto& e : j.at("rewards")) {
      p.rewards.push_back({ClientId{e.at("client").get<std::size_t>()}, e.at("amount").get<double>()});
    }
    return p;
  }
  if (kind == "fee_charge") {
    return ledger::FeeCharge{RoundIndex{j.at("round").get<std::size_t>()}, ClientId{j.at("payer").get<std::size_t>()},
                             j.at("amount").get<double>(), ClientId{j.at("payee").get<std::size_t>()}};
  }
  fail(ErrorKind::validation, "unknown transaction kind '" + kind + "'");
}

}  // namespace

std::string block_to_json(const ledger::Block& b) {
  ordered_json j;
  j["height"] = b.height;
  j["producer"] = b.producer.index;
  j["prev_hash"] = to_hex(b.prev_hash);
  ordered_json txs = ordered_json::array();
  for (const auto& tx : b.transactions) txs.push_back(tx_to_json(tx));
  j["transactions"] = std::move(txs);
  j["block_hash"] = to_hex(b.block_hash);
  return j.dump();
}

ledger::Block block_from_json(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("malformed block JSON: ") + e.what());
  }
  try {
    ledger::Block b;
    b.height = j.at("height").get<std::uint64_t>();
    b.producer = ClientId{j.at("producer").get<std::size_t>()};
    b.prev_hash = digest_from_hex(j.at("prev_hash").get<std::string>());
    for (const auto& tx : j.at("transactions")) b.transactions.push_back(tx_from_json(tx));
    b.block_hash = digest_from_hex(j.at("block_hash").get<std::string>());
    return b;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("block JSON missing or mistyped field: ") + e.what());
  }
}

void write_ndjson(std::ostream& out, const std::vector<ledger::Block>& blocks) {
  for (const auto& b : blocks) out << block_to_json(b) << '\n';
}

void write_ndjson(const std::filesystem::path& path, const std::vector<ledger::Block>& blocks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  write_ndjson(out, blocks);
}

VerifyResult verify_ndjson(std::istream& in) {
  VerifyResult res;
  Digest prev{};
  std::string line;
  std::uint64_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ledger::Block b;
    try {
      b = block_from_json(line);
    } catch (const Error& e) {
      res.failing_height = expected;
      res.message = "block " + std::to_string(expected) + ": " + e.what();
      return res;
    }
    if (b.height != expected) {
      res.failing_height = expected;
      res.message = "block " + std::to_string(expected) + ": stored height is " + std::to_string(b.height);
      return res;
    }
    if (b.prev_hash != prev) {
      res.failing_height = b.height;
      res.message = "block " + std::to_string(b.height) + ": prev_hash does not match previous block hash";
      return res;
    }
    if (ledger::compute_block_hash(b) != b.block_hash) {
      res.failing_height = b.height;
      res.message = "block " + std::to_string(b.height) + ": block_hash does not match contents";
      return res;
    }
    prev = b.block_hash;
    ++expected;
  }
  if (expected == 0) {
    res.message = "chain export is empty";
    return res;
  }
  res.ok = true;
  res.blocks = expected;
  res.tip = prev;
  res.message = "verified " + std::to_string(expected) + " blocks, tip " + to_hex(prev);
  return res;
}

VerifyResult verify_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  return verify_ndjson(in);
}

}  // namespace bfln::chain_io
