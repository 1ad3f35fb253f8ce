#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "domain.hpp"

namespace bfln::ledger {

struct ModelHashCommit {
  ClientId client;
  RoundIndex round;
  Digest digest{};
};

struct AggregationEntry {
  ClientId client;
  Digest digest{};
  std::size_t cluster = 0;
};

// Entries are in matrix-position order of the round's clustering.
struct AggregationRecord {
  RoundIndex round;
  ClientId aggregator;
  std::size_t k = 0;
  std::vector<AggregationEntry> entries;
};

struct RewardEntry {
  ClientId client;
  double amount = 0.0;
};

struct RewardPosting {
  RoundIndex round;
  std::vector<RewardEntry> rewards;
};

struct FeeCharge {
  RoundIndex round;
  ClientId payer;
  double amount = 0.0;
  ClientId payee;
};

using Transaction = std::variant<ModelHashCommit, AggregationRecord, RewardPosting, FeeCharge>;

void validate(const Transaction& tx);
void encode(const Transaction& tx, std::vector<std::uint8_t>& out);

struct Block {
  std::uint64_t height = 0;
  ClientId producer;
  Digest prev_hash{};
  std::vector<Transaction> transactions;
  Digest block_hash{};
};

// SHA-256 over height, producer, prev_hash and the encoded transactions.
Digest compute_block_hash(const Block& b);
Block seal_block(std::uint64_t height, ClientId producer, const Digest& prev_hash, std::vector<Transaction> txs);

struct IncentiveConfig {
  double total_reward = 20.0;
  double rho = 2.0;

  void validate() const;
};

// kappa = R / sum_i n_i^rho
double compute_kappa(std::span<const std::size_t> sizes, const IncentiveConfig& cfg);
// Gamma(n) = kappa * n^rho
double group_allocation(std::size_t n, double kappa, double rho);
// Gamma(n) / n
double per_client_reward(std::size_t n, double kappa, double rho);
// kappa / N
double aggregation_fee(double kappa, std::size_t clients);

struct RewardOutcome {
  RewardPosting posting;
  double kappa = 0.0;
  std::vector<std::size_t> eligible_sizes;  // per cluster
  std::vector<bool> eligible;               // per record entry
  std::vector<std::string> audit;
};

// A client is eligible iff its latest commit for the round equals the digest
// the aggregator recorded for it. Cluster sizes count eligible members only.
RewardOutcome verify_and_reward(const AggregationRecord& record, std::span<const ModelHashCommit> commits,
                                const ClusterAssignment& assignment, const IncentiveConfig& cfg);

// Same, reading the record and commits out of `block`.
RewardOutcome verify_and_reward(const Block& block, const ClusterAssignment& assignment, const IncentiveConfig& cfg);

class TokenLedger {
 public:
  TokenLedger() = default;
  TokenLedger(std::size_t clients, double initial_stake);

  double balance(ClientId c) const { return balances_.at(c.index); }
  const std::vector<double>& balances() const { return balances_; }
  double minted_total() const { return minted_; }
  double initial_stake() const { return initial_stake_; }

  void mint(ClientId to, double amount);
  void transfer(ClientId from, ClientId to, double amount);
  void apply(const Transaction& tx);

  // |sum(balances) - (clients * stake + minted)|
  double conservation_error() const;

 private:
  std::vector<double> balances_;
  double minted_ = 0.0;
  double initial_stake_ = 0.0;
};

struct Settlement {
  RewardOutcome reward;
  double fee = 0.0;
  std::vector<FeeCharge> fees;
  std::vector<ClientId> skipped;  // could not cover the fee this round
};

// Rewards plus aggregation fees for one round. Every submitting client other
// than `payee` pays kappa / N; a client whose balance cannot cover that fee
// skips the round (no fee, no reward) and kappa is recomputed without it.
Settlement settle_round(const AggregationRecord& record, std::span<const ModelHashCommit> commits,
                        const ClusterAssignment& assignment, const IncentiveConfig& cfg, const TokenLedger& tokens,
                        ClientId payee);

class Chain {
 public:
  Chain(std::size_t clients, double initial_stake);

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t height() const { return blocks_.size(); }
  const Digest& tip_hash() const { return blocks_.back().block_hash; }
  const TokenLedger& tokens() const { return tokens_; }

  // Validates linkage and hash, then applies every transaction or none.
  void append(Block block);

  // Recomputes every hash from genesis.
  bool verify_integrity() const;

 private:
  std::vector<Block> blocks_;
  TokenLedger tokens_;
};

Block genesis_block();

}  // namespace bfln::ledger
