#include "ledger.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace bfln::ledger {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_amount(double a, const char* what) {
  if (!std::isfinite(a) || a < 0.0) fail(ErrorKind::validation, std::string(what) + " must be finite and >= 0");
}

void put_digest(std::vector<std::uint8_t>& out, const Digest& d) { out.insert(out.end(), d.begin(), d.end()); }

}  // namespace

void validate(const Transaction& tx) {
  std::visit(overloaded{
                 [](const ModelHashCommit&) {},
                 [](const AggregationRecord& r) {
                   for (const auto& e : r.entries) {
                     if (e.cluster >= r.k) fail(ErrorKind::validation, "aggregation entry cluster out of range");
                   }
                 },
                 [](const RewardPosting& p) {
                   for (const auto& e : p.rewards) check_amount(e.amount, "reward amount");
                 },
                 [](const FeeCharge& f) { check_amount(f.amount, "fee amount"); },
             },
             tx);
}

void encode(const Transaction& tx, std::vector<std::uint8_t>& out) {
  std::visit(overloaded{
                 [&](const ModelHashCommit& c) {
                   out.push_back(1);
                   put_u64(out, c.client.index);
                   put_u64(out, c.round.value);
                   put_digest(out, c.digest);
                 },
                 [&](const AggregationRecord& r) {
                   out.push_back(2);
                   put_u64(out, r.round.value);
                   put_u64(out, r.aggregator.index);
                   put_u64(out, r.k);
                   put_u64(out, r.entries.size());
                   for (const auto& e : r.entries) {
                     put_u64(out, e.client.index);
                     put_digest(out, e.digest);
                     put_u64(out, e.cluster);
                   }
                 },
                 [&](const RewardPosting& p) {
                   out.push_back(3);
                   put_u64(out, p.round.value);
                   put_u64(out, p.rewards.size());
                   for (const auto& e : p.rewards) {
                     put_u64(out, e.client.index);
                     put_f64(out, e.amount);
                   }
                 },
                 [&](const FeeCharge& f) {
                   out.push_back(4);
                   put_u64(out, f.round.value);
                   put_u64(out, f.payer.index);
                   put_f64(out, f.amount);
                   put_u64(out, f.payee.index);
                 },
             },
             tx);
}

Digest compute_block_hash(const Block& b) {
  std::vector<std::uint8_t> buf;
  put_u64(buf, b.height);
  put_u64(buf, b.producer.index);
  put_digest(buf, b.prev_hash);
  put_u64(buf, b.transactions.size());
  for (const auto& tx : b.transactions) encode(tx, buf);
  return sha256(buf);
}

Block seal_block(std::uint64_t height, ClientId producer, const Digest& prev_hash, std::vector<Transaction> txs) {
  Block b;
  b.height = height;
  b.producer = producer;
  b.prev_hash = prev_hash;
  b.transactions = std::move(txs);
  b.block_hash = compute_block_hash(b);
  return b;
}

Block genesis_block() { return seal_block(0, ClientId{0}, Digest{}, {}); }

void IncentiveConfig::validate() const {
  if (!std::isfinite(total_reward) || total_reward < 0.0) {
    fail(ErrorKind::configuration, "incentive.total_reward must be finite and >= 0");
  }
  if (!std::isfinite(rho) || !(rho > 1.0)) fail(ErrorKind::configuration, "incentive.rho must be > 1");
}

double compute_kappa(std::span<const std::size_t> sizes, const IncentiveConfig& cfg) {
  if (sizes.empty()) fail(ErrorKind::configuration, "compute_kappa: no cluster sizes");
  double denom = 0.0;
  for (auto n : sizes) {
    if (n == 0) fail(ErrorKind::configuration, "compute_kappa: cluster size must be >= 1");
    denom += std::pow(static_cast<double>(n), cfg.rho);
  }
  return cfg.total_reward / denom;
}

double group_allocation(std::size_t n, double kappa, double rho) {
  return kappa * std::pow(static_cast<double>(n), rho);
}

double per_client_reward(std::size_t n, double kappa, double rho) {
  if (n == 0) fail(ErrorKind::validation, "per_client_reward: group size must be >= 1");
  return group_allocation(n, kappa, rho) / static_cast<double>(n);
}

double aggregation_fee(double kappa, std::size_t clients) {
  if (clients == 0) fail(ErrorKind::validation, "aggregation_fee: N must be >= 1");
  return kappa / static_cast<double>(clients);
}

namespace {

RewardOutcome reward_excluding(const AggregationRecord& record, std::span<const ModelHashCommit> commits,
                               const ClusterAssignment& assignment, const IncentiveConfig& cfg,
                               const std::vector<bool>& excluded) {
  cfg.validate();
  if (record.entries.size() != assignment.labels.size()) {
    fail(ErrorKind::validation, "aggregation record has " + std::to_string(record.entries.size()) +
                                    " entries but assignment covers " + std::to_string(assignment.labels.size()));
  }
  for (std::size_t i = 0; i < record.entries.size(); ++i) {
    if (record.entries[i].cluster != assignment.labels[i]) {
      fail(ErrorKind::validation, "aggregation record disagrees with assignment for client " +
                                      std::to_string(record.entries[i].client.index));
    }
  }

  RewardOutcome out;
  out.posting.round = record.round;

  std::map<std::size_t, Digest> latest;
  for (const auto& c : commits) {
    if (c.round != record.round) continue;
    auto [it, inserted] = latest.insert_or_assign(c.client.index, c.digest);
    if (!inserted) {
      out.audit.push_back("client " + std::to_string(c.client.index) + ": duplicate commit in round " +
                          std::to_string(record.round.value) + ", latest used");
    }
  }

  out.eligible.assign(record.entries.size(), false);
  out.eligible_sizes.assign(assignment.k, 0);
  for (std::size_t i = 0; i < record.entries.size(); ++i) {
    const auto& e = record.entries[i];
    if (excluded[i]) continue;
    auto it = latest.find(e.client.index);
    if (it == latest.end()) {
      out.audit.push_back("client " + std::to_string(e.client.index) + ": no model hash commit, not rewarded");
      continue;
    }
    if (it->second != e.digest) {
      out.audit.push_back("client " + std::to_string(e.client.index) +
                          ": committed hash does not match aggregator record, not rewarded");
      continue;
    }
    out.eligible[i] = true;
    ++out.eligible_sizes[assignment.labels[i]];
  }

  std::vector<std::size_t> nonzero;
  for (auto n : out.eligible_sizes) {
    if (n > 0) nonzero.push_back(n);
  }
  if (nonzero.empty()) return out;

  out.kappa = compute_kappa(nonzero, cfg);
  for (std::size_t i = 0; i < record.entries.size(); ++i) {
    if (!out.eligible[i]) continue;
    const auto n = out.eligible_sizes[assignment.labels[i]];
    out.posting.rewards.push_back({record.entries[i].client, per_client_reward(n, out.kappa, cfg.rho)});
  }
  return out;
}

}  // namespace

RewardOutcome verify_and_reward(const AggregationRecord& record, std::span<const ModelHashCommit> commits,
                                const ClusterAssignment& assignment, const IncentiveConfig& cfg) {
  return reward_excluding(record, commits, assignment, cfg, std::vector<bool>(record.entries.size(), false));
}

RewardOutcome verify_and_reward(const Block& block, const ClusterAssignment& assignment, const IncentiveConfig& cfg) {
  const AggregationRecord* record = nullptr;
  std::vector<ModelHashCommit> commits;
  for (const auto& tx : block.transactions) {
    if (auto* c = std::get_if<ModelHashCommit>(&tx)) commits.push_back(*c);
    if (auto* r = std::get_if<AggregationRecord>(&tx)) {
      if (record) fail(ErrorKind::validation, "block holds more than one aggregation record");
      record = r;
    }
  }
  if (!record) fail(ErrorKind::validation, "block holds no aggregation record");
  return verify_and_reward(*record, commits, assignment, cfg);
}

TokenLedger::TokenLedger(std::size_t clients, double initial_stake)
    : balances_(clients, initial_stake), initial_stake_(initial_stake) {
  if (!std::isfinite(initial_stake) || initial_stake < 0.0) {
    fail(ErrorKind::configuration, "initial_stake must be finite and >= 0");
  }
}

void TokenLedger::mint(ClientId to, double amount) {
  check_amount(amount, "minted amount");
  if (to.index >= balances_.size()) fail(ErrorKind::validation, "mint to unknown client");
  balances_[to.index] += amount;
  minted_ += amount;
}

void TokenLedger::transfer(ClientId from, ClientId to, double amount) {
  check_amount(amount, "transfer amount");
  if (from.index >= balances_.size() || to.index >= balances_.size()) {
    fail(ErrorKind::validation, "transfer involves unknown client");
  }
  if (balances_[from.index] < amount) {
    fail(ErrorKind::chain, "client " + std::to_string(from.index) + " cannot cover a charge of " +
                               std::to_string(amount));
  }
  balances_[from.index] -= amount;
  balances_[to.index] += amount;
}

void TokenLedger::apply(const Transaction& tx) {
  if (auto* p = std::get_if<RewardPosting>(&tx)) {
    for (const auto& e : p->rewards) mint(e.client, e.amount);
  } else if (auto* f = std::get_if<FeeCharge>(&tx)) {
    transfer(f->payer, f->payee, f->amount);
  }
}

double TokenLedger::conservation_error() const {
  const double total = std::accumulate(balances_.begin(), balances_.end(), 0.0);
  return std::abs(total - (static_cast<double>(balances_.size()) * initial_stake_ + minted_));
}

Settlement settle_round(const AggregationRecord& record, std::span<const ModelHashCommit> commits,
                        const ClusterAssignment& assignment, const IncentiveConfig& cfg, const TokenLedger& tokens,
                        ClientId payee) {
  std::vector<bool> excluded(record.entries.size(), false);
  Settlement s;
  for (;;) {
    s.reward = reward_excluding(record, commits, assignment, cfg, excluded);
    const auto payers = static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), false));
    s.fee = payers == 0 ? 0.0 : aggregation_fee(s.reward.kappa, payers);
    bool changed = false;
    for (std::size_t i = 0; i < record.entries.size(); ++i) {
      const auto c = record.entries[i].client;
      if (excluded[i] || c == payee) continue;
      if (tokens.balance(c) < s.fee) {
        excluded[i] = true;
        changed = true;
        s.skipped.push_back(c);
      }
    }
    if (!changed) break;
  }
  for (auto c : s.skipped) {
    s.reward.audit.push_back("client " + std::to_string(c.index) + ": insufficient stake for fee, skipped round");
  }
  if (s.fee > 0.0) {
    for (std::size_t i = 0; i < record.entries.size(); ++i) {
      const auto c = record.entries[i].client;
      if (excluded[i] || c == payee) continue;
      s.fees.push_back({record.round, c, s.fee, payee});
    }
  }
  return s;
}

Chain::Chain(std::size_t clients, double initial_stake) : tokens_(clients, initial_stake) {
  blocks_.push_back(genesis_block());
}

void Chain::append(Block block) {
  if (block.height != blocks_.size()) {
    fail(ErrorKind::chain, "block height " + std::to_string(block.height) + " does not extend chain of height " +
                               std::to_string(blocks_.size()));
  }
  if (block.prev_hash != tip_hash()) {
    fail(ErrorKind::chain, "block " + std::to_string(block.height) + ": prev_hash does not match chain tip");
  }
  if (compute_block_hash(block) != block.block_hash) {
    fail(ErrorKind::chain, "block " + std::to_string(block.height) + ": block_hash does not match contents");
  }
  TokenLedger next = tokens_;
  for (const auto& tx : block.transactions) {
    validate(tx);
    next.apply(tx);
  }
  tokens_ = std::move(next);
  blocks_.push_back(std::move(block));
}

bool Chain::verify_integrity() const {
  Digest prev{};
  for (std::size_t h = 0; h < blocks_.size(); ++h) {
    const auto& b = blocks_[h];
    if (b.height != h || b.prev_hash != prev || compute_block_hash(b) != b.block_hash) return false;
    prev = b.block_hash;
  }
  return true;
}

}  // namespace bfln::ledger
