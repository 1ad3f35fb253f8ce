#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ledger.hpp"

namespace bfln::chain_io {

// One JSON object per line with keys in the order
// height, producer, prev_hash, transactions, block_hash.
std::string block_to_json(const ledger::Block& b);
ledger::Block block_from_json(const std::string& line);

void write_ndjson(std::ostream& out, const std::vector<ledger::Block>& blocks);
void write_ndjson(const std::filesystem::path& path, const std::vector<ledger::Block>& blocks);

struct VerifyResult {
  bool ok = false;
  std::size_t blocks = 0;
  std::optional<std::uint64_t> failing_height;
  std::string message;
  Digest tip{};
};

// Recomputes every block hash from genesis and checks the prev_hash links.
VerifyResult verify_ndjson(std::istream& in);
VerifyResult verify_ndjson(const std::filesystem::path& path);

}  // namespace bfln::chain_io
