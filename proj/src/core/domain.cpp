#include "domain.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include <openssl/evp.h>

namespace bfln {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::training: return "training error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::load: return "load error";
    case ErrorKind::chain: return "chain error";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Digest digest_from_hex(std::string_view hex) {
  Digest d{};
  if (hex.size() != d.size() * 2) {
    fail(ErrorKind::validation, "digest must be 64 hex characters, got " + std::to_string(hex.size()));
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(ErrorKind::validation, "invalid hex digit in digest");
    d[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return d;
}

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.size()) {
    fail(ErrorKind::validation, "SHA-256 computation failed");
  }
  return d;
}

void ParameterVector::validate() const {
  std::size_t expected = 0;
  for (const auto& span : layout) {
    if (span.offset != expected) {
      fail(ErrorKind::validation, "layer '" + span.name + "' starts at " + std::to_string(span.offset) +
                                      ", expected " + std::to_string(expected));
    }
    expected += span.length;
  }
  if (expected != values.size()) {
    fail(ErrorKind::validation, "layout covers " + std::to_string(expected) + " values but vector has " +
                                    std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorKind::validation, "non-finite parameter at index " + std::to_string(i));
    }
  }
}

bool SimilarityMatrix::well_formed() const {
  for (std::size_t i = 0; i < m_; ++i) {
    if ((*this)(i, i) != 1.0) return false;
    for (std::size_t j = 0; j < m_; ++j) {
      double v = (*this)(i, j);
      if (!(v >= -1.0 && v <= 1.0)) return false;
      if (v != (*this)(j, i)) return false;
    }
  }
  return true;
}

std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels) {
  std::unordered_map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (auto l : labels) {
    auto [it, inserted] = remap.try_emplace(l, remap.size());
    out.push_back(it->second);
  }
  return out;
}

ClusterAssignment ClusterAssignment::from_labels(std::vector<std::size_t> labels, std::size_t k) {
  ClusterAssignment a;
  a.k = k;
  a.members.assign(k, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) {
      fail(ErrorKind::validation, "cluster label " + std::to_string(labels[i]) + " out of range for k=" +
                                      std::to_string(k));
    }
    a.members[labels[i]].push_back(i);
  }
  for (const auto& m : a.members) {
    if (m.empty()) a.degenerate = true;
  }
  a.labels = std::move(labels);
  return a;
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
  std::vector<std::size_t> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.size());
  return out;
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<std::uint8_t> canonical_encode(const ParameterVector& p) {
  p.validate();
  std::vector<std::uint8_t> out;
  out.reserve(8 + 8 * p.values.size());
  put_u64(out, p.values.size());
  for (double v : p.values) put_f64(out, v);
  return out;
}

std::vector<double> canonical_decode(std::span<const std::uint8_t> bytes) {
  auto read_u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  if (bytes.size() < 8) fail(ErrorKind::validation, "encoding shorter than its length prefix");
  std::uint64_t n = read_u64(0);
  if ((bytes.size() - 8) / 8 != n || (bytes.size() - 8) % 8 != 0) {
    fail(ErrorKind::validation, "encoding length does not match prefix " + std::to_string(n));
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(read_u64(8 + 8 * i));
  return values;
}

Digest model_hash(const ParameterVector& p) {
  return sha256(canonical_encode(p));
}

}  // namespace bfln
