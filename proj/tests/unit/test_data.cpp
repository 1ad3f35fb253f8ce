#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "core/data.hpp"
#include "core/error.hpp"

using namespace bfln;
using namespace bfln::data;
namespace fs = std::filesystem;

namespace {

double max_class_fraction(const Dataset& d, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> counts(d.classes, 0);
  for (auto i : idx) ++counts[d.labels[i]];
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(idx.size());
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("bfln_data_" + name);
  fs::create_directories(p);
  return p;
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

void write_idx(const fs::path& images, const fs::path& labels, std::uint32_t n_img, std::uint32_t n_lab,
               std::uint32_t img_magic = 0x803) {
  std::ofstream im(images, std::ios::binary);
  put_be32(im, img_magic);
  put_be32(im, n_img);
  put_be32(im, 2);
  put_be32(im, 2);
  for (std::uint32_t i = 0; i < n_img * 4; ++i) im.put(static_cast<char>(i % 2 ? 255 : 0));
  std::ofstream lb(labels, std::ios::binary);
  put_be32(lb, 0x801);
  put_be32(lb, n_lab);
  for (std::uint32_t i = 0; i < n_lab; ++i) lb.put(static_cast<char>(i % 3));
}

}  // namespace

TEST(Synthetic, BalancedCounts) {
  auto d = generate_synthetic(1, 2, 5, 100, 3.0);
  EXPECT_EQ(d.size(), 200u);
  EXPECT_EQ(d.class_counts(), std::vector<std::size_t>({100, 100}));
}

TEST(Synthetic, Deterministic) {
  auto a = generate_synthetic(7, 3, 4, 20, 2.0);
  auto b = generate_synthetic(7, 3, 4, 20, 2.0);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  auto c = generate_synthetic(8, 3, 4, 20, 2.0);
  EXPECT_NE(a.features, c.features);
}

TEST(Synthetic, ZeroSeparationSharesMeans) {
  // Equal means: the class-conditional sample means sit near the origin.
  auto d = generate_synthetic(3, 2, 3, 4000, 0.0);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < d.dim; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.labels[i] == c) s += d.row(i)[j];
      }
      EXPECT_NEAR(s / 4000.0, 0.0, 0.1);
    }
  }
}

TEST(Synthetic, LabelShiftRotatesClassMeans) {
  auto a = generate_synthetic(5, 4, 3, 2000, 6.0, 0);
  auto b = generate_synthetic(5, 4, 3, 2000, 6.0, 1);
  auto mean = [](const Dataset& d, int c) {
    std::vector<double> m(d.dim, 0.0);
    double n = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] != c) continue;
      for (std::size_t j = 0; j < d.dim; ++j) m[j] += d.row(i)[j];
      ++n;
    }
    for (auto& x : m) x /= n;
    return m;
  };
  // Class 0 of the shifted set sits where class 1 of the unshifted set does.
  auto m0 = mean(b, 0);
  auto m1 = mean(a, 1);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m0[j], m1[j], 0.15);
}

TEST(Partition, NearUniformForHugeConcentration) {
  auto d = generate_synthetic(0, 4, 2, 500, 1.0);
  auto p = partition_dirichlet(d, 4, 1e6, 11, 10);
  for (const auto& idx : p.clients) {
    std::vector<std::size_t> counts(4, 0);
    for (auto i : idx) ++counts[d.labels[i]];
    for (int c = 0; c < 4; ++c) {
      EXPECT_NEAR(static_cast<double>(counts[c]) / idx.size(), 0.25, 0.05);
    }
  }
}

TEST(Partition, ExtremeSkewAtSmallConcentration) {
  auto d = generate_synthetic(0, 10, 4, 400, 1.0);
  auto p = partition_dirichlet(d, 20, 0.1, 0, 64);
  double best = 0.0;
  for (const auto& idx : p.clients) best = std::max(best, max_class_fraction(d, idx));
  EXPECT_GT(best, 0.8);
}

TEST(Partition, DisjointAndMinimumSize) {
  auto d = generate_synthetic(2, 5, 3, 200, 1.0);
  for (double skew : {0.05, 0.1, 0.5, 5.0}) {
    auto p = partition_dirichlet(d, 10, skew, 3, 40);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& idx : p.clients) {
      EXPECT_GE(idx.size(), 40u);
      EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
      for (auto i : idx) {
        EXPECT_LT(i, d.size());
        seen.insert(i);
      }
      total += idx.size();
    }
    EXPECT_EQ(seen.size(), total);
  }
}

TEST(Partition, Deterministic) {
  auto d = generate_synthetic(2, 5, 3, 200, 1.0);
  EXPECT_EQ(partition_dirichlet(d, 6, 0.3, 9, 20).clients, partition_dirichlet(d, 6, 0.3, 9, 20).clients);
}

TEST(Partition, InfeasibleIsConfigurationError) {
  auto d = generate_synthetic(2, 2, 3, 50, 1.0);
  try {
    partition_dirichlet(d, 4, 0.5, 1, 30);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
  EXPECT_THROW(partition_dirichlet(d, 1, 0.5, 1, 1), Error);
}

TEST(Partition, SkewMonotonicOnAverage) {
  auto d = generate_synthetic(4, 10, 2, 200, 1.0);
  double prev = 2.0;
  for (double skew : {0.1, 0.3, 0.5, 1e6}) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto p = partition_dirichlet(d, 10, skew, seed, 20);
      for (const auto& idx : p.clients) {
        acc += max_class_fraction(d, idx);
        ++n;
      }
    }
    const double avg = acc / static_cast<double>(n);
    EXPECT_LE(avg, prev) << skew;
    prev = avg;
  }
}

TEST(Holdout, EightyTwentyPerClient) {
  auto d = generate_synthetic(2, 4, 3, 100, 1.0);
  auto p = partition_dirichlet(d, 4, 1.0, 1, 20);
  auto splits = split_holdout(p, 0.2, 5);
  ASSERT_EQ(splits.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto n = p.clients[c].size();
    EXPECT_EQ(splits[c].train.size() + splits[c].test.size(), n);
    EXPECT_EQ(splits[c].test.size(), static_cast<std::size_t>(std::llround(0.2 * n)));
    std::set<std::size_t> all(splits[c].train.begin(), splits[c].train.end());
    all.insert(splits[c].test.begin(), splits[c].test.end());
    EXPECT_EQ(all, std::set<std::size_t>(p.clients[c].begin(), p.clients[c].end()));
  }
}

TEST(LoadIdx, WellFormed) {
  auto dir = temp_dir("ok");
  write_idx(dir / "img", dir / "lab", 6, 6);
  auto d = load_idx(dir / "img", dir / "lab");
  EXPECT_EQ(d.size(), 6u);
  EXPECT_EQ(d.dim, 4u);
  EXPECT_DOUBLE_EQ(d.row(0)[0], 0.0);
  EXPECT_DOUBLE_EQ(d.row(0)[1], 1.0);
  EXPECT_EQ(d.labels[4], 1);
}

TEST(LoadIdx, BadMagicNamesFile) {
  auto dir = temp_dir("magic");
  write_idx(dir / "img", dir / "lab", 3, 3, 0x802);
  try {
    load_idx(dir / "img", dir / "lab");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::load);
    EXPECT_NE(std::string(e.what()).find("img"), std::string::npos);
  }
}

TEST(LoadIdx, CountMismatch) {
  auto dir = temp_dir("count");
  write_idx(dir / "img", dir / "lab", 3, 4);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), Error);
}

TEST(LoadIdx, Truncated) {
  auto dir = temp_dir("trunc");
  write_idx(dir / "img", dir / "lab", 3, 3);
  fs::resize_file(dir / "img", fs::file_size(dir / "img") - 2);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), Error);
}

TEST(LoadCsv, HeaderAndRows) {
  auto dir = temp_dir("csv");
  {
    std::ofstream out(dir / "d.csv");
    out << "label,f0,f1\n1,0.5,2\n0,-1,3.25\n2,0,0\n";
  }
  auto d = load_csv(dir / "d.csv");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.dim, 2u);
  EXPECT_EQ(d.classes, 3);
  EXPECT_DOUBLE_EQ(d.row(1)[1], 3.25);
  {
    std::ofstream out(dir / "bad.csv");
    out << "label,f0\n1,0.5,2\n";
  }
  EXPECT_THROW(load_csv(dir / "bad.csv"), Error);
}
