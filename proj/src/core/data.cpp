#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "rng.hpp"

namespace bfln::data {

void Dataset::validate() const {
  if (labels.empty()) fail(ErrorKind::validation, "dataset is empty");
  if (dim == 0) fail(ErrorKind::validation, "dataset has zero feature dimension");
  if (features.size() != labels.size() * dim) {
    fail(ErrorKind::validation, "feature matrix size does not match labels x dim");
  }
  for (int l : labels) {
    if (l < 0 || l >= classes) {
      fail(ErrorKind::validation, "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.dim = dim;
  out.classes = classes;
  out.labels.reserve(indices.size());
  out.features.reserve(indices.size() * dim);
  for (auto i : indices) {
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

Dataset generate_synthetic(std::uint64_t seed, int classes, std::size_t dim, std::size_t per_class,
                           double class_separation, int label_shift) {
  if (classes < 2) fail(ErrorKind::configuration, "synthetic data needs at least 2 classes");
  if (per_class < 1) fail(ErrorKind::configuration, "synthetic data needs per_class >= 1");
  if (dim < 1) fail(ErrorKind::configuration, "synthetic data needs dim >= 1");
  if (!(class_separation >= 0.0)) fail(ErrorKind::configuration, "class_separation must be non-negative");

  std::normal_distribution<double> normal(0.0, 1.0);

  Rng mean_rng(derive_seed(seed, {stream::data, 0}));
  std::vector<double> means(static_cast<std::size_t>(classes) * dim);
  for (int c = 0; c < classes; ++c) {
    double norm2 = 0.0;
    double* m = means.data() + static_cast<std::size_t>(c) * dim;
    do {
      norm2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        m[j] = normal(mean_rng);
        norm2 += m[j] * m[j];
      }
    } while (norm2 == 0.0);
    double scale = class_separation / std::sqrt(norm2);
    for (std::size_t j = 0; j < dim; ++j) m[j] *= scale;
  }

  int shift = ((label_shift % classes) + classes) % classes;
  Rng sample_rng(derive_seed(seed, {stream::data, 1, static_cast<std::uint64_t>(shift)}));
  Dataset d;
  d.dim = dim;
  d.classes = classes;
  d.labels.reserve(static_cast<std::size_t>(classes) * per_class);
  d.features.reserve(static_cast<std::size_t>(classes) * per_class * dim);
  for (int c = 0; c < classes; ++c) {
    const double* m = means.data() + static_cast<std::size_t>((c + shift) % classes) * dim;
    for (std::size_t s = 0; s < per_class; ++s) {
      for (std::size_t j = 0; j < dim; ++j) d.features.push_back(m[j] + normal(sample_rng));
      d.labels.push_back(c);
    }
  }
  return d;
}

Partition partition_dirichlet(const Dataset& d, std::size_t clients, double skew, std::uint64_t seed,
                              std::size_t min_samples) {
  if (clients < 2) fail(ErrorKind::configuration, "partition needs at least 2 clients");
  if (!(skew > 0.0) || !std::isfinite(skew)) fail(ErrorKind::configuration, "skew must be positive and finite");
  if (clients * min_samples > d.size()) {
    fail(ErrorKind::configuration, "partition infeasible: " + std::to_string(clients) + " clients x " +
                                       std::to_string(min_samples) + " min samples exceeds " +
                                       std::to_string(d.size()) + " samples");
  }

  Rng rng(derive_seed(seed, {stream::partition}));
  std::gamma_distribution<double> gamma(skew, 1.0);

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.classes));
  for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);

  Partition p;
  p.skew = skew;
  p.clients.assign(clients, {});
  std::vector<double> props(clients);
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    double total = 0.0;
    for (auto& q : props) {
      q = gamma(rng);
      total += q;
    }
    if (total == 0.0) {
      // Every draw underflowed; the whole class goes to one client.
      std::fill(props.begin(), props.end(), 0.0);
      props[std::uniform_int_distribution<std::size_t>(0, clients - 1)(rng)] = 1.0;
      total = 1.0;
    }
    const double n = static_cast<double>(idx.size());
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t c = 0; c < clients; ++c) {
      cum += props[c];
      std::size_t end = c + 1 == clients ? idx.size()
                                         : std::min(idx.size(), static_cast<std::size_t>(std::floor(cum / total * n)));
      end = std::max(end, start);
      p.clients[c].insert(p.clients[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                          idx.begin() + static_cast<std::ptrdiff_t>(end));
      start = end;
    }
  }

  for (;;) {
    auto starved = std::min_element(p.clients.begin(), p.clients.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (starved->size() >= min_samples) break;
    auto donor = std::max_element(p.clients.begin(), p.clients.end(),
                                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, donor->size() - 1)(rng);
    starved->push_back((*donor)[pick]);
    donor->erase(donor->begin() + static_cast<std::ptrdiff_t>(pick));
  }

  for (auto& c : p.clients) std::sort(c.begin(), c.end());
  return p;
}

std::vector<ClientSplit> split_holdout(const Partition& p, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) fail(ErrorKind::configuration, "holdout fraction must be in [0, 1)");
  std::vector<ClientSplit> out;
  out.reserve(p.clients.size());
  for (std::size_t c = 0; c < p.clients.size(); ++c) {
    auto idx = p.clients[c];
    Rng rng(derive_seed(seed, {stream::holdout, c}));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (fraction > 0.0 && idx.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    ClientSplit s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::load, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t at) {
  return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) | (std::uint32_t{buf[at + 2]} << 8) |
         std::uint32_t{buf[at + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  auto img = read_file(images);
  auto lab = read_file(labels);
  const std::string img_name = "'" + images.string() + "'";
  const std::string lab_name = "'" + labels.string() + "'";

  if (img.size() < 16) fail(ErrorKind::load, img_name + ": truncated IDX header");
  if (be32(img, 0) != 0x00000803) fail(ErrorKind::load, img_name + ": bad magic, expected 0x00000803");
  if (lab.size() < 8) fail(ErrorKind::load, lab_name + ": truncated IDX header");
  if (be32(lab, 0) != 0x00000801) fail(ErrorKind::load, lab_name + ": bad magic, expected 0x00000801");

  const std::size_t n = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + n * dim) fail(ErrorKind::load, img_name + ": truncated pixel data");
  if (lab.size() < 8 + n_labels) fail(ErrorKind::load, lab_name + ": truncated label data");
  if (n != n_labels) {
    fail(ErrorKind::load, img_name + " has " + std::to_string(n) + " images but " + lab_name + " has " +
                              std::to_string(n_labels) + " labels");
  }
  if (n == 0 || dim == 0) fail(ErrorKind::load, img_name + ": empty image set");

  Dataset d;
  d.dim = dim;
  d.features.resize(n * dim);
  for (std::size_t i = 0; i < n * dim; ++i) d.features[i] = img[16 + i] / 255.0;
  d.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lab[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.classes = max_label + 1;
  return d;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::load, "cannot open '" + path.string() + "'");
  const std::string name = "'" + path.string() + "'";
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    fail(ErrorKind::load, name + ": missing header row starting with 'label'");
  }
  const auto dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (dim == 0) fail(ErrorKind::load, name + ": header declares no feature columns");

  Dataset d;
  d.dim = dim;
  int max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) fail(ErrorKind::load, name + ": unparsable value on line " + std::to_string(line_no));
      if (col == 0) {
        if (v < 0 || v != std::floor(v)) fail(ErrorKind::load, name + ": bad label on line " + std::to_string(line_no));
        d.labels.push_back(static_cast<int>(v));
        max_label = std::max(max_label, d.labels.back());
      } else {
        d.features.push_back(v);
      }
      ++col;
    }
    if (col != dim + 1) fail(ErrorKind::load, name + ": wrong column count on line " + std::to_string(line_no));
  }
  if (d.labels.empty()) fail(ErrorKind::load, name + ": no samples");
  d.classes = max_label + 1;
  return d;
}

}  // namespace bfln::data
