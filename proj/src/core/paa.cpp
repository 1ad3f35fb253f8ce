#include "paa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "jacobi.hpp"
#include "rng.hpp"

namespace bfln::paa {

void ProbeSet::validate() const {
  if (psi == 0) fail(ErrorKind::validation, "probe set is empty");
  if (dim == 0 || inputs.size() != psi * dim) fail(ErrorKind::validation, "probe inputs do not match psi x dim");
}

ProbeSet draw_probe(const data::Dataset& d, std::span<const std::size_t> indices, int label, std::size_t psi,
                    std::uint64_t seed) {
  if (psi == 0) fail(ErrorKind::configuration, "probe psi must be positive");
  std::vector<std::size_t> pool;
  for (auto i : indices) {
    if (d.labels[i] == label) pool.push_back(i);
  }
  if (pool.empty()) {
    fail(ErrorKind::configuration, "aggregation client holds no samples of probe label " + std::to_string(label));
  }
  Rng rng(derive_seed(seed, {stream::probe, static_cast<std::uint64_t>(label)}));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(pool.size(), psi));
  std::sort(pool.begin(), pool.end());

  ProbeSet p;
  p.dim = d.dim;
  p.label = label;
  p.psi = pool.size();
  p.inputs.reserve(pool.size() * d.dim);
  for (auto i : pool) {
    auto r = d.row(i);
    p.inputs.insert(p.inputs.end(), r.begin(), r.end());
  }
  return p;
}

int most_frequent_label(const data::Dataset& d, std::span<const std::size_t> indices) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(d.classes), 0);
  for (auto i : indices) ++counts[static_cast<std::size_t>(d.labels[i])];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

Prototype extract_prototype(const ParameterVector& model, const trainer::ModelArchitecture& arch,
                            const ProbeSet& probe, ClientId source, RoundIndex round) {
  probe.validate();
  auto rows = trainer::embed(model, arch, probe.inputs);
  Prototype proto;
  proto.source = source;
  proto.round = round;
  proto.probe_label = probe.label;
  proto.values.assign(arch.repr_dim(), 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) proto.values[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& v : proto.values) v /= n;
  return proto;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::shape, "pearson: vectors differ in dimension");
  if (a.size() < 2) fail(ErrorKind::shape, "pearson: dimension must be at least 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

SimilarityResult similarity_matrix(std::span<const Prototype> prototypes) {
  const std::size_t m = prototypes.size();
  if (m < 2) fail(ErrorKind::configuration, "similarity matrix needs at least 2 prototypes");
  SimilarityResult out{SimilarityMatrix(m), {}};
  auto& s = out.matrix;
  for (std::size_t i = 0; i < m; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      auto r = pearson(prototypes[i].values, prototypes[j].values);
      double v = 0.0;
      if (r) {
        v = *r;
      } else {
        out.diagnostics.push_back({i, j, "constant prototype, similarity set to 0"});
      }
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return out;
}

std::vector<double> normalized_laplacian(const SimilarityMatrix& s) {
  const std::size_t m = s.size();
  std::vector<double> aff(m * m);
  std::vector<double> inv_sqrt_deg(m);
  for (std::size_t i = 0; i < m; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      aff[i * m + j] = i == j ? 1.0 : (s(i, j) + 1.0) / 2.0;
      deg += aff[i * m + j];
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  std::vector<double> lap(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      lap[i * m + j] = (i == j ? 1.0 : 0.0) - inv_sqrt_deg[i] * aff[i * m + j] * inv_sqrt_deg[j];
    }
  }
  // Mirror so rounding in the products cannot break symmetry.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) lap[j * m + i] = lap[i * m + j];
  }
  return lap;
}

std::vector<std::vector<double>> spectral_embedding(const SimilarityMatrix& s, std::size_t k, double tolerance,
                                                    std::size_t max_sweeps) {
  const std::size_t m = s.size();
  auto eig = linalg::jacobi_eigen(normalized_laplacian(s), m, tolerance, max_sweeps);
  std::vector<std::vector<double>> rows(m, std::vector<double>(k));
  for (std::size_t i = 0; i < m; ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      rows[i][j] = eig.vector(i, j);
      norm2 += rows[i][j] * rows[i][j];
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& v : rows[i]) v *= inv;
    }
  }
  return rows;
}

namespace {

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

using Points = std::vector<std::vector<double>>;

Points seed_centers(const Points& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.size();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  Points centers;
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  chosen[first] = true;
  centers.push_back(pts[first]);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], dist2(pts[i], centers.back()));
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = u01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    } else {
      // Remaining points coincide with chosen centers; pick any unchosen one.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    chosen[pick] = true;
    centers.push_back(pts[pick]);
  }
  return centers;
}

std::vector<std::size_t> assign(const Points& pts, const Points& centers) {
  std::vector<std::size_t> labels(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = dist2(pts[i], centers[c]);
      if (d < best) {
        best = d;
        labels[i] = c;
      }
    }
  }
  return labels;
}

void repair_empty(const Points& pts, Points& centers, std::vector<std::size_t>& labels) {
  const std::size_t k = centers.size();
  for (;;) {
    std::vector<std::size_t> counts(k, 0);
    for (auto l : labels) ++counts[l];
    auto empty = std::find(counts.begin(), counts.end(), std::size_t{0});
    if (empty == counts.end()) return;
    std::size_t far = pts.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (counts[labels[i]] < 2) continue;
      const double d = dist2(pts[i], centers[labels[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    const auto target = static_cast<std::size_t>(empty - counts.begin());
    labels[far] = target;
    centers[target] = pts[far];
  }
}

Points means(const Points& pts, const std::vector<std::size_t>& labels, const Points& previous) {
  Points centers(previous.size(), std::vector<double>(pts[0].size(), 0.0));
  std::vector<std::size_t> counts(previous.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++counts[labels[i]];
    for (std::size_t j = 0; j < pts[i].size(); ++j) centers[labels[i]][j] += pts[i][j];
  }
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (counts[c] == 0) {
      centers[c] = previous[c];
      continue;
    }
    for (auto& v : centers[c]) v /= static_cast<double>(counts[c]);
  }
  return centers;
}

double wcss(const Points& pts, const std::vector<std::size_t>& labels, const Points& centers) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += dist2(pts[i], centers[labels[i]]);
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::size_t restarts,
                    std::size_t max_iters, std::uint64_t seed) {
  if (k == 0 || k > points.size()) {
    fail(ErrorKind::configuration, "k-means: k=" + std::to_string(k) + " invalid for " +
                                       std::to_string(points.size()) + " points");
  }
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng rng(derive_seed(seed, {stream::kmeans, r}));
    auto centers = seed_centers(points, k, rng);
    auto labels = assign(points, centers);
    repair_empty(points, centers, labels);
    for (std::size_t it = 0; it < max_iters; ++it) {
      centers = means(points, labels, centers);
      auto next = assign(points, centers);
      repair_empty(points, centers, next);
      if (next == labels) break;
      labels = std::move(next);
    }
    centers = means(points, labels, centers);
    const double score = wcss(points, labels, centers);
    if (score < best.wcss) {
      best.wcss = score;
      best.labels = labels;
      best.restart = r;
    }
  }
  return best;
}

ClusterAssignment spectral_cluster(const SimilarityMatrix& s, const SpectralConfig& cfg, std::uint64_t seed) {
  const std::size_t m = s.size();
  if (cfg.k == 0) fail(ErrorKind::configuration, "cluster count k must be positive");
  if (cfg.k > m) {
    fail(ErrorKind::configuration, "cluster count k=" + std::to_string(cfg.k) + " exceeds " + std::to_string(m) +
                                       " clients");
  }
  if (cfg.k == 1) return ClusterAssignment::from_labels(std::vector<std::size_t>(m, 0), 1);

  auto rows = spectral_embedding(s, cfg.k, cfg.eigen_tolerance, cfg.eigen_max_sweeps);
  auto km = kmeans(rows, cfg.k, cfg.kmeans_restarts, cfg.kmeans_max_iters, seed);
  return ClusterAssignment::from_labels(canonical_labels(km.labels), cfg.k);
}

std::vector<ParameterVector> aggregate_clusters(std::span<const ParameterVector> models,
                                                const ClusterAssignment& assignment,
                                                std::span<const double> weights) {
  if (assignment.labels.size() != models.size()) {
    fail(ErrorKind::validation, "assignment covers " + std::to_string(assignment.labels.size()) + " models, got " +
                                    std::to_string(models.size()));
  }
  if (!weights.empty() && weights.size() != models.size()) {
    fail(ErrorKind::validation, "aggregation weights do not match model count");
  }
  for (const auto& m : models) {
    if (!m.same_layout(models.front())) fail(ErrorKind::validation, "models disagree on layer layout");
  }

  std::vector<ParameterVector> out;
  out.reserve(assignment.k);
  for (std::size_t c = 0; c < assignment.k; ++c) {
    const auto& members = assignment.members[c];
    if (members.empty()) {
      out.push_back({});
      continue;
    }
    ParameterVector agg = models[members.front()];
    // Running mean: identical members reproduce the input exactly.
    double seen = weights.empty() ? 1.0 : weights[members.front()];
    for (std::size_t idx = 1; idx < members.size(); ++idx) {
      const auto& x = models[members[idx]].values;
      const double w = weights.empty() ? 1.0 : weights[members[idx]];
      seen += w;
      if (w == 0.0) continue;
      const double f = w / seen;
      for (std::size_t i = 0; i < x.size(); ++i) agg.values[i] += f * (x[i] - agg.values[i]);
    }
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace bfln::paa
