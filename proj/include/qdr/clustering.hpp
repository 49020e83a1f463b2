#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qdr/core.hpp"
#include "qdr/keyword_metric.hpp"

namespace qdr {

struct ClusterParams {
  double tau_cluster = 0.3;
  double tau_dup = 0.05;
  double kernel_sigma = 0.5;
  std::uint64_t seed = 1;
  std::size_t max_iters = 50;
};

inline void validate(const ClusterParams& p) {
  if (!(p.tau_cluster > 0.0)) throw InvalidInput("tau_cluster must be positive");
  if (!(p.tau_dup >= 0.0)) throw InvalidInput("tau_dup must be non-negative");
  if (!(p.kernel_sigma > 0.0)) throw InvalidInput("kernel_sigma must be positive");
}

/// Dense symmetric matrix of pairwise keyword distances over a word list.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  /// Builds from an explicit row-major n*n table.
  DistanceMatrix(std::size_t n, std::vector<double> values) : n_(n), d_(std::move(values)) {
    if (d_.size() != n * n) throw InvalidInput("distance table must be n*n");
  }

  template <class Metric>
  static DistanceMatrix compute(std::span<const std::string> words, const Metric& metric) {
    const std::size_t n = words.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = metric(words[i], words[j]);
    return DistanceMatrix(n, std::move(d));
  }

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// Max pairwise distance among `members`.
inline double cluster_diameter(const DistanceMatrix& d, std::span<const std::size_t> members) {
  double best = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b)
      best = std::max(best, d(members[a], members[b]));
  return best;
}

/// Member minimizing the sum of distances to all members. `less` breaks ties.
template <class Less = std::less<std::size_t>>
std::size_t cluster_medoid(const DistanceMatrix& d, std::span<const std::size_t> members,
                           Less less = {}) {
  if (members.empty()) throw InvalidInput("medoid of an empty cluster");
  std::size_t best = members[0];
  double best_sum = kInfinity;
  for (std::size_t m : members) {
    double s = 0.0;
    for (std::size_t o : members) s += d(m, o);
    if (s < best_sum || (s == best_sum && less(m, best))) {
      best = m;
      best_sum = s;
    }
  }
  return best;
}

/// Kernel k-means with an RBF kernel over the given distances. Returns `k`
/// non-empty groups of member indices, each sorted, ordered by first member.
inline std::vector<std::vector<std::size_t>> kernel_kmeans(const DistanceMatrix& d,
                                                           std::span<const std::size_t> members,
                                                           std::size_t k,
                                                           const ClusterParams& params) {
  const std::size_t n = members.size();
  if (k == 0) throw InvalidInput("kernel_kmeans: k must be positive");
  if (n < k) throw InvalidInput("kernel_kmeans: fewer points than clusters");

  const double two_sigma2 = 2.0 * params.kernel_sigma * params.kernel_sigma;
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dij = d(members[i], members[j]);
      K[i * n + j] = std::exp(-dij * dij / two_sigma2);
    }
  auto kern = [&](std::size_t i, std::size_t j) { return K[i * n + j]; };

  // Farthest-first seeding in feature space; the first seed comes from the RNG.
  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> seeds{static_cast<std::size_t>(rng() % n)};
  std::vector<double> nearest(n, kInfinity);
  while (seeds.size() < k) {
    const std::size_t s = seeds.back();
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], kern(i, i) + kern(s, s) - 2.0 * kern(i, s));
    std::size_t pick = n;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(seeds.begin(), seeds.end(), i) != seeds.end()) continue;
      if (nearest[i] > far) {
        far = nearest[i];
        pick = i;
      }
    }
    seeds.push_back(pick);
  }

  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = kInfinity;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t s = seeds[c];
      const double dist = kern(i, i) + kern(s, s) - 2.0 * kern(i, s);
      if (dist < best) {
        best = dist;
        label[i] = c;
      }
    }
  }

  std::vector<double> self_term(k), cross(n * k);
  std::vector<std::size_t> count(k);
  auto refresh = [&] {
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++count[label[i]];
    std::fill(cross.begin(), cross.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cross[i * k + label[j]] += kern(i, j);
    for (std::size_t c = 0; c < k; ++c) self_term[c] = 0.0;
    for (std::size_t i = 0; i < n; ++i) self_term[label[i]] += cross[i * k + label[i]];
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;
      const double m = static_cast<double>(count[c]);
      self_term[c] /= m * m;
      for (std::size_t i = 0; i < n; ++i) cross[i * k + c] /= m;
    }
  };
  auto feature_distance = [&](std::size_t i, std::size_t c) {
    return kern(i, i) - 2.0 * cross[i * k + c] + self_term[c];
  };

  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    refresh();
    bool changed = false;
    std::vector<std::size_t> next = label;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best_c = label[i];
      double best = feature_distance(i, label[i]);
      for (std::size_t c = 0; c < k; ++c) {
        if (count[c] == 0) continue;
        const double dist = feature_distance(i, c);
        if (dist < best) {
          best = dist;
          best_c = c;
        }
      }
      if (best_c != label[i]) {
        next[i] = best_c;
        changed = true;
      }
    }
    label = std::move(next);

    // Repair empty clusters with the point farthest from its own centroid.
    for (;;) {
      refresh();
      const auto empty = std::find(count.begin(), count.end(), 0);
      if (empty == count.end()) break;
      std::size_t pick = n;
      double far = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[label[i]] < 2) continue;
        const double dist = feature_distance(i, label[i]);
        if (dist > far) {
          far = dist;
          pick = i;
        }
      }
      label[pick] = static_cast<std::size_t>(empty - count.begin());
      changed = true;
    }
    if (!changed) break;
  }

  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t i = 0; i < n; ++i) groups[label[i]].push_back(members[i]);
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

/// Population variance of the given values.
inline double population_variance(std::span<const double> values) {
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - mean) * (v - mean);
  return s / static_cast<double>(values.size());
}

/// Copies every keyword whose distances to the four sibling centers have
/// variance below `tau_dup` into all four sets. Inputs are index sets.
inline std::array<std::vector<std::size_t>, 4> duplicate(
    const DistanceMatrix& d, std::array<std::vector<std::size_t>, 4> sets,
    const std::array<std::size_t, 4>& centers, double tau_dup) {
  std::vector<std::size_t> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<std::size_t> shared;
  for (std::size_t k : all) {
    std::array<double, 4> dist{};
    for (std::size_t j = 0; j < 4; ++j) dist[j] = d(k, centers[j]);
    if (population_variance(dist) < tau_dup) shared.push_back(k);
  }
  for (auto& s : sets) {
    s.insert(s.end(), shared.begin(), shared.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return sets;
}

/// String-level form of `duplicate` for callers holding keyword sets.
template <class Metric>
std::array<std::vector<std::string>, 4> duplicate(const std::array<std::vector<std::string>, 4>& sets,
                                                  const std::array<std::string, 4>& centers,
                                                  double tau_dup, const Metric& metric) {
  std::array<std::vector<std::string>, 4> out = sets;
  std::vector<std::string> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (const auto& k : all) {
    std::array<double, 4> dist{};
    for (std::size_t j = 0; j < 4; ++j) dist[j] = metric(k, centers[j]);
    if (population_variance(dist) < tau_dup)
      for (auto& s : out)
        if (std::find(s.begin(), s.end(), k) == s.end()) s.push_back(k);
  }
  for (auto& s : out) std::sort(s.begin(), s.end());
  return out;
}

enum class LeafKind : std::uint8_t {
  kInternal = 0,  // split further
  kTight = 1,     // diameter fell below tau_cluster
  kSmall = 2,     // fewer than four keywords, cannot be quad-split
};

struct KeywordCluster {
  std::vector<std::string> keywords;    // sorted, includes duplicated keywords
  std::vector<std::string> duplicated;  // keywords copied in from siblings
  std::string center;                   // medoid of `keywords`
  double diameter = 0.0;                // over `keywords`
  double core_diameter = 0.0;           // over keywords before duplication
};

struct ClusterNode {
  KeywordCluster cluster;
  LeafKind kind = LeafKind::kInternal;
  std::vector<ClusterNode> children;  // empty or exactly four

  bool is_leaf() const { return children.empty(); }
};

namespace detail {

inline KeywordCluster make_cluster(const DistanceMatrix& d, std::span<const std::string> words,
                                   const std::vector<std::size_t>& members,
                                   const std::vector<std::size_t>& core) {
  KeywordCluster c;
  for (std::size_t m : members) c.keywords.push_back(words[m]);
  for (std::size_t m : members)
    if (!std::binary_search(core.begin(), core.end(), m)) c.duplicated.push_back(words[m]);
  // Words are sorted, so index order is lexicographic order.
  c.center = words[cluster_medoid(d, members)];
  c.diameter = cluster_diameter(d, members);
  c.core_diameter = cluster_diameter(d, core);
  return c;
}

inline ClusterNode split_cluster(const DistanceMatrix& d, std::span<const std::string> words,
                                 std::vector<std::size_t> members, const ClusterParams& params) {
  ClusterNode node;
  node.cluster = make_cluster(d, words, members, members);
  if (members.size() < 4) {
    node.kind = LeafKind::kSmall;
    return node;
  }
  if (node.cluster.diameter < params.tau_cluster) {
    node.kind = LeafKind::kTight;
    return node;
  }

  const auto groups = kernel_kmeans(d, members, 4, params);
  std::array<std::vector<std::size_t>, 4> sets;
  std::array<std::size_t, 4> centers{};
  std::array<bool, 4> tight{};
  bool any_tight = false;
  for (std::size_t j = 0; j < 4; ++j) {
    sets[j] = groups[j];
    centers[j] = cluster_medoid(d, sets[j]);
    tight[j] = cluster_diameter(d, sets[j]) < params.tau_cluster;
    any_tight = any_tight || tight[j];
  }
  const auto widened = any_tight ? duplicate(d, sets, centers, params.tau_dup) : sets;

  for (std::size_t j = 0; j < 4; ++j) {
    if (tight[j] || sets[j].size() < 4) {
      ClusterNode leaf;
      leaf.cluster = make_cluster(d, words, widened[j], sets[j]);
      leaf.kind = tight[j] ? LeafKind::kTight : LeafKind::kSmall;
      node.children.push_back(std::move(leaf));
    } else {
      node.children.push_back(split_cluster(d, words, sets[j], params));
    }
  }
  return node;
}

}  // namespace detail

/// Hierarchical quad clustering of a keyword universe.
template <class Metric>
ClusterNode build_cluster_hierarchy(std::vector<std::string> universe, const Metric& metric,
                                    const ClusterParams& params) {
  validate(params);
  canonicalize_keywords(universe);
  if (universe.empty()) throw InvalidInput("cannot cluster an empty keyword universe");
  const auto d = DistanceMatrix::compute(universe, metric);
  std::vector<std::size_t> all(universe.size());
  std::iota(all.begin(), all.end(), 0);
  return detail::split_cluster(d, universe, std::move(all), params);
}

/// Leaves in depth-first order.
inline void collect_leaves(const ClusterNode& node, std::vector<const ClusterNode*>& out) {
  if (node.is_leaf()) {
    out.push_back(&node);
    return;
  }
  for (const auto& c : node.children) collect_leaves(c, out);
}

}  // namespace qdr
