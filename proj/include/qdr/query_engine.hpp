#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iterator>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdr/core.hpp"
#include "qdr/dr_tree.hpp"
#include "qdr/keyword_bitmap.hpp"
#include "qdr/qc_tree.hpp"

namespace qdr {

struct SearchStats {
  std::size_t node_accesses = 0;
  std::size_t objects_scored = 0;
  std::size_t leaves_searched = 0;
  std::chrono::nanoseconds elapsed{0};

  SearchStats& operator+=(const SearchStats& o) {
    node_accesses += o.node_accesses;
    objects_scored += o.objects_scored;
    leaves_searched += o.leaves_searched;
    elapsed += o.elapsed;
    return *this;
  }
};

/// An object hit inside one DR-tree; `object` is the dataset ordinal.
struct LeafHit {
  std::uint32_t object = 0;
  double score = kInfinity;
  std::size_t phi = 0;
};

namespace detail {

struct HeapItem {
  double score;
  bool is_object;
  std::uint64_t tie;  // object ordinal, or push sequence for nodes
  std::uint32_t ref;
};

// Min-heap order: score, then nodes before objects, then tie.
struct HeapAfter {
  bool operator()(const HeapItem& a, const HeapItem& b) const {
    if (a.score != b.score) return a.score > b.score;
    if (a.is_object != b.is_object) return a.is_object;
    return a.tie > b.tie;
  }
};

}  // namespace detail

/// Exact top-`kappa` over one DR-tree by best-first traversal with the node
/// bound as key. `bmr` is the relaxed query bitmap over the tree's universe.
inline std::vector<LeafHit> best_first_leaf_search(const Query& q, const KeywordBitmap& bmr,
                                                   const DrTree& tree, std::size_t kappa,
                                                   SearchStats& stats) {
  std::vector<LeafHit> out;
  if (tree.empty() || kappa == 0) return out;
  ++stats.leaves_searched;

  std::priority_queue<detail::HeapItem, std::vector<detail::HeapItem>, detail::HeapAfter> heap;
  std::multiset<double> pending;  // scores of objects waiting in the heap
  std::uint64_t sequence = 0;
  heap.push({0.0, false, sequence++, tree.root()});

  // Score the `need`-th best pending object must beat for a candidate to matter.
  auto threshold = [&](std::size_t need) {
    if (pending.size() < need) return kInfinity;
    return *std::next(pending.begin(), static_cast<std::ptrdiff_t>(need - 1));
  };

  while (!heap.empty()) {
    const auto top = heap.top();
    heap.pop();
    if (top.is_object) {
      pending.erase(pending.begin());
      const auto& e = tree.entries()[top.ref];
      out.push_back({e.object, top.score, bmr.and_count(e.kb)});
      if (out.size() >= kappa) break;
      continue;
    }
    ++stats.node_accesses;
    const DrNode& node = tree.node(top.ref);
    const std::size_t need = kappa - out.size();
    for (auto c : node.children) {
      if (node.leaf) {
        const auto& e = tree.entries()[c];
        ++stats.objects_scored;
        const double s = score_object(q, e.location, e.attributes,
                                      static_cast<double>(bmr.and_count(e.kb)));
        if (s == kInfinity || threshold(need) < s) continue;
        heap.push({s, true, e.object, c});
        pending.insert(s);
      } else {
        const DrNode& child = tree.node(c);
        const double s = score_node(q, child, static_cast<double>(node_phi(bmr, child)));
        if (s == kInfinity || threshold(need) < s) continue;
        heap.push({s, false, sequence++, c});
      }
    }
  }
  return out;
}

struct QueryHit {
  std::string object_id;
  double score = kInfinity;
  double distance = 0.0;
  std::size_t phi = 0;
  double weighted_attributes = 0.0;
};

struct SearchResult {
  std::vector<ScoredResult> results;
  std::vector<QueryHit> hits;  // parallel to `results`
  std::vector<std::uint32_t> leaves;
  SearchStats stats;
};

/// Merges per-source hits: keeps each object's best score and returns the
/// first `kappa` in (score, ordinal) order.
inline std::vector<LeafHit> merge_hits(const std::vector<LeafHit>& hits, std::size_t kappa) {
  std::unordered_map<std::uint32_t, LeafHit> best;
  for (const auto& h : hits) {
    auto [it, fresh] = best.emplace(h.object, h);
    if (!fresh && h.score < it->second.score) it->second = h;
  }
  std::vector<LeafHit> out;
  out.reserve(best.size());
  for (const auto& [_, h] : best) out.push_back(h);
  std::sort(out.begin(), out.end(), [](const LeafHit& a, const LeafHit& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.object < b.object;
  });
  if (out.size() > kappa) out.resize(kappa);
  return out;
}

/// Full query: locate leaf clusters, relax the query bitmap per leaf, search
/// each located DR-tree and merge.
inline SearchResult qdr_search(const Query& q, const QcTree& tree) {
  const auto start = std::chrono::steady_clock::now();
  validate_query(q, tree.attribute_dimension());
  SearchResult r;
  r.leaves = find_leaf_cluster(q, tree);
  std::vector<LeafHit> all;
  for (auto li : r.leaves) {
    const auto& leaf = tree.leaves()[li];
    if (leaf.tree.empty()) continue;
    const auto bmr = relax_query(q.keywords, leaf.universe, q.tau_relax, tree.metric());
    if (bmr.none()) continue;
    auto hits = best_first_leaf_search(q, bmr, leaf.tree, q.kappa, r.stats);
    all.insert(all.end(), hits.begin(), hits.end());
  }
  for (const auto& h : merge_hits(all, q.kappa)) {
    const auto& o = tree.objects()[h.object];
    r.results.push_back({o.id, h.score});
    r.hits.push_back({o.id, h.score, euclidean_distance(q.location, o.location), h.phi,
                      weighted_attribute_sum(q.weights, o.attributes)});
  }
  r.stats.elapsed = std::chrono::steady_clock::now() - start;
  return r;
}

}  // namespace qdr
