#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdr/core.hpp"
#include "qdr/dr_tree.hpp"
#include "qdr/keyword_bitmap.hpp"
#include "qdr/keyword_metric.hpp"
#include "qdr/qc_tree.hpp"
#include "qdr/query_engine.hpp"

namespace qdr {

/// Universe keywords that the query matches: exact hits plus anything within
/// `tau_relax` of a query keyword. `universe` must be sorted.
template <class Metric>
std::vector<bool> matched_keywords(const Query& q, std::span<const std::string> universe,
                                   const Metric& metric) {
  std::vector<bool> hit(universe.size(), false);
  for (const auto& k : q.keywords)
    for (std::size_t j = 0; j < universe.size(); ++j)
      if (!hit[j] && (universe[j] == k || metric(k, universe[j]) < q.tau_relax)) hit[j] = true;
  return hit;
}

/// Relaxed keyword relevance of a keyword list against a matched universe.
inline std::size_t relaxed_phi(std::span<const std::string> keywords,
                               std::span<const std::string> universe,
                               const std::vector<bool>& matched) {
  std::size_t phi = 0;
  for (const auto& k : keywords) {
    auto it = std::lower_bound(universe.begin(), universe.end(), k);
    if (it != universe.end() && *it == k && matched[static_cast<std::size_t>(it - universe.begin())])
      ++phi;
  }
  return phi;
}

inline std::vector<std::string> keyword_universe(std::span<const GeoObject> objects) {
  std::vector<std::string> u;
  for (const auto& o : objects) u.insert(u.end(), o.keywords.begin(), o.keywords.end());
  canonicalize_keywords(u);
  return u;
}

namespace detail {

inline std::vector<ScoredResult> top_kappa(std::vector<ScoredResult> all, std::size_t kappa) {
  std::sort(all.begin(), all.end(), result_before);
  if (all.size() > kappa) all.resize(kappa);
  return all;
}

}  // namespace detail

/// Ground truth: scores every object with relaxed matching over the full
/// dataset keyword universe and returns the exact top-kappa.
template <class Metric>
std::vector<ScoredResult> linear_scan(const Query& q, std::span<const GeoObject> objects,
                                      const Metric& metric) {
  const auto universe = keyword_universe(objects);
  const auto matched = matched_keywords(q, universe, metric);
  std::vector<ScoredResult> all;
  for (const auto& o : objects) {
    const auto phi = relaxed_phi(o.keywords, universe, matched);
    if (phi == 0) continue;
    all.push_back({o.id, score_object(q, o, static_cast<double>(phi))});
  }
  return detail::top_kappa(std::move(all), q.kappa);
}

/// Linear scan restricted to the objects indexed under the leaves the query is
/// routed to. Each object is scored against each located leaf's universe and
/// keeps its best score.
inline std::vector<ScoredResult> scoped_linear_scan(const Query& q, const QcTree& tree) {
  std::unordered_map<std::size_t, double> best;
  for (auto li : find_leaf_cluster(q, tree)) {
    const auto& universe = tree.leaves()[li].universe;
    const auto matched = matched_keywords(q, universe, tree.metric());
    for (std::size_t i = 0; i < tree.objects().size(); ++i) {
      const auto& o = tree.objects()[i];
      const auto phi = relaxed_phi(o.keywords, universe, matched);
      if (phi == 0) continue;
      const double s = score_object(q, o, static_cast<double>(phi));
      auto [it, fresh] = best.emplace(i, s);
      if (!fresh) it->second = std::min(it->second, s);
    }
  }
  std::vector<ScoredResult> all;
  for (const auto& [i, s] : best) all.push_back({tree.objects()[i].id, s});
  return detail::top_kappa(std::move(all), q.kappa);
}

/// One skyline R-tree per keyword; multi-keyword queries search every tree
/// whose keyword the query matches, then merge and rescore.
class PerKeywordIndex {
 public:
  PerKeywordIndex(std::vector<GeoObject> objects, KeywordMetric metric,
                  const DrTreeParams& params = {})
      : objects_(std::move(objects)), metric_(std::move(metric)) {
    std::sort(objects_.begin(), objects_.end(),
              [](const GeoObject& a, const GeoObject& b) { return a.id < b.id; });
    universe_ = keyword_universe(objects_);
    std::vector<std::vector<DrEntry>> per(universe_.size());
    for (std::uint32_t i = 0; i < objects_.size(); ++i) {
      for (const auto& k : objects_[i].keywords) {
        const auto j = static_cast<std::size_t>(
            std::lower_bound(universe_.begin(), universe_.end(), k) - universe_.begin());
        KeywordBitmap bit(1);
        bit.set(0);
        per[j].push_back({i, objects_[i].location, objects_[i].attributes, std::move(bit)});
      }
    }
    trees_.reserve(universe_.size());
    for (std::size_t j = 0; j < universe_.size(); ++j)
      trees_.push_back(DrTree::bulk_build(std::move(per[j]), {universe_[j]}, params));
  }

  const std::vector<std::string>& keywords() const { return universe_; }
  const std::vector<DrTree>& trees() const { return trees_; }
  std::size_t node_count() const {
    std::size_t n = 0;
    for (const auto& t : trees_) n += t.nodes().size();
    return n;
  }

  /// stats.leaves_searched counts the per-keyword trees searched.
  SearchResult search(const Query& q) const {
    const auto start = std::chrono::steady_clock::now();
    SearchResult r;
    const auto matched = matched_keywords(q, universe_, metric_);
    KeywordBitmap single(1);
    single.set(0);
    std::vector<std::uint32_t> candidates;
    for (std::size_t j = 0; j < trees_.size(); ++j) {
      if (!matched[j]) continue;
      for (const auto& h : best_first_leaf_search(q, single, trees_[j], q.kappa, r.stats))
        candidates.push_back(h.object);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<ScoredResult> all;
    for (auto c : candidates) {
      const auto& o = objects_[c];
      const auto phi = relaxed_phi(o.keywords, universe_, matched);
      all.push_back({o.id, score_object(q, o, static_cast<double>(phi))});
    }
    r.results = detail::top_kappa(std::move(all), q.kappa);
    r.stats.elapsed = std::chrono::steady_clock::now() - start;
    return r;
  }

 private:
  std::vector<GeoObject> objects_;
  KeywordMetric metric_;
  std::vector<std::string> universe_;
  std::vector<DrTree> trees_;
};

/// A single R-tree with keyword bitmaps over the whole universe. Traversal
/// prunes on keywords and space only; attributes enter in a rescoring pass.
class KeywordOnlyIndex {
 public:
  KeywordOnlyIndex(std::vector<GeoObject> objects, KeywordMetric metric,
                   const DrTreeParams& params = {})
      : objects_(std::move(objects)), metric_(std::move(metric)) {
    std::sort(objects_.begin(), objects_.end(),
              [](const GeoObject& a, const GeoObject& b) { return a.id < b.id; });
    universe_ = keyword_universe(objects_);
    tree_ = DrTree::bulk_build(DrTree::make_entries(objects_, universe_), universe_, params);
  }

  const DrTree& tree() const { return tree_; }

  /// stats.objects_scored counts candidates rescored with the full score.
  SearchResult search(const Query& q) const {
    const auto start = std::chrono::steady_clock::now();
    SearchResult r;
    if (tree_.empty() || q.kappa == 0) return r;
    const auto bmr = relax_query(q.keywords, universe_, q.tau_relax, metric_);
    const auto params = q.score_params();
    ++r.stats.leaves_searched;

    std::priority_queue<detail::HeapItem, std::vector<detail::HeapItem>, detail::HeapAfter> heap;
    std::uint64_t sequence = 0;
    heap.push({0.0, false, sequence++, tree_.root()});
    std::vector<ScoredResult> best;  // max-heap by result_before
    auto worse = [](const ScoredResult& a, const ScoredResult& b) { return result_before(a, b); };

    while (!heap.empty()) {
      const auto top = heap.top();
      heap.pop();
      if (best.size() == q.kappa && top.score > best.front().score) break;
      if (top.is_object) {
        const auto& e = tree_.entries()[top.ref];
        const auto& o = objects_[e.object];
        ++r.stats.objects_scored;
        ScoredResult s{o.id, score_object(q, o, static_cast<double>(bmr.and_count(e.kb)))};
        if (best.size() < q.kappa) {
          best.push_back(std::move(s));
          std::push_heap(best.begin(), best.end(), worse);
        } else if (result_before(s, best.front())) {
          std::pop_heap(best.begin(), best.end(), worse);
          best.back() = std::move(s);
          std::push_heap(best.begin(), best.end(), worse);
        }
        continue;
      }
      ++r.stats.node_accesses;
      const DrNode& node = tree_.node(top.ref);
      for (auto c : node.children) {
        if (node.leaf) {
          const auto& e = tree_.entries()[c];
          const double bound = combine_score(params, euclidean_distance(q.location, e.location),
                                             static_cast<double>(bmr.and_count(e.kb)), 0.0);
          if (bound != kInfinity) heap.push({bound, true, e.object, c});
        } else {
          const DrNode& child = tree_.node(c);
          const double bound = combine_score(params, min_dist(q.location, child.mbr),
                                             static_cast<double>(node_phi(bmr, child)), 0.0);
          if (bound != kInfinity) heap.push({bound, false, sequence++, c});
        }
      }
    }
    std::sort(best.begin(), best.end(), result_before);
    r.results = std::move(best);
    r.stats.elapsed = std::chrono::steady_clock::now() - start;
    return r;
  }

 private:
  std::vector<GeoObject> objects_;
  KeywordMetric metric_;
  std::vector<std::string> universe_;
  DrTree tree_;
};

}  // namespace qdr
