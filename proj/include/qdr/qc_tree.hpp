#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qdr/clustering.hpp"
#include "qdr/core.hpp"
#include "qdr/dr_tree.hpp"
#include "qdr/keyword_metric.hpp"

namespace qdr {

struct QcNode {
  std::string center;
  bool leaf = false;
  std::array<std::uint32_t, 4> children{};  // internal nodes only
  std::uint32_t leaf_index = 0;             // leaves only
};

struct QcLeaf {
  KeywordCluster cluster;
  LeafKind kind = LeafKind::kTight;
  std::vector<std::string> universe;  // lexicographic; defines bit positions
  DrTree tree;
};

struct IndexParams {
  ClusterParams cluster;
  DrTreeParams dr;
};

/// The two-layer index: a quad tree of keyword clusters whose leaves own
/// DR-trees over the objects carrying at least one of the leaf's keywords.
class QcTree {
 public:
  QcTree() = default;
  QcTree(KeywordMetric metric, std::vector<GeoObject> objects, std::vector<QcNode> nodes,
         std::vector<QcLeaf> leaves, std::uint32_t root, std::size_t attribute_dimension,
         Mbr bounds, IndexParams params)
      : metric_(std::move(metric)),
        objects_(std::move(objects)),
        nodes_(std::move(nodes)),
        leaves_(std::move(leaves)),
        root_(root),
        attribute_dimension_(attribute_dimension),
        bounds_(bounds),
        params_(params) {}

  const KeywordMetric& metric() const { return metric_; }
  const std::vector<GeoObject>& objects() const { return objects_; }
  const std::vector<QcNode>& nodes() const { return nodes_; }
  const std::vector<QcLeaf>& leaves() const { return leaves_; }
  std::uint32_t root() const { return root_; }
  std::size_t attribute_dimension() const { return attribute_dimension_; }
  const Mbr& bounds() const { return bounds_; }
  const IndexParams& params() const { return params_; }

  /// Default D_s^max: the diagonal of the dataset's bounding rectangle.
  double default_d_max() const {
    const double diag = euclidean_distance(bounds_.lo, bounds_.hi);
    return diag > 0.0 ? diag : 1.0;
  }

  std::size_t dr_node_count() const {
    std::size_t n = 0;
    for (const auto& l : leaves_) n += l.tree.nodes().size();
    return n;
  }
  std::size_t keyword_occurrences() const {
    std::size_t n = 0;
    for (const auto& l : leaves_) n += l.universe.size();
    return n;
  }
  std::size_t indexed_entries() const {
    std::size_t n = 0;
    for (const auto& l : leaves_) n += l.tree.entries().size();
    return n;
  }

 private:
  KeywordMetric metric_;
  std::vector<GeoObject> objects_;  // sorted by id; position = ordinal
  std::vector<QcNode> nodes_;
  std::vector<QcLeaf> leaves_;
  std::uint32_t root_ = 0;
  std::size_t attribute_dimension_ = 0;
  Mbr bounds_;
  IndexParams params_;
};

namespace detail {

inline std::uint32_t mirror(const ClusterNode& c, std::vector<QcNode>& nodes,
                            std::vector<QcLeaf>& leaves) {
  const auto at = static_cast<std::uint32_t>(nodes.size());
  nodes.push_back({c.cluster.center, c.is_leaf(), {}, 0});
  if (c.is_leaf()) {
    nodes[at].leaf_index = static_cast<std::uint32_t>(leaves.size());
    leaves.push_back({c.cluster, c.kind, c.cluster.keywords, {}});
    return at;
  }
  if (c.children.size() != 4) throw CorruptIndex("cluster hierarchy node without four children");
  for (std::size_t j = 0; j < 4; ++j) {
    const auto child = mirror(c.children[j], nodes, leaves);
    nodes[at].children[j] = child;
  }
  return at;
}

}  // namespace detail

/// Mirrors `hierarchy` and gives each leaf a DR-tree over every object that
/// shares a keyword with the leaf's universe. `objects` must be sorted by id.
inline QcTree build_qc_tree(const ClusterNode& hierarchy, std::vector<GeoObject> objects,
                            KeywordMetric metric, const IndexParams& params) {
  if (objects.empty()) throw InvalidInput("cannot index an empty dataset");
  const std::size_t dims = objects.front().attributes.size();
  Mbr bounds;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    validate_object(objects[i]);
    if (objects[i].attributes.size() != dims)
      throw InvalidInput("object '" + objects[i].id + "' has attribute dimension " +
                         std::to_string(objects[i].attributes.size()) + ", expected " +
                         std::to_string(dims));
    if (i > 0 && !(objects[i - 1].id < objects[i].id))
      throw InvalidInput("objects must have unique ids in ascending order");
    bounds.expand(objects[i].location);
  }

  std::vector<QcNode> nodes;
  std::vector<QcLeaf> leaves;
  const auto root = detail::mirror(hierarchy, nodes, leaves);

  std::vector<bool> placed(objects.size(), false);
  for (auto& leaf : leaves) {
    std::vector<DrEntry> entries;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      auto bm = encode(objects[i].keywords, leaf.universe);
      if (bm.none()) continue;
      placed[i] = true;
      entries.push_back({static_cast<std::uint32_t>(i), objects[i].location, objects[i].attributes,
                         std::move(bm)});
    }
    leaf.tree = DrTree::bulk_build(std::move(entries), leaf.universe, params.dr);
  }
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (!placed[i])
      throw InvalidInput("object '" + objects[i].id + "' has no keyword in any leaf cluster");

  return QcTree(std::move(metric), std::move(objects), std::move(nodes), std::move(leaves), root,
                dims, bounds, params);
}

/// Clusters the dataset's keyword universe and builds the full index.
inline QcTree build_index(std::vector<GeoObject> objects, KeywordMetric metric,
                          const IndexParams& params = {}) {
  std::sort(objects.begin(), objects.end(),
            [](const GeoObject& a, const GeoObject& b) { return a.id < b.id; });
  std::vector<std::string> universe;
  for (const auto& o : objects) universe.insert(universe.end(), o.keywords.begin(), o.keywords.end());
  canonicalize_keywords(universe);
  const auto hierarchy = build_cluster_hierarchy(std::move(universe), metric, params.cluster);
  return build_qc_tree(hierarchy, std::move(objects), std::move(metric), params);
}

/// Index of the child whose center is closest to `keyword`; ties go to the
/// lexicographically smallest center.
inline std::size_t route_child(const QcTree& tree, const QcNode& node, const std::string& keyword) {
  std::size_t best = 0;
  double best_d = kInfinity;
  for (std::size_t j = 0; j < 4; ++j) {
    const auto& center = tree.nodes()[node.children[j]].center;
    const double d = tree.metric()(keyword, center);
    if (d < best_d || (d == best_d && center < tree.nodes()[node.children[best]].center)) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

/// Leaf clusters reached by descending once per query keyword (sorted, unique).
inline std::vector<std::uint32_t> find_leaf_cluster(const Query& q, const QcTree& tree) {
  if (q.keywords.empty()) throw InvalidInput("query needs at least one keyword");
  std::vector<std::uint32_t> out;
  for (const auto& k : q.keywords) {
    const QcNode* n = &tree.nodes()[tree.root()];
    while (!n->leaf) n = &tree.nodes()[n->children[route_child(tree, *n, k)]];
    out.push_back(n->leaf_index);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace qdr
