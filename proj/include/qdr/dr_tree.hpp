#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qdr/core.hpp"
#include "qdr/keyword_bitmap.hpp"
#include "qdr/skyline.hpp"

namespace qdr {

struct Mbr {
  Point lo{kInfinity, kInfinity};
  Point hi{-kInfinity, -kInfinity};

  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y; }
  void expand(const Point& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  void expand(const Mbr& m) {
    expand(m.lo);
    expand(m.hi);
  }
  bool contains(const Point& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  Point center() const { return {(lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0}; }

  friend bool operator==(const Mbr&, const Mbr&) = default;
};

/// Distance from `p` to the nearest point of `m`; zero inside.
inline double min_dist(const Point& p, const Mbr& m) {
  const double dx = std::max({m.lo.x - p.x, 0.0, p.x - m.hi.x});
  const double dy = std::max({m.lo.y - p.y, 0.0, p.y - m.hi.y});
  return std::hypot(dx, dy);
}

/// One indexed object as seen by a DR-tree. `object` is the ordinal of the
/// object in the owning dataset; ordinals follow ascending object id.
struct DrEntry {
  std::uint32_t object = 0;
  Point location;
  std::vector<double> attributes;
  KeywordBitmap kb;
};

struct DrNode {
  Mbr mbr;
  SkylineSet sp;
  KeywordBitmap kb;
  // Largest keyword count of any object below; caps the node's phi.
  std::size_t max_keywords = 0;
  bool leaf = true;
  // Leaf: indices into DrTree::entries(). Internal: indices into DrTree::nodes().
  std::vector<std::uint32_t> children;
};

struct DrTreeParams {
  std::size_t fanout = 25;
  double tau_merge = 0.99;
};

/// STR-packed R-tree whose nodes carry a compressed skyline and a keyword bitmap.
class DrTree {
 public:
  static constexpr std::uint32_t kNoRoot = std::numeric_limits<std::uint32_t>::max();

  DrTree() = default;

  /// Bulk loads `entries`. An empty input gives an empty tree.
  static DrTree bulk_build(std::vector<DrEntry> entries, std::vector<std::string> universe,
                           const DrTreeParams& params = {}) {
    if (params.fanout < 2) throw InvalidInput("DR-tree fanout must be at least 2");
    DrTree t;
    t.universe_ = std::move(universe);
    t.entries_ = std::move(entries);
    t.params_ = params;
    for (const auto& e : t.entries_)
      if (e.kb.width() != t.universe_.size())
        throw InvalidInput("entry bitmap width does not match the universe");
    if (t.entries_.empty()) return t;

    std::vector<Item> items;
    items.reserve(t.entries_.size());
    for (std::uint32_t i = 0; i < t.entries_.size(); ++i)
      items.push_back({t.entries_[i].location, i});
    bool leaf_level = true;
    for (;;) {
      std::vector<Item> parents;
      for (auto& group : str_pack(std::move(items), params.fanout)) {
        DrNode node;
        node.leaf = leaf_level;
        for (const auto& it : group) node.children.push_back(it.id);
        t.summarize(node);
        t.nodes_.push_back(std::move(node));
        parents.push_back({t.nodes_.back().mbr.center(), static_cast<std::uint32_t>(t.nodes_.size() - 1)});
      }
      leaf_level = false;
      if (parents.size() == 1) {
        t.root_ = parents.front().id;
        break;
      }
      items = std::move(parents);
    }
    return t;
  }

  /// Builds entries for `objects`, using each object's position as its ordinal.
  static std::vector<DrEntry> make_entries(std::span<const GeoObject> objects,
                                           std::span<const std::string> universe) {
    std::vector<DrEntry> out;
    out.reserve(objects.size());
    for (std::size_t i = 0; i < objects.size(); ++i)
      out.push_back({static_cast<std::uint32_t>(i), objects[i].location, objects[i].attributes,
                     encode(objects[i].keywords, universe)});
    return out;
  }

  /// Reassembles a tree from already-summarized parts (deserialization).
  static DrTree from_parts(std::vector<std::string> universe, std::vector<DrEntry> entries,
                           std::vector<DrNode> nodes, std::uint32_t root, DrTreeParams params) {
    DrTree t;
    t.universe_ = std::move(universe);
    t.entries_ = std::move(entries);
    t.nodes_ = std::move(nodes);
    t.root_ = root;
    t.params_ = params;
    if ((t.root_ == kNoRoot) != t.nodes_.empty() ||
        (t.root_ != kNoRoot && t.root_ >= t.nodes_.size()))
      throw CorruptIndex("DR-tree root out of range");
    for (const auto& n : t.nodes_)
      for (auto c : n.children)
        if (c >= (n.leaf ? t.entries_.size() : t.nodes_.size()))
          throw CorruptIndex("DR-tree child reference out of range");
    if (!t.empty()) t.fill_max_keywords(t.root_, 0);
    return t;
  }

  bool empty() const { return root_ == kNoRoot; }
  std::uint32_t root() const { return root_; }
  const DrNode& node(std::uint32_t i) const { return nodes_[i]; }
  std::span<const DrNode> nodes() const { return nodes_; }
  std::span<const DrEntry> entries() const { return entries_; }
  const std::vector<std::string>& universe() const { return universe_; }
  const DrTreeParams& params() const { return params_; }

  std::size_t height() const {
    if (empty()) return 0;
    std::size_t h = 1;
    for (auto n = root_; !nodes_[n].leaf; n = nodes_[n].children.front()) ++h;
    return h;
  }

 private:
  struct Item {
    Point at;
    std::uint32_t id;
  };

  /// Sort-Tile-Recursive grouping of `items` into runs of at most `fanout`.
  static std::vector<std::vector<Item>> str_pack(std::vector<Item> items, std::size_t fanout) {
    const std::size_t n = items.size();
    const std::size_t pages = (n + fanout - 1) / fanout;
    const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pages))));
    const std::size_t slice_size = slices * fanout;
    auto by_x = [](const Item& a, const Item& b) {
      if (a.at.x != b.at.x) return a.at.x < b.at.x;
      if (a.at.y != b.at.y) return a.at.y < b.at.y;
      return a.id < b.id;
    };
    auto by_y = [](const Item& a, const Item& b) {
      if (a.at.y != b.at.y) return a.at.y < b.at.y;
      if (a.at.x != b.at.x) return a.at.x < b.at.x;
      return a.id < b.id;
    };
    std::sort(items.begin(), items.end(), by_x);
    std::vector<std::vector<Item>> groups;
    for (std::size_t s = 0; s < n; s += slice_size) {
      const auto first = items.begin() + static_cast<std::ptrdiff_t>(s);
      const auto last = items.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + slice_size));
      std::sort(first, last, by_y);
      for (auto it = first; it != last;) {
        const auto step = std::min(static_cast<std::ptrdiff_t>(fanout), last - it);
        groups.emplace_back(it, it + step);
        it += step;
      }
    }
    return groups;
  }

  void summarize(DrNode& node) const {
    node.kb = KeywordBitmap(universe_.size());
    std::vector<AttributePoint> pts;
    for (auto c : node.children) {
      if (node.leaf) {
        const auto& e = entries_[c];
        node.mbr.expand(e.location);
        node.kb |= e.kb;
        node.max_keywords = std::max(node.max_keywords, e.kb.count());
        pts.push_back(e.attributes);
      } else {
        const auto& child = nodes_[c];
        node.mbr.expand(child.mbr);
        node.kb |= child.kb;
        node.max_keywords = std::max(node.max_keywords, child.max_keywords);
        pts.insert(pts.end(), child.sp.points.begin(), child.sp.points.end());
      }
    }
    node.sp = compress_skyline(compute_skyline(std::move(pts)), params_.tau_merge);
  }

  void fill_max_keywords(std::uint32_t at, int depth) {
    if (depth > 64) throw CorruptIndex("DR-tree nesting too deep");
    DrNode& n = nodes_[at];
    n.max_keywords = 0;
    for (auto c : n.children) {
      if (!n.leaf) fill_max_keywords(c, depth + 1);
      n.max_keywords = std::max(n.max_keywords, n.leaf ? entries_[c].kb.count() : nodes_[c].max_keywords);
    }
  }

  std::vector<std::string> universe_;
  std::vector<DrEntry> entries_;
  std::vector<DrNode> nodes_;
  std::uint32_t root_ = kNoRoot;
  DrTreeParams params_;
};

/// Lower bound on the score of any object below `node`.
/// Upper bound on the relaxed keyword overlap of any object below `node`.
inline std::size_t node_phi(const KeywordBitmap& bmr, const DrNode& node) {
  return std::min(bmr.and_count(node.kb), node.max_keywords);
}

inline double score_node(const Query& q, const DrNode& node, double phi_node) {
  if (node.sp.empty()) throw CorruptIndex("DR-tree node without skyline points");
  return combine_score(q.score_params(), min_dist(q.location, node.mbr), phi_node,
                       min_weighted_attribute(node.sp, q.weights));
}

}  // namespace qdr
