#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <zlib.h>

#include "qdr/clustering.hpp"
#include "qdr/core.hpp"
#include "qdr/dr_tree.hpp"
#include "qdr/keyword_bitmap.hpp"
#include "qdr/keyword_metric.hpp"
#include "qdr/qc_tree.hpp"

// Index container layout (all integers little-endian, reals IEEE-754 binary64):
//
//   "QDR1" | u32 version | u32 section count
//   section table: { char tag[4] | u64 offset | u64 length | u32 crc32 } * count
//   section payloads
//
// Sections: PARM (build parameters, bounds), EMBD (embedding vectors), OBJS
// (object table), QCTR (quad tree topology and leaf clusters), DRTR (one
// pre-order node stream per leaf).

namespace qdr {

inline constexpr std::array<char, 4> kIndexMagic{'Q', 'D', 'R', '1'};
inline constexpr std::uint32_t kIndexVersion = 1;

class IndexFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void strs(const std::vector<std::string>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& s : v) str(s);
  }
  void tag(const char (&t)[5]) { buf_.insert(buf_.end(), t, t + 4); }
  /// Width, then bit i in byte i/8 at position i%8.
  void bitmap(const KeywordBitmap& b) {
    u32(static_cast<std::uint32_t>(b.width()));
    const auto blocks = b.blocks();
    for (std::size_t byte = 0; byte < (b.width() + 7) / 8; ++byte)
      buf_.push_back(static_cast<std::uint8_t>(blocks[byte / 8] >> (8 * (byte % 8))));
  }
  void raw(const std::vector<std::uint8_t>& bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const auto* b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    const auto* b = take(n);
    return std::string(reinterpret_cast<const char*>(b), n);
  }
  std::vector<std::string> strs() {
    const auto n = count(4);
    std::vector<std::string> v;
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) v.push_back(str());
    return v;
  }
  KeywordBitmap bitmap() {
    const std::size_t width = u32();
    const auto* b = take((width + 7) / 8);
    std::vector<std::uint64_t> blocks((width + 63) / 64, 0);
    for (std::size_t byte = 0; byte < (width + 7) / 8; ++byte)
      blocks[byte / 8] |= std::uint64_t{b[byte]} << (8 * (byte % 8));
    try {
      return KeywordBitmap::from_blocks(width, std::move(blocks));
    } catch (const InvalidInput& e) {
      throw IndexFormatError(e.what());
    }
  }
  /// Reads an element count and rejects counts that cannot fit in the rest of
  /// the buffer given `min_element_size` bytes per element.
  std::size_t count(std::size_t min_element_size) {
    const std::size_t n = u32();
    if (min_element_size > 0 && n > remaining() / min_element_size)
      throw IndexFormatError("element count exceeds section size");
    return n;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (remaining() < n) throw IndexFormatError("unexpected end of section");
    const auto* at = p_;
    p_ += n;
    return at;
  }

  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

namespace detail {

inline void write_cluster(ByteWriter& w, const KeywordCluster& c) {
  w.strs(c.keywords);
  w.strs(c.duplicated);
  w.str(c.center);
  w.f64(c.diameter);
  w.f64(c.core_diameter);
}

inline KeywordCluster read_cluster(ByteReader& r) {
  KeywordCluster c;
  c.keywords = r.strs();
  c.duplicated = r.strs();
  c.center = r.str();
  c.diameter = r.f64();
  c.core_diameter = r.f64();
  return c;
}

inline void write_points(ByteWriter& w, const std::vector<double>& p) {
  w.u32(static_cast<std::uint32_t>(p.size()));
  for (double v : p) w.f64(v);
}

inline std::vector<double> read_points(ByteReader& r) {
  const auto n = r.count(8);
  std::vector<double> p(n);
  for (auto& v : p) v = r.f64();
  return p;
}

inline void write_dr_node(ByteWriter& w, const DrTree& t, std::uint32_t at) {
  const DrNode& n = t.node(at);
  w.u8(n.leaf ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(n.children.size()));
  w.f64(n.mbr.lo.x);
  w.f64(n.mbr.lo.y);
  w.f64(n.mbr.hi.x);
  w.f64(n.mbr.hi.y);
  w.bitmap(n.kb);
  w.u8(n.sp.compressed ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(n.sp.points.size()));
  for (const auto& p : n.sp.points) write_points(w, p);
  if (n.leaf) {
    for (auto c : n.children) w.u32(c);
  } else {
    for (auto c : n.children) write_dr_node(w, t, c);
  }
}

inline std::uint32_t read_dr_node(ByteReader& r, std::vector<DrNode>& nodes, int depth) {
  if (depth > 64) throw IndexFormatError("DR-tree nesting too deep");
  const auto at = static_cast<std::uint32_t>(nodes.size());
  nodes.emplace_back();
  DrNode n;
  n.leaf = r.u8() != 0;
  const auto children = r.count(4);
  n.mbr.lo.x = r.f64();
  n.mbr.lo.y = r.f64();
  n.mbr.hi.x = r.f64();
  n.mbr.hi.y = r.f64();
  n.kb = r.bitmap();
  n.sp.compressed = r.u8() != 0;
  const auto sp_count = r.count(4);
  for (std::size_t i = 0; i < sp_count; ++i) n.sp.points.push_back(read_points(r));
  if (n.leaf) {
    for (std::size_t i = 0; i < children; ++i) n.children.push_back(r.u32());
  } else {
    for (std::size_t i = 0; i < children; ++i) n.children.push_back(read_dr_node(r, nodes, depth + 1));
  }
  nodes[at] = std::move(n);
  return at;
}

}  // namespace detail

/// Serializes the index into the container byte layout.
inline std::vector<std::uint8_t> serialize_index(const QcTree& tree) {
  std::vector<std::pair<std::array<char, 4>, std::vector<std::uint8_t>>> sections;

  {
    ByteWriter w;
    const auto& p = tree.params();
    w.f64(p.cluster.tau_cluster);
    w.f64(p.cluster.tau_dup);
    w.f64(p.cluster.kernel_sigma);
    w.u64(p.cluster.seed);
    w.u64(p.cluster.max_iters);
    w.u64(p.dr.fanout);
    w.f64(p.dr.tau_merge);
    w.f64(tree.metric().params().delta);
    w.u64(tree.attribute_dimension());
    w.f64(tree.bounds().lo.x);
    w.f64(tree.bounds().lo.y);
    w.f64(tree.bounds().hi.x);
    w.f64(tree.bounds().hi.y);
    sections.push_back({{'P', 'A', 'R', 'M'}, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    const auto& store = tree.metric().store();
    w.u64(store.dimension());
    const auto words = store.words();
    w.u32(static_cast<std::uint32_t>(words.size()));
    for (const auto& word : words) {
      w.str(word);
      for (double v : store.vector_for(word)) w.f64(v);
    }
    sections.push_back({{'E', 'M', 'B', 'D'}, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(tree.objects().size()));
    for (const auto& o : tree.objects()) {
      w.str(o.id);
      w.f64(o.location.x);
      w.f64(o.location.y);
      w.strs(o.keywords);
      detail::write_points(w, o.attributes);
    }
    sections.push_back({{'O', 'B', 'J', 'S'}, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.u32(tree.root());
    w.u32(static_cast<std::uint32_t>(tree.nodes().size()));
    for (const auto& n : tree.nodes()) {
      w.u8(n.leaf ? 1 : 0);
      w.str(n.center);
      if (n.leaf) {
        w.u32(n.leaf_index);
      } else {
        for (auto c : n.children) w.u32(c);
      }
    }
    w.u32(static_cast<std::uint32_t>(tree.leaves().size()));
    for (const auto& l : tree.leaves()) {
      w.u8(static_cast<std::uint8_t>(l.kind));
      detail::write_cluster(w, l.cluster);
      w.strs(l.universe);
    }
    sections.push_back({{'Q', 'C', 'T', 'R'}, std::move(w.bytes())});
  }
  {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(tree.leaves().size()));
    for (const auto& l : tree.leaves()) {
      const auto& t = l.tree;
      w.u64(t.params().fanout);
      w.f64(t.params().tau_merge);
      w.u32(static_cast<std::uint32_t>(t.entries().size()));
      for (const auto& e : t.entries()) {
        w.u32(e.object);
        w.f64(e.location.x);
        w.f64(e.location.y);
        detail::write_points(w, e.attributes);
        w.bitmap(e.kb);
      }
      w.u8(t.empty() ? 0 : 1);
      if (!t.empty()) detail::write_dr_node(w, t, t.root());
    }
    sections.push_back({{'D', 'R', 'T', 'R'}, std::move(w.bytes())});
  }

  ByteWriter out;
  out.raw({kIndexMagic.begin(), kIndexMagic.end()});
  out.u32(kIndexVersion);
  out.u32(static_cast<std::uint32_t>(sections.size()));
  std::uint64_t offset = 12 + sections.size() * 24;
  for (const auto& [tag, payload] : sections) {
    out.raw({tag.begin(), tag.end()});
    out.u64(offset);
    out.u64(payload.size());
    out.u32(crc32_of(payload));
    offset += payload.size();
  }
  for (const auto& [_, payload] : sections) out.raw(payload);
  return std::move(out.bytes());
}

/// Parses a container produced by `serialize_index`. Throws IndexFormatError
/// on bad magic, version mismatch, truncation or checksum failure.
inline QcTree deserialize_index(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || !std::equal(kIndexMagic.begin(), kIndexMagic.end(), bytes.begin()))
    throw IndexFormatError("not a QDR index (bad magic)");
  ByteReader head(bytes.data() + 4, bytes.size() - 4);
  const auto version = head.u32();
  if (version != kIndexVersion)
    throw IndexFormatError("unsupported index version " + std::to_string(version) + " (expected " +
                           std::to_string(kIndexVersion) + ")");
  const auto nsections = head.count(24);

  auto section = [&](const char (&want)[5]) {
    ByteReader table(bytes.data() + 12, bytes.size() - 12);
    for (std::size_t i = 0; i < nsections; ++i) {
      char tag[4];
      for (char& c : tag) c = static_cast<char>(table.u8());
      const auto offset = table.u64();
      const auto length = table.u64();
      const auto crc = table.u32();
      if (std::memcmp(tag, want, 4) != 0) continue;
      if (offset > bytes.size() || length > bytes.size() - offset)
        throw IndexFormatError(std::string("section ") + want + " is truncated");
      const std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                              bytes.begin() + static_cast<std::ptrdiff_t>(offset + length));
      if (crc32_of(payload) != crc)
        throw IndexFormatError(std::string("checksum mismatch in section ") + want);
      return payload;
    }
    throw IndexFormatError(std::string("missing section ") + want);
  };

  const auto parm = section("PARM");
  const auto embd = section("EMBD");
  const auto objs = section("OBJS");
  const auto qctr = section("QCTR");
  const auto drtr = section("DRTR");

  try {
    IndexParams params;
    double delta = 0.0;
    std::size_t dims = 0;
    Mbr bounds;
    {
      ByteReader r(parm.data(), parm.size());
      params.cluster.tau_cluster = r.f64();
      params.cluster.tau_dup = r.f64();
      params.cluster.kernel_sigma = r.f64();
      params.cluster.seed = r.u64();
      params.cluster.max_iters = r.u64();
      params.dr.fanout = r.u64();
      params.dr.tau_merge = r.f64();
      delta = r.f64();
      dims = r.u64();
      bounds.lo.x = r.f64();
      bounds.lo.y = r.f64();
      bounds.hi.x = r.f64();
      bounds.hi.y = r.f64();
    }

    EmbeddingStore store;
    {
      ByteReader r(embd.data(), embd.size());
      const auto dim = r.u64();
      if (dim == 0 || dim > (1u << 20)) throw IndexFormatError("bad embedding dimension");
      store = EmbeddingStore(dim);
      const auto n = r.count(4 + 8 * dim);
      for (std::size_t i = 0; i < n; ++i) {
        auto word = r.str();
        std::vector<double> v(dim);
        for (auto& x : v) x = r.f64();
        store.restore(std::move(word), std::move(v));
      }
    }

    std::vector<GeoObject> objects;
    {
      ByteReader r(objs.data(), objs.size());
      const auto n = r.count(28);
      objects.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        GeoObject o;
        o.id = r.str();
        o.location.x = r.f64();
        o.location.y = r.f64();
        o.keywords = r.strs();
        o.attributes = detail::read_points(r);
        objects.push_back(std::move(o));
      }
    }

    std::vector<QcNode> nodes;
    std::vector<QcLeaf> leaves;
    std::uint32_t root = 0;
    {
      ByteReader r(qctr.data(), qctr.size());
      root = r.u32();
      const auto n = r.count(9);
      for (std::size_t i = 0; i < n; ++i) {
        QcNode node;
        node.leaf = r.u8() != 0;
        node.center = r.str();
        if (node.leaf) {
          node.leaf_index = r.u32();
        } else {
          for (auto& c : node.children) c = r.u32();
        }
        nodes.push_back(std::move(node));
      }
      const auto nl = r.count(1);
      for (std::size_t i = 0; i < nl; ++i) {
        QcLeaf leaf;
        const auto kind = r.u8();
        if (kind > 2) throw IndexFormatError("bad leaf kind");
        leaf.kind = static_cast<LeafKind>(kind);
        leaf.cluster = detail::read_cluster(r);
        leaf.universe = r.strs();
        leaves.push_back(std::move(leaf));
      }
      if (root >= nodes.size()) throw IndexFormatError("QC-tree root out of range");
      for (const auto& node : nodes) {
        if (node.leaf && node.leaf_index >= leaves.size())
          throw IndexFormatError("QC-tree leaf reference out of range");
        if (!node.leaf)
          for (auto c : node.children)
            if (c >= nodes.size()) throw IndexFormatError("QC-tree child out of range");
      }
    }

    {
      ByteReader r(drtr.data(), drtr.size());
      const auto n = r.count(1);
      if (n != leaves.size()) throw IndexFormatError("DR-tree count does not match leaf count");
      for (auto& leaf : leaves) {
        DrTreeParams dp;
        dp.fanout = r.u64();
        dp.tau_merge = r.f64();
        const auto ne = r.count(4);
        std::vector<DrEntry> entries;
        entries.reserve(ne);
        for (std::size_t i = 0; i < ne; ++i) {
          DrEntry e;
          e.object = r.u32();
          if (e.object >= objects.size()) throw IndexFormatError("entry object out of range");
          e.location.x = r.f64();
          e.location.y = r.f64();
          e.attributes = detail::read_points(r);
          e.kb = r.bitmap();
          entries.push_back(std::move(e));
        }
        std::vector<DrNode> dr_nodes;
        std::uint32_t dr_root = DrTree::kNoRoot;
        if (r.u8() != 0) dr_root = detail::read_dr_node(r, dr_nodes, 0);
        leaf.tree = DrTree::from_parts(leaf.universe, std::move(entries), std::move(dr_nodes),
                                       dr_root, dp);
      }
    }

    return QcTree(KeywordMetric(MetricParams{delta}, std::move(store)), std::move(objects),
                  std::move(nodes), std::move(leaves), root, dims, bounds, params);
  } catch (const IndexFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw IndexFormatError(std::string("malformed index: ") + e.what());
  }
}

inline void save_index(const QcTree& tree, const std::string& path) {
  const auto bytes = serialize_index(tree);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IndexFormatError("cannot write index '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IndexFormatError("write failed for '" + path + "'");
}

inline QcTree load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexFormatError("cannot open index '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_index(bytes);
}

}  // namespace qdr
