#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdr/core.hpp"

namespace qdr {

/// Fixed-width bit vector over a leaf cluster's ordered keyword universe.
class KeywordBitmap {
 public:
  KeywordBitmap() = default;
  explicit KeywordBitmap(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  std::size_t width() const { return width_; }

  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool none() const {
    return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
  }

  KeywordBitmap& operator|=(const KeywordBitmap& other) {
    require_same_width(other);
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
  }

  /// popcount(a AND b)
  std::size_t and_count(const KeywordBitmap& other) const {
    require_same_width(other);
    std::size_t c = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
      c += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
    return c;
  }

  /// Every bit of *this is also set in `other`.
  bool subset_of(const KeywordBitmap& other) const {
    require_same_width(other);
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & ~other.words_[i]) return false;
    return true;
  }

  std::span<const std::uint64_t> blocks() const { return words_; }
  static KeywordBitmap from_blocks(std::size_t width, std::vector<std::uint64_t> blocks) {
    KeywordBitmap b(width);
    if (blocks.size() != b.words_.size()) throw InvalidInput("bitmap block count mismatch");
    if (width % 64 != 0 && !blocks.empty() && (blocks.back() >> (width % 64)) != 0)
      throw InvalidInput("bitmap has bits beyond its width");
    b.words_ = std::move(blocks);
    return b;
  }

  std::string to_string() const {
    std::string s(width_, '0');
    for (std::size_t i = 0; i < width_; ++i)
      if (test(i)) s[i] = '1';
    return s;
  }

  friend bool operator==(const KeywordBitmap&, const KeywordBitmap&) = default;

 private:
  void require_same_width(const KeywordBitmap& other) const {
    if (width_ != other.width_)
      throw InvalidInput("keyword bitmap width mismatch: " + std::to_string(width_) + " vs " +
                         std::to_string(other.width_));
  }

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Sets the bit of every keyword that appears in the (sorted) universe.
inline KeywordBitmap encode(std::span<const std::string> keywords,
                            std::span<const std::string> universe) {
  KeywordBitmap b(universe.size());
  for (const auto& k : keywords) {
    auto it = std::lower_bound(universe.begin(), universe.end(), k);
    if (it != universe.end() && *it == k) b.set(static_cast<std::size_t>(it - universe.begin()));
  }
  return b;
}

inline std::size_t relevance_phi(const KeywordBitmap& a, const KeywordBitmap& b) {
  return a.and_count(b);
}

/// Widens `bmq` with every universe keyword closer than `tau_relax` to a set bit.
template <class Metric>
KeywordBitmap search_relaxation(const KeywordBitmap& bmq, std::span<const std::string> universe,
                                double tau_relax, const Metric& metric) {
  if (bmq.width() != universe.size()) throw InvalidInput("bitmap does not match universe");
  KeywordBitmap bmr = bmq;
  for (std::size_t i = 0; i < universe.size(); ++i) {
    if (!bmq.test(i)) continue;
    for (std::size_t j = 0; j < universe.size(); ++j)
      if (!bmr.test(j) && metric(universe[i], universe[j]) < tau_relax) bmr.set(j);
  }
  return bmr;
}

/// Relaxed query bitmap for a leaf: exact matches plus every universe keyword
/// within `tau_relax` of any query keyword, including query keywords that are
/// not themselves in the universe.
template <class Metric>
KeywordBitmap relax_query(std::span<const std::string> query_keywords,
                          std::span<const std::string> universe, double tau_relax,
                          const Metric& metric) {
  KeywordBitmap bmr = search_relaxation(encode(query_keywords, universe), universe, tau_relax,
                                        metric);
  for (const auto& k : query_keywords) {
    if (std::binary_search(universe.begin(), universe.end(), k)) continue;
    for (std::size_t j = 0; j < universe.size(); ++j)
      if (!bmr.test(j) && metric(k, universe[j]) < tau_relax) bmr.set(j);
  }
  return bmr;
}

}  // namespace qdr
