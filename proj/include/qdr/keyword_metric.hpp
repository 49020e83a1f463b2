#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qdr/core.hpp"

namespace qdr {

/// Levenshtein distance over bytes, two-row dynamic program.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Edit distance normalized by the longer length, in [0, 1].
inline double textual_distance(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline void normalize_in_place(std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double n = std::sqrt(n2);
  for (double& x : v) x /= n;
}

}  // namespace detail

/// Unit-length word vectors keyed by keyword. Words missing from the store
/// resolve to a deterministic pseudo-vector derived from a hash of the word.
class EmbeddingStore {
 public:
  static constexpr std::size_t kDefaultDimension = 32;
  static constexpr std::uint64_t kFallbackSeed = 0x51d7c0ffee5eedull;

  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw InvalidInput("embedding dimension must be positive");
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& word) const { return vectors_.count(word) != 0; }

  /// Inserts `values` after normalizing it to unit length.
  void insert(std::string word, std::vector<double> values) {
    if (values.size() != dimension_)
      throw InvalidInput("embedding for '" + word + "' has dimension " +
                         std::to_string(values.size()) + ", expected " +
                         std::to_string(dimension_));
    double n2 = 0.0;
    for (double x : values) {
      if (!std::isfinite(x)) throw InvalidInput("embedding for '" + word + "' is not finite");
      n2 += x * x;
    }
    if (n2 == 0.0) throw InvalidInput("embedding for '" + word + "' is the zero vector");
    detail::normalize_in_place(values);
    vectors_[std::move(word)] = std::move(values);
  }

  /// Stores an already unit-length vector verbatim (index deserialization).
  void restore(std::string word, std::vector<double> values) {
    double n2 = 0.0;
    for (double x : values) n2 += x * x;
    if (values.size() != dimension_ || !(std::abs(n2 - 1.0) <= 1e-6))
      throw InvalidInput("stored embedding for '" + word + "' is not a unit vector");
    vectors_[std::move(word)] = std::move(values);
  }

  std::vector<double> vector_for(const std::string& word) const {
    if (auto it = vectors_.find(word); it != vectors_.end()) return it->second;
    return fallback_vector(word, dimension_);
  }

  static std::vector<double> fallback_vector(std::string_view word, std::size_t dimension) {
    std::uint64_t state = detail::fnv1a(word) ^ kFallbackSeed;
    std::vector<double> v(dimension);
    for (;;) {
      double n2 = 0.0;
      for (double& x : v) {
        // 53 random mantissa bits mapped to [-1, 1).
        x = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
        n2 += x * x;
      }
      if (n2 > 0.0) break;
    }
    detail::normalize_in_place(v);
    return v;
  }

  /// Sorted keys, for deterministic serialization.
  std::vector<std::string> words() const {
    std::vector<std::string> out;
    out.reserve(vectors_.size());
    for (const auto& [w, _] : vectors_) out.push_back(w);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Reads "word v1 ... vd" lines; a leading "count dimension" line is skipped.
  static EmbeddingStore parse(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    EmbeddingStore store;
    bool have_dimension = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream tokens(line);
      std::vector<std::string> parts;
      for (std::string t; tokens >> t;) parts.push_back(std::move(t));
      if (parts.empty()) continue;
      if (line_no == 1 && parts.size() == 2 && is_unsigned(parts[0]) && is_unsigned(parts[1]))
        continue;
      if (parts.size() < 2)
        throw InvalidInput("embedding line " + std::to_string(line_no) + ": no vector values");
      std::vector<double> values;
      values.reserve(parts.size() - 1);
      for (std::size_t i = 1; i < parts.size(); ++i) {
        try {
          std::size_t used = 0;
          values.push_back(std::stod(parts[i], &used));
          if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
        } catch (const std::exception&) {
          throw InvalidInput("embedding line " + std::to_string(line_no) +
                             ": non-numeric value '" + parts[i] + "'");
        }
      }
      if (!have_dimension) {
        store.dimension_ = values.size();
        have_dimension = true;
      }
      try {
        store.insert(parts[0], std::move(values));
      } catch (const InvalidInput& e) {
        throw InvalidInput("embedding line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return store;
  }

 private:
  static bool is_unsigned(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
      return c >= '0' && c <= '9';
    });
  }

  std::size_t dimension_ = kDefaultDimension;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Euclidean distance between the two unit vectors, halved into [0, 1].
inline double semantic_distance(const std::string& a, const std::string& b,
                                const EmbeddingStore& store) {
  if (a == b) return 0.0;
  const auto va = store.vector_for(a);
  const auto vb = store.vector_for(b);
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  return std::min(1.0, std::sqrt(s) / 2.0);
}

struct MetricParams {
  double delta = 0.5;
};

inline double keyword_distance(const std::string& a, const std::string& b,
                               const MetricParams& params, const EmbeddingStore& store) {
  return params.delta * textual_distance(a, b) +
         (1.0 - params.delta) * semantic_distance(a, b, store);
}

/// Keyword distance bound to a parameter set and an embedding store.
class KeywordMetric {
 public:
  KeywordMetric() : store_(std::make_shared<EmbeddingStore>()) {}
  KeywordMetric(MetricParams params, EmbeddingStore store)
      : params_(params), store_(std::make_shared<EmbeddingStore>(std::move(store))) {
    if (!(params_.delta >= 0.0 && params_.delta <= 1.0))
      throw InvalidInput("delta must lie in [0, 1]");
  }

  double operator()(const std::string& a, const std::string& b) const {
    return keyword_distance(a, b, params_, *store_);
  }

  const MetricParams& params() const { return params_; }
  const EmbeddingStore& store() const { return *store_; }

 private:
  MetricParams params_;
  std::shared_ptr<const EmbeddingStore> store_;
};

/// Memoizes pairwise keyword distances. Safe for concurrent use.
class DistanceCache {
 public:
  explicit DistanceCache(const KeywordMetric& metric) : metric_(&metric) {}

  double operator()(const std::string& a, const std::string& b) const {
    if (a == b) return 0.0;
    std::string key = a < b ? a + '\0' + b : b + '\0' + a;
    {
      std::lock_guard lock(mutex_);
      if (auto it = table_.find(key); it != table_.end()) return it->second;
    }
    const double d = (*metric_)(a, b);
    std::lock_guard lock(mutex_);
    table_.emplace(std::move(key), d);
    return d;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return table_.size();
  }

 private:
  const KeywordMetric* metric_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, double> table_;
};

}  // namespace qdr
