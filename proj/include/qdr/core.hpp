#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdr {

/// Raised for malformed caller input (dimension mismatches, invalid weights, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an index structure violates its own invariants.
class CorruptIndex : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double euclidean_distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// An indexed entity. Attributes are normalized to [0, 1], smaller is better.
struct GeoObject {
  std::string id;
  Point location;
  std::vector<std::string> keywords;  // sorted, unique, lowercase
  std::vector<double> attributes;
};

/// Sorts and deduplicates a keyword list in place.
inline void canonicalize_keywords(std::vector<std::string>& keywords) {
  std::sort(keywords.begin(), keywords.end());
  keywords.erase(std::unique(keywords.begin(), keywords.end()), keywords.end());
}

inline void validate_object(const GeoObject& o) {
  if (!std::isfinite(o.location.x) || !std::isfinite(o.location.y))
    throw InvalidInput("object '" + o.id + "': non-finite location");
  if (o.keywords.empty()) throw InvalidInput("object '" + o.id + "': empty keyword set");
  if (!std::is_sorted(o.keywords.begin(), o.keywords.end()) ||
      std::adjacent_find(o.keywords.begin(), o.keywords.end()) != o.keywords.end())
    throw InvalidInput("object '" + o.id + "': keywords must be sorted and unique");
  for (double a : o.attributes)
    if (!(a >= 0.0 && a <= 1.0))
      throw InvalidInput("object '" + o.id + "': attribute outside [0, 1]");
}

struct ScoreParams {
  double alpha = 0.5;
  double beta = 0.67;
  double d_max = 1.0;
};

inline void validate(const ScoreParams& p) {
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw InvalidInput("alpha must lie in [0, 1]");
  if (!(p.beta >= 0.0 && p.beta <= 1.0)) throw InvalidInput("beta must lie in [0, 1]");
  if (!(p.d_max > 0.0) || !std::isfinite(p.d_max)) throw InvalidInput("d_max must be positive");
}

struct Query {
  Point location;
  std::vector<std::string> keywords;
  std::vector<double> weights;
  std::size_t kappa = 10;
  double d_max = 1.0;
  double alpha = 0.5;
  double beta = 0.67;
  // Keyword distance below which a dataset keyword counts as a match.
  double tau_relax = 0.3;

  ScoreParams score_params() const { return {alpha, beta, d_max}; }
};

inline void validate_query(const Query& q, std::size_t attribute_dimension) {
  if (!std::isfinite(q.location.x) || !std::isfinite(q.location.y))
    throw InvalidInput("query location must be finite");
  if (q.keywords.empty()) throw InvalidInput("query needs at least one keyword");
  if (q.weights.size() != attribute_dimension)
    throw InvalidInput("query weight count " + std::to_string(q.weights.size()) +
                       " does not match attribute dimension " +
                       std::to_string(attribute_dimension));
  double sum = 0.0;
  for (double w : q.weights) {
    if (!(w >= 0.0)) throw InvalidInput("query weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("query weights must sum to 1");
  if (!(q.tau_relax >= 0.0)) throw InvalidInput("tau_relax must be non-negative");
  validate(q.score_params());
}

struct ScoredResult {
  std::string object_id;
  double score = kInfinity;

  friend bool operator==(const ScoredResult&, const ScoredResult&) = default;
};

/// Result order: ascending score, then ascending object id.
inline bool result_before(const ScoredResult& a, const ScoredResult& b) {
  if (a.score != b.score) return a.score < b.score;
  return a.object_id < b.object_id;
}

inline double weighted_attribute_sum(std::span<const double> weights,
                                     std::span<const double> attributes) {
  if (weights.size() != attributes.size())
    throw InvalidInput("weight / attribute dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * attributes[i];
  return s;
}

/// Blends the three ranking terms. Objects and nodes share this so that a node
/// bound and an object score built from the same inputs are bit-identical.
inline double combine_score(const ScoreParams& p, double distance, double phi,
                            double weighted_attributes) {
  if (!(phi > 0.0)) return kInfinity;
  return p.alpha * p.beta * (distance / p.d_max) + (1.0 - p.beta) * (1.0 / phi) +
         (1.0 - p.alpha) * p.beta * weighted_attributes;
}

/// Ranking score of an object at `location` with `attributes` and keyword relevance `phi`.
inline double score_object(const Query& q, const Point& location,
                           std::span<const double> attributes, double phi) {
  const double weighted = weighted_attribute_sum(q.weights, attributes);
  return combine_score(q.score_params(), euclidean_distance(q.location, location), phi, weighted);
}

inline double score_object(const Query& q, const GeoObject& o, double phi) {
  return score_object(q, o.location, o.attributes, phi);
}

}  // namespace qdr
