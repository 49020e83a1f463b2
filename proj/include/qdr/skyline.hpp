#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "qdr/core.hpp"

namespace qdr {

using AttributePoint = std::vector<double>;

struct SkylineSet {
  std::vector<AttributePoint> points;  // lexicographically sorted
  bool compressed = false;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

/// p dominates q: no worse anywhere and strictly better somewhere.
inline bool dominates(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("dominance test on points of different length");
  bool better = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > q[i]) return false;
    if (p[i] < q[i]) better = true;
  }
  return better;
}

/// p <= q in every component.
inline bool weakly_dominates(std::span<const double> p, std::span<const double> q) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > q[i]) return false;
  return true;
}

/// Sort-filter skyline: points are visited by ascending component sum, so a
/// point can only be dominated by one already in the window.
inline SkylineSet compute_skyline(std::vector<AttributePoint> points) {
  std::vector<double> sums(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    sums[i] = std::accumulate(points[i].begin(), points[i].end(), 0.0);
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sums[a] != sums[b]) return sums[a] < sums[b];
    return points[a] < points[b];
  });

  SkylineSet out;
  for (std::size_t idx : order) {
    const auto& p = points[idx];
    const bool beaten = std::any_of(out.points.begin(), out.points.end(),
                                    [&](const AttributePoint& w) { return weakly_dominates(w, p); });
    if (!beaten) out.points.push_back(p);
  }
  std::sort(out.points.begin(), out.points.end());
  return out;
}

/// Cosine similarity; a zero vector is treated as similar to everything.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Merges near-parallel points into their component-wise minimum until no pair
/// reaches `tau_merge`, then drops points dominated by a merged one. Every input
/// point stays weakly dominated by some output point.
inline SkylineSet compress_skyline(SkylineSet s, double tau_merge) {
  auto& pts = s.points;
  std::sort(pts.begin(), pts.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size();) {
        if (cosine_similarity(pts[i], pts[j]) >= tau_merge) {
          for (std::size_t c = 0; c < pts[i].size(); ++c) pts[i][c] = std::min(pts[i][c], pts[j][c]);
          pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
          j = i + 1;
        } else {
          ++j;
        }
      }
    }
    if (changed) std::sort(pts.begin(), pts.end());
  }
  SkylineSet out = compute_skyline(std::move(pts));
  out.compressed = true;
  return out;
}

/// min over points of the weighted attribute sum.
inline double min_weighted_attribute(const SkylineSet& s, std::span<const double> weights) {
  if (s.empty()) throw CorruptIndex("skyline set is empty");
  double best = kInfinity;
  for (const auto& p : s.points) best = std::min(best, weighted_attribute_sum(weights, p));
  return best;
}

}  // namespace qdr
