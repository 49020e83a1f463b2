#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "qdr/clustering.hpp"
#include "test_support.hpp"

namespace {

// Words "<group><i>": 0.1 apart inside a group, 0.9 across groups.
struct GroupMetric {
  double operator()(const std::string& a, const std::string& b) const {
    if (a == b) return 0.0;
    return a[0] == b[0] ? 0.1 : 0.9;
  }
};

std::vector<std::string> grouped_words(std::size_t groups, std::size_t per_group) {
  std::vector<std::string> w;
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t i = 0; i < per_group; ++i)
      w.push_back(std::string(1, static_cast<char>('a' + g)) + std::to_string(i));
  std::sort(w.begin(), w.end());
  return w;
}

std::size_t total_occurrences(const qdr::ClusterNode& root) {
  std::vector<const qdr::ClusterNode*> leaves;
  qdr::collect_leaves(root, leaves);
  std::size_t n = 0;
  for (auto* l : leaves) n += l->cluster.keywords.size();
  return n;
}

std::size_t leaf_count(const qdr::ClusterNode& root) {
  std::vector<const qdr::ClusterNode*> leaves;
  qdr::collect_leaves(root, leaves);
  return leaves.size();
}

TEST(ClusterStats, DiameterAndMedoid) {
  // Points on a line at 0, 1, 2, 10.
  const std::vector<double> pos{0, 1, 2, 10};
  std::vector<double> table;
  for (double a : pos)
    for (double b : pos) table.push_back(std::abs(a - b));
  const qdr::DistanceMatrix d(4, table);
  const std::vector<std::size_t> all{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(qdr::cluster_diameter(d, all), 10.0);
  // Sums: 13, 11, 11, 27 -> tie between 1 and 2 goes to the smaller index.
  EXPECT_EQ(qdr::cluster_medoid(d, all), 1u);
}

TEST(KernelKMeans, RecoversSeparatedGroups) {
  const auto words = grouped_words(4, 5);
  const auto d = qdr::DistanceMatrix::compute(words, GroupMetric{});
  std::vector<std::size_t> members(words.size());
  std::iota(members.begin(), members.end(), 0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    qdr::ClusterParams p;
    p.seed = seed;
    const auto groups = qdr::kernel_kmeans(d, members, 4, p);
    ASSERT_EQ(groups.size(), 4u);
    for (const auto& g : groups) {
      ASSERT_EQ(g.size(), 5u);
      for (auto m : g) EXPECT_EQ(words[m][0], words[g.front()][0]);
    }
  }
}

TEST(KernelKMeans, PartitionsAndIsDeterministic) {
  auto fx = qdr::testing::small_fixture(10, 3);
  std::vector<std::string> universe;
  for (const auto& t : fx.data.topics) universe.insert(universe.end(), t.begin(), t.end());
  qdr::canonicalize_keywords(universe);
  const auto d = qdr::DistanceMatrix::compute(universe, fx.metric);
  std::vector<std::size_t> members(universe.size());
  std::iota(members.begin(), members.end(), 0);
  const qdr::ClusterParams p;
  const auto a = qdr::kernel_kmeans(d, members, 4, p);
  const auto b = qdr::kernel_kmeans(d, members, 4, p);
  EXPECT_EQ(a, b);
  std::multiset<std::size_t> seen;
  for (const auto& g : a) {
    EXPECT_FALSE(g.empty());
    seen.insert(g.begin(), g.end());
  }
  EXPECT_EQ(seen, std::multiset<std::size_t>(members.begin(), members.end()));
}

TEST(KernelKMeans, RejectsTooFewPoints) {
  const qdr::DistanceMatrix d(2, {0, 1, 1, 0});
  const std::vector<std::size_t> members{0, 1};
  EXPECT_THROW(qdr::kernel_kmeans(d, members, 4, {}), qdr::InvalidInput);
}

TEST(Duplicate, CopiesEquidistantKeywordsOnly) {
  // Centers 0..3; keyword 4 sits 0.5 from every center; keyword 5 is close to center 0.
  const std::size_t n = 6;
  std::vector<double> t(n * n, 0.8);
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 0.0;
  for (std::size_t c = 0; c < 4; ++c) t[4 * n + c] = t[c * n + 4] = 0.5;
  t[5 * n + 0] = t[0 * n + 5] = 0.05;
  const qdr::DistanceMatrix d(n, t);
  const std::array<std::vector<std::size_t>, 4> sets{{{0, 4, 5}, {1}, {2}, {3}}};
  const std::array<std::size_t, 4> centers{0, 1, 2, 3};
  const double mean5 = (0.05 + 2.4) / 4.0;
  const double var5 = (std::pow(0.05 - mean5, 2) + 3 * std::pow(0.8 - mean5, 2)) / 4.0;
  ASSERT_GT(var5, 0.05);
  const auto out = qdr::duplicate(d, sets, centers, 0.05);
  EXPECT_EQ(out[0], (std::vector<std::size_t>{0, 4, 5}));
  for (std::size_t j = 1; j < 4; ++j) {
    EXPECT_TRUE(std::binary_search(out[j].begin(), out[j].end(), 4u));
    EXPECT_FALSE(std::binary_search(out[j].begin(), out[j].end(), 5u));
  }
  // The centers' own distance vectors have variance 3*0.8^2/16 = 0.12 > 0.05.
  EXPECT_EQ(out[1], (std::vector<std::size_t>{1, 4}));
}

TEST(Duplicate, StringFormMatchesIndexForm) {
  const std::array<std::vector<std::string>, 4> sets{{{"a0", "a1"}, {"b0"}, {"c0"}, {"d0"}}};
  const std::array<std::string, 4> centers{"a0", "b0", "c0", "d0"};
  const auto zero = qdr::duplicate(sets, centers, 0.0, GroupMetric{});
  EXPECT_EQ(zero, sets);
  const auto all = qdr::duplicate(sets, centers, 1.0, GroupMetric{});
  for (const auto& s : all) EXPECT_EQ(s.size(), 5u);
}

TEST(PopulationVariance, HandValues) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(qdr::population_variance(v), 1.25);
}

TEST(Hierarchy, SeparatedGroupsBecomeFourTightLeaves) {
  const auto words = grouped_words(4, 6);
  qdr::ClusterParams p;
  p.tau_dup = 0.0;
  const auto root = qdr::build_cluster_hierarchy(words, GroupMetric{}, p);
  ASSERT_EQ(root.children.size(), 4u);
  for (const auto& c : root.children) {
    EXPECT_TRUE(c.is_leaf());
    EXPECT_EQ(c.kind, qdr::LeafKind::kTight);
    EXPECT_EQ(c.cluster.keywords.size(), 6u);
    EXPECT_NEAR(c.cluster.diameter, 0.1, 1e-12);
    EXPECT_TRUE(c.cluster.duplicated.empty());
  }
}

TEST(Hierarchy, TightUniverseIsOneLeaf) {
  const auto words = grouped_words(1, 7);
  const auto root = qdr::build_cluster_hierarchy(words, GroupMetric{}, {});
  EXPECT_TRUE(root.is_leaf());
  EXPECT_EQ(root.cluster.keywords, words);
}

TEST(Hierarchy, LeafInvariantsOnSyntheticUniverse) {
  auto fx = qdr::testing::small_fixture(10, 9, 4, 8, 16);
  std::vector<std::string> universe;
  for (const auto& t : fx.data.topics) universe.insert(universe.end(), t.begin(), t.end());
  qdr::canonicalize_keywords(universe);
  const qdr::ClusterParams p;
  const auto root = qdr::build_cluster_hierarchy(universe, fx.metric, p);
  std::vector<const qdr::ClusterNode*> leaves;
  qdr::collect_leaves(root, leaves);
  std::set<std::string> covered;
  for (auto* l : leaves) {
    const auto& c = l->cluster;
    covered.insert(c.keywords.begin(), c.keywords.end());
    EXPECT_TRUE(std::is_sorted(c.keywords.begin(), c.keywords.end()));
    EXPECT_TRUE(std::binary_search(c.keywords.begin(), c.keywords.end(), c.center));
    const std::size_t core = c.keywords.size() - c.duplicated.size();
    if (l->kind == qdr::LeafKind::kTight) {
      EXPECT_LT(c.core_diameter, p.tau_cluster);
    }
    if (l->kind == qdr::LeafKind::kSmall) {
      EXPECT_LT(core, 4u);
    }
    // Brute-force medoid over the final member set.
    double best = qdr::kInfinity;
    std::string best_word;
    for (const auto& a : c.keywords) {
      double s = 0.0;
      for (const auto& b : c.keywords) s += fx.metric(a, b);
      if (s < best) {
        best = s;
        best_word = a;
      }
    }
    EXPECT_EQ(c.center, best_word);
  }
  EXPECT_EQ(covered, std::set<std::string>(universe.begin(), universe.end()));
}

TEST(Hierarchy, MonotoneInThresholds) {
  auto fx = qdr::testing::small_fixture(10, 21, 4, 8, 16);
  std::vector<std::string> universe;
  for (const auto& t : fx.data.topics) universe.insert(universe.end(), t.begin(), t.end());

  std::size_t prev_leaves = SIZE_MAX;
  for (double tc : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    qdr::ClusterParams p;
    p.tau_cluster = tc;
    const auto n = leaf_count(qdr::build_cluster_hierarchy(universe, fx.metric, p));
    EXPECT_LE(n, prev_leaves) << "tau_cluster " << tc;
    prev_leaves = n;
  }
  std::size_t prev_occ = 0;
  for (double td : {0.0, 0.01, 0.03, 0.05, 0.1}) {
    qdr::ClusterParams p;
    p.tau_dup = td;
    const auto n = total_occurrences(qdr::build_cluster_hierarchy(universe, fx.metric, p));
    EXPECT_GE(n, prev_occ) << "tau_dup " << td;
    prev_occ = n;
  }
}

}  // namespace
