#include <gtest/gtest.h>

#include "qdr/query_engine.hpp"
#include "test_support.hpp"

namespace {

using qdr::testing::reference_score;

// Exhaustive oracle written without the library's scoring or relaxation code.
std::vector<qdr::ScoredResult> brute_top(const qdr::Query& q, const std::vector<qdr::GeoObject>& objects,
                                         const qdr::KeywordMetric& metric) {
  std::vector<qdr::ScoredResult> all;
  for (const auto& o : objects) {
    std::size_t phi = 0;
    for (const auto& k : o.keywords) {
      bool hit = false;
      for (const auto& qk : q.keywords) hit = hit || k == qk || metric(qk, k) < q.tau_relax;
      phi += hit ? 1 : 0;
    }
    if (phi > 0) all.push_back({o.id, reference_score(q, o, phi)});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score < b.score : a.object_id < b.object_id;
  });
  if (all.size() > q.kappa) all.resize(q.kappa);
  return all;
}

void expect_same(const std::vector<qdr::ScoredResult>& got, const std::vector<qdr::ScoredResult>& want,
                 const qdr::Query& q) {
  ASSERT_EQ(got.size(), want.size()) << qdr::query_to_json(q);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].object_id, want[i].object_id) << "rank " << i << " " << qdr::query_to_json(q);
    EXPECT_NEAR(got[i].score, want[i].score, 1e-9);
  }
}

TEST(QdrSearch, SingleLeafMatchesBruteForce) {
  const auto fx = qdr::testing::small_fixture(600, 12);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric, qdr::testing::single_leaf_params());
  qdr::QueryGenParams gp;
  gp.count = 60;
  gp.kappa = 15;
  for (const auto& q : qdr::generate_queries(fx.data.objects, gp))
    expect_same(qdr::qdr_search(q, tree).results, brute_top(q, tree.objects(), fx.metric), q);
}

TEST(QdrSearch, ExhaustiveKappaReturnsAllFinite) {
  const auto fx = qdr::testing::small_fixture(120, 13);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric, qdr::testing::single_leaf_params());
  qdr::QueryGenParams gp;
  gp.count = 5;
  gp.kappa = 1000;
  for (const auto& q : qdr::generate_queries(fx.data.objects, gp)) {
    const auto r = qdr::qdr_search(q, tree);
    EXPECT_EQ(r.results.size(), brute_top(q, tree.objects(), fx.metric).size());
    EXPECT_TRUE(std::is_sorted(r.results.begin(), r.results.end(), qdr::result_before));
    for (const auto& x : r.results) EXPECT_LT(x.score, qdr::kInfinity);
  }
}

TEST(QdrSearch, NoMatchGivesEmptyResult) {
  const auto fx = qdr::testing::small_fixture(100, 14);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric);
  qdr::Query q;
  q.keywords = {"zzzzzzzzzzzz"};
  q.weights.assign(4, 0.25);
  q.tau_relax = 0.0;
  const auto r = qdr::qdr_search(q, tree);
  EXPECT_TRUE(r.results.empty());
  EXPECT_EQ(r.stats.node_accesses, 0u);
}

TEST(QdrSearch, KappaZeroIsEmpty) {
  const auto fx = qdr::testing::small_fixture(50, 15);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric);
  auto q = qdr::generate_queries(fx.data.objects, {.count = 1}).front();
  q.kappa = 0;
  EXPECT_TRUE(qdr::qdr_search(q, tree).results.empty());
}

TEST(QdrSearch, HitsCarryScoreTerms) {
  const auto fx = qdr::testing::small_fixture(200, 16);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric, qdr::testing::single_leaf_params());
  const auto q = qdr::generate_queries(fx.data.objects, {.count = 1}).front();
  const auto r = qdr::qdr_search(q, tree);
  ASSERT_EQ(r.hits.size(), r.results.size());
  for (const auto& h : r.hits) {
    const double rebuilt = q.alpha * q.beta * h.distance / q.d_max +
                           (1.0 - q.beta) / static_cast<double>(h.phi) +
                           (1.0 - q.alpha) * q.beta * h.weighted_attributes;
    EXPECT_NEAR(rebuilt, h.score, 1e-12);
  }
}

TEST(QdrSearch, RejectsMalformedQuery) {
  const auto fx = qdr::testing::small_fixture(50, 17);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric);
  auto q = qdr::generate_queries(fx.data.objects, {.count = 1}).front();
  q.weights = {1.0};
  EXPECT_THROW(qdr::qdr_search(q, tree), qdr::InvalidInput);
}

TEST(QdrSearch, PruningVisitsFewerNodesThanTree) {
  const auto fx = qdr::testing::small_fixture(3000, 18);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric, qdr::testing::single_leaf_params());
  std::size_t visited = 0, queries = 0;
  for (const auto& q : qdr::generate_queries(fx.data.objects, {.count = 20})) {
    visited += qdr::qdr_search(q, tree).stats.node_accesses;
    ++queries;
  }
  EXPECT_LT(visited, queries * tree.dr_node_count());
}

TEST(MergeHits, KeepsBestScorePerObject) {
  const std::vector<qdr::LeafHit> hits{{3, 0.5, 1}, {1, 0.7, 1}, {3, 0.2, 2}, {2, 0.2, 1}, {4, 0.9, 1}};
  const auto m = qdr::merge_hits(hits, 3);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].object, 2u);
  EXPECT_EQ(m[1].object, 3u);
  EXPECT_EQ(m[1].score, 0.2);
  EXPECT_EQ(m[1].phi, 2u);
  EXPECT_EQ(m[2].object, 1u);
}

}  // namespace
