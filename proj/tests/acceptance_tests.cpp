// Acceptance gate: one PASS/FAIL line per criterion, each with a pinned
// tolerance and wall-clock budget. Exit status is non-zero if any line fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdr/qdr.hpp"
#include "test_support.hpp"

namespace {

using qdr::testing::admissibility_violations;

constexpr double kScoreTolerance = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

bool same_top(const std::vector<qdr::ScoredResult>& a, const std::vector<qdr::ScoredResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].object_id != b[i].object_id || !(std::abs(a[i].score - b[i].score) <= kScoreTolerance))
      return false;
  return true;
}

qdr::testing::Fixture dataset(std::size_t n, std::uint64_t seed, std::size_t dims = 4) {
  qdr::SynthParams p;
  p.object_count = n;
  p.attribute_dimension = dims;
  p.seed = seed;
  auto ds = qdr::generate_synthetic(p);
  qdr::KeywordMetric metric(qdr::MetricParams{}, ds.embeddings);
  return {std::move(ds), std::move(metric)};
}

Outcome oracle_equivalence() {
  std::size_t checked = 0, mismatched = 0, nonempty = 0;
  for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
    const auto fx = dataset(1000, seed);
    const auto tree = qdr::build_index(fx.data.objects, fx.metric, qdr::testing::single_leaf_params());
    if (tree.leaves().size() != 1) return {false, "single-leaf configuration produced several leaves"};
    qdr::QueryGenParams gp;
    gp.count = 100;
    gp.seed = seed * 7;
    for (const auto& q : qdr::generate_queries(fx.data.objects, gp)) {
      const auto got = qdr::qdr_search(q, tree).results;
      const auto want = qdr::linear_scan(q, tree.objects(), fx.metric);
      ++checked;
      nonempty += !want.empty();
      if (!same_top(got, want)) ++mismatched;
    }
  }
  std::ostringstream d;
  d << checked << " queries over 5 datasets x 1000 objects, " << nonempty << " non-empty, "
    << mismatched << " mismatches (tolerance 1e-9)";
  return {mismatched == 0 && checked == 500, d.str()};
}

Outcome scoped_equivalence() {
  const auto fx = dataset(10000, 201);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric);
  qdr::QueryGenParams gp;
  gp.count = 100;
  gp.seed = 202;
  std::size_t mismatched = 0, multi = 0;
  for (const auto& q : qdr::generate_queries(fx.data.objects, gp)) {
    const auto r = qdr::qdr_search(q, tree);
    multi += r.leaves.size() > 1;
    if (!same_top(r.results, qdr::scoped_linear_scan(q, tree))) ++mismatched;
  }
  std::ostringstream d;
  d << "10000 objects, tau_cluster 0.3, " << tree.leaves().size() << " leaves, " << multi
    << " multi-leaf queries, " << mismatched << "/100 mismatches";
  return {mismatched == 0 && tree.leaves().size() > 1, d.str()};
}

Outcome admissibility() {
  std::mt19937_64 rng(301);
  std::uniform_real_distribution<double> coord(0.0, 1000.0), unit(0.0, 1.0);
  std::size_t nodes_checked = 0, violations = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t dims = 2 + 2 * (t % 3);
    const std::size_t n = 50 + rng() % 451;
    const std::size_t width = 12;
    std::vector<std::string> universe;
    for (std::size_t i = 0; i < width; ++i) universe.push_back("k" + std::to_string(10 + i));
    std::vector<qdr::DrEntry> entries;
    for (std::uint32_t i = 0; i < n; ++i) {
      qdr::DrEntry e;
      e.object = i;
      e.location = {coord(rng), coord(rng)};
      for (std::size_t d = 0; d < dims; ++d) e.attributes.push_back(unit(rng));
      e.kb = qdr::KeywordBitmap(width);
      for (int k = 0; k < 3; ++k)
        if (k == 0 || rng() % 2) e.kb.set(rng() % width);
      entries.push_back(std::move(e));
    }
    // tau_merge above 1 disables merging: the uncompressed skyline.
    for (double tau_merge : {2.0, 0.99, 0.9}) {
      qdr::DrTreeParams p;
      p.fanout = 4 + rng() % 22;
      p.tau_merge = tau_merge;
      const auto tree = qdr::DrTree::bulk_build(entries, universe, p);
      for (int qi = 0; qi < 10; ++qi) {
        qdr::Query q;
        q.location = {coord(rng) * 1.2 - 100.0, coord(rng) * 1.2 - 100.0};
        q.keywords = {"k10"};
        double sum = 0.0;
        for (std::size_t d = 0; d < dims; ++d) sum += q.weights.emplace_back(unit(rng) + 0.01);
        for (auto& w : q.weights) w /= sum;
        q.alpha = unit(rng);
        q.beta = unit(rng);
        q.d_max = 1500.0;
        qdr::KeywordBitmap bmr(width);
        for (int k = 0; k < 4; ++k) bmr.set(rng() % width);
        violations += admissibility_violations(q, bmr, tree);
        nodes_checked += tree.nodes().size();
      }
    }
  }
  std::ostringstream d;
  d << "20 trees x {uncompressed, tau_merge 0.99, 0.9} x 10 queries, " << nodes_checked
    << " node audits, " << violations << " violations";
  return {violations == 0, d.str()};
}

Outcome skyline_correctness() {
  std::mt19937_64 rng(401);
  std::size_t mismatched = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 500, dims = 1 + rng() % 6;
    const auto pts = qdr::testing::random_points(rng, n, dims, t % 3 == 0);
    if (qdr::compute_skyline(pts).points != qdr::testing::brute_skyline(pts)) ++mismatched;
  }
  return {mismatched == 0, "200 instances (<=500 points, <=6 dims), " + std::to_string(mismatched) +
                               " mismatches vs quadratic oracle"};
}

Outcome compression_bound() {
  std::mt19937_64 rng(501);
  std::size_t uncovered = 0, sets = 0;
  for (int t = 0; t < 200; ++t) {
    const auto pts = qdr::testing::random_points(rng, 1 + rng() % 300, 1 + rng() % 6);
    const auto sky = qdr::compute_skyline(pts);
    for (double tau : {0.9, 0.99, 1.0}) {
      const auto c = qdr::compress_skyline(sky, tau);
      ++sets;
      for (const auto& p : sky.points) {
        const bool ok = std::any_of(c.points.begin(), c.points.end(),
                                    [&](const auto& s) { return qdr::weakly_dominates(s, p); });
        uncovered += !ok;
      }
    }
  }
  return {uncovered == 0, std::to_string(sets) + " compressions over 200 skylines, " +
                              std::to_string(uncovered) + " uncovered input points"};
}

Outcome monotonicity() {
  const auto fx = dataset(2000, 601);
  std::string why;

  const auto universe = qdr::keyword_universe(fx.data.objects);
  std::mt19937_64 rng(602);
  std::size_t relax_breaks = 0;
  for (int trial = 0; trial < 20; ++trial) {
    qdr::KeywordBitmap bmq(universe.size());
    bmq.set(rng() % universe.size());
    qdr::KeywordBitmap prev = bmq;
    for (double tau : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      const auto cur = qdr::search_relaxation(bmq, universe, tau, fx.metric);
      relax_breaks += !prev.subset_of(cur);
      prev = cur;
    }
  }

  std::vector<std::size_t> occurrences;
  for (double tau_dup : {0.0, 0.02, 0.05, 0.08, 0.12}) {
    qdr::IndexParams p;
    p.cluster.tau_dup = tau_dup;
    occurrences.push_back(qdr::build_index(fx.data.objects, fx.metric, p).keyword_occurrences());
  }
  std::vector<std::size_t> leaves;
  for (double tau_cluster : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    qdr::IndexParams p;
    p.cluster.tau_cluster = tau_cluster;
    leaves.push_back(qdr::build_index(fx.data.objects, fx.metric, p).leaves().size());
  }
  const bool occ_ok = std::is_sorted(occurrences.begin(), occurrences.end());
  const bool leaves_ok = std::is_sorted(leaves.rbegin(), leaves.rend());

  std::ostringstream d;
  d << "relaxation breaks " << relax_breaks << "; occurrences over tau_dup {0,.02,.05,.08,.12}:";
  for (auto o : occurrences) d << ' ' << o;
  d << "; leaves over tau_cluster {.1,.2,.3,.4,.5}:";
  for (auto l : leaves) d << ' ' << l;
  return {relax_breaks == 0 && occ_ok && leaves_ok, d.str()};
}

Outcome pruning_trend() {
  const auto fx = dataset(10000, 701);
  const auto tree = qdr::build_index(fx.data.objects, fx.metric);
  const qdr::PerKeywordIndex per_keyword(tree.objects(), fx.metric);
  qdr::QueryGenParams gp;
  gp.count = 100;
  gp.seed = 702;
  const auto queries = qdr::generate_queries(fx.data.objects, gp);

  std::vector<double> ours, theirs;
  for (const auto& q : queries) {
    ours.push_back(static_cast<double>(qdr::qdr_search(q, tree).stats.node_accesses));
    theirs.push_back(static_cast<double>(per_keyword.search(q).stats.node_accesses));
  }
  const double m_ours = qdr::median(ours), m_theirs = qdr::median(theirs);
  const double full = static_cast<double>(tree.dr_node_count());

  std::vector<double> by_kappa;
  for (std::size_t kappa : {10, 20, 30, 40, 50}) {
    std::vector<double> n;
    for (auto q : queries) {
      q.kappa = kappa;
      n.push_back(static_cast<double>(qdr::qdr_search(q, tree).stats.node_accesses));
    }
    by_kappa.push_back(qdr::median(n));
  }
  const bool ratio_ok = m_ours < 0.5 * m_theirs;
  const bool size_ok = m_ours < full;
  const bool trend_ok = std::is_sorted(by_kappa.begin(), by_kappa.end());

  std::ostringstream d;
  d << "median node accesses qdr " << m_ours << " vs per-keyword " << m_theirs << " (ratio "
    << (m_theirs > 0 ? m_ours / m_theirs : 0.0) << ", need < 0.5); full DR size " << full
    << "; median over kappa 10..50:";
  for (auto v : by_kappa) d << ' ' << v;
  return {ratio_ok && size_ok && trend_ok, d.str()};
}

Outcome determinism_persistence() {
  qdr::SynthParams p;
  p.object_count = 3000;
  p.seed = 801;
  std::ostringstream a, b;
  qdr::write_objects(a, qdr::generate_synthetic(p).objects);
  qdr::write_objects(b, qdr::generate_synthetic(p).objects);
  const bool data_same = a.str() == b.str();

  const auto fx1 = dataset(3000, 802);
  const auto fx2 = dataset(3000, 802);
  const auto t1 = qdr::build_index(fx1.data.objects, fx1.metric);
  const auto t2 = qdr::build_index(fx2.data.objects, fx2.metric);
  const auto loaded = qdr::deserialize_index(qdr::serialize_index(t1));
  const auto path = (std::filesystem::temp_directory_path() / "qdr_acceptance_roundtrip.qdr").string();
  qdr::save_index(t1, path);
  const auto from_file = qdr::load_index(path);
  std::filesystem::remove(path);

  qdr::QueryGenParams gp;
  gp.count = 100;
  gp.seed = 803;
  std::size_t rebuild_diff = 0, roundtrip_diff = 0;
  for (const auto& q : qdr::generate_queries(fx1.data.objects, gp)) {
    const auto r1 = qdr::qdr_search(q, t1);
    const auto r2 = qdr::qdr_search(q, t2);
    rebuild_diff += !(r1.results == r2.results && r1.stats.node_accesses == r2.stats.node_accesses);
    for (const auto* other : {&loaded, &from_file}) {
      const auto r3 = qdr::qdr_search(q, *other);
      roundtrip_diff += !(r1.results == r3.results && r1.stats.node_accesses == r3.stats.node_accesses);
    }
  }
  std::ostringstream d;
  d << "synthetic bytes identical: " << (data_same ? "yes" : "no") << "; rebuild diffs "
    << rebuild_diff << "/100; save/load diffs " << roundtrip_diff << "/200 (results and node accesses)";
  return {data_same && rebuild_diff == 0 && roundtrip_diff == 0, d.str()};
}

Outcome example_one() {
  const auto objects = qdr::testing::example_one_objects();
  const auto q = qdr::testing::example_one_query();
  // alpha*beta = 0.335, 1-beta = 0.33, (1-alpha)*beta = 0.335.
  auto hand = [](double dist, double phi, double attr) {
    return 0.335 * (dist / 100.0) + 0.33 / phi + 0.335 * attr;
  };
  std::ostringstream d;
  bool ok = true;
  for (bool single : {true, false}) {
    const auto tree = qdr::build_index(objects, qdr::KeywordMetric{},
                                       single ? qdr::testing::single_leaf_params() : qdr::IndexParams{});
    // phi counts the query keywords sharing a leaf with the object's match.
    double phi = 1.0;
    for (const auto& leaf : tree.leaves()) {
      const auto& u = leaf.universe;
      if (std::binary_search(u.begin(), u.end(), "pizza") && std::binary_search(u.begin(), u.end(), "steak"))
        phi = 2.0;
    }
    const double o1 = hand(50.0, phi, 0.1), o8 = hand(10.0, phi, 0.8);
    const auto r = qdr::qdr_search(q, tree).results;
    const bool here = r.size() == 2 && r[0].object_id == "o1" && r[1].object_id == "o8" &&
                      std::abs(r[0].score - o1) < 1e-12 && std::abs(r[1].score - o8) < 1e-12 && o1 < o8;
    if (single) ok = ok && phi == 2.0 && std::abs(o1 - 0.366) < 1e-12 && std::abs(o8 - 0.4665) < 1e-12;
    ok = ok && here;
    d << (single ? "single leaf" : "default") << " (" << tree.leaves().size() << " leaves, phi " << phi
      << "): o1 " << o1 << (here ? " above " : " NOT above ") << "o8 " << o8 << (single ? "; " : "");
  }
  return {ok, d.str()};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"oracle equivalence, single leaf vs linear scan", 60.0, oracle_equivalence},
      {"scoped equivalence, multi-leaf vs scoped linear scan", 120.0, scoped_equivalence},
      {"node bound admissibility before and after compression", 60.0, admissibility},
      {"skyline matches brute force", 30.0, skyline_correctness},
      {"compressed skyline lower-bounds its input", 10.0, compression_bound},
      {"monotonicity in tau_relax, tau_dup, tau_cluster", 60.0, monotonicity},
      {"pruning trend against per-keyword baseline", 300.0, pruning_trend},
      {"determinism and persistence round trip", 60.0, determinism_persistence},
      {"example one ranking", 1.0, example_one},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_s;
    const bool pass = o.pass && in_budget;
    failed += !pass;
    std::printf("%s  %s: %s [%.2fs of %.0fs budget%s]\n", pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
              criteria.size());
  return failed == 0 ? 0 : 1;
}
