#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdr/baselines.hpp"
#include "qdr/data_io.hpp"
#include "qdr/qc_tree.hpp"
#include "qdr/query_engine.hpp"

namespace qdr {

inline const std::vector<std::string>& known_engines() {
  static const std::vector<std::string> names{"qdr", "linear", "per-keyword", "keyword-only"};
  return names;
}

struct BenchConfig {
  std::vector<std::string> engines = known_engines();
  SynthParams synth;
  IndexParams index;
  QueryGenParams queries;
  // Each non-empty axis is swept on its own; the other parameters stay at the values above.
  std::vector<std::size_t> kappas;
  std::vector<std::size_t> object_counts;
  std::vector<std::size_t> attribute_dimensions;
  std::vector<double> tau_clusters;
  std::vector<double> tau_dups;
  double score_tolerance = 1e-9;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

/// Per-engine aggregate for one grid point.
struct BenchRow {
  std::string axis;
  double value = 0.0;
  std::string engine;
  std::size_t objects = 0;
  std::size_t index_nodes = 0;
  double median_ms = 0.0;
  double median_node_accesses = 0.0;
  double median_objects_scored = 0.0;
  double recall = 1.0;  // mean overlap with the linear-scan top-kappa
  std::size_t checked = 0;
  std::size_t agreed = 0;
};

struct BenchFailure {
  std::string axis;
  double value = 0.0;
  std::string engine;
  std::string query;
  std::string reason;
};

struct BenchReport {
  nlohmann::json config;
  std::vector<BenchRow> rows;
  std::vector<BenchFailure> failures;

  bool passed() const { return failures.empty(); }
};

inline nlohmann::json to_json(const BenchConfig& c) {
  nlohmann::json j;
  j["engines"] = c.engines;
  j["synth"] = {{"object_count", c.synth.object_count},
                {"coord_min", c.synth.coord_min},
                {"coord_max", c.synth.coord_max},
                {"topic_count", c.synth.topic_count},
                {"words_per_topic", c.synth.words_per_topic},
                {"r", c.synth.r},
                {"attribute_dimension", c.synth.attribute_dimension},
                {"attr_mean", c.synth.attr_mean},
                {"attr_std", c.synth.attr_std},
                {"embedding_dimension", c.synth.embedding_dimension},
                {"topic_spread", c.synth.topic_spread},
                {"seed", c.synth.seed}};
  j["index"] = {{"tau_cluster", c.index.cluster.tau_cluster},
                {"tau_dup", c.index.cluster.tau_dup},
                {"kernel_sigma", c.index.cluster.kernel_sigma},
                {"cluster_seed", c.index.cluster.seed},
                {"fanout", c.index.dr.fanout},
                {"tau_merge", c.index.dr.tau_merge}};
  j["queries"] = {{"count", c.queries.count},
                  {"kappa", c.queries.kappa},
                  {"min_keywords", c.queries.min_keywords},
                  {"max_keywords", c.queries.max_keywords},
                  {"alpha", c.queries.alpha},
                  {"beta", c.queries.beta},
                  {"tau_relax", c.queries.tau_relax},
                  {"seed", c.queries.seed}};
  j["sweeps"] = {{"kappa", c.kappas},
                 {"object_count", c.object_counts},
                 {"attribute_dimension", c.attribute_dimensions},
                 {"tau_cluster", c.tau_clusters},
                 {"tau_dup", c.tau_dups}};
  j["score_tolerance"] = c.score_tolerance;
  return j;
}

namespace detail {

inline bool same_results(const std::vector<ScoredResult>& a, const std::vector<ScoredResult>& b,
                         double tol, std::string& why) {
  if (a.size() != b.size()) {
    why = "result count " + std::to_string(a.size()) + " vs oracle " + std::to_string(b.size());
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].object_id != b[i].object_id || !(std::abs(a[i].score - b[i].score) <= tol)) {
      why = "rank " + std::to_string(i) + ": " + a[i].object_id + " vs oracle " + b[i].object_id;
      return false;
    }
  }
  return true;
}

inline double overlap(const std::vector<ScoredResult>& got, const std::vector<ScoredResult>& truth) {
  if (truth.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& t : truth)
    for (const auto& g : got)
      if (g.object_id == t.object_id) {
        ++hit;
        break;
      }
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace detail

/// Runs one grid point: builds every requested engine over `objects` and
/// runs `queries` through each, checking agreement with the linear scan.
///
/// Agreement rules: qdr must equal the linear scan restricted to its located
/// leaves; keyword-only must equal the full linear scan; per-keyword results
/// must carry their exact linear-scan scores in sorted order (its candidate
/// set is per-tree and not guaranteed complete, so overlap is reported as recall).
inline void run_grid_point(const std::string& axis, double value,
                           const std::vector<GeoObject>& objects, const EmbeddingStore& embeddings,
                           const std::vector<Query>& queries, const BenchConfig& config,
                           BenchReport& report) {
  const KeywordMetric metric(MetricParams{}, embeddings);
  const QcTree tree = build_index(objects, metric, config.index);
  std::unique_ptr<PerKeywordIndex> per_keyword;
  std::unique_ptr<KeywordOnlyIndex> keyword_only;
  auto wants = [&](const std::string& e) {
    return std::find(config.engines.begin(), config.engines.end(), e) != config.engines.end();
  };
  if (wants("per-keyword"))
    per_keyword = std::make_unique<PerKeywordIndex>(tree.objects(), metric, config.index.dr);
  if (wants("keyword-only"))
    keyword_only = std::make_unique<KeywordOnlyIndex>(tree.objects(), metric, config.index.dr);

  std::vector<std::vector<ScoredResult>> truth;
  truth.reserve(queries.size());
  for (const auto& q : queries) truth.push_back(linear_scan(q, tree.objects(), metric));

  for (const auto& engine : config.engines) {
    BenchRow row{axis, value, engine, objects.size()};
    std::vector<double> ms, nodes, scored;
    double recall_sum = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto& q = queries[i];
      SearchResult r;
      std::string why;
      bool ok = true;
      if (engine == "qdr") {
        r = qdr_search(q, tree);
        ok = detail::same_results(r.results, scoped_linear_scan(q, tree), config.score_tolerance, why);
        row.index_nodes = tree.dr_node_count() + tree.nodes().size();
      } else if (engine == "linear") {
        const auto start = std::chrono::steady_clock::now();
        r.results = linear_scan(q, tree.objects(), metric);
        r.stats.elapsed = std::chrono::steady_clock::now() - start;
        r.stats.objects_scored = tree.objects().size();
      } else if (engine == "per-keyword") {
        r = per_keyword->search(q);
        ok = std::is_sorted(r.results.begin(), r.results.end(), result_before);
        if (!ok) why = "results not in score order";
        Query everything = q;
        everything.kappa = tree.objects().size();
        const auto full = linear_scan(everything, tree.objects(), metric);
        for (const auto& res : r.results) {
          auto it = std::find_if(full.begin(), full.end(),
                                 [&](const ScoredResult& f) { return f.object_id == res.object_id; });
          if (it == full.end() || !(std::abs(it->score - res.score) <= config.score_tolerance)) {
            ok = false;
            why = "score of " + res.object_id + " differs from the linear scan";
            break;
          }
        }
        row.index_nodes = per_keyword->node_count();
      } else if (engine == "keyword-only") {
        r = keyword_only->search(q);
        ok = detail::same_results(r.results, truth[i], config.score_tolerance, why);
        row.index_nodes = keyword_only->tree().nodes().size();
      } else {
        throw InvalidInput("unknown engine '" + engine + "'");
      }
      ++row.checked;
      if (ok) {
        ++row.agreed;
      } else {
        report.failures.push_back({axis, value, engine, query_to_json(q), why});
      }
      recall_sum += detail::overlap(r.results, truth[i]);
      ms.push_back(std::chrono::duration<double, std::milli>(r.stats.elapsed).count());
      nodes.push_back(static_cast<double>(r.stats.node_accesses));
      scored.push_back(static_cast<double>(r.stats.objects_scored));
    }
    if (engine == "linear") row.index_nodes = 0;
    row.median_ms = median(ms);
    row.median_node_accesses = median(nodes);
    row.median_objects_scored = median(scored);
    row.recall = queries.empty() ? 1.0 : recall_sum / static_cast<double>(queries.size());
    report.rows.push_back(std::move(row));
  }
}

/// Sweeps every configured axis and collects one row per (grid point, engine).
inline BenchReport run_bench(const BenchConfig& config) {
  for (const auto& e : config.engines)
    if (std::find(known_engines().begin(), known_engines().end(), e) == known_engines().end())
      throw InvalidInput("unknown engine '" + e + "'");

  BenchReport report;
  report.config = to_json(config);
  std::map<std::pair<std::size_t, std::size_t>, SyntheticDataset> datasets;
  auto dataset = [&](std::size_t n, std::size_t dims) -> const SyntheticDataset& {
    auto it = datasets.find({n, dims});
    if (it == datasets.end()) {
      SynthParams p = config.synth;
      p.object_count = n;
      p.attribute_dimension = dims;
      it = datasets.emplace(std::pair{n, dims}, generate_synthetic(p)).first;
    }
    return it->second;
  };
  auto point = [&](const std::string& axis, double value, const BenchConfig& c) {
    const auto& ds = dataset(c.synth.object_count, c.synth.attribute_dimension);
    const auto queries = generate_queries(ds.objects, c.queries);
    run_grid_point(axis, value, ds.objects, ds.embeddings, queries, c, report);
  };

  bool any = false;
  for (auto k : config.kappas) {
    BenchConfig c = config;
    c.queries.kappa = k;
    point("kappa", static_cast<double>(k), c);
    any = true;
  }
  for (auto n : config.object_counts) {
    BenchConfig c = config;
    c.synth.object_count = n;
    point("object_count", static_cast<double>(n), c);
    any = true;
  }
  for (auto d : config.attribute_dimensions) {
    BenchConfig c = config;
    c.synth.attribute_dimension = d;
    point("attribute_dimension", static_cast<double>(d), c);
    any = true;
  }
  for (auto t : config.tau_clusters) {
    BenchConfig c = config;
    c.index.cluster.tau_cluster = t;
    point("tau_cluster", t, c);
    any = true;
  }
  for (auto t : config.tau_dups) {
    BenchConfig c = config;
    c.index.cluster.tau_dup = t;
    point("tau_dup", t, c);
    any = true;
  }
  if (!any) point("default", 0.0, config);
  return report;
}

/// Tab-separated table followed by a JSON summary block.
inline void write_report(std::ostream& out, const BenchReport& r) {
  out << "axis\tvalue\tengine\tobjects\tindex_nodes\tmedian_ms\tmedian_node_accesses"
         "\tmedian_objects_scored\trecall\tagreed\tchecked\n";
  for (const auto& row : r.rows)
    out << row.axis << '\t' << row.value << '\t' << row.engine << '\t' << row.objects << '\t'
        << row.index_nodes << '\t' << row.median_ms << '\t' << row.median_node_accesses << '\t'
        << row.median_objects_scored << '\t' << row.recall << '\t' << row.agreed << '\t'
        << row.checked << '\n';
  nlohmann::json summary;
  summary["config"] = r.config;
  summary["agreement"] = r.passed() ? "pass" : "fail";
  summary["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures)
    summary["failures"].push_back({{"axis", f.axis},
                                   {"value", f.value},
                                   {"engine", f.engine},
                                   {"query", f.query},
                                   {"reason", f.reason}});
  out << "---\n" << summary.dump(2) << '\n';
}

}  // namespace qdr
