#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qdr/qdr.hpp"

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BuildOptions {
  std::string data;
  std::string embeddings;
  std::vector<std::string> directions;
  std::string out;
  double delta = 0.5;
  bool baselines = false;
  qdr::IndexParams index;
};

struct QueryOptions {
  std::string index;
  std::string query_json;
  std::string query_file;
  double x = 0.0;
  double y = 0.0;
  std::vector<std::string> keywords;
  std::vector<double> weights;
  std::size_t kappa = 10;
  double alpha = 0.5;
  double beta = 0.67;
  double d_max = 0.0;
  double tau_relax = 0.3;
};

struct SynthOptions {
  qdr::SynthParams params;
  std::string out;
  std::string embeddings_out;
  std::string queries_out;
  qdr::QueryGenParams queries;
};

struct BenchOptions {
  qdr::BenchConfig config;
  std::string out;
};

struct StatsOptions {
  std::string index;
};

void add_index_params(CLI::App* cmd, qdr::IndexParams& p) {
  cmd->add_option("--tau-cluster", p.cluster.tau_cluster, "Cluster diameter cut-line")
      ->capture_default_str();
  cmd->add_option("--tau-dup", p.cluster.tau_dup, "Duplication variance threshold")
      ->capture_default_str();
  cmd->add_option("--kernel-sigma", p.cluster.kernel_sigma, "RBF kernel bandwidth")
      ->capture_default_str();
  cmd->add_option("--cluster-seed", p.cluster.seed, "Kernel k-means seed")->capture_default_str();
  cmd->add_option("--fanout", p.dr.fanout, "DR-tree node capacity")->capture_default_str();
  cmd->add_option("--tau-merge", p.dr.tau_merge, "Skyline merge cosine threshold")
      ->capture_default_str();
}

std::vector<qdr::AttributeDirection> parse_directions(const std::vector<std::string>& names) {
  std::vector<qdr::AttributeDirection> out;
  for (const auto& n : names) {
    if (n == "lower" || n == "low") {
      out.push_back(qdr::AttributeDirection::kLowerBetter);
    } else if (n == "higher" || n == "high") {
      out.push_back(qdr::AttributeDirection::kHigherBetter);
    } else {
      throw UsageError("attribute direction must be 'lower' or 'higher', got '" + n + "'");
    }
  }
  return out;
}

std::size_t index_bytes(const qdr::QcTree& tree) { return qdr::serialize_index(tree).size(); }

json index_summary(const qdr::QcTree& tree) {
  std::vector<std::string> universe;
  for (const auto& o : tree.objects())
    universe.insert(universe.end(), o.keywords.begin(), o.keywords.end());
  qdr::canonicalize_keywords(universe);
  std::size_t height = 0;
  for (const auto& l : tree.leaves()) height = std::max(height, l.tree.height());
  return {{"objects", tree.objects().size()},
          {"attribute_dimension", tree.attribute_dimension()},
          {"keyword_universe", universe.size()},
          {"qc_nodes", tree.nodes().size()},
          {"leaf_count", tree.leaves().size()},
          {"leaf_keyword_occurrences", tree.keyword_occurrences()},
          {"duplication_ratio",
           static_cast<double>(tree.keyword_occurrences()) / static_cast<double>(universe.size())},
          {"dr_nodes", tree.dr_node_count()},
          {"dr_entries", tree.indexed_entries()},
          {"max_dr_height", height},
          {"index_bytes", index_bytes(tree)},
          {"bounds", {tree.bounds().lo.x, tree.bounds().lo.y, tree.bounds().hi.x, tree.bounds().hi.y}},
          {"params",
           {{"tau_cluster", tree.params().cluster.tau_cluster},
            {"tau_dup", tree.params().cluster.tau_dup},
            {"kernel_sigma", tree.params().cluster.kernel_sigma},
            {"fanout", tree.params().dr.fanout},
            {"tau_merge", tree.params().dr.tau_merge},
            {"delta", tree.metric().params().delta}}}};
}

int run_build(const BuildOptions& o) {
  qdr::LoadOptions load;
  load.directions = parse_directions(o.directions);
  const auto ds = qdr::load_objects(o.data, load);
  qdr::EmbeddingStore store;
  if (!o.embeddings.empty()) store = qdr::load_embeddings(o.embeddings);
  const qdr::KeywordMetric metric(qdr::MetricParams{o.delta}, std::move(store));

  const auto start = std::chrono::steady_clock::now();
  const auto tree = qdr::build_index(ds.objects, metric, o.index);
  const double build_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  qdr::save_index(tree, o.out);

  json report = index_summary(tree);
  report["build_ms"] = build_ms;
  report["index_path"] = o.out;
  if (o.baselines) {
    auto t0 = std::chrono::steady_clock::now();
    const qdr::PerKeywordIndex per_keyword(tree.objects(), metric, o.index.dr);
    auto t1 = std::chrono::steady_clock::now();
    const qdr::KeywordOnlyIndex keyword_only(tree.objects(), metric, o.index.dr);
    auto t2 = std::chrono::steady_clock::now();
    report["baselines"] = {
        {"per_keyword",
         {{"trees", per_keyword.trees().size()},
          {"nodes", per_keyword.node_count()},
          {"build_ms", std::chrono::duration<double, std::milli>(t1 - t0).count()}}},
        {"keyword_only",
         {{"nodes", keyword_only.tree().nodes().size()},
          {"build_ms", std::chrono::duration<double, std::milli>(t2 - t1).count()}}}};
  }
  std::cout << report.dump(2) << '\n';
  return kOk;
}

qdr::Query query_from_json(const std::string& text, const qdr::QcTree& tree) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("query is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("query must be a JSON object");
  qdr::Query q;
  try {
    for (const char* field : {"x", "y", "keywords"})
      if (!j.contains(field)) throw UsageError(std::string("query lacks '") + field + "'");
    q.location = {j.at("x").get<double>(), j.at("y").get<double>()};
    for (const auto& k : j.at("keywords")) q.keywords.push_back(qdr::to_lower(k.get<std::string>()));
    if (j.contains("weights")) {
      q.weights = j.at("weights").get<std::vector<double>>();
    } else {
      q.weights.assign(tree.attribute_dimension(),
                       1.0 / static_cast<double>(tree.attribute_dimension()));
    }
    q.kappa = j.value("kappa", std::size_t{10});
    q.alpha = j.value("alpha", 0.5);
    q.beta = j.value("beta", 0.67);
    q.d_max = j.value("d_max", 0.0);
    q.tau_relax = j.value("tau_relax", 0.3);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed query: ") + e.what());
  }
  if (!(q.d_max > 0.0)) q.d_max = tree.default_d_max();
  qdr::canonicalize_keywords(q.keywords);
  return q;
}

json render(const qdr::Query& q, const qdr::SearchResult& r) {
  json out;
  out["query"] = json::parse(qdr::query_to_json(q));
  out["results"] = json::array();
  for (std::size_t i = 0; i < r.hits.size(); ++i) {
    const auto& h = r.hits[i];
    out["results"].push_back({{"rank", i + 1},
                              {"id", h.object_id},
                              {"score", h.score},
                              {"distance", h.distance},
                              {"phi", h.phi},
                              {"weighted_attributes", h.weighted_attributes}});
  }
  out["stats"] = {{"node_accesses", r.stats.node_accesses},
                  {"objects_scored", r.stats.objects_scored},
                  {"leaves_searched", r.stats.leaves_searched},
                  {"leaves_located", r.leaves.size()},
                  {"elapsed_ms", std::chrono::duration<double, std::milli>(r.stats.elapsed).count()}};
  return out;
}

int run_query(const QueryOptions& o, bool flag_query) {
  const int sources = (o.query_json.empty() ? 0 : 1) + (o.query_file.empty() ? 0 : 1) +
                      (flag_query ? 1 : 0);
  if (sources != 1)
    throw UsageError("give exactly one of --query, --query-file or --keywords");
  const auto tree = qdr::load_index(o.index);

  std::vector<std::string> raw_queries;
  if (!o.query_json.empty()) {
    raw_queries.push_back(o.query_json);
  } else if (!o.query_file.empty()) {
    std::ifstream in(o.query_file);
    if (!in) throw UsageError("cannot open query file '" + o.query_file + "'");
    for (std::string line; std::getline(in, line);)
      if (line.find_first_not_of(" \t\r") != std::string::npos) raw_queries.push_back(line);
  } else {
    json j{{"x", o.x}, {"y", o.y}, {"keywords", o.keywords}, {"kappa", o.kappa},
           {"alpha", o.alpha}, {"beta", o.beta}, {"d_max", o.d_max}, {"tau_relax", o.tau_relax}};
    if (!o.weights.empty()) j["weights"] = o.weights;
    raw_queries.push_back(j.dump());
  }

  std::vector<qdr::Query> queries;
  for (const auto& s : raw_queries) {
    auto q = query_from_json(s, tree);
    try {
      qdr::validate_query(q, tree.attribute_dimension());
    } catch (const qdr::InvalidInput& e) {
      throw UsageError(std::string("invalid query: ") + e.what());
    }
    queries.push_back(std::move(q));
  }
  for (const auto& q : queries) std::cout << render(q, qdr::qdr_search(q, tree)).dump() << '\n';
  return kOk;
}

int run_synth(const SynthOptions& o) {
  const auto ds = qdr::generate_synthetic(o.params);
  qdr::save_objects(o.out, ds.objects);
  if (!o.embeddings_out.empty()) qdr::save_embeddings(o.embeddings_out, ds.embeddings);
  if (!o.queries_out.empty()) {
    std::ofstream out(o.queries_out);
    if (!out) throw std::runtime_error("cannot write '" + o.queries_out + "'");
    for (const auto& q : qdr::generate_queries(ds.objects, o.queries))
      out << qdr::query_to_json(q) << '\n';
  }
  std::cout << json{{"objects", ds.objects.size()},
                    {"topics", ds.topics.size()},
                    {"seed", o.params.seed},
                    {"objects_path", o.out}}
                   .dump(2)
            << '\n';
  return kOk;
}

int run_bench(const BenchOptions& o) {
  const auto report = qdr::run_bench(o.config);
  if (o.out.empty()) {
    qdr::write_report(std::cout, report);
  } else {
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write '" + o.out + "'");
    qdr::write_report(out, report);
  }
  for (const auto& f : report.failures)
    std::cerr << "agreement failure [" << f.engine << ", " << f.axis << "=" << f.value
              << "]: " << f.reason << "\n  query: " << f.query << '\n';
  return report.passed() ? kOk : kFailure;
}

int run_stats(const StatsOptions& o) {
  const auto tree = qdr::load_index(o.index);
  json s = index_summary(tree);
  s["leaves"] = json::array();
  for (std::size_t i = 0; i < tree.leaves().size(); ++i) {
    const auto& l = tree.leaves()[i];
    s["leaves"].push_back({{"leaf", i},
                           {"center", l.cluster.center},
                           {"keywords", l.universe.size()},
                           {"duplicated", l.cluster.duplicated.size()},
                           {"diameter", l.cluster.diameter},
                           {"core_diameter", l.cluster.core_diameter},
                           {"entries", l.tree.entries().size()},
                           {"dr_nodes", l.tree.nodes().size()},
                           {"dr_height", l.tree.height()}});
  }
  std::cout << s.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-aware spatial keyword index (QDR-tree)"};
  app.set_config("--config", "", "TOML or INI file with option values; flags win");
  app.require_subcommand(1);

  BuildOptions build;
  auto* build_cmd = app.add_subcommand("build", "Build an index from a JSON-lines dataset");
  build_cmd->add_option("--data", build.data, "Object records (JSON lines)")->required();
  build_cmd->add_option("--embeddings", build.embeddings, "Word vectors (word v1 ... vd)");
  build_cmd->add_option("--directions", build.directions,
                        "Per-attribute direction: lower or higher (default lower)");
  build_cmd->add_option("--out", build.out, "Index output path")->required();
  build_cmd->add_option("--delta", build.delta, "Textual weight in the keyword distance")
      ->capture_default_str();
  build_cmd->add_flag("--baselines", build.baselines, "Also build and report the baselines");
  add_index_params(build_cmd, build.index);

  QueryOptions query;
  auto* query_cmd = app.add_subcommand("query", "Run top-k queries against an index");
  query_cmd->add_option("--index", query.index, "Index path")->required();
  query_cmd->add_option("--query", query.query_json, "Query as a JSON object");
  query_cmd->add_option("--query-file", query.query_file, "JSON-lines file of queries");
  query_cmd->add_option("--x", query.x, "Query x coordinate");
  query_cmd->add_option("--y", query.y, "Query y coordinate");
  auto* kw_opt = query_cmd->add_option("--keywords", query.keywords, "Query keywords")->delimiter(',');
  query_cmd->add_option("--weights", query.weights, "Attribute weights (sum to 1)")->delimiter(',');
  query_cmd->add_option("--kappa", query.kappa, "Result count")->capture_default_str();
  query_cmd->add_option("--alpha", query.alpha, "Distance vs attribute balance")->capture_default_str();
  query_cmd->add_option("--beta", query.beta, "Keyword vs rest balance")->capture_default_str();
  query_cmd->add_option("--d-max", query.d_max, "Distance normaliser (default: bounds diagonal)");
  query_cmd->add_option("--tau-relax", query.tau_relax, "Keyword relaxation threshold")
      ->capture_default_str();

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--objects", synth.params.object_count, "Object count")->capture_default_str();
  synth_cmd->add_option("--topics", synth.params.topic_count, "Keyword topic groups")
      ->capture_default_str();
  synth_cmd->add_option("--words-per-topic", synth.params.words_per_topic, "Keywords per topic")
      ->capture_default_str();
  synth_cmd->add_option("--r", synth.params.r, "Object keywords / topic keywords")->capture_default_str();
  synth_cmd->add_option("--attrs", synth.params.attribute_dimension, "Attribute dimension")
      ->capture_default_str();
  synth_cmd->add_option("--attr-mean", synth.params.attr_mean)->capture_default_str();
  synth_cmd->add_option("--attr-std", synth.params.attr_std)->capture_default_str();
  synth_cmd->add_option("--seed", synth.params.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Object records output")->required();
  synth_cmd->add_option("--embeddings-out", synth.embeddings_out, "Word vectors output");
  synth_cmd->add_option("--queries-out", synth.queries_out, "Random queries output (JSON lines)");
  synth_cmd->add_option("--query-count", synth.queries.count)->capture_default_str();
  synth_cmd->add_option("--query-seed", synth.queries.seed)->capture_default_str();
  synth_cmd->add_option("--kappa", synth.queries.kappa)->capture_default_str();

  BenchOptions bench;
  auto& bc = bench.config;
  auto* bench_cmd = app.add_subcommand("bench", "Run engine comparison sweeps");
  bench_cmd->add_option("--engines", bc.engines, "qdr, linear, per-keyword, keyword-only")
      ->delimiter(',');
  bench_cmd->add_option("--objects", bc.synth.object_count)->capture_default_str();
  bench_cmd->add_option("--attrs", bc.synth.attribute_dimension)->capture_default_str();
  bench_cmd->add_option("--topics", bc.synth.topic_count)->capture_default_str();
  bench_cmd->add_option("--words-per-topic", bc.synth.words_per_topic)->capture_default_str();
  bench_cmd->add_option("--r", bc.synth.r)->capture_default_str();
  bench_cmd->add_option("--seed", bc.synth.seed, "Dataset seed")->capture_default_str();
  bench_cmd->add_option("--query-count", bc.queries.count)->capture_default_str();
  bench_cmd->add_option("--query-seed", bc.queries.seed)->capture_default_str();
  bench_cmd->add_option("--kappa", bc.queries.kappa)->capture_default_str();
  bench_cmd->add_option("--tau-relax", bc.queries.tau_relax)->capture_default_str();
  bench_cmd->add_option("--sweep-kappa", bc.kappas)->delimiter(',');
  bench_cmd->add_option("--sweep-objects", bc.object_counts)->delimiter(',');
  bench_cmd->add_option("--sweep-attrs", bc.attribute_dimensions)->delimiter(',');
  bench_cmd->add_option("--sweep-tau-cluster", bc.tau_clusters)->delimiter(',');
  bench_cmd->add_option("--sweep-tau-dup", bc.tau_dups)->delimiter(',');
  bench_cmd->add_option("--out", bench.out, "Report path (default: stdout)");
  add_index_params(bench_cmd, bc.index);

  StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "Describe a saved index");
  stats_cmd->add_option("--index", stats.index, "Index path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*build_cmd) return run_build(build);
    if (*query_cmd) return run_query(query, kw_opt->count() > 0);
    if (*synth_cmd) return run_synth(synth);
    if (*bench_cmd) return run_bench(bench);
    if (*stats_cmd) return run_stats(stats);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const qdr::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
