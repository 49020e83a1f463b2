#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdr/core.hpp"
#include "qdr/dr_tree.hpp"
#include "qdr/keyword_metric.hpp"

namespace qdr {

/// Ingest failure carrying one message per offending record.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string s = std::to_string(errors.size()) + " invalid record(s)";
    for (std::size_t i = 0; i < errors.size() && i < 10; ++i) s += "\n  " + errors[i];
    return s;
  }
  std::vector<std::string> errors_;
};

enum class AttributeDirection : std::uint8_t { kLowerBetter, kHigherBetter };

/// Per-dimension min-max normalization, flipping higher-better dimensions.
struct Normalization {
  std::vector<double> mins;
  std::vector<double> maxs;
  std::vector<AttributeDirection> directions;

  double apply(std::size_t dim, double raw) const {
    if (maxs[dim] == mins[dim]) return 0.0;
    const double v = std::clamp((raw - mins[dim]) / (maxs[dim] - mins[dim]), 0.0, 1.0);
    return directions[dim] == AttributeDirection::kHigherBetter ? 1.0 - v : v;
  }
};

/// Derives normalization bounds from raw attribute rows. Missing directions
/// default to lower-better.
inline Normalization fit_normalization(const std::vector<std::vector<double>>& rows,
                                       std::vector<AttributeDirection> directions) {
  Normalization n;
  const std::size_t dims = rows.empty() ? directions.size() : rows.front().size();
  n.mins.assign(dims, kInfinity);
  n.maxs.assign(dims, -kInfinity);
  directions.resize(dims, AttributeDirection::kLowerBetter);
  n.directions = std::move(directions);
  for (const auto& r : rows)
    for (std::size_t d = 0; d < dims; ++d) {
      n.mins[d] = std::min(n.mins[d], r[d]);
      n.maxs[d] = std::max(n.maxs[d], r[d]);
    }
  return n;
}

inline void apply_normalization(std::vector<GeoObject>& objects, const Normalization& n) {
  for (auto& o : objects)
    for (std::size_t d = 0; d < o.attributes.size(); ++d) o.attributes[d] = n.apply(d, o.attributes[d]);
}

struct DatasetManifest {
  std::size_t object_count = 0;
  std::size_t attribute_dimension = 0;
  std::vector<AttributeDirection> attribute_directions;
  Mbr bounds;
  std::size_t keyword_universe_size = 0;
};

struct LoadOptions {
  std::vector<AttributeDirection> directions;  // per dimension; missing = lower-better
  bool normalize = true;
};

struct LoadedDataset {
  std::vector<GeoObject> objects;
  DatasetManifest manifest;
  Normalization normalization;
};

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Parses one JSON-lines object record: id, x, y, keywords, attrs.
inline GeoObject parse_object_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  if (!j.is_object()) throw InvalidInput("record is not a JSON object");
  for (const char* field : {"id", "x", "y", "keywords", "attrs"})
    if (!j.contains(field)) throw InvalidInput(std::string("missing field '") + field + "'");
  GeoObject o;
  if (!j["id"].is_string()) throw InvalidInput("'id' must be a string");
  o.id = j["id"].get<std::string>();
  if (!j["x"].is_number() || !j["y"].is_number()) throw InvalidInput("'x' and 'y' must be numbers");
  o.location = {j["x"].get<double>(), j["y"].get<double>()};
  if (!std::isfinite(o.location.x) || !std::isfinite(o.location.y))
    throw InvalidInput("non-finite coordinates");
  if (!j["keywords"].is_array()) throw InvalidInput("'keywords' must be an array");
  for (const auto& k : j["keywords"]) {
    if (!k.is_string()) throw InvalidInput("keywords must be strings");
    auto kw = to_lower(k.get<std::string>());
    if (!kw.empty()) o.keywords.push_back(std::move(kw));
  }
  canonicalize_keywords(o.keywords);
  if (o.keywords.empty()) throw InvalidInput("empty keyword list");
  if (!j["attrs"].is_array()) throw InvalidInput("'attrs' must be an array");
  for (const auto& a : j["attrs"]) {
    if (!a.is_number()) throw InvalidInput("non-numeric attribute");
    o.attributes.push_back(a.get<double>());
    if (!std::isfinite(o.attributes.back())) throw InvalidInput("non-finite attribute");
  }
  return o;
}

inline LoadedDataset read_objects(std::istream& in, const LoadOptions& options = {}) {
  LoadedDataset ds;
  std::vector<std::string> errors;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dims = 0;
  bool have_dims = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto o = parse_object_record(line);
      if (!have_dims) {
        dims = o.attributes.size();
        have_dims = true;
      } else if (o.attributes.size() != dims) {
        throw InvalidInput("expected " + std::to_string(dims) + " attributes, got " +
                           std::to_string(o.attributes.size()));
      }
      ds.objects.push_back(std::move(o));
    } catch (const std::exception& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) throw IngestError(std::move(errors));
  if (ds.objects.empty()) throw IngestError({"dataset has no records"});
  if (dims == 0) throw IngestError({"dataset records carry no attributes"});

  std::sort(ds.objects.begin(), ds.objects.end(),
            [](const GeoObject& a, const GeoObject& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < ds.objects.size(); ++i)
    if (ds.objects[i - 1].id == ds.objects[i].id)
      errors.push_back("duplicate object id '" + ds.objects[i].id + "'");
  if (!errors.empty()) throw IngestError(std::move(errors));

  std::vector<std::vector<double>> rows;
  rows.reserve(ds.objects.size());
  for (const auto& o : ds.objects) rows.push_back(o.attributes);
  ds.normalization = fit_normalization(rows, options.directions);
  if (options.normalize) apply_normalization(ds.objects, ds.normalization);
  for (const auto& o : ds.objects) {
    try {
      validate_object(o);
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) throw IngestError(std::move(errors));

  auto& m = ds.manifest;
  m.object_count = ds.objects.size();
  m.attribute_dimension = dims;
  m.attribute_directions = ds.normalization.directions;
  std::vector<std::string> universe;
  for (const auto& o : ds.objects) {
    m.bounds.expand(o.location);
    universe.insert(universe.end(), o.keywords.begin(), o.keywords.end());
  }
  canonicalize_keywords(universe);
  m.keyword_universe_size = universe.size();
  return ds;
}

inline LoadedDataset load_objects(const std::string& path, const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset '" + path + "'");
  return read_objects(in, options);
}

inline std::string object_record(const GeoObject& o) {
  nlohmann::json j;
  j["id"] = o.id;
  j["x"] = o.location.x;
  j["y"] = o.location.y;
  j["keywords"] = o.keywords;
  j["attrs"] = o.attributes;
  return j.dump();
}

inline void write_objects(std::ostream& out, const std::vector<GeoObject>& objects) {
  for (const auto& o : objects) out << object_record(o) << '\n';
}

inline void save_objects(const std::string& path, const std::vector<GeoObject>& objects) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write dataset '" + path + "'");
  write_objects(out, objects);
}

inline EmbeddingStore load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open embedding file '" + path + "'");
  return EmbeddingStore::parse(in);
}

inline void write_embeddings(std::ostream& out, const EmbeddingStore& store) {
  out << store.size() << ' ' << store.dimension() << '\n';
  out << std::setprecision(17);
  for (const auto& w : store.words()) {
    out << w;
    for (double v : store.vector_for(w)) out << ' ' << v;
    out << '\n';
  }
}

inline void save_embeddings(const std::string& path, const EmbeddingStore& store) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write embedding file '" + path + "'");
  write_embeddings(out, store);
}

struct SynthParams {
  std::size_t object_count = 10000;
  double coord_min = 0.0;
  double coord_max = 10000.0;
  std::size_t topic_count = 8;
  std::size_t words_per_topic = 16;
  double r = 0.25;  // object keywords / topic keywords
  std::size_t attribute_dimension = 4;
  double attr_mean = 0.5;
  double attr_std = 0.15;
  std::size_t embedding_dimension = 16;
  double topic_spread = 0.2;  // typical distance between word vectors of one topic
  std::uint64_t seed = 42;
};

struct SyntheticDataset {
  std::vector<GeoObject> objects;
  EmbeddingStore embeddings;
  std::vector<std::vector<std::string>> topics;
};

/// Topic keyword pool: topic stem plus a consonant-vowel suffix ("foodba", ...).
inline std::vector<std::vector<std::string>> synthetic_topics(std::size_t topic_count,
                                                              std::size_t words_per_topic) {
  static const char* const kStems[] = {"food", "shop", "auto", "care", "tech", "arts",
                                       "home", "pets", "gym",  "bank", "park", "cafe"};
  static const std::string kConsonants = "bcdfghklmnprstvz";
  static const std::string kVowels = "aeiou";
  std::vector<std::vector<std::string>> topics(topic_count);
  for (std::size_t t = 0; t < topic_count; ++t) {
    std::string stem = kStems[t % std::size(kStems)];
    if (t >= std::size(kStems)) stem += std::to_string(t / std::size(kStems));
    for (std::size_t w = 0; w < words_per_topic; ++w) {
      std::string suffix;
      for (std::size_t x = w;; x /= kConsonants.size() * kVowels.size()) {
        const std::size_t syl = x % (kConsonants.size() * kVowels.size());
        suffix += kConsonants[syl / kVowels.size()];
        suffix += kVowels[syl % kVowels.size()];
        if (x < kConsonants.size() * kVowels.size()) break;
      }
      topics[t].push_back(stem + suffix);
    }
  }
  return topics;
}

/// Uniform coordinates, topic-grouped keywords and clipped normal attributes.
inline SyntheticDataset generate_synthetic(const SynthParams& p) {
  if (!(p.r > 0.0 && p.r <= 1.0)) throw InvalidInput("r must lie in (0, 1]");
  if (!(p.coord_max > p.coord_min)) throw InvalidInput("coordinate range must be positive");
  if (p.topic_count == 0 || p.words_per_topic == 0) throw InvalidInput("empty keyword pool");
  if (p.attribute_dimension == 0) throw InvalidInput("attribute dimension must be positive");

  SyntheticDataset ds;
  ds.topics = synthetic_topics(p.topic_count, p.words_per_topic);
  std::mt19937_64 rng(p.seed);

  ds.embeddings = EmbeddingStore(p.embedding_dimension);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double word_noise =
      p.topic_spread / std::sqrt(2.0 * static_cast<double>(p.embedding_dimension));
  for (const auto& topic : ds.topics) {
    std::vector<double> center(p.embedding_dimension);
    double n2 = 0.0;
    for (double& c : center) {
      c = unit(rng);
      n2 += c * c;
    }
    for (double& c : center) c /= std::sqrt(n2);
    for (const auto& word : topic) {
      std::vector<double> v(center);
      for (double& c : v) c += word_noise * unit(rng);
      ds.embeddings.insert(word, std::move(v));
    }
  }

  std::uniform_real_distribution<double> coord(p.coord_min, p.coord_max);
  std::normal_distribution<double> attr(p.attr_mean, p.attr_std);
  const auto per_object = static_cast<std::size_t>(
      std::ceil(p.r * static_cast<double>(p.words_per_topic) - 1e-12));
  const std::size_t width = std::to_string(p.object_count).size();
  for (std::size_t i = 0; i < p.object_count; ++i) {
    GeoObject o;
    std::ostringstream id;
    id << 'o' << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
    o.id = id.str();
    do {
      o.location = {coord(rng), coord(rng)};
    } while (o.location.x <= p.coord_min || o.location.y <= p.coord_min);
    const auto& topic = ds.topics[rng() % ds.topics.size()];
    std::vector<std::size_t> pick(topic.size());
    std::iota(pick.begin(), pick.end(), 0);
    for (std::size_t k = 0; k < per_object; ++k) {
      std::swap(pick[k], pick[k + rng() % (pick.size() - k)]);
      o.keywords.push_back(topic[pick[k]]);
    }
    canonicalize_keywords(o.keywords);
    for (std::size_t d = 0; d < p.attribute_dimension; ++d)
      o.attributes.push_back(std::clamp(attr(rng), 0.0, 1.0));
    ds.objects.push_back(std::move(o));
  }
  return ds;
}

struct QueryGenParams {
  std::size_t count = 100;
  std::size_t kappa = 10;
  std::size_t min_keywords = 1;
  std::size_t max_keywords = 3;
  double alpha = 0.5;
  double beta = 0.67;
  double tau_relax = 0.3;
  double d_max = 0.0;  // <= 0: diagonal of the dataset bounds
  std::uint64_t seed = 7;
};

/// Random queries: location uniform over the dataset bounds, keywords drawn
/// from one random object, weights uniform then normalized.
inline std::vector<Query> generate_queries(const std::vector<GeoObject>& objects,
                                           const QueryGenParams& p) {
  if (objects.empty()) throw InvalidInput("cannot generate queries over an empty dataset");
  Mbr bounds;
  for (const auto& o : objects) bounds.expand(o.location);
  const double diag = euclidean_distance(bounds.lo, bounds.hi);
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> ux(bounds.lo.x, bounds.hi.x);
  std::uniform_real_distribution<double> uy(bounds.lo.y, bounds.hi.y);
  std::uniform_real_distribution<double> uw(0.0, 1.0);
  std::vector<Query> out;
  for (std::size_t i = 0; i < p.count; ++i) {
    Query q;
    q.location = {ux(rng), uy(rng)};
    const auto& src = objects[rng() % objects.size()];
    const std::size_t span = p.max_keywords - std::min(p.min_keywords, p.max_keywords) + 1;
    const std::size_t want =
        std::min(src.keywords.size(), std::max<std::size_t>(1, p.min_keywords + rng() % span));
    std::vector<std::string> pool = src.keywords;
    for (std::size_t k = 0; k < want; ++k) {
      std::swap(pool[k], pool[k + rng() % (pool.size() - k)]);
      q.keywords.push_back(pool[k]);
    }
    canonicalize_keywords(q.keywords);
    double sum = 0.0;
    for (std::size_t d = 0; d < src.attributes.size(); ++d) {
      q.weights.push_back(uw(rng) + 1e-3);
      sum += q.weights.back();
    }
    for (double& w : q.weights) w /= sum;
    q.kappa = p.kappa;
    q.alpha = p.alpha;
    q.beta = p.beta;
    q.tau_relax = p.tau_relax;
    q.d_max = p.d_max > 0.0 ? p.d_max : (diag > 0.0 ? diag : 1.0);
    out.push_back(std::move(q));
  }
  return out;
}

/// Single-line JSON rendering of a query, for logs and reproduction.
inline std::string query_to_json(const Query& q) {
  nlohmann::json j;
  j["x"] = q.location.x;
  j["y"] = q.location.y;
  j["keywords"] = q.keywords;
  j["weights"] = q.weights;
  j["kappa"] = q.kappa;
  j["d_max"] = q.d_max;
  j["alpha"] = q.alpha;
  j["beta"] = q.beta;
  j["tau_relax"] = q.tau_relax;
  return j.dump();
}

}  // namespace qdr
