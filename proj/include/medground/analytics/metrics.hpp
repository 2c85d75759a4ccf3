#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "medground/core/triplet.hpp"
#include "medground/verification/lexicon.hpp"

namespace medground {

/// Term lists behind the semantic-richness metrics. Any matcher with
/// longest-match, non-overlapping, word-bounded semantics can stand in.
class Gazetteer {
 public:
  static Gazetteer load(const std::filesystem::path& dir) {
    Gazetteer g;
    for (const auto& t : read_data_lines((dir / "entities.txt").string())) g.add_entity(t);
    for (const auto& t : read_data_lines((dir / "spatial_terms.txt").string())) g.add_spatial(t);
    for (Modality m : kAllModalities)
      for (const auto& t : read_data_lines((dir / ("morphology_" + modality_slug(m) + ".txt")).string()))
        g.add_morphology(m, t);
    return g;
  }

  void add_entity(const std::string& t) { entities_.add(to_lower_ascii(t)); }
  void add_spatial(const std::string& t) { spatial_.add(to_lower_ascii(t)); }
  void add_morphology(Modality m, const std::string& t) { morphology_[m].add(to_lower_ascii(t)); }

  [[nodiscard]] const PhraseMatcher& entities() const { return entities_; }
  [[nodiscard]] const PhraseMatcher& spatial() const { return spatial_; }
  [[nodiscard]] const PhraseMatcher& morphology(Modality m) const {
    static const PhraseMatcher kEmpty;
    auto it = morphology_.find(m);
    return it == morphology_.end() ? kEmpty : it->second;
  }

 private:
  PhraseMatcher entities_;
  PhraseMatcher spatial_;
  std::map<Modality, PhraseMatcher> morphology_;
};

/// Unique entity matches / word count; 0 for an empty query.
inline double entity_density(std::string_view query, const Gazetteer& g) {
  const std::size_t words = count_words(query);
  if (words == 0) return 0.0;
  std::set<std::size_t> unique;
  for (const auto& m : g.entities().find_all(query)) unique.insert(m.phrase_id);
  return static_cast<double>(unique.size()) / static_cast<double>(words);
}

/// Spatial-term occurrences, repeats included.
inline std::size_t spatial_complexity(std::string_view query, const Gazetteer& g) {
  return g.spatial().find_all(query).size();
}

inline std::size_t morphology_hits(std::string_view query, Modality m, const Gazetteer& g) {
  std::set<std::size_t> unique;
  for (const auto& hit : g.morphology(m).find_all(query)) unique.insert(hit.phrase_id);
  return unique.size();
}

struct MorphologyStats {
  double coverage = 0.0;
  double mean_hits = 0.0;
  bool empty_input = false;
};

inline MorphologyStats morphology_stats(const std::vector<std::string>& queries, Modality m,
                                        const Gazetteer& g) {
  if (queries.empty()) return {0.0, 0.0, true};
  std::size_t covered = 0;
  std::size_t hits = 0;
  for (const auto& q : queries) {
    const std::size_t h = morphology_hits(q, m, g);
    covered += h > 0 ? 1 : 0;
    hits += h;
  }
  const auto n = static_cast<double>(queries.size());
  return {static_cast<double>(covered) / n, static_cast<double>(hits) / n, false};
}

namespace detail {

// Sorting first makes the float sum independent of input order.
inline double order_free_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

struct DatasetMetrics {
  std::string dataset;
  std::size_t images = 0;
  std::size_t queries = 0;
  std::size_t tokens = 0;
  double avg_words = 0.0;
  double entity_density = 0.0;
  double morphology_coverage = 0.0;
  double morphology_mean_hits = 0.0;
  double spatial_complexity = 0.0;
};

struct SplitStats {
  std::string split;
  DatasetMetrics overall;  // dataset == "All"
  std::map<std::string, double> modality_ratio;
  std::vector<DatasetMetrics> datasets;  // sorted by name
};

inline DatasetMetrics dataset_metrics(const std::string& name,
                                      const std::vector<const ReferringTriplet*>& ts,
                                      const Gazetteer& g) {
  DatasetMetrics d;
  d.dataset = name;
  d.queries = ts.size();
  std::set<std::pair<std::string, std::string>> images;
  std::vector<double> density, spatial;
  std::size_t covered = 0, hits = 0;
  for (const auto* t : ts) {
    images.insert({t->image.dataset, t->image.path});
    d.tokens += count_words(t->query);
    density.push_back(entity_density(t->query, g));
    spatial.push_back(static_cast<double>(spatial_complexity(t->query, g)));
    const std::size_t h = morphology_hits(t->query, t->image.modality, g);
    covered += h > 0 ? 1 : 0;
    hits += h;
  }
  d.images = images.size();
  if (d.queries > 0) {
    const auto n = static_cast<double>(d.queries);
    d.avg_words = static_cast<double>(d.tokens) / n;
    d.morphology_coverage = static_cast<double>(covered) / n;
    d.morphology_mean_hits = static_cast<double>(hits) / n;
  }
  d.entity_density = detail::order_free_mean(std::move(density));
  d.spatial_complexity = detail::order_free_mean(std::move(spatial));
  return d;
}

inline SplitStats split_statistics(const std::vector<ReferringTriplet>& triplets,
                                   const std::string& split, const Gazetteer& g) {
  SplitStats s;
  s.split = split;
  std::vector<const ReferringTriplet*> all;
  std::map<std::string, std::vector<const ReferringTriplet*>> by_dataset;
  std::map<std::string, std::size_t> by_modality;
  for (const auto& t : triplets) {
    all.push_back(&t);
    by_dataset[t.image.dataset].push_back(&t);
    ++by_modality[std::string(to_string(t.image.modality))];
  }
  s.overall = dataset_metrics("All", all, g);
  for (const auto& [name, ts] : by_dataset) s.datasets.push_back(dataset_metrics(name, ts, g));
  for (const auto& [m, n] : by_modality)
    s.modality_ratio[m] = static_cast<double>(n) / static_cast<double>(triplets.size());
  return s;
}

namespace detail {

inline std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace detail

inline std::string metrics_csv(const std::vector<SplitStats>& splits) {
  std::string out =
      "dataset,split,images,queries,tokens,avg_words,entity_density,morphology_coverage,"
      "morphology_mean_hits,spatial_complexity\n";
  auto row = [&](const DatasetMetrics& d, const std::string& split) {
    out += d.dataset + "," + split + "," + std::to_string(d.images) + "," +
           std::to_string(d.queries) + "," + std::to_string(d.tokens) + "," +
           detail::fmt(d.avg_words, 1) + "," + detail::fmt(d.entity_density, 4) + "," +
           detail::fmt(d.morphology_coverage, 4) + "," + detail::fmt(d.morphology_mean_hits, 4) +
           "," + detail::fmt(d.spatial_complexity, 4) + "\n";
  };
  for (const auto& s : splits) {
    for (const auto& d : s.datasets) row(d, s.split);
    row(s.overall, s.split);
  }
  return out;
}

inline Json metrics_json(const std::vector<SplitStats>& splits) {
  auto dj = [](const DatasetMetrics& d) {
    Json j;
    j["dataset"] = d.dataset;
    j["images"] = d.images;
    j["queries"] = d.queries;
    j["tokens"] = d.tokens;
    j["avg_words"] = d.avg_words;
    j["entity_density"] = d.entity_density;
    j["morphology_coverage"] = d.morphology_coverage;
    j["morphology_mean_hits"] = d.morphology_mean_hits;
    j["spatial_complexity"] = d.spatial_complexity;
    return j;
  };
  Json arr = Json::array();
  for (const auto& s : splits) {
    Json j;
    j["split"] = s.split;
    j["overall"] = dj(s.overall);
    j["modality_ratio"] = Json::object();
    for (const auto& [m, r] : s.modality_ratio) j["modality_ratio"][m] = r;
    j["datasets"] = Json::array();
    for (const auto& d : s.datasets) j["datasets"].push_back(dj(d));
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace medground
