#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ideolens/classifier.hpp"
#include "ideolens/clustering.hpp"
#include "ideolens/projection.hpp"
#include "ideolens/svm.hpp"
#include "ideolens/synth.hpp"
#include "ideolens/word2vec.hpp"

namespace ideolens {

// The comparison roster, in its reporting order.
const std::vector<std::string>& method_roster();

// Everything one run needs, loaded from a JSON config file. A single
// mandatory seed fans out to per-stage seeds, so one value reproduces the
// whole run. The output directory may be overridden with the
// IDEOLENS_OUTPUT_DIR environment variable; all other settings only change
// through the config file or explicit overrides.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  // Input corpus; ignored (and optional) when `synth` is set.
  std::filesystem::path tweets_path;
  std::filesystem::path likes_path;
  std::filesystem::path catalog_path;
  std::filesystem::path stopwords_path;  // optional; word2vec filtering

  std::optional<GenConfig> synth;

  int k = 5;                             // scores kept per party
  double enrichment_threshold = 0.5;     // min best score of an enrichment tweet
  double enrichment_percentile = 99.0;   // per-party similarity cutoff
  double louvain_resolution = 1.0;
  std::array<double, 3> split_fractions{0.6, 0.2, 0.2};

  ClassifierConfig classifier;
  ProjectionConfig projection;  // the 2-D ideology map artifact
  ClusteringConfig clustering_party = [] {
    ClusteringConfig c;
    c.use_pairwise_projection = false;
    c.standardize = true;
    c.algorithm = "kmeans";
    return c;
  }();
  ClusteringConfig clustering_pole = [] {
    ClusteringConfig c;
    c.use_pairwise_projection = true;
    c.reduce_dims = 64;
    c.standardize = false;
    c.algorithm = "kmeans";
    return c;
  }();
  Word2VecConfig word2vec;
  SvcConfig svc;
  std::vector<std::string> methods = method_roster();  // compare roster subset

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // Parses the file, applies dotted-path overrides ("clustering.party.algorithm=kmeans"),
  // then the environment, then validates.
  static RunConfig load(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides = {});

  void validate() const;
  std::uint64_t hash() const;

  // Artifact locations inside output_dir.
  std::filesystem::path data_dir() const { return output_dir / "data"; }
  std::filesystem::path corpus_dir() const { return output_dir / "corpus"; }
  std::filesystem::path classifier_dir() const { return output_dir / "classifier"; }
  std::filesystem::path enriched_classifier_dir() const { return output_dir / "classifier_enriched"; }
  std::filesystem::path compare_dir() const { return output_dir / "compare"; }
};

// Sets one dotted-path key in a JSON document; the value is parsed as JSON
// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Pipeline stages. Each reads its inputs from the config (or from artifacts
// earlier stages wrote under output_dir), writes its outputs atomically,
// and can be re-run in isolation.
namespace stages {

void synth(const RunConfig& cfg);        // data/: generated corpus + planted truth
void ingest(const RunConfig& cfg);       // corpus/: cleaned corpus + summary
void groundtruth(const RunConfig& cfg);  // truth.csv, split.csv, network.csv
void train(const RunConfig& cfg);        // classifier/ + training_log.csv
void enrich(const RunConfig& cfg);       // base vectors, enrichment.json, classifier_enriched/
void vectorize(const RunConfig& cfg);    // user_vectors.csv, pivot_vectors.csv
void project(const RunConfig& cfg);      // ideology_2d.csv
void predict(const RunConfig& cfg);      // predictions_party.csv, predictions_pole.csv
void evaluate(const RunConfig& cfg);     // report_*.json, confusion_*.csv, curve_*.csv
void compare(const RunConfig& cfg);      // compare/: per-method artifacts + rankings

// All of the above in order (synth only when configured).
void pipeline(const RunConfig& cfg);

}  // namespace stages

}  // namespace ideolens
