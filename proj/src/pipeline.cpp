#include "ideolens/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "ideolens/baselines.hpp"
#include "ideolens/errors.hpp"
#include "ideolens/evaluate.hpp"
#include "ideolens/graph.hpp"
#include "ideolens/io.hpp"
#include "ideolens/predict.hpp"
#include "ideolens/prediction.hpp"
#include "ideolens/rng.hpp"
#include "ideolens/text.hpp"
#include "ideolens/vectors.hpp"

namespace ideolens {

namespace {

using nlohmann::json;

// --- config (de)serialization ----------------------------------------------

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + context);
}

json gen_to_json(const GenConfig& g) {
  json j;
  j["n_parties"] = g.n_parties;
  j["n_poles"] = g.n_poles;
  j["n_users"] = g.n_users;
  j["tweets_per_user_min"] = g.tweets_per_user_min;
  j["tweets_per_user_max"] = g.tweets_per_user_max;
  j["pivot_tweets_per_party"] = g.pivot_tweets_per_party;
  j["vocab_separation"] = g.vocab_separation;
  j["pole_vocab_fraction"] = g.pole_vocab_fraction;
  j["political_fraction"] = g.political_fraction;
  j["pivot_political_fraction"] = g.pivot_political_fraction;
  j["negative_fraction"] = g.negative_fraction;
  j["retweet_rate"] = g.retweet_rate;
  j["retweet_pivot_rate"] = g.retweet_pivot_rate;
  j["other_user_retweet_rate"] = g.other_user_retweet_rate;
  j["likes_per_user"] = g.likes_per_user;
  j["like_rate"] = g.like_rate;
  j["party_vocab_size"] = g.party_vocab_size;
  j["pole_vocab_size"] = g.pole_vocab_size;
  j["shared_vocab_size"] = g.shared_vocab_size;
  j["noise_vocab_size"] = g.noise_vocab_size;
  j["negation_vocab_size"] = g.negation_vocab_size;
  j["tweet_tokens_min"] = g.tweet_tokens_min;
  j["tweet_tokens_max"] = g.tweet_tokens_max;
  j["time_from"] = g.time_from;
  j["time_to"] = g.time_to;
  return j;
}

GenConfig gen_from_json(const json& j) {
  GenConfig g;
  check_keys(j, {"n_parties", "n_poles", "n_users", "tweets_per_user_min",
                 "tweets_per_user_max", "pivot_tweets_per_party", "vocab_separation",
                 "pole_vocab_fraction", "political_fraction", "pivot_political_fraction",
                 "negative_fraction",
                 "retweet_rate", "retweet_pivot_rate", "other_user_retweet_rate",
                 "likes_per_user", "like_rate", "party_vocab_size", "pole_vocab_size",
                 "shared_vocab_size", "noise_vocab_size", "negation_vocab_size",
                 "tweet_tokens_min", "tweet_tokens_max", "time_from", "time_to"},
             "synth");
  g.n_parties = j.value("n_parties", g.n_parties);
  g.n_poles = j.value("n_poles", g.n_poles);
  g.n_users = j.value("n_users", g.n_users);
  g.tweets_per_user_min = j.value("tweets_per_user_min", g.tweets_per_user_min);
  g.tweets_per_user_max = j.value("tweets_per_user_max", g.tweets_per_user_max);
  g.pivot_tweets_per_party = j.value("pivot_tweets_per_party", g.pivot_tweets_per_party);
  g.vocab_separation = j.value("vocab_separation", g.vocab_separation);
  g.pole_vocab_fraction = j.value("pole_vocab_fraction", g.pole_vocab_fraction);
  g.political_fraction = j.value("political_fraction", g.political_fraction);
  g.pivot_political_fraction = j.value("pivot_political_fraction", g.pivot_political_fraction);
  g.negative_fraction = j.value("negative_fraction", g.negative_fraction);
  g.retweet_rate = j.value("retweet_rate", g.retweet_rate);
  g.retweet_pivot_rate = j.value("retweet_pivot_rate", g.retweet_pivot_rate);
  g.other_user_retweet_rate = j.value("other_user_retweet_rate", g.other_user_retweet_rate);
  g.likes_per_user = j.value("likes_per_user", g.likes_per_user);
  g.like_rate = j.value("like_rate", g.like_rate);
  g.party_vocab_size = j.value("party_vocab_size", g.party_vocab_size);
  g.pole_vocab_size = j.value("pole_vocab_size", g.pole_vocab_size);
  g.shared_vocab_size = j.value("shared_vocab_size", g.shared_vocab_size);
  g.noise_vocab_size = j.value("noise_vocab_size", g.noise_vocab_size);
  g.negation_vocab_size = j.value("negation_vocab_size", g.negation_vocab_size);
  g.tweet_tokens_min = j.value("tweet_tokens_min", g.tweet_tokens_min);
  g.tweet_tokens_max = j.value("tweet_tokens_max", g.tweet_tokens_max);
  g.time_from = j.value("time_from", g.time_from);
  g.time_to = j.value("time_to", g.time_to);
  return g;
}

json projection_to_json(const ProjectionConfig& p) {
  json j;
  j["method"] = p.method;
  j["n_components"] = p.n_components;
  j["n_neighbors"] = p.n_neighbors;
  j["min_dist"] = p.min_dist;
  j["spread"] = p.spread;
  j["n_epochs"] = p.n_epochs;
  j["learning_rate"] = p.learning_rate;
  j["negative_samples"] = p.negative_samples;
  return j;
}

ProjectionConfig projection_from_json(const json& j) {
  ProjectionConfig p;
  check_keys(j, {"method", "n_components", "n_neighbors", "min_dist", "spread", "n_epochs",
                 "learning_rate", "negative_samples"},
             "projection");
  p.method = j.value("method", p.method);
  p.n_components = j.value("n_components", p.n_components);
  p.n_neighbors = j.value("n_neighbors", p.n_neighbors);
  p.min_dist = j.value("min_dist", p.min_dist);
  p.spread = j.value("spread", p.spread);
  p.n_epochs = j.value("n_epochs", p.n_epochs);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.negative_samples = j.value("negative_samples", p.negative_samples);
  return p;
}

json word2vec_to_json(const Word2VecConfig& w) {
  json j;
  j["dim"] = w.dim;
  j["window"] = w.window;
  j["epochs"] = w.epochs;
  j["negative_samples"] = w.negative_samples;
  j["max_vocab"] = w.max_vocab;
  j["min_count"] = w.min_count;
  j["learning_rate"] = w.learning_rate;
  return j;
}

Word2VecConfig word2vec_from_json(const json& j) {
  Word2VecConfig w;
  check_keys(j, {"dim", "window", "epochs", "negative_samples", "max_vocab", "min_count",
                 "learning_rate"},
             "word2vec");
  w.dim = j.value("dim", w.dim);
  w.window = j.value("window", w.window);
  w.epochs = j.value("epochs", w.epochs);
  w.negative_samples = j.value("negative_samples", w.negative_samples);
  w.max_vocab = j.value("max_vocab", w.max_vocab);
  w.min_count = j.value("min_count", w.min_count);
  w.learning_rate = j.value("learning_rate", w.learning_rate);
  return w;
}

json svc_to_json(const SvcConfig& s) {
  json j;
  j["C"] = s.C;
  j["tol"] = s.tol;
  j["max_passes"] = s.max_passes;
  j["bias_scale"] = s.bias_scale;
  return j;
}

SvcConfig svc_from_json(const json& j) {
  SvcConfig s;
  check_keys(j, {"C", "tol", "max_passes", "bias_scale"}, "svc");
  s.C = j.value("C", s.C);
  s.tol = j.value("tol", s.tol);
  s.max_passes = j.value("max_passes", s.max_passes);
  s.bias_scale = j.value("bias_scale", s.bias_scale);
  return s;
}

ClusteringConfig default_party_clustering() { return RunConfig{}.clustering_party; }
ClusteringConfig default_pole_clustering() { return RunConfig{}.clustering_pole; }

ClusteringConfig clustering_from_merged(const ClusteringConfig& defaults, const json& user) {
  json merged = defaults.to_json();
  merged.erase("seed");
  check_keys(user,
             {"use_pairwise_projection", "reduce_dims", "reduce_method", "standardize",
              "algorithm", "n_clusters"},
             "clustering");
  merged.update(user);
  merged["seed"] = 0;
  return ClusteringConfig::from_json(merged);
}

// --- stage plumbing ---------------------------------------------------------

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
  if (!std::filesystem::exists(path))
    throw ValidationError("missing artifact " + path.string() + "; run the '" + producer +
                          "' stage first");
}

Corpus load_clean_corpus(const RunConfig& cfg) {
  require_artifact(cfg.corpus_dir() / "tweets.jsonl", "ingest");
  return load_corpus(cfg.corpus_dir() / "tweets.jsonl", cfg.corpus_dir() / "likes.jsonl",
                     cfg.corpus_dir() / "catalog.json");
}

struct StageTimer {
  explicit StageTimer(std::string name)
      : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    std::cerr << "[" << name_ << "] done in "
              << std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() / 1000.0
              << " s\n";
  }
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

// 90/10 per-label split of the pivot tweets; identical across stages so the
// enriched retraining validates against the same held-out tweets.
std::pair<LabeledTweetSet, LabeledTweetSet> pivot_train_val(const LabeledTweetSet& all,
                                                            std::uint64_t run_seed) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < all.items.size(); ++i) by_label[all.items[i].label].push_back(i);
  Rng rng(derive_seed(run_seed, "train.split"));
  LabeledTweetSet train, val;
  for (auto& [label, idx] : by_label) {
    rng.shuffle(idx);
    const std::size_t n_val = idx.size() >= 2 ? std::max<std::size_t>(1, idx.size() / 10) : 0;
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_val ? val : train).items.push_back(all.items[idx[i]]);
  }
  return {std::move(train), std::move(val)};
}

ClusteringConfig filled(ClusteringConfig base, int n_labels, std::uint64_t seed) {
  if (base.algorithm != "mean_shift" && !base.n_clusters) base.n_clusters = n_labels;
  base.seed = seed;
  base.validate();
  return base;
}

std::map<std::string, std::string> pole_truth_from(const std::map<std::string, std::string>& party,
                                                   const PartyCatalog& catalog) {
  std::map<std::string, std::string> out;
  for (const auto& [user, label] : party) out[user] = catalog.pole_of(label);
  return out;
}

std::vector<std::int64_t> count_grid(const std::map<std::string, std::int64_t>& counts,
                                     int n_points) {
  std::int64_t lo = 0, hi = 0;
  bool first = true;
  for (const auto& [user, n] : counts) {
    lo = first ? n : std::min(lo, n);
    hi = first ? n : std::max(hi, n);
    first = false;
  }
  std::vector<std::int64_t> grid;
  for (int i = 0; i < n_points; ++i) {
    const double f = n_points == 1 ? 0.0 : static_cast<double>(i) / (n_points - 1);
    const std::int64_t v = lo + static_cast<std::int64_t>(f * static_cast<double>(hi - lo));
    if (grid.empty() || v > grid.back()) grid.push_back(v);
  }
  return grid;
}

}  // namespace

const std::vector<std::string>& method_roster() {
  static const std::vector<std::string> roster = {
      "random",
      "majority",
      "word2vec+clustering",
      "retweets+clustering",
      "parties+clustering",
      "parties-enriched+distance",
      "parties-enriched+clustering",
      "supervised-enriched+clustering",
      "parties-enriched+svc",
      "supervised-enriched+svc",
      "word2vec+svc",
  };
  return roster;
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["data"] = {{"tweets", tweets_path.string()},
               {"likes", likes_path.string()},
               {"catalog", catalog_path.string()},
               {"stopwords", stopwords_path.string()}};
  j["synth"] = synth ? gen_to_json(*synth) : json();
  j["k"] = k;
  j["enrichment"] = {{"threshold", enrichment_threshold}, {"percentile", enrichment_percentile}};
  j["louvain_resolution"] = louvain_resolution;
  j["split"] = {{"train", split_fractions[0]},
                {"validation", split_fractions[1]},
                {"test", split_fractions[2]}};
  // Sub-config seeds always derive from the run seed, so they never appear
  // in the canonical form.
  json classifier_json = classifier.to_json();
  classifier_json.erase("seed");
  j["classifier"] = std::move(classifier_json);
  j["projection"] = projection_to_json(projection);
  json party_json = clustering_party.to_json();
  json pole_json = clustering_pole.to_json();
  party_json.erase("seed");
  pole_json.erase("seed");
  j["clustering"] = {{"party", std::move(party_json)}, {"pole", std::move(pole_json)}};
  j["word2vec"] = word2vec_to_json(word2vec);
  j["svc"] = svc_to_json(svc);
  j["methods"] = methods;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j,
             {"seed", "output_dir", "data", "synth", "k", "enrichment", "louvain_resolution",
              "split", "classifier", "projection", "clustering", "word2vec", "svc", "methods"},
             "config");
  if (!j.contains("seed") || !j.at("seed").is_number())
    throw ConfigError("config requires a numeric 'seed'");

  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.value("output_dir", std::string("out"));

  const json data = j.value("data", json::object());
  check_keys(data, {"tweets", "likes", "catalog", "stopwords"}, "data");
  c.tweets_path = data.value("tweets", std::string());
  c.likes_path = data.value("likes", std::string());
  c.catalog_path = data.value("catalog", std::string());
  c.stopwords_path = data.value("stopwords", std::string());

  if (j.contains("synth") && !j.at("synth").is_null()) c.synth = gen_from_json(j.at("synth"));

  c.k = j.value("k", c.k);
  const json enr = j.value("enrichment", json::object());
  check_keys(enr, {"threshold", "percentile"}, "enrichment");
  c.enrichment_threshold = enr.value("threshold", c.enrichment_threshold);
  c.enrichment_percentile = enr.value("percentile", c.enrichment_percentile);
  c.louvain_resolution = j.value("louvain_resolution", c.louvain_resolution);

  const json split = j.value("split", json::object());
  check_keys(split, {"train", "validation", "test"}, "split");
  c.split_fractions[0] = split.value("train", c.split_fractions[0]);
  c.split_fractions[1] = split.value("validation", c.split_fractions[1]);
  c.split_fractions[2] = split.value("test", c.split_fractions[2]);

  json classifier_json = c.classifier.to_json();
  classifier_json.update(j.value("classifier", json::object()));
  classifier_json["seed"] = 0;
  c.classifier = ClassifierConfig::from_json(classifier_json);

  c.projection = projection_from_json(j.value("projection", json::object()));

  const json clustering = j.value("clustering", json::object());
  check_keys(clustering, {"party", "pole"}, "clustering");
  c.clustering_party =
      clustering_from_merged(default_party_clustering(), clustering.value("party", json::object()));
  c.clustering_pole =
      clustering_from_merged(default_pole_clustering(), clustering.value("pole", json::object()));

  c.word2vec = word2vec_from_json(j.value("word2vec", json::object()));
  c.svc = svc_from_json(j.value("svc", json::object()));
  c.methods = j.value("methods", method_roster());
  return c;
}

void RunConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(enrichment_threshold > 0.0) || enrichment_threshold > 1.0)
    throw ConfigError("enrichment.threshold must lie in (0, 1]");
  if (!(enrichment_percentile > 0.0) || !(enrichment_percentile < 100.0))
    throw ConfigError("enrichment.percentile must lie in (0, 100)");
  if (!(louvain_resolution > 0.0)) throw ConfigError("louvain_resolution must be positive");

  double total = 0.0;
  for (double f : split_fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  projection.validate();
  word2vec.validate();
  svc.validate();
  for (const ClusteringConfig* cc : {&clustering_party, &clustering_pole}) {
    if (cc->algorithm != "kmeans" && cc->algorithm != "gaussian_mixture" &&
        cc->algorithm != "mean_shift")
      throw ConfigError("unknown clustering algorithm: " + cc->algorithm);
    if (cc->algorithm == "mean_shift" && cc->n_clusters)
      throw ConfigError("mean_shift derives the cluster count; n_clusters must be absent");
  }

  for (const std::string& m : methods)
    if (std::find(method_roster().begin(), method_roster().end(), m) == method_roster().end())
      throw ConfigError("unknown method '" + m + "' in methods");

  if (synth) {
    synth->validate();
  } else {
    const std::array<std::pair<const std::filesystem::path*, const char*>, 3> required = {
        {{&tweets_path, "data.tweets"}, {&likes_path, "data.likes"},
         {&catalog_path, "data.catalog"}}};
    for (const auto& [path, name] : required) {
      if (path->empty()) throw ConfigError(std::string(name) + " is required without synth");
      if (!std::filesystem::exists(*path))
        throw ConfigError(std::string(name) + " does not exist: " + path->string());
    }
  }
  if (!stopwords_path.empty() && !std::filesystem::exists(stopwords_path))
    throw ConfigError("data.stopwords does not exist: " + stopwords_path.string());
}

std::uint64_t RunConfig::hash() const {
  // The output location does not change what a run computes, so reruns into
  // different directories still produce byte-identical artifacts.
  json j = to_json();
  j.erase("output_dir");
  return config_hash(j);
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  for (const std::string& assignment : overrides) apply_override(j, assignment);
  RunConfig cfg = from_json(j);
  if (const char* dir = std::getenv("IDEOLENS_OUTPUT_DIR"); dir != nullptr && *dir != '\0')
    cfg.output_dir = dir;
  cfg.validate();
  return cfg;
}

void apply_override(json& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("override has an empty path segment: " + assignment);
    if (dot == std::string::npos) {
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::exception&) {
        value = raw;  // unquoted strings stay strings
      }
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

namespace stages {

void synth(const RunConfig& cfg) {
  StageTimer timer("synth");
  if (!cfg.synth) throw ConfigError("the synth stage needs a 'synth' config section");
  const GenResult result = generate_corpus(*cfg.synth, derive_seed(cfg.seed, "synth"));
  std::filesystem::create_directories(cfg.data_dir());
  save_corpus(result.corpus, cfg.data_dir() / "tweets.jsonl", cfg.data_dir() / "likes.jsonl",
              cfg.data_dir() / "catalog.json");
  save_truth_csv(result.truth, result.corpus.catalog, cfg.data_dir() / "planted_truth.csv",
                 cfg.hash(), cfg.seed);
}

void ingest(const RunConfig& cfg) {
  StageTimer timer("ingest");
  std::filesystem::path tweets = cfg.tweets_path, likes = cfg.likes_path,
                        catalog = cfg.catalog_path;
  if (cfg.synth) {
    tweets = cfg.data_dir() / "tweets.jsonl";
    likes = cfg.data_dir() / "likes.jsonl";
    catalog = cfg.data_dir() / "catalog.json";
    require_artifact(tweets, "synth");
  }
  const Corpus corpus = load_corpus(tweets, likes, catalog);
  std::filesystem::create_directories(cfg.corpus_dir());
  save_corpus(corpus, cfg.corpus_dir() / "tweets.jsonl", cfg.corpus_dir() / "likes.jsonl",
              cfg.corpus_dir() / "catalog.json");

  json summary;
  summary["n_users"] = corpus.users.size();
  summary["n_pivots"] = corpus.pivots.size();
  summary["n_likes"] = corpus.likes.edges.size();
  summary["n_dropped_users"] = corpus.n_dropped_users;
  summary["n_skipped_tweets"] = corpus.n_skipped_tweets;
  write_json_artifact(cfg.output_dir / "corpus_summary.json", summary, cfg.hash(), cfg.seed);
}

void groundtruth(const RunConfig& cfg) {
  StageTimer timer("groundtruth");
  const Corpus corpus = load_clean_corpus(cfg);
  const SimilarityNetwork net = project_bipartite(corpus.likes);
  const Partition partition =
      louvain(net, cfg.louvain_resolution, derive_seed(cfg.seed, "groundtruth.louvain"));
  std::map<std::string, std::string> truth =
      label_communities(partition, corpus.likes, corpus.catalog);
  for (auto it = truth.begin(); it != truth.end();)
    it = corpus.users.count(it->first) ? std::next(it) : truth.erase(it);

  save_truth_csv(truth, corpus.catalog, cfg.output_dir / "truth.csv", cfg.hash(), cfg.seed);
  save_similarity_csv(net, cfg.output_dir / "network.csv", cfg.hash(), cfg.seed);

  std::vector<std::string> labeled_users;
  for (const auto& [user, label] : truth) labeled_users.push_back(user);
  const SplitAssignment split = stratified_split(labeled_users, truth, cfg.split_fractions,
                                                 derive_seed(cfg.seed, "split"));
  save_split(split, cfg.output_dir / "split.csv", cfg.hash(), cfg.seed);

  json summary;
  summary["n_communities"] = partition.n_communities;
  summary["modularity"] = partition.modularity;
  summary["n_labeled_users"] = truth.size();
  summary["coverage"] = corpus.users.empty()
                            ? 0.0
                            : static_cast<double>(truth.size()) /
                                  static_cast<double>(corpus.users.size());
  write_json_artifact(cfg.output_dir / "groundtruth_summary.json", summary, cfg.hash(), cfg.seed);
}

void train(const RunConfig& cfg) {
  StageTimer timer("train");
  const Corpus corpus = load_clean_corpus(cfg);
  const LabeledTweetSet pivot_set = build_pivot_training_set(corpus);
  const CharEncoder encoder =
      CharEncoder::fit(pivot_set, cfg.classifier.min_char_freq, cfg.classifier.max_len);
  const auto [train_set, val_set] = pivot_train_val(pivot_set, cfg.seed);

  ClassifierConfig ccfg = cfg.classifier;
  ccfg.seed = derive_seed(cfg.seed, "classifier");
  const TweetClassifier model =
      TweetClassifier::train(train_set, val_set, encoder, ccfg, corpus.catalog);
  model.save(cfg.classifier_dir());
  model.save_training_log(cfg.output_dir / "training_log.csv", cfg.hash(), cfg.seed);
}

void enrich(const RunConfig& cfg) {
  StageTimer timer("enrich");
  const Corpus corpus = load_clean_corpus(cfg);
  require_artifact(cfg.classifier_dir() / "config.json", "train");
  const TweetClassifier base = TweetClassifier::load(cfg.classifier_dir());

  const UserVectors users = vectorize_users(base, corpus.users, cfg.k);
  const Matd pivots = pivot_vectors(base, corpus.pivots, corpus.catalog, cfg.k);
  save_user_vectors_csv(users, cfg.output_dir / "base_user_vectors.csv", cfg.hash(), cfg.seed);
  save_pivot_vectors_csv(pivots, corpus.catalog, cfg.output_dir / "base_pivot_vectors.csv",
                         cfg.hash(), cfg.seed);

  const EnrichmentSelection selection =
      select_enrichment_users(users, pivots, corpus.catalog, cfg.enrichment_percentile);
  const LabeledTweetSet enrichment =
      select_enrichment_tweets(base, selection, corpus.users, cfg.enrichment_threshold);

  const LabeledTweetSet pivot_set = build_pivot_training_set(corpus);
  const auto [train_set, val_set] = pivot_train_val(pivot_set, cfg.seed);
  ClassifierConfig ccfg = cfg.classifier;
  ccfg.seed = derive_seed(cfg.seed, "classifier.enriched");
  const TweetClassifier enriched = TweetClassifier::retrain_enriched(
      train_set, enrichment, val_set, base.encoder(), ccfg, corpus.catalog);
  enriched.save(cfg.enriched_classifier_dir());
  enriched.save_training_log(cfg.output_dir / "training_log_enriched.csv", cfg.hash(), cfg.seed);

  json summary;
  summary["n_selected_users"] = selection.user_party.size();
  summary["per_party_counts"] = selection.per_party_counts;
  summary["cutoffs"] = selection.cutoffs;
  summary["n_enrichment_tweets"] = enrichment.items.size();
  json label_counts = json::object();
  for (const auto& [label, n] : enrichment.label_counts()) label_counts[label] = n;
  summary["tweet_label_counts"] = std::move(label_counts);
  write_json_artifact(cfg.output_dir / "enrichment.json", summary, cfg.hash(), cfg.seed);
}

void vectorize(const RunConfig& cfg) {
  StageTimer timer("vectorize");
  const Corpus corpus = load_clean_corpus(cfg);
  const bool enriched = std::filesystem::exists(cfg.enriched_classifier_dir() / "config.json");
  if (!enriched) require_artifact(cfg.classifier_dir() / "config.json", "train");
  const TweetClassifier model =
      TweetClassifier::load(enriched ? cfg.enriched_classifier_dir() : cfg.classifier_dir());

  const UserVectors users = vectorize_users(model, corpus.users, cfg.k);
  const Matd pivots = pivot_vectors(model, corpus.pivots, corpus.catalog, cfg.k);
  save_user_vectors_csv(users, cfg.output_dir / "user_vectors.csv", cfg.hash(), cfg.seed);
  save_pivot_vectors_csv(pivots, corpus.catalog, cfg.output_dir / "pivot_vectors.csv", cfg.hash(),
                         cfg.seed);
}

void project(const RunConfig& cfg) {
  StageTimer timer("project");
  require_artifact(cfg.output_dir / "user_vectors.csv", "vectorize");
  const PartyCatalog catalog = load_catalog(cfg.corpus_dir() / "catalog.json");
  const UserVectors users = load_user_vectors_csv(cfg.output_dir / "user_vectors.csv");
  const Matd pivots = load_pivot_vectors_csv(cfg.output_dir / "pivot_vectors.csv", catalog);

  Matd stacked(users.vectors.rows() + pivots.rows(), users.vectors.cols());
  stacked.topRows(users.vectors.rows()) = users.vectors;
  stacked.bottomRows(pivots.rows()) = pivots;

  ProjectionConfig pcfg = cfg.projection;
  pcfg.seed = derive_seed(cfg.seed, "project");
  const Projector projector = Projector::fit(stacked, pcfg);
  const Matd& y = projector.embedding();

  std::map<std::string, std::string> truth;
  if (std::filesystem::exists(cfg.output_dir / "truth.csv"))
    truth = load_truth_csv(cfg.output_dir / "truth.csv");

  std::string out = csv_meta_line(cfg.hash(), cfg.seed);
  out += "id,kind,party";
  for (Eigen::Index c = 0; c < y.cols(); ++c) out += ",c" + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < users.user_ids.size(); ++i) {
    const auto it = truth.find(users.user_ids[i]);
    out += csv_escape(users.user_ids[i]) + ",user," +
           csv_escape(it == truth.end() ? "" : it->second);
    for (Eigen::Index c = 0; c < y.cols(); ++c)
      out += ',' + format_double(y(static_cast<Eigen::Index>(i), c));
    out += '\n';
  }
  for (int p = 0; p < catalog.size(); ++p) {
    const Eigen::Index row = users.vectors.rows() + p;
    out += csv_escape(catalog.party(p).pivot_user_id) + ",pivot," +
           csv_escape(catalog.party(p).label);
    for (Eigen::Index c = 0; c < y.cols(); ++c) out += ',' + format_double(y(row, c));
    out += '\n';
  }
  atomic_write(cfg.output_dir / "ideology_2d.csv", out);
}

void predict(const RunConfig& cfg) {
  StageTimer timer("predict");
  require_artifact(cfg.output_dir / "user_vectors.csv", "vectorize");
  const PartyCatalog catalog = load_catalog(cfg.corpus_dir() / "catalog.json");
  const UserVectors users = load_user_vectors_csv(cfg.output_dir / "user_vectors.csv");
  const Matd pivots = load_pivot_vectors_csv(cfg.output_dir / "pivot_vectors.csv", catalog);

  const ClusteringConfig party_cfg =
      filled(cfg.clustering_party, catalog.size(), derive_seed(cfg.seed, "predict.party"));
  const auto party_preds = predict_clustering(users, pivots, catalog, party_cfg, Task::party);
  save_predictions_csv(party_preds, cfg.output_dir / "predictions_party.csv", cfg.hash(),
                       cfg.seed);

  const ClusteringConfig pole_cfg =
      filled(cfg.clustering_pole, static_cast<int>(catalog.poles().size()),
             derive_seed(cfg.seed, "predict.pole"));
  const auto pole_preds = predict_clustering(users, pivots, catalog, pole_cfg, Task::pole);
  save_predictions_csv(pole_preds, cfg.output_dir / "predictions_pole.csv", cfg.hash(), cfg.seed);
}

namespace {

std::vector<Prediction> restrict_to(const std::vector<Prediction>& preds,
                                    const std::map<std::string, std::string>& truth) {
  std::vector<Prediction> out;
  for (const Prediction& p : preds)
    if (truth.count(p.user_id)) out.push_back(p);
  return out;
}

}  // namespace

void evaluate(const RunConfig& cfg) {
  StageTimer timer("evaluate");
  require_artifact(cfg.output_dir / "predictions_party.csv", "predict");
  require_artifact(cfg.output_dir / "truth.csv", "groundtruth");
  const Corpus corpus = load_clean_corpus(cfg);
  const PartyCatalog& catalog = corpus.catalog;
  const auto truth_party = load_truth_csv(cfg.output_dir / "truth.csv");
  const auto truth_pole = pole_truth_from(truth_party, catalog);

  const auto party_preds =
      restrict_to(load_predictions_csv(cfg.output_dir / "predictions_party.csv"), truth_party);
  const auto pole_preds =
      restrict_to(load_predictions_csv(cfg.output_dir / "predictions_pole.csv"), truth_pole);

  const EvalReport party_report = ideolens::evaluate(party_preds, truth_party, Task::party, catalog);
  const EvalReport pole_report = ideolens::evaluate(pole_preds, truth_pole, Task::pole, catalog);
  save_report_json(party_report, cfg.output_dir / "report_party.json", cfg.hash(), cfg.seed);
  save_report_json(pole_report, cfg.output_dir / "report_pole.json", cfg.hash(), cfg.seed);
  save_confusion_csv(party_report, cfg.output_dir / "confusion_party.csv", cfg.hash(), cfg.seed);
  save_confusion_csv(pole_report, cfg.output_dir / "confusion_pole.csv", cfg.hash(), cfg.seed);

  const auto distance_curve = distance_sensitivity(party_preds, truth_party, truth_pole, catalog, 20);
  save_curve_csv(distance_curve, "max_normalized_distance", cfg.output_dir / "curve_distance.csv",
                 cfg.hash(), cfg.seed);

  std::map<std::string, std::int64_t> tweet_counts, retweet_counts;
  for (const auto& [user, timeline] : corpus.users) {
    tweet_counts[user] = static_cast<std::int64_t>(timeline.tweets.size());
    std::int64_t rts = 0;
    for (const Tweet& t : timeline.tweets) rts += t.is_retweet;
    retweet_counts[user] = rts;
  }
  const auto tweets_curve = count_sensitivity(party_preds, truth_party, truth_pole, catalog,
                                              tweet_counts, count_grid(tweet_counts, 20));
  save_curve_csv(tweets_curve, "min_tweets", cfg.output_dir / "curve_tweets.jsonl", cfg.hash(),
                 cfg.seed);
  const auto retweets_curve = count_sensitivity(party_preds, truth_party, truth_pole, catalog,
                                                retweet_counts, count_grid(retweet_counts, 20));
  save_curve_csv(retweets_curve, "min_retweets", cfg.output_dir / "curve_retweets.jsonl", cfg.hash(),
                 cfg.seed);
}

namespace {

std::string method_file_tag(std::string method) {
  std::replace(method.begin(), method.end(), '+', '-');
  return method;
}

// Shared state for the comparison roster, computed lazily so a subset run
// only pays for what it uses.
struct CompareContext {
  const RunConfig& cfg;
  Corpus corpus;
  std::map<std::string, std::string> truth_party, truth_pole;
  SplitAssignment split;
  std::set<std::string> test_users;
  std::vector<std::string> fit_users;  // train + validation, ascending
  std::vector<std::string> all_users;

  UserVectors enriched_users;
  Matd enriched_pivots;

  std::optional<UserVectors> base_users;
  Matd base_pivots;

  std::optional<EmbeddingModel> w2v;
  UserVectors w2v_users;
  Matd w2v_pivots;

  std::optional<UserVectors> sup_users;
  Matd sup_pivots;

  explicit CompareContext(const RunConfig& config) : cfg(config) {
    require_artifact(cfg.output_dir / "user_vectors.csv", "vectorize");
    require_artifact(cfg.output_dir / "truth.csv", "groundtruth");
    require_artifact(cfg.output_dir / "split.csv", "groundtruth");
    corpus = load_clean_corpus(cfg);
    truth_party = load_truth_csv(cfg.output_dir / "truth.csv");
    truth_pole = pole_truth_from(truth_party, corpus.catalog);
    split = load_split(cfg.output_dir / "split.csv");
    test_users.insert(split.test.begin(), split.test.end());
    for (const auto& part : {split.train, split.validation})
      fit_users.insert(fit_users.end(), part.begin(), part.end());
    std::sort(fit_users.begin(), fit_users.end());
    for (const auto& [user, timeline] : corpus.users) all_users.push_back(user);

    enriched_users = load_user_vectors_csv(cfg.output_dir / "user_vectors.csv");
    enriched_pivots =
        load_pivot_vectors_csv(cfg.output_dir / "pivot_vectors.csv", corpus.catalog);
  }

  const UserVectors& base() {
    if (!base_users) {
      require_artifact(cfg.output_dir / "base_user_vectors.csv", "enrich");
      base_users = load_user_vectors_csv(cfg.output_dir / "base_user_vectors.csv");
      base_pivots =
          load_pivot_vectors_csv(cfg.output_dir / "base_pivot_vectors.csv", corpus.catalog);
    }
    return *base_users;
  }

  const EmbeddingModel& embeddings() {
    if (!w2v) {
      std::unordered_set<std::string> stopwords;
      if (!cfg.stopwords_path.empty()) stopwords = load_stopwords(cfg.stopwords_path);
      Word2VecConfig wcfg = cfg.word2vec;
      wcfg.seed = derive_seed(cfg.seed, "word2vec");
      w2v = train_embeddings(corpus, wcfg, stopwords);
      w2v_users = word2vec_user_vectors(*w2v, corpus);
      w2v_pivots = word2vec_pivot_vectors(*w2v, corpus);
    }
    return *w2v;
  }

  // Ideologies from the semi-supervised feedback variant.
  const UserVectors& supervised() {
    if (!sup_users) {
      require_artifact(cfg.classifier_dir() / "config.json", "train");
      const TweetClassifier base_model = TweetClassifier::load(cfg.classifier_dir());

      LabeledTweetSet labeled;
      for (const std::string& user : fit_users) {
        const auto truth_it = truth_party.find(user);
        const auto timeline_it = corpus.users.find(user);
        if (truth_it == truth_party.end() || timeline_it == corpus.users.end()) continue;
        for (const Tweet& tweet : timeline_it->second.tweets)
          labeled.items.push_back({tweet, truth_it->second, Provenance::pivot});
      }
      const LabeledTweetSet feedback = supervised_feedback_enrichment(
          base_model, labeled, corpus.catalog, cfg.enrichment_threshold);

      const LabeledTweetSet pivot_set = build_pivot_training_set(corpus);
      const auto [train_set, val_set] = pivot_train_val(pivot_set, cfg.seed);
      ClassifierConfig ccfg = cfg.classifier;
      ccfg.seed = derive_seed(cfg.seed, "classifier.supervised");
      const TweetClassifier sup = TweetClassifier::retrain_enriched(
          train_set, feedback, val_set, base_model.encoder(), ccfg, corpus.catalog);
      sup_users = vectorize_users(sup, corpus.users, cfg.k);
      sup_pivots = pivot_vectors(sup, corpus.pivots, corpus.catalog, cfg.k);
    }
    return *sup_users;
  }

  int n_labels(Task task) const {
    return task == Task::party ? corpus.catalog.size()
                               : static_cast<int>(corpus.catalog.poles().size());
  }

  std::vector<std::string> fit_labels(Task task, std::vector<std::string>* users_out) const {
    const auto& truth = task == Task::party ? truth_party : truth_pole;
    std::vector<std::string> labels;
    for (const std::string& user : fit_users) {
      const auto it = truth.find(user);
      if (it == truth.end()) continue;
      labels.push_back(it->second);
      if (users_out) users_out->push_back(user);
    }
    return labels;
  }

  // SVC over user vectors: fit on train+validation truth, predict everyone.
  std::vector<Prediction> svc_predictions(const UserVectors& vectors, Task task,
                                          const std::string& salt) const {
    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < vectors.user_ids.size(); ++i)
      row_of[vectors.user_ids[i]] = static_cast<Eigen::Index>(i);

    std::vector<std::string> users;
    const std::vector<std::string> labels = fit_labels(task, &users);
    Matd x(static_cast<Eigen::Index>(users.size()), vectors.vectors.cols());
    for (std::size_t i = 0; i < users.size(); ++i)
      x.row(static_cast<Eigen::Index>(i)) = vectors.vectors.row(row_of.at(users[i]));

    SvcConfig scfg = cfg.svc;
    scfg.seed = derive_seed(cfg.seed, "compare.svc." + salt + "." + task_name(task));
    const LinearSvc model = LinearSvc::train(x, labels, scfg);
    return predict_svc(model, vectors, corpus.catalog, task);
  }
};

}  // namespace

void compare(const RunConfig& cfg) {
  StageTimer timer("compare");
  CompareContext ctx(cfg);
  const PartyCatalog& catalog = ctx.corpus.catalog;
  std::filesystem::create_directories(cfg.compare_dir());

  const auto preset = [&](bool pairwise, std::optional<int> reduce, const std::string& algo,
                          bool standardize, Task task, const std::string& salt) {
    ClusteringConfig c;
    c.use_pairwise_projection = pairwise;
    c.reduce_dims = reduce;
    c.standardize = standardize;
    c.algorithm = algo;
    return filled(c, ctx.n_labels(task),
                  derive_seed(cfg.seed, "compare." + salt + "." + task_name(task)));
  };

  const auto run_method = [&](const std::string& method, Task task) -> std::vector<Prediction> {
    if (method == "random")
      return predict_random(ctx.all_users, catalog, task,
                            derive_seed(cfg.seed, std::string("compare.random.") + task_name(task)));
    if (method == "majority") return predict_majority(ctx.fit_labels(task, nullptr), ctx.all_users, catalog, task);
    if (method == "word2vec+clustering") {
      ctx.embeddings();
      ClusteringConfig c;
      c.use_pairwise_projection = false;
      c.standardize = false;
      c.algorithm = "kmeans";
      return predict_clustering(
          ctx.w2v_users, ctx.w2v_pivots, catalog,
          filled(c, ctx.n_labels(task),
                 derive_seed(cfg.seed, std::string("compare.word2vec.") + task_name(task))),
          task);
    }
    if (method == "retweets+clustering") {
      ClusteringConfig c;
      c.use_pairwise_projection = true;
      c.standardize = false;
      c.algorithm = "mean_shift";
      c.seed = derive_seed(cfg.seed, std::string("compare.retweets.") + task_name(task));
      c.validate();
      return predict_retweets(ctx.corpus, c, task);
    }
    if (method == "parties+clustering") {
      const UserVectors& base = ctx.base();
      return predict_clustering(base, ctx.base_pivots, catalog,
                                preset(true, 64, "gaussian_mixture", false, task, "parties"),
                                task);
    }
    if (method == "parties-enriched+distance")
      return predict_nearest_pivot(ctx.enriched_users, ctx.enriched_pivots, catalog, task);
    if (method == "parties-enriched+clustering") {
      // Identical settings (and derived seeds) to the predict stage, so this
      // row reproduces the main pipeline's predictions byte for byte.
      const ClusteringConfig c =
          task == Task::party
              ? filled(cfg.clustering_party, catalog.size(), derive_seed(cfg.seed, "predict.party"))
              : filled(cfg.clustering_pole, ctx.n_labels(task),
                       derive_seed(cfg.seed, "predict.pole"));
      return predict_clustering(ctx.enriched_users, ctx.enriched_pivots, catalog, c, task);
    }
    if (method == "supervised-enriched+clustering") {
      const UserVectors& sup = ctx.supervised();
      const ClusteringConfig c = task == Task::party
                                     ? preset(true, 64, "kmeans", false, task, "supervised")
                                     : preset(true, 2, "gaussian_mixture", false, task, "supervised");
      return predict_clustering(sup, ctx.sup_pivots, catalog, c, task);
    }
    if (method == "parties-enriched+svc")
      return ctx.svc_predictions(ctx.enriched_users, task, "parties-enriched");
    if (method == "supervised-enriched+svc") {
      const UserVectors& sup = ctx.supervised();
      return ctx.svc_predictions(sup, task, "supervised-enriched");
    }
    if (method == "word2vec+svc") {
      ctx.embeddings();
      return ctx.svc_predictions(ctx.w2v_users, task, "word2vec");
    }
    throw ConfigError("unknown method: " + method);
  };

  struct Row {
    std::string method;
    EvalReport report;
  };
  std::map<Task, std::vector<Row>> rows;

  for (const std::string& method : cfg.methods) {
    for (const Task task : {Task::party, Task::pole}) {
      const std::vector<Prediction> preds = run_method(method, task);
      const auto& truth = task == Task::party ? ctx.truth_party : ctx.truth_pole;

      std::vector<Prediction> test_preds;
      for (const Prediction& p : preds)
        if (ctx.test_users.count(p.user_id) && truth.count(p.user_id)) test_preds.push_back(p);
      const EvalReport report = ideolens::evaluate(test_preds, truth, task, catalog);

      const std::string tag = method_file_tag(method) + "_" + task_name(task);
      save_predictions_csv(preds, cfg.compare_dir() / ("predictions_" + tag + ".csv"), cfg.hash(),
                           cfg.seed);
      save_report_json(report, cfg.compare_dir() / ("report_" + tag + ".json"), cfg.hash(),
                       cfg.seed);
      rows[task].push_back({method, report});
    }
  }

  for (const Task task : {Task::party, Task::pole}) {
    auto& task_rows = rows[task];
    std::sort(task_rows.begin(), task_rows.end(), [](const Row& a, const Row& b) {
      if (a.report.micro_f1 != b.report.micro_f1) return a.report.micro_f1 > b.report.micro_f1;
      return a.method < b.method;
    });
    std::string out = csv_meta_line(cfg.hash(), cfg.seed);
    out += "method,macro_precision,macro_recall,macro_f1,micro_precision,micro_recall,micro_f1,"
           "n_users,n_abstained\n";
    for (const Row& row : task_rows) {
      out += csv_escape(row.method);
      out += ',' + format_double(row.report.macro_precision);
      out += ',' + format_double(row.report.macro_recall);
      out += ',' + format_double(row.report.macro_f1);
      out += ',' + format_double(row.report.micro_precision);
      out += ',' + format_double(row.report.micro_recall);
      out += ',' + format_double(row.report.micro_f1);
      out += ',' + std::to_string(row.report.n_users);
      out += ',' + std::to_string(row.report.n_abstained);
      out += '\n';
    }
    atomic_write(cfg.output_dir /
                     (task == Task::party ? "comparison_party.csv" : "comparison_pole.csv"),
                 out);
  }
}

void pipeline(const RunConfig& cfg) {
  const auto run_stage = [](const char* name, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("stage '") + name + "': " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(std::string("stage '") + name + "': " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("stage '") + name + "': " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("stage '") + name + "': " + e.what());
    }
  };

  if (cfg.synth) run_stage("synth", [&] { synth(cfg); });
  run_stage("ingest", [&] { ingest(cfg); });
  run_stage("groundtruth", [&] { groundtruth(cfg); });
  run_stage("train", [&] { train(cfg); });
  run_stage("enrich", [&] { enrich(cfg); });
  run_stage("vectorize", [&] { vectorize(cfg); });
  run_stage("project", [&] { project(cfg); });
  run_stage("predict", [&] { predict(cfg); });
  run_stage("evaluate", [&] { evaluate(cfg); });
  run_stage("compare", [&] { compare(cfg); });
}

}  // namespace stages

}  // namespace ideolens
