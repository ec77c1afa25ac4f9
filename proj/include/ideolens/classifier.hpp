#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ideolens/corpus.hpp"
#include "ideolens/net.hpp"
#include "ideolens/scorer.hpp"
#include "ideolens/types.hpp"

namespace ideolens {

enum class Provenance { pivot, enrichment, supervised_feedback };

// Distant-supervision training material: tweets labeled with a party.
struct LabeledTweetSet {
  struct Item {
    Tweet tweet;
    std::string label;
    Provenance provenance = Provenance::pivot;
  };
  std::vector<Item> items;

  std::map<std::string, std::int64_t> label_counts() const;
};

// Most recent `per_party_cap` tweets of every pivot account, labeled with the
// pivot's party. A party without pivot tweets is an error.
LabeledTweetSet build_pivot_training_set(const Corpus& corpus, int per_party_cap = 3000);

// Fixed-length character indexing: 0 = padding, 1 = unknown, characters kept
// when they appear at least `min_char_freq` times in the fitting corpus.
class CharEncoder {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  CharEncoder() = default;
  static CharEncoder fit(const LabeledTweetSet& tweets, int min_char_freq = 1, int max_len = 280);

  std::vector<int> encode(const std::string& text) const;
  Eigen::MatrixXi encode_batch(const std::vector<const Tweet*>& tweets) const;

  int vocab_size() const { return static_cast<int>(chars_.size()) + 2; }
  int max_len() const { return max_len_; }
  const std::vector<char32_t>& chars() const { return chars_; }

  nlohmann::json to_json() const;
  static CharEncoder from_json(const nlohmann::json& j);

 private:
  std::vector<char32_t> chars_;            // index order, starting at index 2
  std::map<char32_t, int> index_;
  int max_len_ = 280;
};

struct ClassifierConfig {
  int embedding_dim = 32;
  int conv_filters = 128;
  int conv_width = 5;
  int pool_width = 2;
  int transformer_layers = 2;
  int attention_heads = 4;
  int model_dim = 128;
  int ffn_dim = 256;
  int dense_dim = 64;
  double dropout = 0.1;
  int max_len = 280;
  int min_char_freq = 1;
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int early_stop_patience = 3;
  std::uint64_t seed = 0;

  net::NetConfig net_config(int vocab_size, int n_classes) const;
  nlohmann::json to_json() const;
  static ClassifierConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

// The tweet-level party classifier. Class order always follows the catalog.
class TweetClassifier : public TweetScorer {
 public:
  // Trains from scratch; early-stops on validation accuracy and keeps the
  // best-epoch weights. `val` may be empty, in which case all epochs run.
  static TweetClassifier train(const LabeledTweetSet& train_set, const LabeledTweetSet& val_set,
                               const CharEncoder& encoder, const ClassifierConfig& cfg,
                               const PartyCatalog& catalog);

  // Fresh training on base + enrichment (the encoder is reused unchanged).
  static TweetClassifier retrain_enriched(const LabeledTweetSet& base,
                                          const LabeledTweetSet& enrichment,
                                          const LabeledTweetSet& val_set,
                                          const CharEncoder& encoder, const ClassifierConfig& cfg,
                                          const PartyCatalog& catalog);

  Matd score(const std::vector<const Tweet*>& tweets) const override;
  int n_classes() const override { return static_cast<int>(class_labels_.size()); }
  Vecd classify(const Tweet& tweet) const;

  const std::vector<EpochStats>& history() const { return history_; }
  const std::vector<std::string>& class_labels() const { return class_labels_; }
  const CharEncoder& encoder() const { return encoder_; }

  void save(const std::filesystem::path& dir) const;
  static TweetClassifier load(const std::filesystem::path& dir);

  void save_training_log(const std::filesystem::path& path, std::uint64_t config_hash,
                         std::uint64_t seed) const;

 private:
  TweetClassifier(CharEncoder encoder, const net::NetConfig& netcfg, std::uint64_t seed)
      : encoder_(std::move(encoder)), net_(netcfg, seed) {}

  CharEncoder encoder_;
  net::TextNet<float> net_;
  std::vector<std::string> class_labels_;
  ClassifierConfig cfg_;
  std::vector<EpochStats> history_;
};

}  // namespace ideolens
