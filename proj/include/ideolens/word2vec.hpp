#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ideolens/corpus.hpp"
#include "ideolens/types.hpp"
#include "ideolens/vectors.hpp"

namespace ideolens {

// Lowercases ASCII letters and splits on every byte that is not a letter,
// digit, '#', '@' or '_'. Multi-byte UTF-8 sequences pass through intact.
std::vector<std::string> tokenize_tweet(const std::string& text);

// One token per line; blank lines and trailing carriage returns ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

struct Word2VecConfig {
  int dim = 100;
  int window = 5;
  int epochs = 5;
  int negative_samples = 5;
  int max_vocab = 50'000;
  int min_count = 1;
  double learning_rate = 0.025;
  std::uint64_t seed = 0;

  void validate() const;
};

// Skip-gram-with-negative-sampling word embeddings plus the two-level mean
// pooling that turns timelines into user vectors: a tweet embeds as the
// mean of its in-vocabulary token vectors (zero when none survive), a user
// as the mean of their tweet vectors.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  int dim() const { return static_cast<int>(vectors_.cols()); }
  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  int index_of(const std::string& token) const;  // -1 when out of vocabulary
  // Frequency-ranked, most frequent first; ties alphabetical.
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const Matd& vectors() const { return vectors_; }

  Vecd embed_tweet(const std::string& text) const;
  Vecd embed_user(const Timeline& timeline) const;

  void save(const std::filesystem::path& dir) const;
  static EmbeddingModel load(const std::filesystem::path& dir);

  friend EmbeddingModel train_embeddings(const Corpus&, const Word2VecConfig&,
                                         const std::unordered_set<std::string>&);

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  Matd vectors_;  // vocab x dim input vectors
};

// Trains embeddings over every timeline in the corpus (ordinary users and
// pivots alike); stopwords never enter the vocabulary. Throws
// ValidationError when no usable token survives filtering.
EmbeddingModel train_embeddings(const Corpus& corpus, const Word2VecConfig& cfg,
                                const std::unordered_set<std::string>& stopwords = {});

// Mean-pooled user vectors for every ordinary user, ids ascending.
UserVectors word2vec_user_vectors(const EmbeddingModel& model, const Corpus& corpus);

// Row i is the embedded timeline of party i's pivot (catalog order).
Matd word2vec_pivot_vectors(const EmbeddingModel& model, const Corpus& corpus);

}  // namespace ideolens
