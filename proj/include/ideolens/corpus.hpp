#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ideolens {

struct Tweet {
  std::string tweet_id;
  std::string user_id;
  std::string text;
  std::int64_t created_at = 0;  // epoch seconds, UTC
  bool is_retweet = false;
  std::string retweet_of_user;  // empty unless is_retweet
};

// Tweets ordered most recent first; ties broken by tweet_id.
struct Timeline {
  std::string user_id;
  std::vector<Tweet> tweets;
};

struct Party {
  std::string label;
  std::string pole;
  std::string pivot_user_id;
};

// Fixed catalog of parties; its order defines the score-vector component
// order everywhere downstream.
class PartyCatalog {
 public:
  PartyCatalog() = default;
  explicit PartyCatalog(std::vector<Party> parties);

  // The eight Italian parties of the 2019 landscape grouped into the three
  // usual poles; the stock catalog for real-data runs.
  static PartyCatalog italian_2019();

  int size() const { return static_cast<int>(parties_.size()); }
  const Party& party(int i) const { return parties_.at(static_cast<std::size_t>(i)); }
  const std::vector<Party>& parties() const { return parties_; }

  int index_of(const std::string& label) const;          // -1 if unknown
  bool has_label(const std::string& label) const { return index_of(label) >= 0; }
  const std::string& pole_of(const std::string& label) const;
  bool is_pivot(const std::string& user_id) const;
  // Party index for a pivot account, -1 if the user is not a pivot.
  int party_of_pivot(const std::string& user_id) const;

  std::vector<std::string> labels() const;
  // Distinct poles in first-appearance order.
  std::vector<std::string> poles() const;
  bool has_pole(const std::string& pole) const;

 private:
  std::vector<Party> parties_;
  std::map<std::string, int> by_label_;
  std::map<std::string, int> by_pivot_;
};

// (user, liked pivot tweet) pairs plus the party of each liked tweet.
struct LikeGraph {
  std::vector<std::pair<std::string, std::string>> edges;     // (user_id, pivot_tweet_id)
  std::map<std::string, std::string> tweet_party;             // pivot_tweet_id -> party label
};

struct Corpus {
  PartyCatalog catalog;
  std::map<std::string, Timeline> users;         // ordinary accounts, keyed by user_id
  std::map<std::string, Timeline> pivots;        // keyed by party label
  LikeGraph likes;
  std::int64_t n_dropped_users = 0;              // fewer than min_tweets after cleaning
  std::int64_t n_skipped_tweets = 0;             // empty-text records
};

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::string mode;  // "stratified-random" or "time-wise"

  bool contains(const std::string& split, const std::string& user) const;
  const std::vector<std::string>& split(const std::string& name) const;
};

inline constexpr int kMinTimelineTweets = 25;
inline constexpr int kMaxTimelineTweets = 200;

PartyCatalog load_catalog(const std::filesystem::path& path);
void save_catalog(const PartyCatalog& catalog, const std::filesystem::path& path);

// Reads tweets + likes, groups into timelines, keeps ordinary users with
// 25..200 usable tweets (longer timelines keep the 200 most recent), and
// validates that every like points at a known pivot tweet.
Corpus load_corpus(const std::filesystem::path& tweets_path,
                   const std::filesystem::path& likes_path,
                   const std::filesystem::path& catalog_path);

void save_corpus(const Corpus& corpus, const std::filesystem::path& tweets_path,
                 const std::filesystem::path& likes_path,
                 const std::filesystem::path& catalog_path);

// Label-preserving random split. fractions = {train, validation, test} and
// must sum to 1. Users missing from `labels` are an error.
SplitAssignment stratified_split(const std::vector<std::string>& users,
                                 const std::map<std::string, std::string>& labels,
                                 const std::array<double, 3>& fractions, std::uint64_t seed);

// Users whose every tweet is strictly after `threshold` form the test split;
// the rest are split train/validation by the given relative fractions.
SplitAssignment timewise_split(const Corpus& corpus, std::int64_t threshold,
                               const std::map<std::string, std::string>& labels,
                               double train_fraction, double validation_fraction,
                               std::uint64_t seed);

SplitAssignment load_split(const std::filesystem::path& path);
void save_split(const SplitAssignment& split, const std::filesystem::path& path,
                std::uint64_t config_hash, std::uint64_t seed);

std::map<std::string, std::string> load_truth_csv(const std::filesystem::path& path);
void save_truth_csv(const std::map<std::string, std::string>& party_of_user,
                    const PartyCatalog& catalog, const std::filesystem::path& path,
                    std::uint64_t config_hash, std::uint64_t seed);

}  // namespace ideolens
