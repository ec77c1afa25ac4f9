#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ideolens/corpus.hpp"

namespace ideolens {

// Knobs for the synthetic corpus. Text is built from disjoint token pools:
// one pool per party, one per pole, one shared political pool and one
// non-political noise pool, so vocabulary separation is controllable.
struct GenConfig {
  int n_parties = 8;
  int n_poles = 3;
  int n_users = 1000;
  int tweets_per_user_min = 25;
  int tweets_per_user_max = 200;
  int pivot_tweets_per_party = 400;

  // Probability that a token of a political tweet comes from the author's own
  // side (party or pole pool) rather than the shared political pool. 1.0
  // means fully separated vocabularies, 0.0 means all parties sound the same.
  double vocab_separation = 0.8;
  // Of the own-side tokens, this share comes from the pole pool; the rest
  // from the party-exclusive pool.
  double pole_vocab_fraction = 0.35;
  double political_fraction = 0.5;   // non-retweet tweets that are political
  // Pivot tweets that are political; the rest is ordinary chatter from the
  // noise pool. Keeping this below 1 exposes the distant supervision to
  // neutral text, as real party accounts do.
  double pivot_political_fraction = 0.9;
  double negative_fraction = 0.1;    // political tweets attacking the other side
  double retweet_rate = 0.2;
  double retweet_pivot_rate = 0.8;   // retweets that point at the author's own pivot
  double other_user_retweet_rate = 0.1;  // non-own-pivot retweets that point at a plain user
  int likes_per_user = 10;
  double like_rate = 0.9;            // likes that target the author's own party

  int party_vocab_size = 40;
  int pole_vocab_size = 30;
  int shared_vocab_size = 60;
  int noise_vocab_size = 200;
  int negation_vocab_size = 8;
  int tweet_tokens_min = 8;
  int tweet_tokens_max = 14;

  std::string time_from = "2019-06-01T00:00:00Z";
  std::string time_to = "2019-10-01T00:00:00Z";

  void validate() const;
};

struct GenResult {
  Corpus corpus;
  std::map<std::string, std::string> truth;  // user_id -> planted party label
  // Token pools, exposed so tests can check what a tweet was built from.
  std::map<std::string, std::set<std::string>> party_vocab;  // by party label
  std::map<std::string, std::set<std::string>> pole_vocab;   // by pole label
  std::set<std::string> shared_vocab;
  std::set<std::string> noise_vocab;
  std::set<std::string> negation_vocab;
};

// Fully seeded; the same config and seed reproduce the corpus byte for byte.
GenResult generate_corpus(const GenConfig& cfg, std::uint64_t seed);

}  // namespace ideolens
