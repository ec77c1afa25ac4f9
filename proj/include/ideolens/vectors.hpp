#pragma once

#include <map>
#include <string>
#include <vector>

#include "ideolens/classifier.hpp"
#include "ideolens/corpus.hpp"
#include "ideolens/scorer.hpp"
#include "ideolens/types.hpp"

namespace ideolens {

// Party scores for every tweet of a timeline; rows follow timeline order,
// columns follow the catalog.
Matd score_timeline(const TweetScorer& scorer, const Timeline& timeline);

// Concatenation of the k best scores per party, party-major and sorted
// descending inside each block: component c*k + j is the (j+1)-th best
// score the user's tweets reached for party c.
Vecd user_vector_from_scores(const Matd& scores, int k);
Vecd user_vector(const TweetScorer& scorer, const Timeline& timeline, int k = 5);

struct UserVectors {
  std::vector<std::string> user_ids;  // ascending
  Matd vectors;                       // one row per user, aligned with user_ids
};

UserVectors vectorize_users(const TweetScorer& scorer,
                            const std::map<std::string, Timeline>& users, int k = 5);

// Row i is the vector of party i's pivot account (catalog order).
Matd pivot_vectors(const TweetScorer& scorer, const std::map<std::string, Timeline>& pivots,
                   const PartyCatalog& catalog, int k = 5);

// 0 when either vector has zero norm.
double cosine_similarity(const Vecd& a, const Vecd& b);

// Linear-interpolation percentile of the values; `percentile` in (0, 100).
double percentile_value(std::vector<double> values, double percentile);

struct EnrichmentSelection {
  std::map<std::string, std::string> user_party;  // selected user -> assigned party
  std::map<std::string, double> user_similarity;  // similarity to the assigned pivot
  std::map<std::string, double> cutoffs;          // party -> strict similarity cutoff
  std::map<std::string, int> per_party_counts;    // assignments per party, zeros kept
};

// Users strictly above a party's similarity cutoff get that party's label;
// a user qualifying for several parties goes to the most similar one
// (catalog order breaks exact ties).
EnrichmentSelection select_enrichment_users(const UserVectors& users, const Matd& pivots,
                                            const PartyCatalog& catalog,
                                            double percentile = 99.0);

// Tweets of selected users whose best score reaches `threshold`, labeled
// with the author's assigned party — not with the party that scored best.
LabeledTweetSet select_enrichment_tweets(const TweetScorer& scorer,
                                         const EnrichmentSelection& selection,
                                         const std::map<std::string, Timeline>& users,
                                         double threshold = 0.5);

// CSV artifacts: header user_id,v0,v1,... with full-precision doubles.
void save_user_vectors_csv(const UserVectors& vectors, const std::filesystem::path& path,
                           std::uint64_t config_hash, std::uint64_t seed);
UserVectors load_user_vectors_csv(const std::filesystem::path& path);

// Same layout keyed by party label, rows in catalog order.
void save_pivot_vectors_csv(const Matd& pivots, const PartyCatalog& catalog,
                            const std::filesystem::path& path, std::uint64_t config_hash,
                            std::uint64_t seed);
Matd load_pivot_vectors_csv(const std::filesystem::path& path, const PartyCatalog& catalog);

}  // namespace ideolens
