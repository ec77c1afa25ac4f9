#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ideolens/classifier.hpp"
#include "ideolens/clustering.hpp"
#include "ideolens/corpus.hpp"
#include "ideolens/prediction.hpp"
#include "ideolens/scorer.hpp"
#include "ideolens/svm.hpp"
#include "ideolens/vectors.hpp"

namespace ideolens {

// Uniform independent draws over the task's label set.
std::vector<Prediction> predict_random(const std::vector<std::string>& user_ids,
                                       const PartyCatalog& catalog, Task task,
                                       std::uint64_t seed);

// Constant prediction: the modal training label, alphabetical tie-break.
// `train_labels` live in the task's label space (parties or poles).
std::vector<Prediction> predict_majority(const std::vector<std::string>& train_labels,
                                         const std::vector<std::string>& user_ids,
                                         const PartyCatalog& catalog, Task task);

// Per-user counts of retweeted source accounts.
struct RetweetVector {
  std::string user_id;
  std::map<std::string, std::int64_t> counts;  // retweeted account -> count
};

std::vector<RetweetVector> retweet_vectors(const Corpus& corpus);

// Dense retweet representation: one column per retweeted account (plus every
// pivot account), rows L2-normalized; pivots are anchored at their own
// account's indicator column. Users without retweets keep an all-zero row.
struct RetweetFeatures {
  std::vector<std::string> user_ids;   // ascending
  std::vector<std::string> accounts;   // sorted column key
  Matd users;
  Matd pivots;                         // catalog order
};

RetweetFeatures retweet_features(const Corpus& corpus);

// Retweet-based competitor: clustering over retweet features for users who
// retweeted at least once; users without retweets fall back to the nearest
// pivot of the zero vector (every pivot ties, so the alphabetically first
// party) with zero confidence.
std::vector<Prediction> predict_retweets(const Corpus& corpus, const ClusteringConfig& cfg,
                                         Task task);

// Semi-supervised enrichment: tweets the scorer gets wrong while confident
// (best score >= threshold but argmax != ground-truth label) are returned
// labeled with the ground truth. `labeled` carries ground-truth labels.
LabeledTweetSet supervised_feedback_enrichment(const TweetScorer& scorer,
                                               const LabeledTweetSet& labeled,
                                               const PartyCatalog& catalog, double threshold);

// Supervised predictor over user vectors. Confidence comes from the margin
// between the best and runner-up decision values, min-max normalized over
// the predicted population.
std::vector<Prediction> predict_svc(const LinearSvc& model, const UserVectors& users,
                                    const PartyCatalog& catalog, Task task);

}  // namespace ideolens
