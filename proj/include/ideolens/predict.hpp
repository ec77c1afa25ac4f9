#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ideolens/clustering.hpp"
#include "ideolens/corpus.hpp"
#include "ideolens/prediction.hpp"
#include "ideolens/projection.hpp"
#include "ideolens/vectors.hpp"

namespace ideolens {

// Cosine distance from every user to its nearest pivot, plus the min-max
// normalization over the whole user population (all zero when the
// population spread vanishes).
struct PivotDistances {
  std::vector<double> raw;
  std::vector<double> normalized;
  std::vector<int> nearest;  // pivot index, catalog order breaks ties
};

PivotDistances pivot_distances(const Matd& user_vectors, const Matd& pivots);

// Baseline: each user takes the party of the closest pivot in the raw
// vector space (cosine distance; exact ties go to the lexicographically
// smaller party label).
std::vector<Prediction> predict_nearest_pivot(const UserVectors& users, const Matd& pivots,
                                              const PartyCatalog& catalog, Task task);

// The feature preparation preceding clustering: optional pairwise-distance
// features, optional reduction, optional standardization. Keeping the
// fitted state lets pivots travel through the identical transforms.
class FeaturePipeline {
 public:
  static FeaturePipeline fit(const Matd& user_vectors, const ClusteringConfig& cfg);

  const Matd& features() const { return features_; }
  Matd transform(const Matd& vectors) const;

 private:
  FeaturePipeline() = default;

  ClusteringConfig cfg_;
  Matd base_;  // reference rows for pairwise features
  std::optional<Projector> reducer_;
  std::optional<Standardizer> standardizer_;
  Matd features_;
};

// Per-user labels from cluster membership. A cluster owning exactly one
// pivot labels all its members; with several pivots each member follows its
// nearest contained pivot; a pivotless cluster follows the pivot nearest
// its center. Labels depend only on pivot positions, never on cluster ids.
// Task::pole returns pole names via the catalog mapping.
std::vector<std::string> label_by_clusters(const ClusterModel& model, const Matd& user_features,
                                           const Matd& pivot_features,
                                           const PartyCatalog& catalog, Task task);

// The full unsupervised path: feature pipeline -> clustering -> pivot
// labeling, with confidence = 1 - normalized pivot distance.
std::vector<Prediction> predict_clustering(const UserVectors& users, const Matd& pivots,
                                           const PartyCatalog& catalog,
                                           const ClusteringConfig& cfg, Task task);

}  // namespace ideolens
