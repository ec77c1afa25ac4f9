#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ideolens/types.hpp"

namespace ideolens {

// Feature-space preparation ------------------------------------------------

// n x n Euclidean distance matrix; row u holds the distances from user u to
// every user (zero diagonal).
Matd pairwise_projection(const Matd& vectors);

// Dimensionality reduction through the projection interface.
Matd reduce(const Matd& features, int dims, const std::string& method, std::uint64_t seed);

// Column-wise zero-mean unit-variance scaling (population variance).
// Constant columns map to all-zero.
class Standardizer {
 public:
  static Standardizer fit(const Matd& x);
  Matd apply(const Matd& x) const;

 private:
  RowVecd mean_;
  RowVecd scale_;  // 0 marks a constant column
};

// Clustering ----------------------------------------------------------------

struct ClusteringConfig {
  bool use_pairwise_projection = false;
  std::optional<int> reduce_dims;
  std::string reduce_method = "umap";
  bool standardize = true;
  std::string algorithm = "kmeans";  // kmeans | gaussian_mixture | mean_shift
  std::optional<int> n_clusters;     // required unless mean_shift
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ClusteringConfig from_json(const nlohmann::json& j);
};

// A fitted clustering: training assignment plus enough state to place new
// points (cluster centers; mixture parameters for gaussian_mixture).
class ClusterModel {
 public:
  const std::vector<int>& labels() const { return labels_; }
  int n_clusters() const { return static_cast<int>(centers_.rows()); }
  const Matd& centers() const { return centers_; }

  // Cluster ids for new points in the same feature space.
  std::vector<int> assign(const Matd& x) const;

 private:
  friend ClusterModel cluster(const Matd&, const ClusteringConfig&);

  std::string algorithm_;
  std::vector<int> labels_;
  Matd centers_;
  // gaussian_mixture state
  std::vector<Matd> covariances_;
  Vecd mixture_weights_;
};

// Runs the configured algorithm on prepared features (the feature pipeline
// itself lives with the caller so fitted reducers/scalers can also place
// pivots). kmeans and gaussian_mixture honor n_clusters; mean_shift derives
// the count from a bandwidth heuristic.
ClusterModel cluster(const Matd& features, const ClusteringConfig& cfg);

// Flat-kernel bandwidth heuristic: mean distance to the
// ceil(quantile * n)-th nearest neighbor, over a seeded subsample.
double estimate_bandwidth(const Matd& x, double quantile, std::uint64_t seed);

}  // namespace ideolens
