#pragma once

#include <cstdint>
#include <string>

#include "ideolens/types.hpp"

namespace ideolens {

// Settings for embedding high-dimensional user vectors into a smaller space.
// "umap" is the neighborhood-graph method; "pca" is the linear fallback.
struct ProjectionConfig {
  std::string method = "umap";
  int n_components = 2;
  int n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  int n_epochs = 200;
  double learning_rate = 1.0;
  int negative_samples = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fitted projection. `embedding()` holds the rows of the training data in
// the low-dimensional space; `transform()` places new points in the same
// fitted space (linearly for pca, by weighted neighbor interpolation for
// umap) without changing the fit.
class Projector {
 public:
  static Projector fit(const Matd& x, const ProjectionConfig& cfg);

  const Matd& embedding() const { return embedding_; }
  Matd transform(const Matd& x) const;
  const ProjectionConfig& config() const { return cfg_; }

  // Curve parameters of the umap low-dimensional kernel 1/(1 + a d^(2b)),
  // fitted from min_dist and spread. Exposed for verification.
  static std::pair<double, double> fit_kernel(double min_dist, double spread);

 private:
  Projector() = default;

  ProjectionConfig cfg_;
  Matd embedding_;

  // umap state for transform()
  Matd train_x_;

  // pca state
  RowVecd mean_;
  Matd components_;  // input dim x n_components
};

}  // namespace ideolens
