#include "ideolens/predict.hpp"

#include <algorithm>
#include <limits>

#include "ideolens/errors.hpp"

namespace ideolens {

PivotDistances pivot_distances(const Matd& user_vectors, const Matd& pivots) {
  if (pivots.rows() == 0) throw ValidationError("no pivot vectors");
  const Eigen::Index n = user_vectors.rows();
  PivotDistances out;
  out.raw.resize(static_cast<std::size_t>(n));
  out.normalized.resize(static_cast<std::size_t>(n));
  out.nearest.resize(static_cast<std::size_t>(n));
  for (Eigen::Index u = 0; u < n; ++u) {
    double best = std::numeric_limits<double>::infinity();
    int best_p = 0;
    for (Eigen::Index p = 0; p < pivots.rows(); ++p) {
      const double d =
          1.0 - cosine_similarity(user_vectors.row(u).transpose(), pivots.row(p).transpose());
      if (d < best) {
        best = d;
        best_p = static_cast<int>(p);
      }
    }
    out.raw[static_cast<std::size_t>(u)] = best;
    out.nearest[static_cast<std::size_t>(u)] = best_p;
  }
  const auto [lo_it, hi_it] = std::minmax_element(out.raw.begin(), out.raw.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  for (std::size_t u = 0; u < out.raw.size(); ++u)
    out.normalized[u] = span > 0.0 ? (out.raw[u] - lo) / span : 0.0;
  return out;
}

namespace {

Prediction make_prediction(const std::string& user_id, const std::string& party_label,
                           const PartyCatalog& catalog, Task task, double normalized_distance) {
  Prediction pred;
  pred.user_id = user_id;
  if (task == Task::party) {
    pred.party = party_label;
    pred.pole = catalog.pole_of(party_label);
  } else {
    pred.pole = catalog.pole_of(party_label);
  }
  pred.normalized_distance = normalized_distance;
  pred.confidence = 1.0 - normalized_distance;
  return pred;
}

}  // namespace

std::vector<Prediction> predict_nearest_pivot(const UserVectors& users, const Matd& pivots,
                                              const PartyCatalog& catalog, Task task) {
  if (pivots.rows() != catalog.size())
    throw ValidationError("pivot vector rows do not match the catalog");
  if (catalog.size() == 0) throw ValidationError("empty catalog");
  const PivotDistances dist = pivot_distances(users.vectors, pivots);

  std::vector<Prediction> preds;
  preds.reserve(users.user_ids.size());
  for (std::size_t u = 0; u < users.user_ids.size(); ++u) {
    // Re-scan with the lexicographic tie rule on exactly equal distances.
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int p = 0; p < catalog.size(); ++p) {
      const double d = 1.0 - cosine_similarity(users.vectors.row(static_cast<Eigen::Index>(u)).transpose(),
                                               pivots.row(p).transpose());
      if (d < best_d ||
          (d == best_d && best >= 0 && catalog.party(p).label < catalog.party(best).label)) {
        best_d = d;
        best = p;
      }
    }
    preds.push_back(make_prediction(users.user_ids[u], catalog.party(best).label, catalog, task,
                                    dist.normalized[u]));
  }
  return preds;
}

FeaturePipeline FeaturePipeline::fit(const Matd& user_vectors, const ClusteringConfig& cfg) {
  cfg.validate();
  FeaturePipeline pipe;
  pipe.cfg_ = cfg;
  Matd features = user_vectors;
  if (cfg.use_pairwise_projection) {
    pipe.base_ = user_vectors;
    features = pairwise_projection(user_vectors);
  }
  if (cfg.reduce_dims.has_value()) {
    if (*cfg.reduce_dims >= features.cols())
      throw ValidationError("reduce_dims must be smaller than the feature width");
    ProjectionConfig pcfg;
    pcfg.method = cfg.reduce_method;
    pcfg.n_components = *cfg.reduce_dims;
    pcfg.seed = derive_seed(cfg.seed, "pipeline.reduce");
    pipe.reducer_ = Projector::fit(features, pcfg);
    features = pipe.reducer_->embedding();
  }
  if (cfg.standardize) {
    pipe.standardizer_ = Standardizer::fit(features);
    features = pipe.standardizer_->apply(features);
  }
  pipe.features_ = std::move(features);
  return pipe;
}

Matd FeaturePipeline::transform(const Matd& vectors) const {
  Matd features = vectors;
  if (cfg_.use_pairwise_projection) {
    Matd dist(vectors.rows(), base_.rows());
    for (Eigen::Index i = 0; i < vectors.rows(); ++i)
      dist.row(i) = (base_.rowwise() - vectors.row(i)).rowwise().norm().transpose();
    features = std::move(dist);
  }
  if (reducer_.has_value()) features = reducer_->transform(features);
  if (standardizer_.has_value()) features = standardizer_->apply(features);
  return features;
}

std::vector<std::string> label_by_clusters(const ClusterModel& model, const Matd& user_features,
                                           const Matd& pivot_features,
                                           const PartyCatalog& catalog, Task task) {
  if (pivot_features.rows() == 0)
    throw ValidationError("cluster labeling needs at least one pivot");
  if (pivot_features.rows() != catalog.size())
    throw ValidationError("pivot feature rows do not match the catalog");
  if (static_cast<Eigen::Index>(model.labels().size()) != user_features.rows())
    throw ValidationError("cluster assignment does not match the user features");

  const int n_clusters = model.n_clusters();
  const std::vector<int> pivot_cluster = model.assign(pivot_features);
  std::vector<std::vector<int>> pivots_in(static_cast<std::size_t>(n_clusters));
  for (std::size_t p = 0; p < pivot_cluster.size(); ++p)
    pivots_in[static_cast<std::size_t>(pivot_cluster[p])].push_back(static_cast<int>(p));

  // Pivotless clusters adopt the pivot nearest their center.
  std::vector<int> fallback(static_cast<std::size_t>(n_clusters), -1);
  for (int k = 0; k < n_clusters; ++k) {
    if (!pivots_in[static_cast<std::size_t>(k)].empty()) continue;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index p = 0; p < pivot_features.rows(); ++p) {
      const double d = (pivot_features.row(p) - model.centers().row(k)).squaredNorm();
      if (d < best) {
        best = d;
        fallback[static_cast<std::size_t>(k)] = static_cast<int>(p);
      }
    }
  }

  std::vector<std::string> labels;
  labels.reserve(model.labels().size());
  for (std::size_t u = 0; u < model.labels().size(); ++u) {
    const int k = model.labels()[u];
    const auto& contained = pivots_in[static_cast<std::size_t>(k)];
    int pivot = -1;
    if (contained.size() == 1) {
      pivot = contained.front();
    } else if (contained.size() > 1) {
      double best = std::numeric_limits<double>::infinity();
      for (int p : contained) {
        const double d =
            (pivot_features.row(p) - user_features.row(static_cast<Eigen::Index>(u))).squaredNorm();
        if (d < best) {
          best = d;
          pivot = p;
        }
      }
    } else {
      pivot = fallback[static_cast<std::size_t>(k)];
    }
    const std::string& party = catalog.party(pivot).label;
    labels.push_back(task == Task::party ? party : catalog.pole_of(party));
  }
  return labels;
}

std::vector<Prediction> predict_clustering(const UserVectors& users, const Matd& pivots,
                                           const PartyCatalog& catalog,
                                           const ClusteringConfig& cfg, Task task) {
  if (static_cast<Eigen::Index>(users.user_ids.size()) != users.vectors.rows())
    throw ValidationError("user id list does not match the vector rows");
  const FeaturePipeline pipe = FeaturePipeline::fit(users.vectors, cfg);
  const ClusterModel model = cluster(pipe.features(), cfg);
  const Matd pivot_features = pipe.transform(pivots);

  // Labels are party names for the party task and pole names otherwise.
  std::vector<std::string> labels =
      label_by_clusters(model, pipe.features(), pivot_features, catalog, task);
  const PivotDistances dist = pivot_distances(users.vectors, pivots);

  std::vector<Prediction> preds;
  preds.reserve(users.user_ids.size());
  for (std::size_t u = 0; u < users.user_ids.size(); ++u) {
    Prediction pred;
    pred.user_id = users.user_ids[u];
    if (task == Task::party) {
      pred.party = labels[u];
      pred.pole = catalog.pole_of(labels[u]);
    } else {
      pred.pole = labels[u];
    }
    pred.normalized_distance = dist.normalized[u];
    pred.confidence = 1.0 - dist.normalized[u];
    preds.push_back(std::move(pred));
  }
  return preds;
}

}  // namespace ideolens
