#include "ideolens/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "ideolens/errors.hpp"
#include "ideolens/projection.hpp"
#include "ideolens/rng.hpp"

namespace ideolens {

using nlohmann::json;

Matd pairwise_projection(const Matd& vectors) {
  if (vectors.rows() < 2) throw ValidationError("pairwise projection needs at least two vectors");
  const Eigen::Index n = vectors.rows();
  Matd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.col(i) = (vectors.rowwise() - vectors.row(i)).rowwise().norm();
    d(i, i) = 0.0;
  }
  return d;
}

Matd reduce(const Matd& features, int dims, const std::string& method, std::uint64_t seed) {
  if (dims >= features.cols())
    throw ValidationError("reduce target (" + std::to_string(dims) +
                          ") must be smaller than the input width (" +
                          std::to_string(features.cols()) + ")");
  ProjectionConfig cfg;
  cfg.method = method;
  cfg.n_components = dims;
  cfg.seed = seed;
  return Projector::fit(features, cfg).embedding();
}

Standardizer Standardizer::fit(const Matd& x) {
  if (x.rows() < 2) throw ValidationError("standardize needs at least two rows");
  Standardizer s;
  s.mean_ = x.colwise().mean();
  const Matd centered = x.rowwise() - s.mean_;
  s.scale_ =
      (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
  for (Eigen::Index c = 0; c < s.scale_.size(); ++c)
    if (s.scale_(c) < 1e-12) s.scale_(c) = 0.0;
  return s;
}

Matd Standardizer::apply(const Matd& x) const {
  if (x.cols() != mean_.size())
    throw ValidationError("standardize input width does not match the fit");
  Matd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (scale_(c) == 0.0)
      out.col(c).setZero();
    else
      out.col(c) = (x.col(c).array() - mean_(c)) / scale_(c);
  }
  return out;
}

void ClusteringConfig::validate() const {
  if (algorithm != "kmeans" && algorithm != "gaussian_mixture" && algorithm != "mean_shift")
    throw ConfigError("unknown clustering algorithm \"" + algorithm + "\"");
  if (algorithm == "mean_shift") {
    if (n_clusters.has_value())
      throw ConfigError("mean_shift derives the cluster count; n_clusters must be absent");
  } else if (!n_clusters.has_value() || *n_clusters < 1) {
    throw ConfigError(algorithm + " needs a positive n_clusters");
  }
  if (reduce_dims.has_value() && *reduce_dims < 1)
    throw ConfigError("reduce_dims must be positive when set");
  if (reduce_method != "umap" && reduce_method != "pca")
    throw ConfigError("reduce_method must be \"umap\" or \"pca\"");
}

json ClusteringConfig::to_json() const {
  json j;
  j["use_pairwise_projection"] = use_pairwise_projection;
  j["reduce_dims"] = reduce_dims.has_value() ? json(*reduce_dims) : json(nullptr);
  j["reduce_method"] = reduce_method;
  j["standardize"] = standardize;
  j["algorithm"] = algorithm;
  j["n_clusters"] = n_clusters.has_value() ? json(*n_clusters) : json(nullptr);
  j["seed"] = seed;
  return j;
}

ClusteringConfig ClusteringConfig::from_json(const json& j) {
  ClusteringConfig c;
  c.use_pairwise_projection = j.value("use_pairwise_projection", c.use_pairwise_projection);
  if (j.contains("reduce_dims") && !j.at("reduce_dims").is_null())
    c.reduce_dims = j.at("reduce_dims").get<int>();
  c.reduce_method = j.value("reduce_method", c.reduce_method);
  c.standardize = j.value("standardize", c.standardize);
  c.algorithm = j.value("algorithm", c.algorithm);
  if (j.contains("n_clusters") && !j.at("n_clusters").is_null())
    c.n_clusters = j.at("n_clusters").get<int>();
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

// Nearest row of `centers` for every row of `x`; ties keep the lower index.
std::vector<int> nearest_center(const Matd& x, const Matd& centers, Vecd* dist2 = nullptr) {
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  if (dist2) dist2->resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = (centers.row(0) - x.row(i)).squaredNorm();
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
      const double d = (centers.row(c) - x.row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    if (dist2) (*dist2)(i) = best_d;
  }
  return labels;
}

struct KMeansFit {
  Matd centroids;
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansFit kmeans_once(const Matd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matd centroids(k, x.cols());

  // D^2-weighted seeding.
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Vecd d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  KMeansFit fit;
  fit.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    Vecd dist2;
    std::vector<int> labels = nearest_center(x, centroids, &dist2);

    // Re-seat centroids that lost every point on the farthest outlier.
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) counts[static_cast<std::size_t>(l)]++;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = 0;
      dist2.maxCoeff(&far);
      centroids.row(c) = x.row(far);
      labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist2(far) = -1.0;
    }

    Matd next = Matd::Zero(k, x.cols());
    std::vector<double> members(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int c = 0; c < k; ++c) next.row(c) /= members[static_cast<std::size_t>(c)];

    const bool stable = labels == fit.labels;
    fit.labels = std::move(labels);
    centroids = std::move(next);
    if (stable) break;
  }

  Vecd dist2;
  fit.labels = nearest_center(x, centroids, &dist2);
  fit.centroids = std::move(centroids);
  fit.inertia = dist2.sum();
  return fit;
}

KMeansFit kmeans(const Matd& x, int k, std::uint64_t seed, int n_init = 10) {
  Rng rng(derive_seed(seed, "cluster.kmeans"));
  KMeansFit best;
  for (int trial = 0; trial < n_init; ++trial) {
    KMeansFit fit = kmeans_once(x, k, rng);
    if (fit.inertia < best.inertia) best = std::move(fit);
  }
  return best;
}

struct GmmFit {
  Matd means;
  std::vector<Matd> covs;
  Vecd weights;
  std::vector<int> labels;
};

// Cholesky of a covariance, inflating the diagonal until positive-definite.
Eigen::LLT<Matd> robust_llt(Matd& cov) {
  const Eigen::Index d = cov.rows();
  double reg = 1e-6 * std::max(cov.trace() / static_cast<double>(d), 1e-12);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Eigen::LLT<Matd> llt(cov);
    if (llt.info() == Eigen::Success) return llt;
    cov += reg * Matd::Identity(d, d);
    reg *= 10.0;
  }
  throw std::runtime_error("covariance matrix could not be factorized");
}

double log_gaussian(const RowVecd& x, const RowVecd& mu, const Eigen::LLT<Matd>& llt) {
  const Eigen::Index d = x.size();
  const Vecd diff = (x - mu).transpose();
  const Vecd z = llt.matrixL().solve(diff);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * (static_cast<double>(d) * std::log(2.0 * 3.14159265358979323846) + z.squaredNorm()) -
         logdet;
}

GmmFit gaussian_mixture(const Matd& x, int k, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const KMeansFit start = kmeans(x, k, seed);

  GmmFit fit;
  fit.means = start.centroids;
  fit.weights.resize(k);
  fit.covs.assign(static_cast<std::size_t>(k), Matd::Zero(d, d));
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = start.labels[static_cast<std::size_t>(i)];
    const RowVecd diff = x.row(i) - fit.means.row(c);
    fit.covs[static_cast<std::size_t>(c)] += diff.transpose() * diff;
    counts[static_cast<std::size_t>(c)] += 1.0;
  }
  for (int c = 0; c < k; ++c) {
    fit.covs[static_cast<std::size_t>(c)] /= std::max(counts[static_cast<std::size_t>(c)], 1.0);
    fit.covs[static_cast<std::size_t>(c)] += 1e-6 * Matd::Identity(d, d);
    fit.weights(c) = counts[static_cast<std::size_t>(c)] / static_cast<double>(n);
  }

  Matd log_resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    // E-step in the log domain.
    std::vector<Eigen::LLT<Matd>> llts;
    llts.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) llts.push_back(robust_llt(fit.covs[static_cast<std::size_t>(c)]));
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c)
        log_resp(i, c) = std::log(std::max(fit.weights(c), 1e-300)) +
                         log_gaussian(x.row(i), fit.means.row(c), llts[static_cast<std::size_t>(c)]);
      const double mx = log_resp.row(i).maxCoeff();
      const double lse = mx + std::log((log_resp.row(i).array() - mx).exp().sum());
      log_resp.row(i).array() -= lse;
      ll += lse;
    }

    // M-step.
    const Matd resp = log_resp.array().exp();
    const RowVecd mass = resp.colwise().sum();
    for (int c = 0; c < k; ++c) {
      const double m = std::max(mass(c), 1e-12);
      fit.weights(c) = m / static_cast<double>(n);
      fit.means.row(c) = (resp.col(c).transpose() * x) / m;
      Matd cov = Matd::Zero(d, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const RowVecd diff = x.row(i) - fit.means.row(c);
        cov += resp(i, c) * (diff.transpose() * diff);
      }
      fit.covs[static_cast<std::size_t>(c)] = cov / m + 1e-6 * Matd::Identity(d, d);
    }

    if (std::abs(ll - prev_ll) < 1e-6 * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
  }

  fit.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg;
    log_resp.row(i).maxCoeff(&arg);
    fit.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return fit;
}

struct MeanShiftFit {
  Matd modes;
  std::vector<int> labels;
};

MeanShiftFit mean_shift(const Matd& x, double bandwidth) {
  const Eigen::Index n = x.rows();
  struct Mode {
    RowVecd center;
    Eigen::Index support;
    Eigen::Index seed;
  };
  std::vector<Mode> modes;
  modes.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVecd y = x.row(i);
    Eigen::Index support = 1;
    for (int iter = 0; iter < 300; ++iter) {
      RowVecd acc = RowVecd::Zero(x.cols());
      support = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if ((x.row(j) - y).norm() <= bandwidth) {
          acc += x.row(j);
          ++support;
        }
      }
      if (support == 0) break;
      const RowVecd next = acc / static_cast<double>(support);
      const double moved = (next - y).norm();
      y = next;
      if (moved < 1e-3 * std::max(bandwidth, 1e-12)) break;
    }
    modes.push_back({y, support, i});
  }

  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.support != b.support) return a.support > b.support;
    return a.seed < b.seed;
  });
  std::vector<RowVecd> kept;
  for (const Mode& m : modes) {
    bool fresh = true;
    for (const RowVecd& c : kept)
      if ((c - m.center).norm() <= bandwidth) {
        fresh = false;
        break;
      }
    if (fresh) kept.push_back(m.center);
  }

  MeanShiftFit fit;
  fit.modes.resize(static_cast<Eigen::Index>(kept.size()), x.cols());
  for (std::size_t c = 0; c < kept.size(); ++c)
    fit.modes.row(static_cast<Eigen::Index>(c)) = kept[c];
  fit.labels = nearest_center(x, fit.modes);
  return fit;
}

}  // namespace

double estimate_bandwidth(const Matd& x, double quantile, std::uint64_t seed) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("quantile must lie in (0, 1]");
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  if (n > 500) {
    Rng rng(derive_seed(seed, "cluster.bandwidth"));
    rng.shuffle(rows);
    rows.resize(500);
    std::sort(rows.begin(), rows.end());
  }
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index k =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(static_cast<double>(m) * quantile));

  double total = 0.0;
  std::vector<double> dist(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      dist[static_cast<std::size_t>(j)] = (x.row(rows[static_cast<std::size_t>(i)]) -
                                           x.row(rows[static_cast<std::size_t>(j)]))
                                              .norm();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    total += dist[static_cast<std::size_t>(k - 1)];
  }
  return total / static_cast<double>(m);
}

std::vector<int> ClusterModel::assign(const Matd& x) const {
  if (x.cols() != centers_.cols())
    throw ValidationError("assign input width does not match the fitted features");
  if (algorithm_ != "gaussian_mixture") return nearest_center(x, centers_);

  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  std::vector<Eigen::LLT<Matd>> llts;
  std::vector<Matd> covs = covariances_;
  llts.reserve(covs.size());
  for (Matd& cov : covs) llts.push_back(robust_llt(cov));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers_.rows(); ++c) {
      const double ll = std::log(std::max(mixture_weights_(c), 1e-300)) +
                        log_gaussian(x.row(i), centers_.row(c), llts[static_cast<std::size_t>(c)]);
      if (ll > best_ll) {
        best_ll = ll;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

ClusterModel cluster(const Matd& features, const ClusteringConfig& cfg) {
  cfg.validate();
  if (!features.allFinite()) throw ValidationError("clustering features must be finite");
  if (features.rows() < 1) throw ValidationError("clustering needs at least one row");
  if (cfg.n_clusters.has_value() && *cfg.n_clusters > features.rows())
    throw ValidationError("n_clusters exceeds the number of rows");

  ClusterModel model;
  model.algorithm_ = cfg.algorithm;
  if (cfg.algorithm == "kmeans") {
    KMeansFit fit = kmeans(features, *cfg.n_clusters, cfg.seed);
    model.centers_ = std::move(fit.centroids);
    model.labels_ = std::move(fit.labels);
  } else if (cfg.algorithm == "gaussian_mixture") {
    GmmFit fit = gaussian_mixture(features, *cfg.n_clusters, cfg.seed);
    model.centers_ = std::move(fit.means);
    model.labels_ = std::move(fit.labels);
    model.covariances_ = std::move(fit.covs);
    model.mixture_weights_ = std::move(fit.weights);
  } else {
    const double bandwidth = estimate_bandwidth(features, 0.3, cfg.seed);
    MeanShiftFit fit = mean_shift(features, bandwidth);
    model.centers_ = std::move(fit.modes);
    model.labels_ = std::move(fit.labels);
  }
  return model;
}

}  // namespace ideolens
