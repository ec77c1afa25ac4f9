#include "ideolens/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ideolens/errors.hpp"
#include "ideolens/rng.hpp"

namespace ideolens {

void ProjectionConfig::validate() const {
  if (method != "umap" && method != "pca")
    throw ConfigError("projection method must be \"umap\" or \"pca\", got \"" + method + "\"");
  if (n_components < 1) throw ConfigError("n_components must be positive");
  if (n_neighbors < 2) throw ConfigError("n_neighbors must be at least 2");
  if (!(min_dist >= 0.0)) throw ConfigError("min_dist must be non-negative");
  if (!(spread > 0.0)) throw ConfigError("spread must be positive");
  if (n_epochs < 1) throw ConfigError("n_epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (negative_samples < 0) throw ConfigError("negative_samples must be non-negative");
}

namespace {

// Principal axes of the centered data, eigenvalue-descending, with a sign
// convention (largest-magnitude loading positive) so results do not depend
// on solver internals.
struct PcaFit {
  RowVecd mean;
  Matd components;
};

PcaFit fit_pca(const Matd& x, int n_components) {
  PcaFit fit;
  fit.mean = x.colwise().mean();
  const Matd centered = x.rowwise() - fit.mean;
  const Matd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca eigendecomposition failed");
  fit.components.resize(x.cols(), n_components);
  for (int c = 0; c < n_components; ++c) {
    Vecd axis = solver.eigenvectors().col(x.cols() - 1 - c);  // eigenvalues come ascending
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    fit.components.col(c) = axis;
  }
  return fit;
}

struct NeighborGraph {
  Eigen::MatrixXi idx;  // n x k neighbor indices, nearest first
  Matd dist;            // matching distances
};

NeighborGraph knn_brute_force(const Matd& x, int k) {
  const Eigen::Index n = x.rows();
  NeighborGraph g;
  g.idx.resize(n, k);
  g.dist.resize(n, k);
  std::vector<int> order(static_cast<std::size_t>(n));
  Vecd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d = (x.rowwise() - x.row(i)).rowwise().norm();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end(), [&](int a, int b) {
      if (d(a) != d(b)) return d(a) < d(b);
      return a < b;  // stable under duplicate points
    });
    int filled = 0;
    for (int j = 0; j <= k && filled < k; ++j) {
      if (order[static_cast<std::size_t>(j)] == static_cast<int>(i)) continue;
      g.idx(i, filled) = order[static_cast<std::size_t>(j)];
      g.dist(i, filled) = d(order[static_cast<std::size_t>(j)]);
      ++filled;
    }
  }
  return g;
}

// Per-point bandwidths calibrated so each point's membership mass is
// log2(k); the classic smooth-nearest-neighbor calibration.
struct SmoothKnn {
  Vecd rho;
  Vecd sigma;
};

SmoothKnn smooth_knn(const Matd& dist) {
  const Eigen::Index n = dist.rows();
  const int k = static_cast<int>(dist.cols());
  const double target = std::log2(static_cast<double>(k));
  SmoothKnn s;
  s.rho.resize(n);
  s.sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double rho = 0.0;
    for (int j = 0; j < k; ++j)
      if (dist(i, j) > 0.0) {
        rho = dist(i, j);
        break;
      }
    s.rho(i) = rho;

    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
      double mass = 0.0;
      for (int j = 0; j < k; ++j) {
        const double d = dist(i, j) - rho;
        mass += d <= 0.0 ? 1.0 : std::exp(-d / mid);
      }
      if (std::abs(mass - target) < 1e-5) break;
      if (mass > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    const double mean_d = dist.row(i).mean();
    s.sigma(i) = std::max(mid, 1e-3 * std::max(mean_d, 1e-12));
  }
  return s;
}

struct Edge {
  int i;
  int j;
  double w;
};

// Directed memberships combined with the probabilistic union
// w + w' - w*w', one undirected edge per pair.
std::vector<Edge> fuzzy_union(const NeighborGraph& g, const SmoothKnn& s) {
  std::map<std::pair<int, int>, double> directed;
  for (Eigen::Index i = 0; i < g.idx.rows(); ++i) {
    for (int j = 0; j < g.idx.cols(); ++j) {
      const int other = g.idx(i, j);
      const double d = g.dist(i, j) - s.rho(i);
      const double w = d <= 0.0 ? 1.0 : std::exp(-d / s.sigma(i));
      directed[{static_cast<int>(i), other}] = w;
    }
  }
  std::vector<Edge> edges;
  for (const auto& [key, w] : directed) {
    if (key.first > key.second) continue;  // handled from the smaller endpoint
    auto rev = directed.find({key.second, key.first});
    const double wr = rev == directed.end() ? 0.0 : rev->second;
    const double combined = w + wr - w * wr;
    if (combined > 0.0) edges.push_back({key.first, key.second, combined});
  }
  for (const auto& [key, w] : directed) {
    if (key.first <= key.second) continue;
    if (directed.count({key.second, key.first})) continue;  // already merged above
    edges.push_back({key.second, key.first, w});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return edges;
}

double clip4(double v) { return std::clamp(v, -4.0, 4.0); }

Matd optimize_layout(Matd y, const std::vector<Edge>& edges, const ProjectionConfig& cfg,
                     double a, double b) {
  const Eigen::Index n = y.rows();
  double w_max = 0.0;
  for (const Edge& e : edges) w_max = std::max(w_max, e.w);
  if (w_max <= 0.0) return y;

  std::vector<double> epochs_per_sample(edges.size());
  std::vector<double> next_sample(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    epochs_per_sample[e] = w_max / edges[e].w;  // strong edges sampled every epoch
    next_sample[e] = epochs_per_sample[e];
  }

  Rng rng(derive_seed(cfg.seed, "umap.negative"));
  RowVecd delta(y.cols());
  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    const double alpha =
        cfg.learning_rate * (1.0 - static_cast<double>(epoch) / static_cast<double>(cfg.n_epochs));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (next_sample[e] > static_cast<double>(epoch + 1)) continue;
      next_sample[e] += epochs_per_sample[e];
      const int i = edges[e].i;
      const int j = edges[e].j;

      delta = y.row(i) - y.row(j);
      const double d2 = delta.squaredNorm();
      if (d2 > 0.0) {
        const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
          const double g = clip4(coeff * delta(c)) * alpha;
          y(i, c) += g;
          y(j, c) -= g;
        }
      }

      for (int s = 0; s < cfg.negative_samples; ++s) {
        const int other = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        if (other == i) continue;
        delta = y.row(i) - y.row(other);
        const double dn2 = delta.squaredNorm();
        if (dn2 > 0.0) {
          const double coeff = 2.0 * b / ((0.001 + dn2) * (a * std::pow(dn2, b) + 1.0));
          for (Eigen::Index c = 0; c < y.cols(); ++c) y(i, c) += clip4(coeff * delta(c)) * alpha;
        } else {
          for (Eigen::Index c = 0; c < y.cols(); ++c) y(i, c) += 4.0 * alpha;
        }
      }
    }
  }
  return y;
}

}  // namespace

std::pair<double, double> Projector::fit_kernel(double min_dist, double spread) {
  // Least-squares fit of 1/(1 + a d^(2b)) to the target membership curve,
  // by Gauss-Newton with simple damping.
  const int samples = 300;
  std::vector<double> xs(samples), ys(samples);
  for (int s = 0; s < samples; ++s) {
    const double d = 3.0 * spread * static_cast<double>(s) / (samples - 1);
    xs[static_cast<std::size_t>(s)] = d;
    ys[static_cast<std::size_t>(s)] = d <= min_dist ? 1.0 : std::exp(-(d - min_dist) / spread);
  }
  double a = 1.0, b = 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    double jaa = 0, jab = 0, jbb = 0, ra = 0, rb = 0;
    for (int s = 0; s < samples; ++s) {
      const double d = xs[static_cast<std::size_t>(s)];
      const double p = d > 0.0 ? std::pow(d, 2.0 * b) : 0.0;
      const double f = 1.0 / (1.0 + a * p);
      const double res = f - ys[static_cast<std::size_t>(s)];
      const double dfda = -p * f * f;
      const double dfdb = d > 0.0 ? -2.0 * a * p * std::log(d) * f * f : 0.0;
      jaa += dfda * dfda;
      jab += dfda * dfdb;
      jbb += dfdb * dfdb;
      ra += dfda * res;
      rb += dfdb * res;
    }
    const double damp = 1e-9;
    const double det = (jaa + damp) * (jbb + damp) - jab * jab;
    if (det == 0.0) break;
    const double da = (-(ra) * (jbb + damp) + jab * rb) / det;
    const double db = (-(rb) * (jaa + damp) + jab * ra) / det;
    a += da;
    b += db;
    a = std::max(a, 1e-3);
    b = std::clamp(b, 1e-3, 5.0);
    if (std::abs(da) + std::abs(db) < 1e-12) break;
  }
  return {a, b};
}

Projector Projector::fit(const Matd& x, const ProjectionConfig& cfg) {
  cfg.validate();
  if (x.rows() < 2) throw ValidationError("projection needs at least two points");
  if (cfg.n_components > x.cols())
    throw ValidationError("cannot project " + std::to_string(x.cols()) + " features onto " +
                          std::to_string(cfg.n_components) + " components");

  Projector p;
  p.cfg_ = cfg;

  if (cfg.method == "pca") {
    const PcaFit fit = fit_pca(x, cfg.n_components);
    p.mean_ = fit.mean;
    p.components_ = fit.components;
    p.embedding_ = (x.rowwise() - p.mean_) * p.components_;
    return p;
  }

  if (x.rows() < cfg.n_neighbors + 1)
    throw ValidationError("umap needs more than n_neighbors=" + std::to_string(cfg.n_neighbors) +
                          " points (got " + std::to_string(x.rows()) +
                          "); use method \"pca\" for tiny datasets");

  const NeighborGraph g = knn_brute_force(x, cfg.n_neighbors);
  const SmoothKnn s = smooth_knn(g.dist);
  const std::vector<Edge> edges = fuzzy_union(g, s);
  const auto [a, b] = fit_kernel(cfg.min_dist, cfg.spread);

  // Linear warm start scaled to the usual layout extent.
  const PcaFit init = fit_pca(x, cfg.n_components);
  Matd y = (x.rowwise() - init.mean) * init.components;
  const double extent = y.cwiseAbs().maxCoeff();
  if (extent > 0.0) y *= 10.0 / extent;

  p.train_x_ = x;
  p.embedding_ = optimize_layout(std::move(y), edges, cfg, a, b);
  return p;
}

Matd Projector::transform(const Matd& x) const {
  if (cfg_.method == "pca") {
    if (x.cols() != components_.rows())
      throw ValidationError("transform input width does not match the fitted space");
    return (x.rowwise() - mean_) * components_;
  }

  if (x.cols() != train_x_.cols())
    throw ValidationError("transform input width does not match the fitted space");
  // Smooth-neighbor weighted interpolation of the training embedding.
  const int k = std::min<int>(cfg_.n_neighbors, static_cast<int>(train_x_.rows()));
  Matd out(x.rows(), embedding_.cols());
  std::vector<int> order(static_cast<std::size_t>(train_x_.rows()));
  for (Eigen::Index q = 0; q < x.rows(); ++q) {
    const Vecd d = (train_x_.rowwise() - x.row(q)).rowwise().norm();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int i, int j) {
      if (d(i) != d(j)) return d(i) < d(j);
      return i < j;
    });
    Matd dist(1, k);
    for (int j = 0; j < k; ++j) dist(0, j) = d(order[static_cast<std::size_t>(j)]);
    const SmoothKnn s = smooth_knn(dist);
    RowVecd acc = RowVecd::Zero(embedding_.cols());
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      const double gap = dist(0, j) - s.rho(0);
      const double w = gap <= 0.0 ? 1.0 : std::exp(-gap / s.sigma(0));
      acc += w * embedding_.row(order[static_cast<std::size_t>(j)]);
      total += w;
    }
    out.row(q) = total > 0.0 ? RowVecd(acc / total) : acc;
  }
  return out;
}

}  // namespace ideolens
