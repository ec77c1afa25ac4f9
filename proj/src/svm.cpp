#include "ideolens/svm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ideolens/errors.hpp"
#include "ideolens/rng.hpp"

namespace ideolens {

void SvcConfig::validate() const {
  if (!(C > 0.0)) throw ConfigError("svc C must be positive");
  if (!(tol > 0.0)) throw ConfigError("svc tol must be positive");
  if (max_passes < 1) throw ConfigError("svc max_passes must be positive");
  if (!(bias_scale > 0.0)) throw ConfigError("svc bias_scale must be positive");
}

namespace {

// Dual coordinate descent for min_w 1/2 w'w + C * sum hinge(y_i, w'x_i)
// (Hsieh et al. style, without shrinking). `x` already carries the bias
// column; `y` is +/-1.
RowVecd solve_binary(const Matd& x, const std::vector<double>& y, const SvcConfig& cfg, Rng& rng) {
  const Eigen::Index n = x.rows();
  RowVecd w = RowVecd::Zero(x.cols());
  Vecd alpha = Vecd::Zero(n);
  Vecd q_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) q_diag(i) = x.row(i).squaredNorm();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    rng.shuffle(order);
    double max_violation = 0.0;
    for (const Eigen::Index i : order) {
      if (q_diag(i) <= 0.0) continue;  // zero row constrains nothing
      const double g = y[static_cast<std::size_t>(i)] * w.dot(x.row(i)) - 1.0;
      double pg = g;
      if (alpha(i) <= 0.0)
        pg = std::min(g, 0.0);
      else if (alpha(i) >= cfg.C)
        pg = std::max(g, 0.0);
      max_violation = std::max(max_violation, std::abs(pg));
      if (std::abs(pg) < 1e-12) continue;
      const double updated = std::clamp(alpha(i) - g / q_diag(i), 0.0, cfg.C);
      w += (updated - alpha(i)) * y[static_cast<std::size_t>(i)] * x.row(i);
      alpha(i) = updated;
    }
    if (max_violation < cfg.tol) break;
  }
  return w;
}

}  // namespace

LinearSvc LinearSvc::train(const Matd& x, const std::vector<std::string>& labels,
                           const SvcConfig& cfg) {
  cfg.validate();
  if (x.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ValidationError("svc feature rows and labels disagree");
  if (x.rows() == 0) throw ValidationError("svc needs training rows");
  if (!x.allFinite()) throw ValidationError("svc features must be finite");

  const std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw ValidationError("svc needs at least two classes");

  LinearSvc model;
  model.classes_.assign(distinct.begin(), distinct.end());
  model.bias_scale_ = cfg.bias_scale;

  Matd augmented(x.rows(), x.cols() + 1);
  augmented.leftCols(x.cols()) = x;
  augmented.col(x.cols()).setConstant(cfg.bias_scale);

  model.weights_.resize(static_cast<Eigen::Index>(model.classes_.size()), augmented.cols());
  std::vector<double> y(labels.size());
  for (std::size_t c = 0; c < model.classes_.size(); ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      y[i] = labels[i] == model.classes_[c] ? 1.0 : -1.0;
    Rng rng(derive_seed(cfg.seed, "svc." + model.classes_[c]));
    model.weights_.row(static_cast<Eigen::Index>(c)) = solve_binary(augmented, y, cfg, rng);
  }
  return model;
}

Matd LinearSvc::decision_values(const Matd& x) const {
  if (x.cols() + 1 != weights_.cols())
    throw ValidationError("svc input width does not match the trained model");
  Matd augmented(x.rows(), x.cols() + 1);
  augmented.leftCols(x.cols()) = x;
  augmented.col(x.cols()).setConstant(bias_scale_);
  return augmented * weights_.transpose();
}

std::vector<std::string> LinearSvc::predict(const Matd& x) const {
  const Matd scores = decision_values(x);
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    out.push_back(classes_[static_cast<std::size_t>(best)]);
  }
  return out;
}

}  // namespace ideolens
