// Tests for the projection interface: PCA fallback exactness, the
// neighborhood-graph method's cluster preservation, determinism, and
// out-of-sample transforms.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ideolens/errors.hpp"
#include "ideolens/projection.hpp"
#include "ideolens/rng.hpp"

using namespace ideolens;

namespace {

ProjectionConfig pca_config(int dims = 2) {
  ProjectionConfig cfg;
  cfg.method = "pca";
  cfg.n_components = dims;
  return cfg;
}

ProjectionConfig umap_config(std::uint64_t seed) {
  ProjectionConfig cfg;
  cfg.method = "umap";
  cfg.n_components = 2;
  cfg.seed = seed;
  return cfg;
}

// Three same-size Gaussian blobs in `dim` dimensions with unit-distance
// centers (vertices of an equilateral triangle in the first two axes).
Matd three_blobs(int per_blob, int dim, double sigma, Rng& rng, std::vector<int>* labels) {
  Matd x(3 * per_blob, dim);
  const double centers[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}};
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      const int row = b * per_blob + i;
      for (int c = 0; c < dim; ++c) x(row, c) = sigma * rng.normal();
      x(row, 0) += centers[b][0];
      x(row, 1) += centers[b][1];
      if (labels) labels->push_back(b);
    }
  }
  return x;
}

// Fraction of points whose nearest blob centroid (in the embedded space)
// is their own blob's centroid.
double blob_purity(const Matd& y, const std::vector<int>& labels) {
  Matd centroids = Matd::Zero(3, y.cols());
  Vecd counts = Vecd::Zero(3);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    centroids.row(labels[static_cast<std::size_t>(i)]) += y.row(i);
    counts(labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  for (int b = 0; b < 3; ++b) centroids.row(b) /= counts(b);
  int hits = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::Index nearest = -1;
    (centroids.rowwise() - y.row(i)).rowwise().squaredNorm().minCoeff(&nearest);
    if (nearest == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.rows());
}

}  // namespace

TEST_SUITE("pca projection") {
  TEST_CASE("collinear data collapses onto one axis") {
    Rng rng(1);
    Matd x(30, 5);
    Vecd direction(5);
    direction << 2.0, -1.0, 0.5, 0.0, 3.0;
    for (int i = 0; i < 30; ++i) x.row(i) = (0.1 * i) * direction.transpose();
    const Projector p = Projector::fit(x, pca_config(2));
    const Matd& y = p.embedding();

    const Vecd second = y.col(1);
    const double var = (second.array() - second.mean()).square().sum() / (y.rows() - 1);
    CHECK(var < 1e-9);
    const Vecd first = y.col(0);
    CHECK((first.array() - first.mean()).square().sum() > 1.0);
  }

  TEST_CASE("recovers a planted dominant direction") {
    Rng rng(2);
    Vecd v = Vecd::Zero(8);
    v(3) = 1.0;
    Matd x(200, 8);
    for (int i = 0; i < 200; ++i) {
      for (int c = 0; c < 8; ++c) x(i, c) = 0.05 * rng.normal();
      x.row(i) += (3.0 * rng.normal()) * v.transpose();
    }
    const Projector p = Projector::fit(x, pca_config(1));
    // The dominant component concentrates on coordinate 3; the sign fix
    // makes the big loading positive.
    const Matd y = p.transform(x);
    CHECK(y.rows() == 200);
    Matd probe = Matd::Zero(2, 8);
    probe.row(0) = v.transpose();
    const Matd e = p.transform(probe);
    CHECK(std::abs(e(0, 0) - e(1, 0)) == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("transform matches the fitted embedding exactly") {
    Rng rng(3);
    Matd x(40, 6);
    for (int i = 0; i < 40; ++i)
      for (int c = 0; c < 6; ++c) x(i, c) = rng.uniform(-2.0, 2.0);
    const Projector p = Projector::fit(x, pca_config(3));
    const Matd again = p.transform(x);
    CHECK((again - p.embedding()).cwiseAbs().maxCoeff() < 1e-12);

    Matd wrong(1, 5);
    wrong.setZero();
    CHECK_THROWS_AS(p.transform(wrong), ValidationError);
  }
}

TEST_SUITE("umap projection") {
  TEST_CASE("kernel fit reproduces the reference curve parameters") {
    const auto [a, b] = Projector::fit_kernel(0.1, 1.0);
    CHECK(a == doctest::Approx(1.577).epsilon(0.02));
    CHECK(b == doctest::Approx(0.8951).epsilon(0.02));
    const auto [a2, b2] = Projector::fit_kernel(0.5, 1.0);
    CHECK(a2 < a);  // larger min_dist flattens the kernel
  }

  TEST_CASE("separated blobs stay separated in two dimensions") {
    Rng rng(42);
    std::vector<int> labels;
    const Matd x = three_blobs(40, 40, 0.01, rng, &labels);
    const Projector p = Projector::fit(x, umap_config(7));
    const Matd& y = p.embedding();
    REQUIRE(y.rows() == 120);
    REQUIRE(y.cols() == 2);
    CHECK(y.allFinite());
    CHECK(blob_purity(y, labels) >= 0.95);
  }

  TEST_CASE("same seed gives identical output, refits included") {
    Rng rng(43);
    const Matd x = three_blobs(20, 10, 0.05, rng, nullptr);
    const Projector p1 = Projector::fit(x, umap_config(11));
    const Projector p2 = Projector::fit(x, umap_config(11));
    CHECK(p1.embedding() == p2.embedding());
    const Projector p3 = Projector::fit(x, umap_config(12));
    CHECK(p1.embedding() != p3.embedding());
  }

  TEST_CASE("transform places new points with their neighbors") {
    Rng rng(44);
    std::vector<int> labels;
    const Matd x = three_blobs(40, 12, 0.01, rng, &labels);
    const Projector p = Projector::fit(x, umap_config(5));

    // Probe each blob center; its image must sit nearest that blob's cloud.
    Matd probes = Matd::Zero(3, 12);
    probes(1, 0) = 1.0;
    probes(2, 0) = 0.5;
    probes(2, 1) = std::sqrt(3.0) / 2.0;
    const Matd e = p.transform(probes);
    REQUIRE(e.rows() == 3);
    CHECK(e.allFinite());

    std::vector<int> probe_labels = labels;
    Matd all(x.rows() + 3, 2);
    all.topRows(x.rows()) = p.embedding();
    all.bottomRows(3) = e;
    for (int b = 0; b < 3; ++b) probe_labels.push_back(b);
    CHECK(blob_purity(all, probe_labels) >= 0.95);

    CHECK(p.transform(probes) == e);  // pure function
  }

  TEST_CASE("refuses tiny inputs but suggests the fallback") {
    Matd x = Matd::Random(10, 4);
    try {
      Projector::fit(x, umap_config(1));
      FAIL("expected ValidationError");
    } catch (const ValidationError& err) {
      CHECK(std::string(err.what()).find("pca") != std::string::npos);
    }
    CHECK_NOTHROW(Projector::fit(x, pca_config(2)));
  }

  TEST_CASE("validates configuration") {
    ProjectionConfig cfg = umap_config(1);
    cfg.method = "tsne";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = umap_config(1);
    cfg.n_components = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = umap_config(1);
    cfg.n_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    Matd x = Matd::Random(30, 3);
    ProjectionConfig wide = pca_config(4);
    CHECK_THROWS_AS(Projector::fit(x, wide), ValidationError);
  }
}
