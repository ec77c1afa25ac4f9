// Tests for the clustering pipeline pieces: pairwise distance features,
// reduction, standardization, the three clustering algorithms, and the
// fitted models' ability to place new points.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "ideolens/clustering.hpp"
#include "ideolens/errors.hpp"
#include "ideolens/evaluate.hpp"
#include "ideolens/rng.hpp"

using namespace ideolens;

namespace {

// `n_blobs` tight Gaussian clusters spread on a circle of radius 3.
Matd blobs(int n_blobs, int per_blob, int dim, double sigma, Rng& rng, std::vector<int>* ids) {
  Matd x(n_blobs * per_blob, dim);
  for (int b = 0; b < n_blobs; ++b) {
    const double angle = 2.0 * 3.14159265358979323846 * b / n_blobs;
    for (int i = 0; i < per_blob; ++i) {
      const int row = b * per_blob + i;
      for (int c = 0; c < dim; ++c) x(row, c) = sigma * rng.normal();
      x(row, 0) += 3.0 * std::cos(angle);
      x(row, 1) += 3.0 * std::sin(angle);
      if (ids) ids->push_back(b);
    }
  }
  return x;
}

ClusteringConfig kmeans_config(int k, std::uint64_t seed) {
  ClusteringConfig cfg;
  cfg.algorithm = "kmeans";
  cfg.n_clusters = k;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("pairwise features") {
  TEST_CASE("coincident points give a zero matrix") {
    Matd v(2, 3);
    v << 1.0, 2.0, 3.0, 1.0, 2.0, 3.0;
    const Matd d = pairwise_projection(v);
    CHECK(d == Matd::Zero(2, 2));
  }

  TEST_CASE("three points on a line") {
    Matd v(3, 1);
    v << 0.0, 1.0, 3.0;
    const Matd d = pairwise_projection(v);
    Matd expected(3, 3);
    expected << 0, 1, 3, 1, 0, 2, 3, 2, 0;
    CHECK((d - expected).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("matches a brute-force double loop") {
    Rng rng(9);
    Matd v(20, 40);
    for (int i = 0; i < 20; ++i)
      for (int c = 0; c < 40; ++c) v(i, c) = rng.uniform(-1.0, 1.0);
    const Matd d = pairwise_projection(v);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        double s = 0.0;
        for (int c = 0; c < 40; ++c) s += (v(i, c) - v(j, c)) * (v(i, c) - v(j, c));
        CHECK(d(i, j) == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
      }
    CHECK_THROWS_AS(pairwise_projection(Matd::Zero(1, 4)), ValidationError);
  }
}

TEST_SUITE("reduce") {
  TEST_CASE("rejects widths that do not shrink") {
    const Matd x = Matd::Random(10, 4);
    CHECK_THROWS_AS(reduce(x, 4, "pca", 1), ValidationError);
    CHECK_THROWS_AS(reduce(x, 5, "pca", 1), ValidationError);
  }

  TEST_CASE("pca drop-one loses at most the least-varying direction") {
    Rng rng(12);
    Matd x(60, 5);
    for (int i = 0; i < 60; ++i)
      for (int c = 0; c < 5; ++c) x(i, c) = rng.normal() * (1.0 + c);
    const Matd y = reduce(x, 4, "pca", 0);

    auto total_variance = [](const Matd& m) {
      const RowVecd mean = m.colwise().mean();
      return ((m.rowwise() - mean).array().square().sum()) / static_cast<double>(m.rows() - 1);
    };
    const double lost = total_variance(x) - total_variance(y);
    double min_col_var = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 5; ++c) {
      const Vecd col = x.col(c);
      min_col_var = std::min(
          min_col_var, (col.array() - col.mean()).square().sum() / static_cast<double>(59));
    }
    CHECK(lost >= -1e-9);
    CHECK(lost <= min_col_var + 1e-9);
  }

  TEST_CASE("umap reduction to 2-D keeps blobs clusterable") {
    Rng rng(21);
    std::vector<int> ids;
    const Matd x = blobs(3, 40, 12, 0.02, rng, &ids);
    const Matd y = reduce(x, 2, "umap", 4);
    REQUIRE(y.rows() == x.rows());
    REQUIRE(y.cols() == 2);
    const ClusterModel model = cluster(y, kmeans_config(3, 17));
    CHECK(adjusted_rand_index(model.labels(), ids) >= 0.95);
    CHECK(reduce(x, 2, "umap", 4) == y);  // seeded determinism
  }
}

TEST_SUITE("standardize") {
  TEST_CASE("two-point column maps to plus and minus one") {
    Matd x(2, 1);
    x << 1.0, 3.0;
    const Matd y = Standardizer::fit(x).apply(x);
    CHECK(y(0, 0) == doctest::Approx(-1.0));
    CHECK(y(1, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("constant columns become zero") {
    Matd x(4, 2);
    x << 5.0, 1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0;
    const Matd y = Standardizer::fit(x).apply(x);
    CHECK(y.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(y.col(1).mean()) < 1e-9);
  }

  TEST_CASE("random matrix gets zero mean and unit population variance") {
    Rng rng(31);
    Matd x(50, 6);
    for (int i = 0; i < 50; ++i)
      for (int c = 0; c < 6; ++c) x(i, c) = rng.uniform(0.0, 9.0);
    const Matd y = Standardizer::fit(x).apply(x);
    for (int c = 0; c < 6; ++c) {
      CHECK(std::abs(y.col(c).mean()) < 1e-9);
      const double var = y.col(c).array().square().sum() / 50.0;
      CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Idempotence: standardizing the standardized data changes nothing.
    const Matd z = Standardizer::fit(y).apply(y);
    CHECK((z - y).cwiseAbs().maxCoeff() < 1e-9);

    CHECK_THROWS_AS(Standardizer::fit(x).apply(Matd::Zero(2, 5)), ValidationError);
    CHECK_THROWS_AS(Standardizer::fit(Matd::Zero(1, 2)), ValidationError);
  }
}

TEST_SUITE("clustering algorithms") {
  TEST_CASE("kmeans recovers eight tight blobs") {
    Rng rng(2);
    std::vector<int> ids;
    const Matd x = blobs(8, 30, 6, 0.05, rng, &ids);
    const ClusterModel model = cluster(x, kmeans_config(8, 3));
    CHECK(model.n_clusters() == 8);
    CHECK(adjusted_rand_index(model.labels(), ids) >= 0.99);
    // The fitted model reassigns its own training points identically.
    CHECK(model.assign(x) == model.labels());
  }

  TEST_CASE("k equal to one puts everything together") {
    Rng rng(4);
    const Matd x = blobs(3, 10, 4, 0.3, rng, nullptr);
    const ClusterModel model = cluster(x, kmeans_config(1, 5));
    for (int l : model.labels()) CHECK(l == 0);
  }

  TEST_CASE("kmeans is deterministic per seed") {
    Rng rng(6);
    const Matd x = blobs(4, 25, 5, 0.4, rng, nullptr);
    const ClusterModel a = cluster(x, kmeans_config(4, 9));
    const ClusterModel b = cluster(x, kmeans_config(4, 9));
    CHECK(a.labels() == b.labels());
    CHECK(a.centers() == b.centers());
  }

  TEST_CASE("gaussian mixture recovers blobs and places new points") {
    Rng rng(7);
    std::vector<int> ids;
    const Matd x = blobs(3, 50, 4, 0.15, rng, &ids);
    ClusteringConfig cfg;
    cfg.algorithm = "gaussian_mixture";
    cfg.n_clusters = 3;
    cfg.seed = 11;
    const ClusterModel model = cluster(x, cfg);
    CHECK(model.n_clusters() == 3);
    CHECK(adjusted_rand_index(model.labels(), ids) >= 0.99);

    // A probe at each generating center lands with that blob's members.
    Matd probes(3, 4);
    probes.setZero();
    for (int b = 0; b < 3; ++b) {
      const double angle = 2.0 * 3.14159265358979323846 * b / 3;
      probes(b, 0) = 3.0 * std::cos(angle);
      probes(b, 1) = 3.0 * std::sin(angle);
    }
    const std::vector<int> placed = model.assign(probes);
    for (int b = 0; b < 3; ++b) CHECK(placed[static_cast<std::size_t>(b)] ==
                                      model.labels()[static_cast<std::size_t>(b * 50)]);

    const ClusterModel again = cluster(x, cfg);
    CHECK(again.labels() == model.labels());
  }

  TEST_CASE("mean shift finds the blob count on its own") {
    Rng rng(8);
    std::vector<int> ids;
    const Matd x = blobs(3, 40, 3, 0.08, rng, &ids);
    ClusteringConfig cfg;
    cfg.algorithm = "mean_shift";
    cfg.seed = 13;
    const ClusterModel model = cluster(x, cfg);
    CHECK(model.n_clusters() == 3);
    CHECK(adjusted_rand_index(model.labels(), ids) >= 0.99);
  }

  TEST_CASE("bandwidth heuristic scales with the data spread") {
    Rng rng(14);
    const Matd x = blobs(3, 30, 3, 0.05, rng, nullptr);
    const double bw = estimate_bandwidth(x, 0.3, 1);
    CHECK(bw > 0.0);
    const double bw_wide = estimate_bandwidth(Matd(4.0 * x), 0.3, 1);
    CHECK(bw_wide == doctest::Approx(4.0 * bw).epsilon(1e-9));
    CHECK_THROWS_AS(estimate_bandwidth(x, 0.0, 1), ConfigError);
  }

  TEST_CASE("config validation") {
    ClusteringConfig cfg;
    cfg.algorithm = "mean_shift";
    cfg.n_clusters = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ClusteringConfig{};
    cfg.algorithm = "kmeans";
    cfg.n_clusters.reset();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ClusteringConfig{};
    cfg.algorithm = "dbscan";
    cfg.n_clusters = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    const Matd tiny = Matd::Random(3, 2);
    CHECK_THROWS_AS(cluster(tiny, kmeans_config(4, 1)), ValidationError);
    Matd bad = tiny;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(cluster(bad, kmeans_config(2, 1)), ValidationError);
  }

  TEST_CASE("config json round trip") {
    ClusteringConfig cfg;
    cfg.use_pairwise_projection = true;
    cfg.reduce_dims = 64;
    cfg.reduce_method = "umap";
    cfg.standardize = false;
    cfg.algorithm = "gaussian_mixture";
    cfg.n_clusters = 8;
    cfg.seed = 99;
    const ClusteringConfig back = ClusteringConfig::from_json(cfg.to_json());
    CHECK(back.use_pairwise_projection == cfg.use_pairwise_projection);
    CHECK(back.reduce_dims == cfg.reduce_dims);
    CHECK(back.standardize == cfg.standardize);
    CHECK(back.algorithm == cfg.algorithm);
    CHECK(back.n_clusters == cfg.n_clusters);
    CHECK(back.seed == cfg.seed);

    ClusteringConfig shift;
    shift.algorithm = "mean_shift";
    shift.n_clusters.reset();
    const ClusteringConfig back2 = ClusteringConfig::from_json(shift.to_json());
    CHECK(!back2.n_clusters.has_value());
  }
}
