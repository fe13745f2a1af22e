#include <doctest.h>

#include "muscore/maps.hpp"
#include "muscore/rng.hpp"
#include "oracles.hpp"

using namespace muscore;

TEST_CASE("upsampling a constant grid stays constant") {
    Eigen::VectorXd grid = Eigen::VectorXd::Constant(9, 0.4);
    AnomalyMap m = upsample_2d(grid, 3, 17, 23);
    REQUIRE(m.values.size() == 17 * 23);
    for (double v : m.values) CHECK(v == doctest::Approx(0.4));
    CHECK(m.sample_score == doctest::Approx(0.4));
}

TEST_CASE("upsampling at the grid resolution is the identity") {
    CounterRng rng(1);
    Eigen::VectorXd grid = test_oracle::random_matrix(rng, 16, 1).cwiseAbs();
    AnomalyMap m = upsample_2d(grid, 4, 4, 4);
    for (std::size_t i = 0; i < 16; ++i)
        CHECK(m.values[i] == doctest::Approx(grid(static_cast<Eigen::Index>(i))));
}

TEST_CASE("2x2 checkerboard upsampled to 4x4 matches the closed-form bilinear values") {
    Eigen::VectorXd grid(4);
    grid << 0, 1, 1, 0;
    AnomalyMap m = upsample_2d(grid, 2, 4, 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(m.values[r * 4 + c] ==
                  doctest::Approx(test_oracle::bilinear(grid, 2, 4, 4, r, c)).epsilon(1e-12));
    // corner alignment pins the four corners exactly
    CHECK(m.values[0] == doctest::Approx(0.0));
    CHECK(m.values[3] == doctest::Approx(1.0));
    CHECK(m.values[12] == doctest::Approx(1.0));
    CHECK(m.values[15] == doctest::Approx(0.0));
}

TEST_CASE("upsampling stays inside the grid's value range") {
    CounterRng rng(2);
    Eigen::VectorXd grid = test_oracle::random_matrix(rng, 36, 1).cwiseAbs();
    AnomalyMap m = upsample_2d(grid, 6, 50, 41);
    const double lo = grid.minCoeff(), hi = grid.maxCoeff();
    for (double v : m.values) {
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("upsampling below the grid size is rejected") {
    CHECK_THROWS_AS(upsample_2d(Eigen::VectorXd::Zero(16), 4, 3, 8), ShapeMismatch);
}

TEST_CASE("idw: a point on a center takes that center's score exactly") {
    Eigen::MatrixXd centers(2, 3);
    centers << 0, 0, 0, 1, 0, 0;
    Eigen::VectorXd scores(2);
    scores << 0.9, 0.1;
    Eigen::MatrixXd pts(2, 3);
    pts << 1, 0, 0, 0.5, 0, 0;
    auto out = idw_interpolate(centers, scores, pts, {});
    CHECK(out[0] == doctest::Approx(0.1));
    CHECK(out[1] == doctest::Approx(0.5));  // symmetric midpoint
}

TEST_CASE("idw with a single group is constant") {
    CounterRng rng(3);
    Eigen::MatrixXd pts = test_oracle::random_matrix(rng, 20, 3);
    Eigen::VectorXd score(1);
    score << 0.7;
    auto out = idw_interpolate(Eigen::MatrixXd::Zero(1, 3), score, pts, {});
    for (double v : out) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("idw equals the naive loop oracle and stays convex") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CounterRng rng(10 + seed);
        Eigen::MatrixXd centers = test_oracle::random_matrix(rng, 12, 3);
        Eigen::VectorXd scores = test_oracle::random_matrix(rng, 12, 1).cwiseAbs();
        Eigen::MatrixXd pts = test_oracle::random_matrix(rng, 30, 3);
        auto got = idw_interpolate(centers, scores, pts, {});
        auto want = test_oracle::idw(centers, scores, pts, 2.0, 3);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(test_oracle::rel_err(got[i], want[i]) < 1e-6);
            CHECK(got[i] >= scores.minCoeff() - 1e-12);
            CHECK(got[i] <= scores.maxCoeff() + 1e-12);
        }
    }
}

TEST_CASE("3d-to-pixel render paints valid pixels and zeroes invalid ones") {
    std::vector<float> xyz(4 * 4 * 3, 0.f);
    for (std::size_t p = 0; p < 16; ++p) {
        if (p == 5 || p == 10) continue;  // two invalid pixels
        xyz[p * 3] = static_cast<float>(p) + 1.f;
        xyz[p * 3 + 2] = 1.f;
    }
    OrganizedPointCloud cloud = organize_xyz(TensorFile::from_f32({4, 4, 3}, xyz));
    REQUIRE(cloud.points.rows() == 14);
    std::vector<double> scores(14, 0.5);
    AnomalyMap m = render_3d_to_pixels(scores, cloud);
    for (std::size_t p = 0; p < 16; ++p)
        CHECK(m.values[p] == doctest::Approx(p == 5 || p == 10 ? 0.0 : 0.5));

    // single anomalous point -> exactly one hot pixel
    scores.assign(14, 0.0);
    scores[3] = 1.0;
    AnomalyMap spike = render_3d_to_pixels(scores, cloud);
    CHECK(std::count_if(spike.values.begin(), spike.values.end(),
                        [](double v) { return v > 0; }) == 1);
}

TEST_CASE("map fusion sums elementwise and dominates both inputs") {
    AnomalyMap a = AnomalyMap::pixel_map(2, 2, {0.1, 0.9, 0.0, 0.2});
    AnomalyMap b = AnomalyMap::pixel_map(2, 2, {0.0, 0.0, 0.0, 0.0});
    AnomalyMap f = fuse_maps(a, b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(f.values[i] == doctest::Approx(a.values[i]));

    AnomalyMap c = AnomalyMap::pixel_map(2, 2, {0.5, 0.0, 0.3, 0.1});
    AnomalyMap g = fuse_maps(a, c);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(g.values[i] >= a.values[i]);
        CHECK(g.values[i] >= c.values[i]);
    }
    CHECK(classify(g) >= std::max(classify(a), classify(c)));
    CHECK(g.sample_score == doctest::Approx(0.9));

    AnomalyMap wrong = AnomalyMap::pixel_map(2, 3, std::vector<double>(6, 0.0));
    CHECK_THROWS_AS(fuse_maps(a, wrong), SpaceMismatch);
}

TEST_CASE("classification is the map maximum") {
    CHECK(classify(AnomalyMap::pixel_map(1, 3, {0.3, 0.3, 0.3})) == doctest::Approx(0.3));
    CHECK(classify(AnomalyMap::point_map({0.1, 0.9, 0.2})) == doctest::Approx(0.9));
    CHECK_THROWS_AS(classify(AnomalyMap::pixel_map(0, 0, {})), EmptyMap);
}
