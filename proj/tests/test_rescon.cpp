#include <doctest.h>

#include "muscore/rescon.hpp"
#include "muscore/rng.hpp"
#include "muscore/synth.hpp"
#include "oracles.hpp"

using namespace muscore;

namespace {

PatchFeatureStack stack_with_scores(std::uint64_t seed, std::size_t patches, std::size_t channels,
                                    std::size_t stages) {
    CounterRng rng(seed);
    PatchFeatureStack s;
    s.modality = Modality::image;
    s.grid_side = 0;
    for (std::size_t st = 0; st < stages; ++st)
        s.stages.push_back(test_oracle::random_matrix(rng, patches, channels));
    return s;
}

Eigen::MatrixXd random_similarity(std::uint64_t seed, std::size_t n) {
    CounterRng rng(seed);
    Eigen::MatrixXd f = test_oracle::random_matrix(rng, n, 6);
    for (Eigen::Index i = 0; i < f.rows(); ++i) f.row(i).normalize();
    return similarity_graph(f);
}

}  // namespace

TEST_CASE("salient feature picks the argmax patch from the penultimate stage") {
    PatchFeatureStack s = stack_with_scores(1, 8, 4, 3);
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(8);
    scores(5) = 1.0;
    Eigen::VectorXd f = salient_feature(s, scores);
    Eigen::VectorXd want = s.stages[1].row(5).normalized().transpose();
    CHECK((f - want).norm() < 1e-12);
    CHECK(f.norm() == doctest::Approx(1.0));
}

TEST_CASE("salient feature resolves ties at the smallest index") {
    PatchFeatureStack s = stack_with_scores(2, 6, 4, 2);
    Eigen::VectorXd scores = Eigen::VectorXd::Constant(6, 0.7);
    Eigen::VectorXd f = salient_feature(s, scores);
    CHECK((f - s.stages[0].row(0).normalized().transpose()).norm() < 1e-12);
}

TEST_CASE("salient feature equals the argmax-scan oracle on random instances") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        PatchFeatureStack s = stack_with_scores(10 + seed, 12, 5, 3);
        CounterRng rng(30 + seed);
        Eigen::VectorXd scores = test_oracle::random_matrix(rng, 12, 1).cwiseAbs();
        Eigen::Index best = 0;
        for (Eigen::Index m = 1; m < 12; ++m)
            if (scores(m) > scores(best)) best = m;
        CHECK((salient_feature(s, scores) -
               s.stages[1].row(best).normalized().transpose())
                  .norm() < 1e-12);
    }
    PatchFeatureStack single = stack_with_scores(3, 4, 4, 1);
    CHECK_THROWS_AS(salient_feature(single, Eigen::VectorXd::Zero(4)), StageCountTooSmall);
}

TEST_CASE("multimodal salient concatenation keeps both halves") {
    Eigen::VectorXd a = Eigen::VectorXd::Unit(3, 0);
    Eigen::VectorXd b = Eigen::VectorXd::Unit(2, 1);
    Eigen::VectorXd c = concat_salient(a, b);
    REQUIRE(c.size() == 5);
    CHECK(c(0) == 1.0);
    CHECK(c(4) == 1.0);
}

TEST_CASE("similarity graph: cosine with clamp and zero diagonal") {
    Eigen::MatrixXd f(3, 2);
    f << 1, 0, 1, 0, -1, 0;  // two identical, one opposite
    Eigen::MatrixXd w = similarity_graph(f);
    CHECK(w(0, 1) == doctest::Approx(1.0));
    CHECK(w(1, 0) == doctest::Approx(1.0));
    CHECK(w(0, 2) == doctest::Approx(0.0));  // negative clamped
    for (int i = 0; i < 3; ++i) CHECK(w(i, i) == 0.0);

    Eigen::MatrixXd ortho(2, 2);
    ortho << 1, 0, 0, 1;
    CHECK(similarity_graph(ortho)(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("window mask selects exactly k neighbors per row") {
    Eigen::MatrixXd w = random_similarity(5, 12);
    for (std::size_t k : {1u, 7u, 11u}) {
        Eigen::MatrixXd m = window_mask(w, k);
        for (Eigen::Index i = 0; i < 12; ++i) {
            CHECK(m.row(i).sum() == doctest::Approx(double(k)));
            CHECK(m(i, i) == 0.0);
            // selected entries dominate unselected ones
            double min_sel = 2.0, max_unsel = -1.0;
            for (Eigen::Index j = 0; j < 12; ++j) {
                if (j == i) continue;
                if (m(i, j) > 0) min_sel = std::min(min_sel, w(i, j));
                else max_unsel = std::max(max_unsel, w(i, j));
            }
            if (k < 11) CHECK(min_sel >= max_unsel);
        }
    }
    CHECK_THROWS_AS(window_mask(w, 12), WindowTooLarge);
    CHECK_THROWS_AS(window_mask(w, 0), WindowTooLarge);
}

TEST_CASE("rescore: uniform graph with equal scores is a fixed point") {
    Eigen::MatrixXd f(4, 2);
    for (int i = 0; i < 4; ++i) f.row(i) << 1, 0;
    Eigen::MatrixXd w = similarity_graph(f);
    Eigen::VectorXd c = Eigen::VectorXd::Constant(4, 0.6);
    RescoreResult r = rescore(c, w, window_mask(w, 3));
    CHECK((r.scores - c).norm() < 1e-12);
    CHECK(r.isolated.empty());
}

TEST_CASE("rescore: hand-checked single-neighbor update") {
    // sample 1's only neighbor is sample 2: 0.4/2 + 0.8/2 = 0.6
    Eigen::VectorXd c(3);
    c << 0.4, 0.8, 0.1;
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(3, 3, 0.5);
    w.diagonal().setZero();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m(0, 1) = 1;
    m(1, 0) = 1;
    m(2, 0) = 1;
    RescoreResult r = rescore(c, w, m);
    CHECK(r.scores(0) == doctest::Approx(0.6));
    CHECK(r.scores(1) == doctest::Approx(0.6));
    CHECK(r.scores(2) == doctest::Approx(0.25));
}

TEST_CASE("matrix rescore equals the per-sample expansion") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CounterRng rng(100 + seed);
        const std::size_t n = 3 + rng.below(48);
        Eigen::MatrixXd w = random_similarity(200 + seed, n);
        Eigen::VectorXd c = test_oracle::random_matrix(rng, n, 1).cwiseAbs();
        Eigen::MatrixXd m = window_mask(w, std::min<std::size_t>(7, n - 1));
        RescoreResult got = rescore(c, w, m);
        Eigen::VectorXd want = oracle::oracle_rescore(c, w, m);
        CHECK((got.scores - want).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("rescore convexity and anchor retention") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CounterRng rng(300 + seed);
        const std::size_t n = 10;
        Eigen::MatrixXd w = random_similarity(400 + seed, n);
        Eigen::VectorXd c = test_oracle::random_matrix(rng, n, 1).cwiseAbs();
        RescoreResult r = rescore(c, w, window_mask(w, 4));
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
            CHECK(r.scores(i) >= c.minCoeff() - 1e-12);
            CHECK(r.scores(i) <= c.maxCoeff() + 1e-12);
            CHECK(r.scores(i) >= c(i) / 2.0 - 1e-12);
        }
    }
}

TEST_CASE("isolated rows fall back to their own score with a diagnostic") {
    // sample 2 is orthogonal to everyone: masked row weight is all zero
    Eigen::MatrixXd f(3, 3);
    f << 1, 0, 0, 1, 0, 0, 0, 0, 1;
    Eigen::MatrixXd w = similarity_graph(f);
    Eigen::MatrixXd m = window_mask(w, 1);
    Eigen::VectorXd c(3);
    c << 0.2, 0.4, 0.9;
    RescoreResult r = rescore(c, w, m);
    CHECK(r.scores(2) == doctest::Approx(0.9));
    REQUIRE(r.isolated.size() == 1);
    CHECK(r.isolated[0] == 2);
}

TEST_CASE("diagnostics expose normalized neighbor weights") {
    Eigen::MatrixXd w = random_similarity(9, 8);
    Eigen::MatrixXd m = window_mask(w, 3);
    ResconDiagnostics d = rescon_diagnostics(w, m);
    REQUIRE(d.neighbor_ids.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(d.neighbor_ids[i].size() == 3);
        double sum = 0.0;
        for (double x : d.neighbor_weights[i]) sum += x;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}
