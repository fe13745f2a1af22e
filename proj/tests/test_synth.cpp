#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "muscore/dataset.hpp"
#include "muscore/descriptor.hpp"
#include "muscore/rng.hpp"
#include "muscore/synth.hpp"
#include "oracles.hpp"

using namespace muscore;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
    const std::string p = (fs::temp_directory_path() / name).string();
    fs::remove_all(p);
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// The generator's prototype bank is a pure function of (seed, stages,
// prototypes, channels); rebuild it the same way to audit outputs.
std::vector<std::vector<Eigen::VectorXd>> rebuild_prototypes(const SynthConfig& c) {
    CounterRng rng(c.seed, 0xB0);
    std::vector<std::vector<Eigen::VectorXd>> protos(c.stages);
    for (std::size_t s = 0; s < c.stages; ++s) {
        for (std::size_t p = 0; p < c.prototype_count; ++p) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(c.channels));
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
            protos[s].push_back(std::move(v));
        }
    }
    return protos;
}

}  // namespace

TEST_CASE("zero anomaly rate produces an all-normal dataset with empty masks") {
    SynthConfig c;
    c.sample_count = 5;
    c.grid_side = 6;
    c.channels = 4;
    c.plane_grid = 12;
    c.anomaly_rate = 0.0;
    c.seed = 1;
    const std::string dir = tmp_dir("synth_clean");
    SynthSummary s = generate_synthetic_dataset(c, dir);
    CHECK(s.anomalous_ids.empty());
    Dataset ds = load_dataset(s.manifest_path);
    for (const auto& m : ds.samples) {
        CHECK(m.label == SampleLabel::normal);
        TensorFile mask = load_tensor(resolve_path(ds, m.mask_path));
        for (auto v : mask.u8) CHECK(v == 0);
    }
}

TEST_CASE("same seed regenerates bit-identical files") {
    SynthConfig c;
    c.sample_count = 4;
    c.grid_side = 6;
    c.channels = 4;
    c.plane_grid = 12;
    c.anomaly_rate = 0.3;
    c.seed = 9;
    const std::string a = tmp_dir("synth_rep_a");
    const std::string b = tmp_dir("synth_rep_b");
    generate_synthetic_dataset(c, a);
    generate_synthetic_dataset(c, b);
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), a).string();
        CHECK(slurp(entry.path().string()) == slurp((fs::path(b) / rel).string()));
    }
}

TEST_CASE("anomalous count follows the seeded draw and is recorded") {
    SynthConfig c;
    c.sample_count = 20;
    c.grid_side = 6;
    c.channels = 4;
    c.plane_grid = 12;
    c.anomaly_rate = 0.3;
    c.seed = 13;
    SynthSummary s = generate_synthetic_dataset(c, tmp_dir("synth_count"));
    CHECK(s.anomalous_ids.size() == 6);  // round(0.3 * 20)
    Dataset ds = load_dataset(s.manifest_path);
    std::size_t labeled = 0;
    for (const auto& m : ds.samples) labeled += m.label == SampleLabel::anomalous;
    CHECK(labeled == s.anomalous_ids.size());
}

TEST_CASE("invalid configurations are rejected") {
    SynthConfig c;
    c.anomaly_magnitude = 0.1;  // below 3x noise sigma
    CHECK_THROWS_AS(generate_synthetic_dataset(c, tmp_dir("synth_bad")), InvalidConfig);
    SynthConfig d;
    d.plane_grid = 4;
    d.grid_side = 28;
    CHECK_THROWS_AS(generate_synthetic_dataset(d, tmp_dir("synth_bad2")), InvalidConfig);
}

TEST_CASE("generator soundness: planted outliers clear every prototype, normals stay close") {
    SynthConfig c;
    c.sample_count = 20;
    c.grid_side = 24;  // 20 * 576 = 11520 patch draws
    c.channels = 8;
    c.plane_grid = 48;
    c.anomaly_rate = 0.25;
    c.seed = 21;
    const std::string dir = tmp_dir("synth_sound");
    SynthSummary s = generate_synthetic_dataset(c, dir);
    Dataset ds = load_dataset(s.manifest_path);
    auto protos = rebuild_prototypes(c);

    // Normal features are prototype + sigma-noise: nearest-prototype
    // distance stays far below the anomaly magnitude; planted outliers
    // sit at or beyond it. Nothing may fall in between.
    const double near_bound = 6.0 * c.noise_sigma * std::sqrt(double(c.channels));
    REQUIRE(near_bound < c.anomaly_magnitude);
    std::size_t planted = 0, checked = 0;
    for (const auto& m : ds.samples) {
        const bool anomalous = m.label == SampleLabel::anomalous;
        for (std::size_t st = 0; st < c.stages; ++st) {
            TensorFile t = load_tensor(resolve_path(ds, m.image_feature_paths[st]));
            Eigen::MatrixXd f = t.as_matrix();
            for (Eigen::Index p = 0; p < f.rows(); ++p) {
                double min_d = std::numeric_limits<double>::infinity();
                for (const auto& proto : protos[st])
                    min_d = std::min(min_d, (f.row(p).transpose() - proto).norm());
                ++checked;
                if (min_d >= c.anomaly_magnitude - 1e-4) {
                    ++planted;
                    CHECK(anomalous);
                } else {
                    CHECK(min_d < near_bound);
                }
            }
        }
    }
    CHECK(checked >= 10000);
    CHECK(planted >= 4);  // at least one 2x2 block per anomalous sample per stage
}

TEST_CASE("descriptor: planar group has near-zero surface variation component") {
    PointCloud cloud;
    cloud.points.resize(16, 3);
    for (int i = 0; i < 16; ++i) cloud.points.row(i) << i / 4 * 0.1, i % 4 * 0.1, 0.0;
    PointGroup g;
    g.center_index = 5;
    for (std::size_t i = 0; i < 16; ++i) g.member_indices.push_back(i);
    Eigen::VectorXd d = geometric_descriptor(g, cloud);
    REQUIRE(d.size() == static_cast<Eigen::Index>(descriptor_dim({})));
    CHECK(d(3) == doctest::Approx(0.0).epsilon(1e-9));  // surface variation slot
}

TEST_CASE("descriptor: translation-invariant, eigenvalues scale quadratically") {
    CounterRng rng(31);
    PointCloud cloud;
    cloud.points = test_oracle::random_matrix(rng, 24, 3);
    PointGroup g;
    g.center_index = 0;
    for (std::size_t i = 0; i < 24; ++i) g.member_indices.push_back(i);
    Eigen::VectorXd base = geometric_descriptor(g, cloud);

    PointCloud shifted;
    shifted.points = cloud.points.rowwise() + Eigen::RowVector3d(3.0, -1.0, 2.5);
    CHECK((geometric_descriptor(g, shifted) - base).cwiseAbs().maxCoeff() < 1e-9);

    PointCloud scaled;
    scaled.points = cloud.points * 2.0;
    Eigen::VectorXd ds = geometric_descriptor(g, scaled);
    for (int i = 0; i < 3; ++i) CHECK(ds(i) == doctest::Approx(4.0 * base(i)).epsilon(1e-9));
}

TEST_CASE("partial descriptor uses only the nearest members") {
    CounterRng rng(37);
    PointCloud cloud;
    cloud.points = test_oracle::random_matrix(rng, 30, 3);
    PointGroup g;
    g.center_index = 2;
    // members ordered by distance from the center, as grouping produces
    for (std::size_t i : test_oracle::knn(cloud.points, 2, 30)) g.member_indices.push_back(i);
    Eigen::VectorXd full = geometric_descriptor(g, cloud);
    Eigen::VectorXd part = geometric_descriptor_partial(g, cloud, 10);
    CHECK((geometric_descriptor_partial(g, cloud, 30) - full).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((part - full).cwiseAbs().maxCoeff() > 1e-8);
}
