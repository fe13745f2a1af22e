#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "muscore/dataset.hpp"
#include "muscore/rng.hpp"
#include "muscore/synth.hpp"
#include "muscore/tensor_io.hpp"

using namespace muscore;
namespace fs = std::filesystem;

namespace {
std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("tensor round-trip keeps dtype, shape, and payload") {
    const std::string path = tmp_path("roundtrip_small.mt");
    TensorFile t = TensorFile::from_f32({2, 3}, {1.f, 2.f, 3.f, 4.f, 5.f, 6.f});
    save_tensor(path, t);
    TensorFile back = load_tensor(path);
    CHECK(back.dtype == Dtype::f32);
    CHECK(back.shape == std::vector<std::size_t>{2, 3});
    CHECK(back.f32 == t.f32);
}

TEST_CASE("large random tensor round-trips bit-identically") {
    CounterRng rng(11);
    std::vector<float> data(1024 * 128);
    for (auto& v : data) v = static_cast<float>(rng.gaussian());
    const std::string path = tmp_path("roundtrip_large.mt");
    save_tensor(path, TensorFile::from_f32({1024, 128}, data));
    TensorFile back = load_tensor(path);
    REQUIRE(back.f32.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        REQUIRE(std::memcmp(&back.f32[i], &data[i], sizeof(float)) == 0);
    }
}

TEST_CASE("u8 round-trip") {
    const std::string path = tmp_path("roundtrip_u8.mt");
    save_tensor(path, TensorFile::from_u8({4}, {0, 255, 7, 1}));
    TensorFile back = load_tensor(path);
    CHECK(back.dtype == Dtype::u8);
    CHECK(back.u8 == std::vector<std::uint8_t>{0, 255, 7, 1});
}

TEST_CASE("truncated payload is rejected") {
    const std::string good = tmp_path("truncate_good.mt");
    save_tensor(good, TensorFile::from_f32({2, 3}, {1, 2, 3, 4, 5, 6}));
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string bad = tmp_path("truncate_bad.mt");
    std::ofstream(bad, std::ios::binary) << bytes.substr(0, bytes.size() - 4);
    CHECK_THROWS_AS(load_tensor(bad), ShapeOverflow);
}

TEST_CASE("wrong magic is rejected") {
    const std::string path = tmp_path("bad_magic.mt");
    std::ofstream(path, std::ios::binary) << "NOTMAGIC????????????";
    CHECK_THROWS_AS(load_tensor(path), MagicMismatch);
}

TEST_CASE("non-finite f32 payload is rejected") {
    const std::string path = tmp_path("nonfinite.mt");
    CHECK_THROWS_AS(
        save_tensor(path, TensorFile::from_f32({1}, {std::numeric_limits<float>::quiet_NaN()})),
        NonFiniteValue);
}

TEST_CASE("xyz map marks exact zero triples invalid") {
    const std::string path = tmp_path("xyz_2x2.mt");
    // one invalid pixel out of four
    save_tensor(path, TensorFile::from_f32({2, 2, 3}, {1, 1, 1, 0, 0, 0, 2, 0, 1, 0, 1, 0}));
    OrganizedPointCloud c = load_xyz_map(path, 2, 2);
    CHECK(c.points.rows() == 3);
    CHECK(c.valid_mask == std::vector<std::uint8_t>{1, 0, 1, 1});
    CHECK(c.pixel_to_point[1] == -1);
    CHECK_FALSE(c.empty_warning);
}

TEST_CASE("all-zero xyz map yields empty cloud with warning") {
    const std::string path = tmp_path("xyz_zero.mt");
    save_tensor(path, TensorFile::from_f32({2, 2, 3}, std::vector<float>(12, 0.f)));
    OrganizedPointCloud c = load_xyz_map(path, 2, 2);
    CHECK(c.points.rows() == 0);
    CHECK(c.empty_warning);
}

TEST_CASE("xyz valid count equals brute-force scan on random map") {
    CounterRng rng(3);
    std::vector<float> data(4 * 4 * 3);
    for (std::size_t p = 0; p < 16; ++p) {
        const bool invalid = rng.uniform() < 0.4;
        for (int c = 0; c < 3; ++c)
            data[p * 3 + static_cast<std::size_t>(c)] =
                invalid ? 0.f : static_cast<float>(rng.uniform() + 0.1);
    }
    std::size_t brute = 0;
    for (std::size_t p = 0; p < 16; ++p)
        if (data[p * 3] != 0.f || data[p * 3 + 1] != 0.f || data[p * 3 + 2] != 0.f) ++brute;
    const std::string path = tmp_path("xyz_rand.mt");
    save_tensor(path, TensorFile::from_f32({4, 4, 3}, data));
    CHECK(static_cast<std::size_t>(load_xyz_map(path, 4, 4).points.rows()) == brute);
}

TEST_CASE("validation flags stage-count mismatch, missing files, and passes clean sets") {
    const std::string root = tmp_path("val_ds");
    fs::remove_all(root);
    SynthConfig cfg;
    cfg.sample_count = 4;
    cfg.grid_side = 6;
    cfg.channels = 4;
    cfg.plane_grid = 12;
    cfg.anomaly_rate = 0.25;
    cfg.seed = 5;
    generate_synthetic_dataset(cfg, root);

    Dataset ds = load_dataset(root + "/dataset.json");
    CHECK(validate_dataset(ds).ok());

    SUBCASE("stage-count mismatch is reported") {
        ds.samples[1].image_feature_paths.pop_back();
        ValidationReport r = validate_dataset(ds);
        REQUIRE_FALSE(r.ok());
        bool found = false;
        for (const auto& i : r.issues) found |= i.message.find("stage") != std::string::npos;
        CHECK(found);
    }
    SUBCASE("missing file names the sample") {
        ds.samples[2].cloud_path = "nope/missing.mt";
        ValidationReport r = validate_dataset(ds);
        REQUIRE_FALSE(r.ok());
        bool found = false;
        for (const auto& i : r.issues) found |= i.sample_id == ds.samples[2].sample_id;
        CHECK(found);
    }
    SUBCASE("validation is total even on a thoroughly broken manifest") {
        for (auto& s : ds.samples) {
            s.image_feature_paths = {"gone.mt"};
            s.cloud_path = "also_gone.mt";
            s.mask_path = "still_gone.mt";
        }
        CHECK_FALSE(validate_dataset(ds).ok());  // reports, never throws
    }
}

TEST_CASE("manifest save/load round-trip") {
    const std::string root = tmp_path("manifest_rt");
    fs::remove_all(root);
    fs::create_directories(root);
    Dataset ds;
    ds.root = root;
    SampleManifest m;
    m.sample_id = "a";
    m.image_feature_paths = {"a/s0.mt", "a/s1.mt"};
    m.cloud_path = "a/xyz.mt";
    m.xyz_map_shape = {{8, 9}};
    m.intrinsics = PinholeIntrinsics{500, 500, 4, 4.5};
    m.label = SampleLabel::anomalous;
    m.mask_path = "a/mask.mt";
    ds.samples.push_back(m);
    save_dataset(root + "/dataset.json", ds);
    Dataset back = load_dataset(root + "/dataset.json");
    REQUIRE(back.samples.size() == 1);
    CHECK(back.samples[0].sample_id == "a");
    CHECK(back.samples[0].image_feature_paths == m.image_feature_paths);
    CHECK(back.samples[0].xyz_map_shape == m.xyz_map_shape);
    CHECK(back.samples[0].intrinsics->fx == 500);
    CHECK(back.samples[0].label == SampleLabel::anomalous);
}
