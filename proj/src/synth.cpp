#include "muscore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "muscore/rng.hpp"
#include "muscore/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace muscore {

namespace {

void check_config(const SynthConfig& c) {
    if (c.sample_count < 2 || c.grid_side < 2 || c.channels < 2 || c.stages < 2 ||
        c.prototype_count < 1 || c.plane_grid < c.grid_side)
        throw InvalidConfig("synthetic config out of range");
    if (c.anomaly_rate < 0.0 || c.anomaly_rate > 1.0)
        throw InvalidConfig("anomaly rate must be in [0, 1]");
    if (c.anomaly_rate > 0.0 && c.anomaly_magnitude <= 3.0 * c.noise_sigma)
        throw InvalidConfig("anomaly magnitude must exceed 3x the prototype noise sigma");
}

std::uint64_t patch_hash(std::uint64_t m) {
    std::uint64_t z = m * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    return z ^ (z >> 31);
}

Eigen::VectorXd random_unit(CounterRng& rng, std::size_t dim) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
    const double n = v.norm();
    return n > 0.0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(static_cast<Eigen::Index>(dim), 0);
}

/// Walk outward along dir until the feature clears every prototype by
/// the configured margin.
Eigen::VectorXd plant_outlier(const Eigen::VectorXd& base, const Eigen::VectorXd& dir,
                              const std::vector<Eigen::VectorXd>& prototypes, double margin) {
    Eigen::VectorXd f = base + margin * dir;
    for (int step = 0; step < 64; ++step) {
        double min_d = std::numeric_limits<double>::infinity();
        for (const auto& p : prototypes) min_d = std::min(min_d, (f - p).norm());
        if (min_d >= margin) break;
        f += margin * dir;
    }
    return f;
}

}  // namespace

SynthSummary generate_synthetic_dataset(const SynthConfig& config, const std::string& out_dir) {
    check_config(config);
    fs::create_directories(out_dir);

    const std::size_t n = config.sample_count;
    const std::size_t gs = config.grid_side;
    const std::size_t patches = gs * gs;
    const std::size_t res = config.plane_grid;

    // Which samples carry anomalies: first round(rate * N) of a seeded
    // permutation, at least one when the rate is positive.
    std::size_t anomaly_count =
        static_cast<std::size_t>(std::floor(config.anomaly_rate * double(n) + 0.5));
    if (config.anomaly_rate > 0.0) anomaly_count = std::max<std::size_t>(1, anomaly_count);

    CounterRng master(config.seed, 0xA11C);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[master.below(i)]);
    std::vector<char> is_anomalous(n, 0);
    for (std::size_t i = 0; i < anomaly_count; ++i) is_anomalous[order[i]] = 1;

    // Shared prototype bank, one set per stage.
    CounterRng proto_rng(config.seed, 0xB0);
    std::vector<std::vector<Eigen::VectorXd>> prototypes(config.stages);
    for (std::size_t s = 0; s < config.stages; ++s)
        for (std::size_t p = 0; p < config.prototype_count; ++p) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(config.channels));
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = proto_rng.gaussian();
            prototypes[s].push_back(std::move(v));
        }

    Dataset dataset;
    dataset.root = out_dir;
    json gt;
    gt["samples"] = json::array();
    SynthSummary summary;

    const std::size_t block = res / gs;

    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = "sample_" + std::to_string(i);
        fs::create_directories(fs::path(out_dir) / id);
        CounterRng rng(config.seed, 0x5A00 + i);

        // 2D anomaly block in patch coordinates.
        bool anomalous = is_anomalous[i] != 0;
        std::size_t a_size = 0, a_row = 0, a_col = 0;
        if (anomalous) {
            a_size = 2 + rng.below(3);
            a_row = rng.below(gs - a_size + 1);
            a_col = rng.below(gs - a_size + 1);
        }
        auto in_anomaly_patch = [&](std::size_t pr, std::size_t pc) {
            return anomalous && pr >= a_row && pr < a_row + a_size && pc >= a_col &&
                   pc < a_col + a_size;
        };

        SampleManifest m;
        m.sample_id = id;
        for (std::size_t s = 0; s < config.stages; ++s) {
            const Eigen::VectorXd dir = random_unit(rng, config.channels);
            std::vector<float> data(patches * config.channels);
            for (std::size_t p = 0; p < patches; ++p) {
                const std::size_t pr = p / gs, pc = p % gs;
                const auto& proto = prototypes[s][patch_hash(p) % config.prototype_count];
                Eigen::VectorXd f;
                if (in_anomaly_patch(pr, pc)) {
                    f = plant_outlier(proto, dir, prototypes[s], config.anomaly_magnitude);
                } else {
                    f = proto;
                    for (Eigen::Index c = 0; c < f.size(); ++c)
                        f(c) += config.noise_sigma * rng.gaussian();
                }
                for (std::size_t c = 0; c < config.channels; ++c)
                    data[p * config.channels + c] = static_cast<float>(f(static_cast<Eigen::Index>(c)));
            }
            const std::string rel = id + "/stage_" + std::to_string(s) + ".mt";
            save_tensor(resolve_path(dataset, rel),
                        TensorFile::from_f32({patches, config.channels}, std::move(data)));
            m.image_feature_paths.push_back(rel);
        }

        // Organized plane cloud over [0,1]^2; z stays clear of the
        // all-zero invalid marker because x and y never vanish.
        bool bump = anomalous;
        double bx = 0, by = 0, bsigma = 0;
        if (bump) {
            bsigma = (0.03 + 0.03 * rng.uniform());
            bx = 0.15 + 0.7 * rng.uniform();
            by = 0.15 + 0.7 * rng.uniform();
        }
        std::vector<float> xyz(res * res * 3);
        std::vector<std::uint8_t> mask(res * res, 0);
        for (std::size_t r = 0; r < res; ++r) {
            for (std::size_t c = 0; c < res; ++c) {
                const double x = (double(c) + 0.5) / double(res);
                const double y = (double(r) + 0.5) / double(res);
                double z = 0.05 + config.plane_noise * rng.gaussian();
                if (bump) {
                    const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                    const double h = config.bump_amplitude * std::exp(-d2 / (2.0 * bsigma * bsigma));
                    z += h;
                    if (h > 0.2 * config.bump_amplitude) mask[r * res + c] = 255;
                }
                xyz[(r * res + c) * 3 + 0] = static_cast<float>(x);
                xyz[(r * res + c) * 3 + 1] = static_cast<float>(y);
                xyz[(r * res + c) * 3 + 2] = static_cast<float>(z);
                const std::size_t pr = std::min(r / block, gs - 1);
                const std::size_t pc = std::min(c / block, gs - 1);
                if (in_anomaly_patch(pr, pc)) mask[r * res + c] = 255;
            }
        }
        const std::string cloud_rel = id + "/xyz.mt";
        save_tensor(resolve_path(dataset, cloud_rel),
                    TensorFile::from_f32({res, res, 3}, std::move(xyz)));
        m.cloud_path = cloud_rel;
        m.xyz_map_shape = {res, res};

        const std::string mask_rel = id + "/mask.mt";
        const std::size_t mask_pixels =
            static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; }));
        save_tensor(resolve_path(dataset, mask_rel), TensorFile::from_u8({res, res}, std::move(mask)));
        m.mask_path = mask_rel;
        m.label = anomalous ? SampleLabel::anomalous : SampleLabel::normal;
        if (anomalous) summary.anomalous_ids.push_back(id);

        gt["samples"].push_back({{"sample_id", id},
                                 {"label", anomalous ? 1 : 0},
                                 {"anomalous_pixels", mask_pixels}});
        dataset.samples.push_back(std::move(m));
    }

    summary.manifest_path = (fs::path(out_dir) / "dataset.json").string();
    summary.ground_truth_path = (fs::path(out_dir) / "ground_truth.json").string();
    save_dataset(summary.manifest_path, dataset);
    std::ofstream gt_out(summary.ground_truth_path, std::ios::trunc);
    gt_out << gt.dump(2) << "\n";
    return summary;
}

namespace oracle {

std::vector<double> oracle_pairwise_min(const Eigen::MatrixXd& query,
                                        const Eigen::MatrixXd& gallery) {
    std::vector<double> out(static_cast<std::size_t>(query.rows()));
    for (Eigen::Index m = 0; m < query.rows(); ++m) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index n = 0; n < gallery.rows(); ++n) {
            double ss = 0.0;
            for (Eigen::Index c = 0; c < query.cols(); ++c) {
                const double d = query(m, c) - gallery(n, c);
                ss += d * d;
            }
            best = std::min(best, std::sqrt(ss));
        }
        out[static_cast<std::size_t>(m)] = best;
    }
    return out;
}

Eigen::VectorXd oracle_rescore(const Eigen::VectorXd& scores, const Eigen::MatrixXd& similarity,
                               const Eigen::MatrixXd& mask) {
    const Eigen::Index n = scores.size();
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mass = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) mass += mask(i, j) * similarity(i, j);
        if (mass <= 0.0) {
            out(i) = scores(i);
            continue;
        }
        double acc = scores(i) / 2.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = mask(i, j) * similarity(i, j) / mass;
            acc += 0.5 * w * scores(j);
        }
        out(i) = acc;
    }
    return out;
}

}  // namespace oracle

}  // namespace muscore
