#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "muscore/dataset.hpp"

namespace muscore {

/// Planted-anomaly multimodal generator. 2D patch features are drawn
/// from a fixed prototype layout shared across samples; anomalies are
/// outlier directions at a guaranteed margin from every prototype. 3D
/// clouds are organized plane grids with Gaussian bump deformations.
struct SynthConfig {
    std::size_t sample_count = 40;
    std::size_t grid_side = 28;
    std::size_t channels = 16;     // C per stage
    std::size_t stages = 3;        // S
    std::size_t prototype_count = 4;
    double anomaly_rate = 0.05;
    double anomaly_magnitude = 3.0;
    double noise_sigma = 0.05;     // prototype noise
    std::size_t plane_grid = 112;  // organized cloud / pixel resolution
    double bump_amplitude = 0.5;
    double plane_noise = 0.002;
    std::uint64_t seed = 0;
};

struct SynthSummary {
    std::vector<std::string> anomalous_ids;
    std::string manifest_path;
    std::string ground_truth_path;
};

SynthSummary generate_synthetic_dataset(const SynthConfig& config, const std::string& out_dir);

namespace oracle {

/// Literal triple-loop min-distance reference for the mutual scorer.
std::vector<double> oracle_pairwise_min(const Eigen::MatrixXd& query,
                                        const Eigen::MatrixXd& gallery);

/// Per-sample expansion of the constrained rescore update.
Eigen::VectorXd oracle_rescore(const Eigen::VectorXd& scores, const Eigen::MatrixXd& similarity,
                               const Eigen::MatrixXd& mask);

}  // namespace oracle

}  // namespace muscore
