#pragma once

#include <vector>

#include <Eigen/Dense>

#include "muscore/snamd.hpp"

namespace muscore {

/// Penultimate-stage feature row of the argmax-score patch, L2-normalized.
Eigen::VectorXd salient_feature(const PatchFeatureStack& stack, const Eigen::VectorXd& patch_scores);

/// Concatenation of per-modality salient features (each already normalized).
Eigen::VectorXd concat_salient(const Eigen::VectorXd& image_feature,
                               const Eigen::VectorXd& cloud_feature);

/// Cosine similarity matrix of row-stacked salient features, negatives
/// clamped to 0, zero diagonal.
Eigen::MatrixXd similarity_graph(const Eigen::MatrixXd& features);

/// Row i selects the k most similar samples (self excluded, ties by
/// smallest index).
Eigen::MatrixXd window_mask(const Eigen::MatrixXd& similarity, std::size_t k);

struct RescoreResult {
    Eigen::VectorXd scores;
    std::vector<std::size_t> isolated;  // rows with zero masked mass, kept at c_i
};

/// One-step constrained propagation: c_hat = (D^-1 (M .* W) c + c) / 2.
RescoreResult rescore(const Eigen::VectorXd& scores, const Eigen::MatrixXd& similarity,
                      const Eigen::MatrixXd& mask);

struct ResconDiagnostics {
    std::vector<std::vector<std::size_t>> neighbor_ids;
    std::vector<std::vector<double>> neighbor_weights;
};

ResconDiagnostics rescon_diagnostics(const Eigen::MatrixXd& similarity,
                                     const Eigen::MatrixXd& mask);

}  // namespace muscore
