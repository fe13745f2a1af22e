#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "muscore/errors.hpp"

namespace muscore {

enum class Modality { image, cloud };

/// Per-sample, per-stage patch features. Image stacks are organized on a
/// square grid; cloud stacks carry group centers plus the curvature gate
/// flags produced by grouping.
struct PatchFeatureStack {
    Modality modality = Modality::image;
    std::vector<Eigen::MatrixXd> stages;  // stage s: M x C_s
    std::size_t grid_side = 0;            // image modality
    Eigen::MatrixXd group_centers;        // cloud modality, M_P x 3
    std::vector<std::uint8_t> high_curvature_flags;  // cloud modality

    std::size_t patch_count() const {
        return stages.empty() ? 0 : static_cast<std::size_t>(stages[0].rows());
    }
    std::size_t stage_count() const { return stages.size(); }
};

/// Row-major indices of the r x r window centered at patch m, clipped at
/// the grid border. r must be odd.
std::vector<std::size_t> neighborhood_2d(std::size_t grid_side, std::size_t m, std::size_t r);

/// The r nearest group centers to center m (self included at distance 0),
/// ties by smallest index.
std::vector<std::size_t> neighborhood_3d(const Eigen::MatrixXd& group_centers, std::size_t m,
                                         std::size_t r);

/// Similarity-weighted pooling: each neighbor is weighted by
/// exp(-L2 distance to the center feature), then averaged.
Eigen::VectorXd swpool(const Eigen::VectorXd& center_feature,
                       const Eigen::MatrixXd& neighbor_features);

/// Plain average pooling over the same window; kept for ablation tests.
Eigen::VectorXd apool(const Eigen::MatrixXd& neighbor_features);

/// Multi-degree aggregation: swpool per degree, elementwise mean across
/// degrees. High-curvature cloud patches use the r=1 result for every
/// degree so the fusion arity stays uniform.
PatchFeatureStack aggregate_stack(const PatchFeatureStack& stack,
                                  const std::vector<std::size_t>& degrees, int workers = 1);

}  // namespace muscore
