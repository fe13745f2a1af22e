#pragma once

#include <Eigen/Dense>

#include "muscore/geometry.hpp"

namespace muscore {

/// Non-learned geometric group descriptor, the stand-in feature source
/// for clouds without precomputed backbone features. Components:
/// covariance eigenvalues (ascending), surface variation, per-axis
/// offset std (rotation-variant), mean/std radius, and a fixed-edge
/// radial histogram of member offsets. Translation-invariant by
/// mean-centering.
struct DescriptorParams {
    std::size_t histogram_bins = 8;
    double histogram_bin_width = 0.02;
};

constexpr std::size_t descriptor_dim(const DescriptorParams& p) {
    return 3 + 1 + 3 + 2 + p.histogram_bins;
}

Eigen::VectorXd geometric_descriptor(const PointGroup& group, const PointCloud& cloud,
                                     const DescriptorParams& params = {});

/// Same descriptor restricted to the member_count nearest members of the
/// center; used to derive distinct per-stage feature matrices.
Eigen::VectorXd geometric_descriptor_partial(const PointGroup& group, const PointCloud& cloud,
                                             std::size_t member_count,
                                             const DescriptorParams& params = {});

}  // namespace muscore
