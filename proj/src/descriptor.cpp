#include "muscore/descriptor.hpp"

#include <algorithm>
#include <cmath>

namespace muscore {

Eigen::VectorXd geometric_descriptor_partial(const PointGroup& group, const PointCloud& cloud,
                                             std::size_t member_count,
                                             const DescriptorParams& params) {
    const std::size_t n = std::max<std::size_t>(1, std::min(member_count, group.member_indices.size()));

    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i)
        pts.row(static_cast<Eigen::Index>(i)) = cloud.at(group.member_indices[i]);

    const Eigen::RowVector3d mean = pts.colwise().mean();
    const Eigen::MatrixXd centered = pts.rowwise() - mean;
    const Eigen::Matrix3d cov = centered.transpose() * centered / double(n);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d lambda = solver.eigenvalues().cwiseMax(0.0);
    const double lambda_sum = lambda.sum();
    const double variation = lambda_sum > 0.0 ? lambda(0) / lambda_sum : 0.0;

    const Eigen::RowVector3d axis_std = (centered.array().square().colwise().mean()).sqrt();
    const Eigen::VectorXd radii = centered.rowwise().norm();
    const double mean_radius = radii.mean();
    const double std_radius =
        std::sqrt((radii.array() - mean_radius).square().mean());

    Eigen::VectorXd hist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.histogram_bins));
    for (Eigen::Index i = 0; i < radii.size(); ++i) {
        std::size_t bin = static_cast<std::size_t>(radii(i) / params.histogram_bin_width);
        bin = std::min(bin, params.histogram_bins - 1);
        hist(static_cast<Eigen::Index>(bin)) += 1.0 / double(n);
    }

    Eigen::VectorXd out(static_cast<Eigen::Index>(descriptor_dim(params)));
    out << lambda, variation, axis_std.transpose(), mean_radius, std_radius, hist;
    return out;
}

Eigen::VectorXd geometric_descriptor(const PointGroup& group, const PointCloud& cloud,
                                     const DescriptorParams& params) {
    return geometric_descriptor_partial(group, cloud, group.member_indices.size(), params);
}

}  // namespace muscore
