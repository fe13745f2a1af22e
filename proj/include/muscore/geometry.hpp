#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "muscore/errors.hpp"

namespace muscore {

/// Unordered point cloud, rows are XYZ in meters.
struct PointCloud {
    Eigen::MatrixXd points;  // M x 3

    std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
    Eigen::RowVector3d at(std::size_t i) const { return points.row(static_cast<Eigen::Index>(i)); }
};

struct PointGroup {
    std::size_t center_index = 0;
    std::vector<std::size_t> member_indices;  // exactly K_P, center included
    double curvature = 0.0;
    bool regrouped = false;
};

struct GroupingParams {
    std::size_t group_count = 1024;   // M_P
    std::size_t group_size = 128;     // K_P
    std::size_t iter_increment = 80;  // K_iter
    double curvature_threshold = 0.01;
};

struct GroupSet {
    std::vector<PointGroup> groups;
    GroupingParams params;

    Eigen::MatrixXd centers(const PointCloud& cloud) const;
};

/// Greedy farthest point sampling. The first index is seed_index; every
/// following index maximizes the minimum distance to the chosen set,
/// ties broken by smallest index.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t count,
                                               std::size_t seed_index);

/// Index of the lexicographically smallest (x, y, z) point; the
/// deterministic FPS seed used by build_groups.
std::size_t lexicographic_seed(const PointCloud& cloud);

/// The k nearest points to the center (center itself at distance 0),
/// ties broken by smallest index.
std::vector<std::size_t> knn_group(const PointCloud& cloud, std::size_t center_index, std::size_t k);

/// PCA surface variation of the center's k_nbr-neighborhood:
/// lambda0 / (lambda0 + lambda1 + lambda2), bounded by 1/3.
/// A fully degenerate neighborhood returns 0.
double surface_variation(const PointCloud& cloud, std::size_t center_index, std::size_t k_nbr);

/// Curvature-corrective regrouping: seed with the iter_increment nearest
/// points of the center, then repeatedly add the iter_increment candidates
/// closest to the current group (min distance over members) until the
/// group holds group_size points; the last round truncates.
PointGroup ipg_regroup(const PointCloud& cloud, std::size_t center_index, std::size_t group_size,
                       std::size_t iter_increment);

/// FPS centers -> KNN groups -> curvature gate -> IPG where the gate fires.
GroupSet build_groups(const PointCloud& cloud, const GroupingParams& params, int workers = 1);

std::string group_set_to_json(const GroupSet& set);
GroupSet group_set_from_json(const std::string& text);

}  // namespace muscore
