#pragma once

#include <vector>

#include <Eigen/Dense>

#include "muscore/msm.hpp"
#include "muscore/tensor_io.hpp"

namespace muscore {

enum class MapSpace { pixel, point };

/// Dense anomaly scores at native resolution; sample_score is the max.
struct AnomalyMap {
    MapSpace space = MapSpace::pixel;
    std::size_t height = 0;  // pixel space
    std::size_t width = 0;   // pixel space
    std::vector<double> values;
    double sample_score = 0.0;

    static AnomalyMap pixel_map(std::size_t h, std::size_t w, std::vector<double> values);
    static AnomalyMap point_map(std::vector<double> values);
};

/// Corner-aligned bilinear upsampling of the patch grid to H x W.
AnomalyMap upsample_2d(const Eigen::VectorXd& patch_scores, std::size_t grid_side, std::size_t h,
                       std::size_t w);

struct IdwParams {
    double power = 2.0;
    std::size_t k_nn = 3;
    double epsilon = 1e-12;
};

/// Inverse-distance-weighted interpolation of group scores onto points.
/// A point coincident with a center takes that center's score exactly.
std::vector<double> idw_interpolate(const Eigen::MatrixXd& group_centers,
                                    const Eigen::VectorXd& group_scores,
                                    const Eigen::MatrixXd& points, const IdwParams& params);

/// Point scores painted onto pixels through the organized-cloud layout;
/// invalid pixels get 0.
AnomalyMap render_3d_to_pixels(const std::vector<double>& point_scores,
                               const OrganizedPointCloud& cloud);

AnomalyMap fuse_maps(const AnomalyMap& a, const AnomalyMap& b);

double classify(const AnomalyMap& map);

}  // namespace muscore
