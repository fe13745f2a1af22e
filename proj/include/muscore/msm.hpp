#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "muscore/snamd.hpp"
#include "muscore/tensor_io.hpp"
#include "muscore/dataset.hpp"

namespace muscore {

/// Raw mutual scores of one query in one modality: stage s holds an
/// M x G matrix, column j = scores assigned by gallery sample j.
struct ScoreTensor {
    std::vector<Eigen::MatrixXd> stages;

    std::size_t patch_count() const {
        return stages.empty() ? 0 : static_cast<std::size_t>(stages[0].rows());
    }
    std::size_t gallery_size() const {
        return stages.empty() ? 0 : static_cast<std::size_t>(stages[0].cols());
    }
};

/// Min patch distance of every query patch against every gallery sample.
ScoreTensor mutual_score(const PatchFeatureStack& query,
                         const std::vector<const PatchFeatureStack*>& gallery, int workers = 1);

/// Mean of the K = max(1, floor(X/100 * n)) smallest scores; ties keep
/// source order.
double interval_average(const std::vector<double>& scores, double percent);

/// Arithmetic mean across stages, per patch.
Eigen::VectorXd fuse_stages(const std::vector<Eigen::VectorXd>& per_stage_scores);

/// 2D patch <-> 3D point association. patch_points lists, per 2D patch,
/// the indices of the cloud points projecting into its pixel block;
/// point_owner_group is the nearest group center per point and
/// point_patch the covering 2D patch (-1 when off-image).
struct ProjectionMap {
    std::vector<std::vector<std::size_t>> patch_points;
    std::vector<std::size_t> point_owner_group;
    std::vector<std::ptrdiff_t> point_patch;
};

ProjectionMap build_projection_map(const OrganizedPointCloud& cloud, std::size_t grid_side,
                                   const Eigen::MatrixXd& group_centers);
ProjectionMap build_projection_map(const Eigen::MatrixXd& points, const PinholeIntrinsics& k,
                                   std::size_t height, std::size_t width, std::size_t grid_side,
                                   const Eigen::MatrixXd& group_centers);

/// Mean of the owning groups' scores over each patch's point list;
/// empty lists yield 0.
std::vector<double> cae_align(const ProjectionMap& map, const Eigen::VectorXd& group_scores);

/// Affine min-max map of source onto target's range; a constant source
/// collapses to min(target).
std::vector<double> rescale_to_range(const std::vector<double>& source,
                                     const std::vector<double>& target);

/// Eq-style enhancement: a <- a + lambda * max(aligned, a) per gallery
/// sample, lambda = clamp(1 - population std of the aligned set, 0, 1).
std::vector<double> cae_enhance(const std::vector<double>& scores_2d,
                                const std::vector<double>& aligned_rescaled);

/// Symmetric cross-modal enhancement of both raw score tensors, in place.
/// Both directions are computed from the pre-enhancement snapshots.
void apply_cae(ScoreTensor& image_scores, ScoreTensor& cloud_scores, const ProjectionMap& map,
               const std::vector<std::vector<std::size_t>>& group_members, int workers = 1);

struct SampleStacks {
    std::optional<PatchFeatureStack> image;
    std::optional<PatchFeatureStack> cloud;
};

struct SampleScoreResult {
    std::optional<Eigen::VectorXd> image;  // fused per-patch scores A_I
    std::optional<Eigen::VectorXd> cloud;  // fused per-patch scores A_P
};

/// Full per-sample scoring: mutual scoring per modality, optional CAE,
/// then interval average and stage fusion.
SampleScoreResult score_sample(std::size_t query_index, const std::vector<SampleStacks>& samples,
                               const std::vector<std::size_t>& gallery_indices,
                               const ProjectionMap* projection,
                               const std::vector<std::vector<std::size_t>>* group_members,
                               double interval_percent, bool cae_enabled, int workers = 1);

/// Seeded random split into g near-equal parts (sizes differ by <= 1).
std::vector<std::vector<std::size_t>> partition_subsets(std::size_t sample_count, std::size_t g,
                                                        std::uint64_t seed);

}  // namespace muscore
