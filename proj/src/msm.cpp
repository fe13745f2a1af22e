#include "muscore/msm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "muscore/parallel.hpp"

namespace muscore {

namespace {

/// Per-row min distance from Q to all rows of G, via the expanded
/// squared-distance identity.
Eigen::VectorXd min_row_distances(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g) {
    const Eigen::VectorXd q2 = q.rowwise().squaredNorm();
    const Eigen::VectorXd g2 = g.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = (-2.0 * q * g.transpose());
    d2.colwise() += q2;
    d2.rowwise() += g2.transpose();
    return d2.rowwise().minCoeff().cwiseMax(0.0).cwiseSqrt();
}

double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

// splitmix64, the counter-based generator used for all seeded shuffles.
std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

ScoreTensor mutual_score(const PatchFeatureStack& query,
                         const std::vector<const PatchFeatureStack*>& gallery, int workers) {
    ScoreTensor out;
    const std::size_t stage_count = query.stage_count();
    for (const auto* g : gallery) {
        if (g->stage_count() != stage_count)
            throw DimensionMismatch("gallery stage count differs from query");
        for (std::size_t s = 0; s < stage_count; ++s)
            if (g->stages[s].cols() != query.stages[s].cols())
                throw DimensionMismatch("feature dimension differs at stage " + std::to_string(s));
    }

    out.stages.assign(stage_count, Eigen::MatrixXd());
    for (std::size_t s = 0; s < stage_count; ++s) {
        out.stages[s].resize(query.stages[s].rows(), static_cast<Eigen::Index>(gallery.size()));
        parallel_for(gallery.size(), workers, [&, s](std::size_t j) {
            out.stages[s].col(static_cast<Eigen::Index>(j)) =
                min_row_distances(query.stages[s], gallery[j]->stages[s]);
        });
    }
    return out;
}

double interval_average(const std::vector<double>& scores, double percent) {
    if (scores.empty()) throw EmptyScoreSet("interval average of empty score set");
    if (percent <= 0.0 || percent > 100.0)
        throw Error("interval percent must be in (0, 100]");

    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(percent / 100.0 * static_cast<double>(scores.size()))));
    std::vector<double> sorted = scores;
    std::stable_sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += sorted[i];
    return sum / static_cast<double>(k);
}

Eigen::VectorXd fuse_stages(const std::vector<Eigen::VectorXd>& per_stage_scores) {
    if (per_stage_scores.empty()) throw Error("no stages to fuse");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(per_stage_scores[0].size());
    for (const auto& v : per_stage_scores) {
        if (v.size() != sum.size()) throw DimensionMismatch("stage score length mismatch");
        sum += v;
    }
    return sum / static_cast<double>(per_stage_scores.size());
}

namespace {

std::vector<std::size_t> nearest_group_per_point(const Eigen::MatrixXd& points,
                                                 const Eigen::MatrixXd& group_centers) {
    std::vector<std::size_t> owner(static_cast<std::size_t>(points.rows()), 0);
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_g = 0;
        for (Eigen::Index g = 0; g < group_centers.rows(); ++g) {
            const double d = (points.row(p) - group_centers.row(g)).squaredNorm();
            if (d < best) {
                best = d;
                best_g = static_cast<std::size_t>(g);
            }
        }
        owner[p] = best_g;
    }
    return owner;
}

}  // namespace

ProjectionMap build_projection_map(const OrganizedPointCloud& cloud, std::size_t grid_side,
                                   const Eigen::MatrixXd& group_centers) {
    ProjectionMap map;
    map.patch_points.assign(grid_side * grid_side, {});
    map.point_patch.assign(static_cast<std::size_t>(cloud.points.rows()), -1);

    for (std::size_t row = 0; row < cloud.height; ++row) {
        const std::size_t pr = row * grid_side / cloud.height;
        for (std::size_t col = 0; col < cloud.width; ++col) {
            const std::int64_t point = cloud.pixel_to_point[row * cloud.width + col];
            if (point < 0) continue;
            const std::size_t pc = col * grid_side / cloud.width;
            const std::size_t patch = pr * grid_side + pc;
            map.patch_points[patch].push_back(static_cast<std::size_t>(point));
            map.point_patch[static_cast<std::size_t>(point)] =
                static_cast<std::ptrdiff_t>(patch);
        }
    }
    map.point_owner_group = nearest_group_per_point(cloud.points, group_centers);
    return map;
}

ProjectionMap build_projection_map(const Eigen::MatrixXd& points, const PinholeIntrinsics& k,
                                   std::size_t height, std::size_t width, std::size_t grid_side,
                                   const Eigen::MatrixXd& group_centers) {
    ProjectionMap map;
    map.patch_points.assign(grid_side * grid_side, {});
    map.point_patch.assign(static_cast<std::size_t>(points.rows()), -1);

    for (Eigen::Index p = 0; p < points.rows(); ++p) {
        const double z = points(p, 2);
        if (z <= 0.0) continue;
        const std::ptrdiff_t u = static_cast<std::ptrdiff_t>(std::llround(k.fx * points(p, 0) / z + k.cx));
        const std::ptrdiff_t v = static_cast<std::ptrdiff_t>(std::llround(k.fy * points(p, 1) / z + k.cy));
        if (u < 0 || v < 0 || u >= static_cast<std::ptrdiff_t>(width) ||
            v >= static_cast<std::ptrdiff_t>(height))
            continue;
        const std::size_t pr = static_cast<std::size_t>(v) * grid_side / height;
        const std::size_t pc = static_cast<std::size_t>(u) * grid_side / width;
        const std::size_t patch = pr * grid_side + pc;
        map.patch_points[patch].push_back(static_cast<std::size_t>(p));
        map.point_patch[static_cast<std::size_t>(p)] = static_cast<std::ptrdiff_t>(patch);
    }
    map.point_owner_group = nearest_group_per_point(points, group_centers);
    return map;
}

std::vector<double> cae_align(const ProjectionMap& map, const Eigen::VectorXd& group_scores) {
    std::vector<double> out(map.patch_points.size(), 0.0);
    for (std::size_t m = 0; m < map.patch_points.size(); ++m) {
        const auto& pts = map.patch_points[m];
        if (pts.empty()) continue;
        double sum = 0.0;
        for (std::size_t p : pts) sum += group_scores(static_cast<Eigen::Index>(map.point_owner_group[p]));
        out[m] = sum / static_cast<double>(pts.size());
    }
    return out;
}

std::vector<double> rescale_to_range(const std::vector<double>& source,
                                     const std::vector<double>& target) {
    if (source.empty() || target.empty()) throw EmptyScoreSet("rescale with empty set");
    const auto [smin_it, smax_it] = std::minmax_element(source.begin(), source.end());
    const auto [tmin_it, tmax_it] = std::minmax_element(target.begin(), target.end());
    const double smin = *smin_it, smax = *smax_it;
    const double tmin = *tmin_it, tmax = *tmax_it;

    std::vector<double> out(source.size());
    if (smax == smin) {
        std::fill(out.begin(), out.end(), tmin);
        return out;
    }
    const double scale = (tmax - tmin) / (smax - smin);
    for (std::size_t i = 0; i < source.size(); ++i) out[i] = tmin + (source[i] - smin) * scale;
    return out;
}

std::vector<double> cae_enhance(const std::vector<double>& scores_2d,
                                const std::vector<double>& aligned_rescaled) {
    if (scores_2d.size() != aligned_rescaled.size())
        throw LengthMismatch("CAE score sets differ in length");
    const double lambda = std::clamp(1.0 - population_std(aligned_rescaled), 0.0, 1.0);
    std::vector<double> out(scores_2d.size());
    for (std::size_t j = 0; j < scores_2d.size(); ++j)
        out[j] = scores_2d[j] + lambda * std::max(aligned_rescaled[j], scores_2d[j]);
    return out;
}

void apply_cae(ScoreTensor& image_scores, ScoreTensor& cloud_scores, const ProjectionMap& map,
               const std::vector<std::vector<std::size_t>>& group_members, int workers) {
    const ScoreTensor image_snapshot = image_scores;
    const ScoreTensor cloud_snapshot = cloud_scores;
    const std::size_t gallery = image_snapshot.gallery_size();
    if (gallery != cloud_snapshot.gallery_size())
        throw LengthMismatch("modalities disagree on gallery size");

    // 3D -> 2D: aligned per-patch score sets from the owning groups.
    for (std::size_t s = 0; s < image_scores.stages.size(); ++s) {
        const std::size_t cs = std::min(s, cloud_snapshot.stages.size() - 1);
        Eigen::MatrixXd& target = image_scores.stages[s];
        parallel_for(image_snapshot.patch_count(), workers, [&, s, cs](std::size_t m) {
            std::vector<double> a2d(gallery), p2i(gallery);
            for (std::size_t j = 0; j < gallery; ++j) {
                a2d[j] = image_snapshot.stages[s](static_cast<Eigen::Index>(m),
                                                  static_cast<Eigen::Index>(j));
                const auto& pts = map.patch_points[m];
                if (pts.empty()) {
                    p2i[j] = 0.0;
                } else {
                    double sum = 0.0;
                    for (std::size_t p : pts)
                        sum += cloud_snapshot.stages[cs](
                            static_cast<Eigen::Index>(map.point_owner_group[p]),
                            static_cast<Eigen::Index>(j));
                    p2i[j] = sum / static_cast<double>(pts.size());
                }
            }
            const auto enhanced = cae_enhance(a2d, rescale_to_range(p2i, a2d));
            for (std::size_t j = 0; j < gallery; ++j)
                target(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = enhanced[j];
        });
    }

    // 2D -> 3D: each group averages the 2D patch scores covering its
    // member points.
    for (std::size_t s = 0; s < cloud_scores.stages.size(); ++s) {
        const std::size_t is = std::min(s, image_snapshot.stages.size() - 1);
        Eigen::MatrixXd& target = cloud_scores.stages[s];
        parallel_for(cloud_snapshot.patch_count(), workers, [&, s, is](std::size_t n) {
            std::vector<double> a3d(gallery), i2p(gallery);
            for (std::size_t j = 0; j < gallery; ++j) {
                a3d[j] = cloud_snapshot.stages[s](static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(j));
                double sum = 0.0;
                std::size_t count = 0;
                for (std::size_t p : group_members[n]) {
                    if (p >= map.point_patch.size()) continue;
                    const std::ptrdiff_t patch = map.point_patch[p];
                    if (patch < 0) continue;
                    sum += image_snapshot.stages[is](static_cast<Eigen::Index>(patch),
                                                     static_cast<Eigen::Index>(j));
                    ++count;
                }
                i2p[j] = count ? sum / static_cast<double>(count) : 0.0;
            }
            const auto enhanced = cae_enhance(a3d, rescale_to_range(i2p, a3d));
            for (std::size_t j = 0; j < gallery; ++j)
                target(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = enhanced[j];
        });
    }
}

namespace {

Eigen::VectorXd reduce_tensor(const ScoreTensor& tensor, double interval_percent) {
    std::vector<Eigen::VectorXd> per_stage;
    for (const auto& stage : tensor.stages) {
        Eigen::VectorXd v(stage.rows());
        for (Eigen::Index m = 0; m < stage.rows(); ++m) {
            std::vector<double> set(static_cast<std::size_t>(stage.cols()));
            for (Eigen::Index j = 0; j < stage.cols(); ++j)
                set[static_cast<std::size_t>(j)] = stage(m, j);
            v(m) = interval_average(set, interval_percent);
        }
        per_stage.push_back(std::move(v));
    }
    return fuse_stages(per_stage);
}

}  // namespace

SampleScoreResult score_sample(std::size_t query_index, const std::vector<SampleStacks>& samples,
                               const std::vector<std::size_t>& gallery_indices,
                               const ProjectionMap* projection,
                               const std::vector<std::vector<std::size_t>>* group_members,
                               double interval_percent, bool cae_enabled, int workers) {
    const SampleStacks& query = samples[query_index];
    SampleScoreResult result;

    // Self-exclusion is the caller's contract too, but enforce it here.
    std::vector<std::size_t> gallery;
    for (std::size_t j : gallery_indices)
        if (j != query_index) gallery.push_back(j);
    if (gallery.empty()) throw EmptyScoreSet("no gallery samples for query");

    std::optional<ScoreTensor> image_scores, cloud_scores;
    if (query.image) {
        std::vector<const PatchFeatureStack*> g;
        for (std::size_t j : gallery) g.push_back(&*samples[j].image);
        image_scores = mutual_score(*query.image, g, workers);
    }
    if (query.cloud) {
        std::vector<const PatchFeatureStack*> g;
        for (std::size_t j : gallery) g.push_back(&*samples[j].cloud);
        cloud_scores = mutual_score(*query.cloud, g, workers);
    }

    if (cae_enabled && image_scores && cloud_scores && projection && group_members)
        apply_cae(*image_scores, *cloud_scores, *projection, *group_members, workers);

    if (image_scores) result.image = reduce_tensor(*image_scores, interval_percent);
    if (cloud_scores) result.cloud = reduce_tensor(*cloud_scores, interval_percent);
    return result;
}

std::vector<std::vector<std::size_t>> partition_subsets(std::size_t sample_count, std::size_t g,
                                                        std::uint64_t seed) {
    if (g < 1 || g > sample_count)
        throw TooManySubsets("g=" + std::to_string(g) + " for " + std::to_string(sample_count) +
                             " samples");

    std::vector<std::size_t> order(sample_count);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::uint64_t state = seed;
    for (std::size_t i = sample_count; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(splitmix64(state) % i);
        std::swap(order[i - 1], order[j]);
    }

    std::vector<std::vector<std::size_t>> subsets(g);
    for (std::size_t i = 0; i < sample_count; ++i) subsets[i % g].push_back(order[i]);
    for (auto& s : subsets) std::sort(s.begin(), s.end());
    return subsets;
}

}  // namespace muscore
