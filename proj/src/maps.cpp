#include "muscore/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace muscore {

namespace {

double max_value(const std::vector<double>& v) {
    if (v.empty()) throw EmptyMap("anomaly map has no values");
    return *std::max_element(v.begin(), v.end());
}

}  // namespace

AnomalyMap AnomalyMap::pixel_map(std::size_t h, std::size_t w, std::vector<double> values) {
    if (values.size() != h * w) throw ShapeMismatch("pixel map size mismatch");
    AnomalyMap m;
    m.space = MapSpace::pixel;
    m.height = h;
    m.width = w;
    m.values = std::move(values);
    m.sample_score = max_value(m.values);
    return m;
}

AnomalyMap AnomalyMap::point_map(std::vector<double> values) {
    AnomalyMap m;
    m.space = MapSpace::point;
    m.values = std::move(values);
    m.sample_score = max_value(m.values);
    return m;
}

AnomalyMap upsample_2d(const Eigen::VectorXd& patch_scores, std::size_t grid_side, std::size_t h,
                       std::size_t w) {
    if (static_cast<std::size_t>(patch_scores.size()) != grid_side * grid_side)
        throw ShapeMismatch("patch vector does not match grid");
    if (h < grid_side || w < grid_side)
        throw ShapeMismatch("target resolution smaller than grid");

    std::vector<double> out(h * w);
    for (std::size_t r = 0; r < h; ++r) {
        const double gr = h > 1 ? double(r) * double(grid_side - 1) / double(h - 1) : 0.0;
        const std::size_t r0 = std::min<std::size_t>(static_cast<std::size_t>(gr), grid_side - 1);
        const std::size_t r1 = std::min(r0 + 1, grid_side - 1);
        const double fr = gr - double(r0);
        for (std::size_t c = 0; c < w; ++c) {
            const double gc = w > 1 ? double(c) * double(grid_side - 1) / double(w - 1) : 0.0;
            const std::size_t c0 = std::min<std::size_t>(static_cast<std::size_t>(gc), grid_side - 1);
            const std::size_t c1 = std::min(c0 + 1, grid_side - 1);
            const double fc = gc - double(c0);
            const double top = (1.0 - fc) * patch_scores(static_cast<Eigen::Index>(r0 * grid_side + c0)) +
                               fc * patch_scores(static_cast<Eigen::Index>(r0 * grid_side + c1));
            const double bot = (1.0 - fc) * patch_scores(static_cast<Eigen::Index>(r1 * grid_side + c0)) +
                               fc * patch_scores(static_cast<Eigen::Index>(r1 * grid_side + c1));
            out[r * w + c] = (1.0 - fr) * top + fr * bot;
        }
    }
    return AnomalyMap::pixel_map(h, w, std::move(out));
}

std::vector<double> idw_interpolate(const Eigen::MatrixXd& group_centers,
                                    const Eigen::VectorXd& group_scores,
                                    const Eigen::MatrixXd& points, const IdwParams& params) {
    const std::size_t g = static_cast<std::size_t>(group_centers.rows());
    if (g == 0 || params.power <= 0.0) throw Error("IDW needs at least one group and power > 0");
    const std::size_t k = std::min(params.k_nn, g);

    std::vector<double> out(static_cast<std::size_t>(points.rows()));
    std::vector<std::size_t> order(g);
    std::vector<double> d(g);
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
        for (std::size_t i = 0; i < g; ++i)
            d[i] = (points.row(p) - group_centers.row(static_cast<Eigen::Index>(i))).norm();
        std::iota(order.begin(), order.end(), std::size_t(0));
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (d[a] != d[b]) return d[a] < d[b];
                              return a < b;
                          });
        double num = 0.0, den = 0.0;
        bool exact = false;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t c = order[i];
            if (d[c] == 0.0) {
                out[static_cast<std::size_t>(p)] = group_scores(static_cast<Eigen::Index>(c));
                exact = true;
                break;
            }
            const double w = 1.0 / (std::pow(d[c], params.power) + params.epsilon);
            num += w * group_scores(static_cast<Eigen::Index>(c));
            den += w;
        }
        if (!exact) out[static_cast<std::size_t>(p)] = num / den;
    }
    return out;
}

AnomalyMap render_3d_to_pixels(const std::vector<double>& point_scores,
                               const OrganizedPointCloud& cloud) {
    if (point_scores.size() != static_cast<std::size_t>(cloud.points.rows()))
        throw ShapeMismatch("point score count does not match cloud");
    std::vector<double> out(cloud.height * cloud.width, 0.0);
    for (std::size_t pix = 0; pix < out.size(); ++pix) {
        const std::int64_t point = cloud.pixel_to_point[pix];
        if (point >= 0) out[pix] = point_scores[static_cast<std::size_t>(point)];
    }
    return AnomalyMap::pixel_map(cloud.height, cloud.width, std::move(out));
}

AnomalyMap fuse_maps(const AnomalyMap& a, const AnomalyMap& b) {
    if (a.space != b.space || a.height != b.height || a.width != b.width ||
        a.values.size() != b.values.size())
        throw SpaceMismatch("cannot fuse maps with different spaces");
    AnomalyMap out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    out.sample_score = max_value(out.values);
    return out;
}

double classify(const AnomalyMap& map) {
    return max_value(map.values);
}

}  // namespace muscore
