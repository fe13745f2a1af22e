#include "muscore/snamd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "muscore/parallel.hpp"

namespace muscore {

std::vector<std::size_t> neighborhood_2d(std::size_t grid_side, std::size_t m, std::size_t r) {
    if (r % 2 == 0) throw EvenDegree("2-D degree must be odd, got " + std::to_string(r));
    const std::ptrdiff_t side = static_cast<std::ptrdiff_t>(grid_side);
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(r / 2);
    const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(m) / side;
    const std::ptrdiff_t col = static_cast<std::ptrdiff_t>(m) % side;

    std::vector<std::size_t> out;
    for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr) {
        const std::ptrdiff_t rr = row + dr;
        if (rr < 0 || rr >= side) continue;
        for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
            const std::ptrdiff_t cc = col + dc;
            if (cc < 0 || cc >= side) continue;
            out.push_back(static_cast<std::size_t>(rr * side + cc));
        }
    }
    return out;
}

std::vector<std::size_t> neighborhood_3d(const Eigen::MatrixXd& group_centers, std::size_t m,
                                         std::size_t r) {
    const std::size_t n = static_cast<std::size_t>(group_centers.rows());
    if (r > n) throw DegreeExceedsGroups("r=" + std::to_string(r) + " exceeds " + std::to_string(n));

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = (group_centers.row(static_cast<Eigen::Index>(i)) -
                group_centers.row(static_cast<Eigen::Index>(m)))
                   .squaredNorm();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(r), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (d[a] != d[b]) return d[a] < d[b];
                          return a < b;
                      });
    order.resize(r);
    return order;
}

Eigen::VectorXd swpool(const Eigen::VectorXd& center_feature,
                       const Eigen::MatrixXd& neighbor_features) {
    const Eigen::Index n = neighbor_features.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(center_feature.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double w = std::exp(-(neighbor_features.row(j).transpose() - center_feature).norm());
        out += w * neighbor_features.row(j).transpose();
    }
    return out / static_cast<double>(n);
}

Eigen::VectorXd apool(const Eigen::MatrixXd& neighbor_features) {
    return neighbor_features.colwise().mean().transpose();
}

PatchFeatureStack aggregate_stack(const PatchFeatureStack& stack,
                                  const std::vector<std::size_t>& degrees, int workers) {
    if (degrees.empty() || degrees.front() != 1)
        throw Error("degree list must start with 1");
    if (!std::is_sorted(degrees.begin(), degrees.end()))
        throw Error("degree list must be sorted ascending");

    PatchFeatureStack out = stack;
    const std::size_t patches = stack.patch_count();

    for (std::size_t s = 0; s < stack.stage_count(); ++s) {
        const Eigen::MatrixXd& in = stack.stages[s];
        Eigen::MatrixXd& result = out.stages[s];

        parallel_for(patches, workers, [&](std::size_t m) {
            const Eigen::VectorXd center = in.row(static_cast<Eigen::Index>(m)).transpose();
            const bool pinned = stack.modality == Modality::cloud &&
                                m < stack.high_curvature_flags.size() &&
                                stack.high_curvature_flags[m];

            Eigen::VectorXd fused = Eigen::VectorXd::Zero(in.cols());
            for (std::size_t r : degrees) {
                std::vector<std::size_t> nbr;
                if (pinned || r == 1) {
                    nbr = {m};
                } else if (stack.modality == Modality::image) {
                    nbr = neighborhood_2d(stack.grid_side, m, r);
                } else {
                    nbr = neighborhood_3d(stack.group_centers, m, r);
                }
                Eigen::MatrixXd features(static_cast<Eigen::Index>(nbr.size()), in.cols());
                for (std::size_t j = 0; j < nbr.size(); ++j)
                    features.row(static_cast<Eigen::Index>(j)) =
                        in.row(static_cast<Eigen::Index>(nbr[j]));
                fused += swpool(center, features);
            }
            result.row(static_cast<Eigen::Index>(m)) =
                (fused / static_cast<double>(degrees.size())).transpose();
        });
    }
    return out;
}

}  // namespace muscore
