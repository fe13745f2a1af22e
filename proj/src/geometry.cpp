#include "muscore/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "muscore/parallel.hpp"

namespace muscore {

namespace {

double sqdist(const PointCloud& cloud, std::size_t a, std::size_t b) {
    return (cloud.at(a) - cloud.at(b)).squaredNorm();
}

/// Indices of the k smallest values, ties by smallest index.
std::vector<std::size_t> smallest_k(const std::vector<double>& values, std::size_t k) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (values[a] != values[b]) return values[a] < values[b];
                          return a < b;
                      });
    order.resize(k);
    return order;
}

}  // namespace

Eigen::MatrixXd GroupSet::centers(const PointCloud& cloud) const {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(groups.size()), 3);
    for (std::size_t i = 0; i < groups.size(); ++i)
        c.row(static_cast<Eigen::Index>(i)) = cloud.at(groups[i].center_index);
    return c;
}

std::size_t lexicographic_seed(const PointCloud& cloud) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < cloud.size(); ++i) {
        const auto a = cloud.at(i);
        const auto b = cloud.at(best);
        if (std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3))
            best = i;
    }
    return best;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t count,
                                               std::size_t seed_index) {
    const std::size_t m = cloud.size();
    if (count < 1 || count > m)
        throw CountExceedsCloud("requested " + std::to_string(count) + " of " + std::to_string(m));

    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    chosen.push_back(seed_index);

    std::vector<double> min_sq(m);
    for (std::size_t i = 0; i < m; ++i) min_sq[i] = sqdist(cloud, i, seed_index);

    while (chosen.size() < count) {
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (min_sq[i] > best_d) {
                best_d = min_sq[i];
                best = i;
            }
        }
        chosen.push_back(best);
        for (std::size_t i = 0; i < m; ++i)
            min_sq[i] = std::min(min_sq[i], sqdist(cloud, i, best));
    }
    return chosen;
}

std::vector<std::size_t> knn_group(const PointCloud& cloud, std::size_t center_index,
                                   std::size_t k) {
    const std::size_t m = cloud.size();
    if (k > m) throw CountExceedsCloud("k=" + std::to_string(k) + " exceeds " + std::to_string(m));
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) d[i] = sqdist(cloud, i, center_index);
    return smallest_k(d, k);
}

double surface_variation(const PointCloud& cloud, std::size_t center_index, std::size_t k_nbr) {
    if (k_nbr < 4) throw DegenerateNeighborhood("k_nbr must be at least 4");
    const auto nbrs = knn_group(cloud, center_index, std::min(k_nbr, cloud.size()));

    Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
    for (std::size_t i : nbrs) mean += cloud.at(i);
    mean /= static_cast<double>(nbrs.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i : nbrs) {
        const Eigen::RowVector3d d = cloud.at(i) - mean;
        cov += d.transpose() * d;
    }
    cov /= static_cast<double>(nbrs.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d lambda = solver.eigenvalues();  // ascending
    const double total = lambda.sum();
    if (total <= 0.0) return 0.0;  // coincident neighborhood
    return std::max(0.0, lambda(0)) / total;
}

PointGroup ipg_regroup(const PointCloud& cloud, std::size_t center_index, std::size_t group_size,
                       std::size_t iter_increment) {
    const std::size_t m = cloud.size();
    if (group_size > m)
        throw CountExceedsCloud("group size exceeds cloud size");
    if (iter_increment < 1 || iter_increment >= group_size)
        throw CountExceedsCloud("iter increment must satisfy 0 < K_iter < K_P");

    PointGroup group;
    group.center_index = center_index;
    group.regrouped = true;
    group.member_indices = knn_group(cloud, center_index, iter_increment);

    std::vector<char> member(m, 0);
    for (std::size_t i : group.member_indices) member[i] = 1;

    // d(t, p) = min over current members of |p - member|; updated
    // incrementally against the points added in the previous round.
    std::vector<double> dist_sq(m, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> last_added = group.member_indices;

    while (group.member_indices.size() < group_size) {
        for (std::size_t i = 0; i < m; ++i) {
            if (member[i]) continue;
            for (std::size_t j : last_added)
                dist_sq[i] = std::min(dist_sq[i], sqdist(cloud, i, j));
        }

        const std::size_t want =
            std::min(iter_increment, group_size - group.member_indices.size());
        std::vector<std::size_t> candidates;
        std::vector<double> cand_d;
        for (std::size_t i = 0; i < m; ++i) {
            if (!member[i]) {
                candidates.push_back(i);
                cand_d.push_back(dist_sq[i]);
            }
        }
        const auto picks = smallest_k(cand_d, want);
        last_added.clear();
        for (std::size_t p : picks) {
            const std::size_t idx = candidates[p];
            member[idx] = 1;
            group.member_indices.push_back(idx);
            last_added.push_back(idx);
        }
    }
    return group;
}

GroupSet build_groups(const PointCloud& cloud, const GroupingParams& params, int workers) {
    const std::size_t m = cloud.size();
    if (params.group_size > m || params.group_count > m)
        throw CountExceedsCloud("cloud of " + std::to_string(m) + " points cannot host " +
                                std::to_string(params.group_count) + " groups of " +
                                std::to_string(params.group_size));

    GroupSet set;
    set.params = params;
    const auto centers =
        farthest_point_sample(cloud, params.group_count, lexicographic_seed(cloud));

    set.groups.resize(centers.size());
    parallel_for(centers.size(), workers, [&](std::size_t g) {
        const std::size_t c = centers[g];
        PointGroup group;
        group.center_index = c;
        group.member_indices = knn_group(cloud, c, params.group_size);
        group.curvature = surface_variation(cloud, c, params.group_size);
        if (group.curvature > params.curvature_threshold) {
            const double curvature = group.curvature;
            group = ipg_regroup(cloud, c, params.group_size, params.iter_increment);
            group.curvature = curvature;
        }
        set.groups[g] = std::move(group);
    });
    return set;
}

std::string group_set_to_json(const GroupSet& set) {
    nlohmann::json j;
    j["params"] = {{"group_count", set.params.group_count},
                   {"group_size", set.params.group_size},
                   {"iter_increment", set.params.iter_increment},
                   {"curvature_threshold", set.params.curvature_threshold}};
    j["groups"] = nlohmann::json::array();
    for (const auto& g : set.groups) {
        j["groups"].push_back({{"center", g.center_index},
                               {"members", g.member_indices},
                               {"curvature", g.curvature},
                               {"regrouped", g.regrouped}});
    }
    return j.dump();
}

GroupSet group_set_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    GroupSet set;
    set.params.group_count = j.at("params").at("group_count").get<std::size_t>();
    set.params.group_size = j.at("params").at("group_size").get<std::size_t>();
    set.params.iter_increment = j.at("params").at("iter_increment").get<std::size_t>();
    set.params.curvature_threshold = j.at("params").at("curvature_threshold").get<double>();
    for (const auto& gj : j.at("groups")) {
        PointGroup g;
        g.center_index = gj.at("center").get<std::size_t>();
        g.member_indices = gj.at("members").get<std::vector<std::size_t>>();
        g.curvature = gj.at("curvature").get<double>();
        g.regrouped = gj.at("regrouped").get<bool>();
        set.groups.push_back(std::move(g));
    }
    return set;
}

}  // namespace muscore
