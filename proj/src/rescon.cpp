#include "muscore/rescon.hpp"

#include <algorithm>
#include <numeric>

namespace muscore {

Eigen::VectorXd salient_feature(const PatchFeatureStack& stack,
                                const Eigen::VectorXd& patch_scores) {
    if (stack.stage_count() < 2)
        throw StageCountTooSmall("salient feature needs at least two stages");
    if (static_cast<std::size_t>(patch_scores.size()) != stack.patch_count())
        throw DimensionMismatch("score vector does not match patch count");

    Eigen::Index best = 0;
    for (Eigen::Index m = 1; m < patch_scores.size(); ++m)
        if (patch_scores(m) > patch_scores(best)) best = m;

    Eigen::VectorXd f = stack.stages[stack.stage_count() - 2].row(best).transpose();
    const double norm = f.norm();
    if (norm > 0.0) f /= norm;
    return f;
}

Eigen::VectorXd concat_salient(const Eigen::VectorXd& image_feature,
                               const Eigen::VectorXd& cloud_feature) {
    Eigen::VectorXd out(image_feature.size() + cloud_feature.size());
    out << image_feature, cloud_feature;
    return out;
}

Eigen::MatrixXd similarity_graph(const Eigen::MatrixXd& features) {
    if (features.rows() < 2) throw Error("similarity graph needs at least two samples");
    Eigen::MatrixXd w = (features * features.transpose()).cwiseMax(0.0);
    w.diagonal().setZero();
    return w;
}

Eigen::MatrixXd window_mask(const Eigen::MatrixXd& similarity, std::size_t k) {
    const std::size_t n = static_cast<std::size_t>(similarity.rows());
    if (k < 1 || k > n - 1)
        throw WindowTooLarge("k=" + std::to_string(k) + " for " + std::to_string(n) + " samples");

    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(similarity.rows(), similarity.cols());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              const double sa = similarity(static_cast<Eigen::Index>(i),
                                                           static_cast<Eigen::Index>(a));
                              const double sb = similarity(static_cast<Eigen::Index>(i),
                                                           static_cast<Eigen::Index>(b));
                              if (sa != sb) return sa > sb;
                              return a < b;
                          });
        for (std::size_t j = 0; j < k; ++j)
            mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(order[j])) = 1.0;
    }
    return mask;
}

RescoreResult rescore(const Eigen::VectorXd& scores, const Eigen::MatrixXd& similarity,
                      const Eigen::MatrixXd& mask) {
    const Eigen::Index n = scores.size();
    if (similarity.rows() != n || mask.rows() != n)
        throw LengthMismatch("rescore inputs disagree on sample count");

    const Eigen::MatrixXd masked = mask.cwiseProduct(similarity);
    RescoreResult result;
    result.scores.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mass = masked.row(i).sum();
        if (mass <= 0.0) {
            result.scores(i) = scores(i);
            result.isolated.push_back(static_cast<std::size_t>(i));
            continue;
        }
        const double propagated = masked.row(i).dot(scores.transpose()) / mass;
        result.scores(i) = 0.5 * (propagated + scores(i));
    }
    return result;
}

ResconDiagnostics rescon_diagnostics(const Eigen::MatrixXd& similarity,
                                     const Eigen::MatrixXd& mask) {
    const std::size_t n = static_cast<std::size_t>(similarity.rows());
    ResconDiagnostics d;
    d.neighbor_ids.resize(n);
    d.neighbor_weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mass = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            mass += mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                    similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        for (std::size_t j = 0; j < n; ++j) {
            if (mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 0.0) continue;
            d.neighbor_ids[i].push_back(j);
            const double w =
                similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            d.neighbor_weights[i].push_back(mass > 0.0 ? w / mass : 0.0);
        }
    }
    return d;
}

}  // namespace muscore
