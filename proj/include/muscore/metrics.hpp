#pragma once

#include <cstdint>
#include <vector>

#include "muscore/errors.hpp"

namespace muscore {

struct LabeledScores {
    std::vector<double> scores;
    std::vector<int> labels;  // 0 or 1
};

/// Mann-Whitney rank statistic; ties contribute 1/2.
double auroc(const LabeledScores& data);

/// Step-interpolated AP over descending distinct thresholds.
double average_precision(const LabeledScores& data);

/// Maximum F1 over thresholds at every distinct score (score >= t).
double f1_max(const LabeledScores& data);

struct RegionSample {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> scores;       // H*W score map
    std::vector<std::uint8_t> truth;  // H*W, nonzero = anomalous
};

struct RegionSet {
    std::vector<RegionSample> samples;
};

/// Per-region overlap integrated over FPR in [0, limit], normalized by
/// the limit. Ground-truth regions are 4-connected components. The
/// sweep is exact while the number of distinct scores stays small and
/// falls back to a 333-step quantile grid on dense maps.
double pro_at_fpr(const RegionSet& regions, double limit);

/// 4-connected component labels, -1 for background; returns label count.
std::size_t connected_components(const std::vector<std::uint8_t>& mask, std::size_t height,
                                 std::size_t width, std::vector<std::ptrdiff_t>& labels);

}  // namespace muscore
