#include "muscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace muscore {

namespace {

void check_binary(const LabeledScores& data) {
    if (data.scores.size() != data.labels.size())
        throw LengthMismatch("scores and labels differ in length");
    if (data.scores.empty()) throw LengthMismatch("empty metric input");
}

std::size_t positive_count(const LabeledScores& data) {
    return static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 1));
}

}  // namespace

double auroc(const LabeledScores& data) {
    check_binary(data);
    const std::size_t pos = positive_count(data);
    const std::size_t neg = data.labels.size() - pos;
    if (pos == 0 || neg == 0) throw SingleClass("AUROC needs both classes");

    std::vector<std::size_t> order(data.scores.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return data.scores[a] < data.scores[b]; });

    // Average ranks over tie groups, then the Mann-Whitney statistic.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && data.scores[order[j]] == data.scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (double(i + 1) + double(j));  // 1-based
        for (std::size_t k = i; k < j; ++k)
            if (data.labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    const double u = rank_sum_pos - double(pos) * double(pos + 1) / 2.0;
    return u / (double(pos) * double(neg));
}

namespace {

/// Cumulative TP/FP at each distinct descending threshold.
struct Sweep {
    std::vector<double> thresholds;
    std::vector<std::size_t> tp;
    std::vector<std::size_t> fp;
    std::size_t positives = 0;
};

Sweep sweep_thresholds(const LabeledScores& data) {
    std::vector<std::size_t> order(data.scores.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return data.scores[a] > data.scores[b]; });

    Sweep s;
    s.positives = positive_count(data);
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double t = data.scores[order[i]];
        while (i < order.size() && data.scores[order[i]] == t) {
            if (data.labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        s.thresholds.push_back(t);
        s.tp.push_back(tp);
        s.fp.push_back(fp);
    }
    return s;
}

}  // namespace

double average_precision(const LabeledScores& data) {
    check_binary(data);
    const Sweep s = sweep_thresholds(data);
    if (s.positives == 0) throw NoPositives("AP needs at least one positive");

    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t n = 0; n < s.thresholds.size(); ++n) {
        const double precision = double(s.tp[n]) / double(s.tp[n] + s.fp[n]);
        const double recall = double(s.tp[n]) / double(s.positives);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

double f1_max(const LabeledScores& data) {
    check_binary(data);
    const Sweep s = sweep_thresholds(data);
    if (s.positives == 0) throw NoPositives("F1-max needs at least one positive");

    double best = 0.0;
    for (std::size_t n = 0; n < s.thresholds.size(); ++n) {
        const std::size_t fn = s.positives - s.tp[n];
        const double f1 = 2.0 * double(s.tp[n]) / double(2 * s.tp[n] + s.fp[n] + fn);
        best = std::max(best, f1);
    }
    return best;
}

std::size_t connected_components(const std::vector<std::uint8_t>& mask, std::size_t height,
                                 std::size_t width, std::vector<std::ptrdiff_t>& labels) {
    labels.assign(height * width, -1);
    std::size_t next = 0;
    std::deque<std::size_t> queue;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || labels[start] >= 0) continue;
        labels[start] = static_cast<std::ptrdiff_t>(next);
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            const std::size_t r = p / width, c = p % width;
            const std::size_t nbrs[4] = {r > 0 ? p - width : p, r + 1 < height ? p + width : p,
                                         c > 0 ? p - 1 : p, c + 1 < width ? p + 1 : p};
            for (std::size_t q : nbrs) {
                if (q == p || !mask[q] || labels[q] >= 0) continue;
                labels[q] = static_cast<std::ptrdiff_t>(next);
                queue.push_back(q);
            }
        }
        ++next;
    }
    return next;
}

double pro_at_fpr(const RegionSet& regions, double limit) {
    if (limit <= 0.0 || limit > 1.0) throw Error("FPR limit must be in (0, 1]");

    // Per-region descending score lists and the pooled negative scores.
    std::vector<std::vector<double>> region_scores;
    std::vector<double> negative_scores;
    for (const auto& sample : regions.samples) {
        std::vector<std::ptrdiff_t> labels;
        const std::size_t count =
            connected_components(sample.truth, sample.height, sample.width, labels);
        std::vector<std::vector<double>> local(count);
        for (std::size_t p = 0; p < labels.size(); ++p) {
            if (labels[p] >= 0)
                local[static_cast<std::size_t>(labels[p])].push_back(sample.scores[p]);
            else
                negative_scores.push_back(sample.scores[p]);
        }
        for (auto& r : local) region_scores.push_back(std::move(r));
    }
    if (region_scores.empty()) throw NoRegions("no ground-truth regions");
    if (negative_scores.empty()) throw NoRegions("no negative pixels for FPR");

    for (auto& r : region_scores) std::sort(r.begin(), r.end(), std::greater<double>());
    std::sort(negative_scores.begin(), negative_scores.end(), std::greater<double>());

    // Threshold schedule: exact distinct-score sweep while cheap, a
    // quantile grid on dense maps.
    std::vector<double> pooled;
    for (const auto& r : region_scores) pooled.insert(pooled.end(), r.begin(), r.end());
    pooled.insert(pooled.end(), negative_scores.begin(), negative_scores.end());
    std::sort(pooled.begin(), pooled.end(), std::greater<double>());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    std::vector<double> thresholds;
    constexpr std::size_t kExactCap = 4096;
    constexpr std::size_t kGridSteps = 333;
    if (pooled.size() <= kExactCap) {
        thresholds = pooled;
    } else {
        thresholds.push_back(pooled.front());
        for (std::size_t i = 1; i < kGridSteps; ++i)
            thresholds.push_back(pooled[i * (pooled.size() - 1) / kGridSteps]);
        thresholds.push_back(pooled.back());
        std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    }

    auto count_ge = [](const std::vector<double>& descending, double t) {
        // first index with value < t
        return static_cast<std::size_t>(
            std::lower_bound(descending.begin(), descending.end(), t, std::greater_equal<double>()) -
            descending.begin());
    };

    // Curve starts at (fpr 0, pro 0) for the empty prediction.
    double prev_fpr = 0.0, prev_pro = 0.0, area = 0.0;
    const double neg_total = double(negative_scores.size());
    for (double t : thresholds) {
        double pro = 0.0;
        for (const auto& r : region_scores)
            pro += double(count_ge(r, t)) / double(r.size());
        pro /= double(region_scores.size());
        const double fpr = double(count_ge(negative_scores, t)) / neg_total;

        if (fpr >= prev_fpr) {
            if (fpr <= limit) {
                area += 0.5 * (pro + prev_pro) * (fpr - prev_fpr);
                prev_fpr = fpr;
                prev_pro = pro;
            } else {
                const double frac = (limit - prev_fpr) / (fpr - prev_fpr);
                const double pro_at_limit = prev_pro + frac * (pro - prev_pro);
                area += 0.5 * (pro_at_limit + prev_pro) * (limit - prev_fpr);
                prev_fpr = limit;
                prev_pro = pro_at_limit;
                break;
            }
        }
    }
    return area / limit;
}

}  // namespace muscore
