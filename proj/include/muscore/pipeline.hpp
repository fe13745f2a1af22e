#pragma once

#include <optional>
#include <string>
#include <vector>

#include "muscore/config.hpp"
#include "muscore/dataset.hpp"
#include "muscore/maps.hpp"
#include "muscore/msm.hpp"

namespace muscore {

struct SampleRunOutput {
    std::string sample_id;
    std::size_t subset = 0;
    double score_raw = 0.0;       // max of the fused map
    double score_rescored = 0.0;  // after constrained re-scoring
    bool isolated = false;
};

struct RunResult {
    std::vector<SampleRunOutput> samples;
    std::string output_dir;
};

/// Full batch run: load + validate, group, aggregate, mutually score,
/// assemble maps, re-score, and write all artifacts under output_dir.
RunResult run_pipeline(const RunConfig& config);

struct MetricsRow {
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // zero for a single run
    std::size_t runs = 1;
};

/// Metrics for one or more finished runs against the dataset's labels
/// and masks; multiple runs produce mean and standard deviation.
std::vector<MetricsRow> evaluate_runs(const std::vector<std::string>& run_dirs,
                                      const std::string& dataset_path);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

/// Colormapped heatmap PNGs for every fused (or single-modality) map.
void plot_run(const std::string& run_dir, const std::string& out_dir,
              const std::string& dataset_path_for_overlay = "");

}  // namespace muscore
