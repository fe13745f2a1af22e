#pragma once

#include <optional>
#include <string>
#include <vector>

#include "muscore/tensor_io.hpp"

namespace muscore {

enum class SampleLabel { normal, anomalous, unknown };

struct PinholeIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

/// One entry of `dataset.json`. Paths are relative to the manifest file.
struct SampleManifest {
    std::string sample_id;
    std::vector<std::string> image_feature_paths;  // one per stage, empty if no 2D modality
    std::string cloud_path;                        // empty if no 3D modality
    std::optional<std::pair<std::size_t, std::size_t>> xyz_map_shape;  // (H, W)
    std::optional<PinholeIntrinsics> intrinsics;
    SampleLabel label = SampleLabel::unknown;
    std::string mask_path;

    bool has_image() const { return !image_feature_paths.empty(); }
    bool has_cloud() const { return !cloud_path.empty(); }
};

struct Dataset {
    std::string root;  // directory containing dataset.json
    std::vector<SampleManifest> samples;
};

struct ValidationIssue {
    std::string sample_id;  // empty for dataset-wide issues
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

Dataset load_dataset(const std::string& manifest_path);
void save_dataset(const std::string& manifest_path, const Dataset& dataset);

/// Total by contract: every defect becomes a report entry, nothing throws.
ValidationReport validate_dataset(const Dataset& dataset);

std::string resolve_path(const Dataset& dataset, const std::string& relative);

}  // namespace muscore
