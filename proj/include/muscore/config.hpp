#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace muscore {

enum class ModalitySelection { automatic, image_only, cloud_only, multimodal };

/// Effective run configuration; defaults are the reference
/// hyperparameters, every field overridable by config file or flags.
struct RunConfig {
    std::string dataset_path;
    std::string output_dir;
    ModalitySelection modality = ModalitySelection::automatic;

    // grouping
    std::size_t group_count = 1024;   // M_P
    std::size_t group_size = 128;     // K_P
    std::size_t iter_increment = 80;  // K_iter
    double curvature_threshold = 0.01;

    // aggregation
    std::vector<std::size_t> degrees = {1, 3, 5};

    // scoring
    double interval_percent = 30.0;  // X
    bool cae_enabled = true;

    // rescon
    std::size_t window_size = 7;  // k
    bool rescon_enabled = true;

    // subsets
    std::size_t subset_count = 1;  // g
    std::uint64_t subset_seed = 0;

    // interpolation
    double idw_power = 2.0;
    std::size_t idw_k = 3;

    int workers = 1;
    bool cache_enabled = true;

    std::string to_json() const;
};

/// Flat key=value config with [section] prefixes; keys become
/// "section.key". CLI flags are applied on top by the caller.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config(RunConfig& config, const std::map<std::string, std::string>& values);

ModalitySelection parse_modality(const std::string& value);

}  // namespace muscore
