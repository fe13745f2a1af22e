#include "muscore/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "muscore/errors.hpp"

namespace muscore {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

bool parse_bool(const std::string& value) {
    return value == "true" || value == "1" || value == "yes" || value == "on";
}

}  // namespace

ModalitySelection parse_modality(const std::string& value) {
    if (value == "2d") return ModalitySelection::image_only;
    if (value == "3d") return ModalitySelection::cloud_only;
    if (value == "multimodal") return ModalitySelection::multimodal;
    if (value == "auto") return ModalitySelection::automatic;
    throw InvalidConfig("unknown modality '" + value + "'");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file " + path);

    std::map<std::string, std::string> out;
    std::string line, section;
    while (std::getline(in, line)) {
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

void apply_config(RunConfig& c, const std::map<std::string, std::string>& values) {
    try {
        for (const auto& [key, value] : values) {
            if (key == "run.dataset") c.dataset_path = value;
            else if (key == "run.output_dir") c.output_dir = value;
            else if (key == "run.modality") c.modality = parse_modality(value);
            else if (key == "run.workers") c.workers = std::stoi(value);
            else if (key == "run.cache") c.cache_enabled = parse_bool(value);
            else if (key == "grouping.group_count") c.group_count = std::stoull(value);
            else if (key == "grouping.group_size") c.group_size = std::stoull(value);
            else if (key == "grouping.iter_increment") c.iter_increment = std::stoull(value);
            else if (key == "grouping.curvature_threshold") c.curvature_threshold = std::stod(value);
            else if (key == "snamd.degrees") c.degrees = parse_size_list(value);
            else if (key == "msm.interval_percent") c.interval_percent = std::stod(value);
            else if (key == "cae.enabled") c.cae_enabled = parse_bool(value);
            else if (key == "rescon.window_size") c.window_size = std::stoull(value);
            else if (key == "rescon.enabled") c.rescon_enabled = parse_bool(value);
            else if (key == "subsets.g") c.subset_count = std::stoull(value);
            else if (key == "subsets.seed") c.subset_seed = std::stoull(value);
            else if (key == "idw.power") c.idw_power = std::stod(value);
            else if (key == "idw.k") c.idw_k = std::stoull(value);
            else throw InvalidConfig("unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw InvalidConfig("malformed numeric value in config");
    }
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset_path;
    j["output_dir"] = output_dir;
    switch (modality) {
        case ModalitySelection::automatic: j["modality"] = "auto"; break;
        case ModalitySelection::image_only: j["modality"] = "2d"; break;
        case ModalitySelection::cloud_only: j["modality"] = "3d"; break;
        case ModalitySelection::multimodal: j["modality"] = "multimodal"; break;
    }
    j["grouping"] = {{"group_count", group_count},
                     {"group_size", group_size},
                     {"iter_increment", iter_increment},
                     {"curvature_threshold", curvature_threshold}};
    j["snamd"] = {{"degrees", degrees}};
    j["msm"] = {{"interval_percent", interval_percent}};
    j["cae"] = {{"enabled", cae_enabled}, {"lambda_clamp", true}};
    j["rescon"] = {{"window_size", window_size}, {"enabled", rescon_enabled}};
    j["subsets"] = {{"g", subset_count}, {"seed", subset_seed}};
    j["idw"] = {{"power", idw_power}, {"k", idw_k}};
    j["workers"] = workers;
    j["cache"] = cache_enabled;
    return j.dump(2);
}

}  // namespace muscore
