#include "muscore/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace muscore {

namespace {

SampleLabel parse_label(const std::string& s) {
    if (s == "normal") return SampleLabel::normal;
    if (s == "anomalous") return SampleLabel::anomalous;
    return SampleLabel::unknown;
}

std::string label_name(SampleLabel l) {
    switch (l) {
        case SampleLabel::normal: return "normal";
        case SampleLabel::anomalous: return "anomalous";
        default: return "unknown";
    }
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open " + manifest_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("invalid manifest JSON in " + manifest_path + ": " + e.what());
    }

    Dataset ds;
    ds.root = fs::path(manifest_path).parent_path().string();
    if (ds.root.empty()) ds.root = ".";

    for (const auto& sj : j.at("samples")) {
        SampleManifest m;
        m.sample_id = sj.at("sample_id").get<std::string>();
        if (sj.contains("image_feature_paths"))
            m.image_feature_paths = sj["image_feature_paths"].get<std::vector<std::string>>();
        if (sj.contains("cloud_path")) m.cloud_path = sj["cloud_path"].get<std::string>();
        if (sj.contains("xyz_map_shape")) {
            auto v = sj["xyz_map_shape"].get<std::vector<std::size_t>>();
            if (v.size() == 2) m.xyz_map_shape = {v[0], v[1]};
        }
        if (sj.contains("intrinsics")) {
            PinholeIntrinsics k;
            k.fx = sj["intrinsics"].at("fx").get<double>();
            k.fy = sj["intrinsics"].at("fy").get<double>();
            k.cx = sj["intrinsics"].at("cx").get<double>();
            k.cy = sj["intrinsics"].at("cy").get<double>();
            m.intrinsics = k;
        }
        if (sj.contains("label")) m.label = parse_label(sj["label"].get<std::string>());
        if (sj.contains("mask_path")) m.mask_path = sj["mask_path"].get<std::string>();
        ds.samples.push_back(std::move(m));
    }
    return ds;
}

void save_dataset(const std::string& manifest_path, const Dataset& dataset) {
    json j;
    j["samples"] = json::array();
    for (const auto& m : dataset.samples) {
        json sj;
        sj["sample_id"] = m.sample_id;
        if (m.has_image()) sj["image_feature_paths"] = m.image_feature_paths;
        if (m.has_cloud()) sj["cloud_path"] = m.cloud_path;
        if (m.xyz_map_shape)
            sj["xyz_map_shape"] = {m.xyz_map_shape->first, m.xyz_map_shape->second};
        if (m.intrinsics) {
            sj["intrinsics"] = {{"fx", m.intrinsics->fx},
                                {"fy", m.intrinsics->fy},
                                {"cx", m.intrinsics->cx},
                                {"cy", m.intrinsics->cy}};
        }
        sj["label"] = label_name(m.label);
        if (!m.mask_path.empty()) sj["mask_path"] = m.mask_path;
        j["samples"].push_back(std::move(sj));
    }
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + manifest_path);
    out << j.dump(2) << "\n";
}

std::string resolve_path(const Dataset& dataset, const std::string& relative) {
    fs::path p(relative);
    if (p.is_absolute()) return relative;
    return (fs::path(dataset.root) / p).string();
}

ValidationReport validate_dataset(const Dataset& dataset) {
    ValidationReport report;
    auto issue = [&](const std::string& id, const std::string& msg) {
        report.issues.push_back({id, msg});
    };

    if (dataset.samples.empty()) {
        issue("", "dataset contains no samples");
        return report;
    }

    std::optional<std::size_t> image_stages;
    std::vector<std::optional<std::size_t>> image_dims;

    for (const auto& m : dataset.samples) {
        if (!m.has_image() && !m.has_cloud()) {
            issue(m.sample_id, "no modality present");
            continue;
        }
        if (m.has_image() && m.has_cloud() && !m.xyz_map_shape && !m.intrinsics)
            issue(m.sample_id, "multimodal sample lacks an alignment route (xyz_map_shape or intrinsics)");

        if (m.has_image()) {
            if (!image_stages) {
                image_stages = m.image_feature_paths.size();
                image_dims.assign(*image_stages, std::nullopt);
            } else if (m.image_feature_paths.size() != *image_stages) {
                issue(m.sample_id, "image stage count " + std::to_string(m.image_feature_paths.size()) +
                                       " differs from dataset stage count " + std::to_string(*image_stages));
            }
            for (std::size_t s = 0; s < m.image_feature_paths.size(); ++s) {
                const std::string path = resolve_path(dataset, m.image_feature_paths[s]);
                if (!fs::exists(path)) {
                    issue(m.sample_id, "missing file: " + m.image_feature_paths[s]);
                    continue;
                }
                try {
                    TensorFile t = load_tensor(path);
                    if (t.shape.size() != 2) {
                        issue(m.sample_id, "stage tensor must be [M, C]: " + m.image_feature_paths[s]);
                        continue;
                    }
                    const std::size_t side = static_cast<std::size_t>(std::llround(std::sqrt(double(t.shape[0]))));
                    if (side * side != t.shape[0])
                        issue(m.sample_id, "patch count is not a perfect square in " + m.image_feature_paths[s]);
                    if (s < image_dims.size()) {
                        if (!image_dims[s]) image_dims[s] = t.shape[1];
                        else if (*image_dims[s] != t.shape[1])
                            issue(m.sample_id, "stage " + std::to_string(s) + " feature dim " +
                                                   std::to_string(t.shape[1]) + " differs from dataset dim " +
                                                   std::to_string(*image_dims[s]));
                    }
                } catch (const Error& e) {
                    issue(m.sample_id, e.what());
                }
            }
        }

        if (m.has_cloud()) {
            const std::string path = resolve_path(dataset, m.cloud_path);
            if (!fs::exists(path)) {
                issue(m.sample_id, "missing file: " + m.cloud_path);
            } else {
                try {
                    TensorFile t = load_tensor(path);
                    if (m.xyz_map_shape) {
                        if (t.shape.size() != 3 || t.shape[0] != m.xyz_map_shape->first ||
                            t.shape[1] != m.xyz_map_shape->second || t.shape[2] != 3)
                            issue(m.sample_id, "cloud tensor does not match xyz_map_shape");
                    } else if (t.shape.size() != 2 || t.shape[1] != 3) {
                        issue(m.sample_id, "unorganized cloud must be [M, 3]");
                    }
                } catch (const Error& e) {
                    issue(m.sample_id, e.what());
                }
            }
        }

        if (!m.mask_path.empty() && !fs::exists(resolve_path(dataset, m.mask_path)))
            issue(m.sample_id, "missing file: " + m.mask_path);
    }
    return report;
}

}  // namespace muscore
