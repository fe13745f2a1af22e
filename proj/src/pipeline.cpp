#include "muscore/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "muscore/descriptor.hpp"
#include "muscore/geometry.hpp"
#include "muscore/metrics.hpp"
#include "muscore/parallel.hpp"
#include "muscore/png_io.hpp"
#include "muscore/rescon.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace muscore {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::string& path, std::uint64_t h = 0xcbf29ce484222325ULL) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Round a stack through f32 so cold and cache-warmed runs agree bit
/// for bit.
void round_stack_f32(PatchFeatureStack& stack) {
    for (auto& stage : stack.stages)
        for (Eigen::Index i = 0; i < stage.size(); ++i)
            stage.data()[i] = static_cast<double>(static_cast<float>(stage.data()[i]));
}

struct LoadedSample {
    SampleManifest manifest;
    SampleStacks stacks;  // aggregated
    std::optional<OrganizedPointCloud> organized;
    std::optional<PointCloud> cloud;
    std::vector<std::vector<std::size_t>> group_members;
    std::optional<ProjectionMap> projection;
    std::size_t native_h = 0;
    std::size_t native_w = 0;
};

std::size_t grid_side_of(std::size_t patch_count) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(patch_count))));
    if (side * side != patch_count) throw ShapeMismatch("patch count is not a perfect square");
    return side;
}

PatchFeatureStack load_image_stack(const Dataset& dataset, const SampleManifest& m) {
    PatchFeatureStack stack;
    stack.modality = Modality::image;
    for (const auto& rel : m.image_feature_paths) {
        TensorFile t = load_tensor(resolve_path(dataset, rel));
        stack.stages.push_back(t.as_matrix());
    }
    stack.grid_side = grid_side_of(stack.patch_count());
    return stack;
}

}  // namespace

RunResult run_pipeline(const RunConfig& config) {
    const auto start_total = std::chrono::steady_clock::now();
    Dataset dataset = load_dataset(config.dataset_path);
    const ValidationReport report = validate_dataset(dataset);
    if (!report.ok()) {
        std::string msg = "dataset validation failed:";
        for (const auto& issue : report.issues)
            msg += "\n  [" + issue.sample_id + "] " + issue.message;
        throw InvalidConfig(msg);
    }

    const std::size_t n = dataset.samples.size();
    bool use_image = std::all_of(dataset.samples.begin(), dataset.samples.end(),
                                 [](const SampleManifest& m) { return m.has_image(); });
    bool use_cloud = std::all_of(dataset.samples.begin(), dataset.samples.end(),
                                 [](const SampleManifest& m) { return m.has_cloud(); });
    switch (config.modality) {
        case ModalitySelection::image_only:
            if (!use_image) throw InvalidConfig("2d modality requested but not available everywhere");
            use_cloud = false;
            break;
        case ModalitySelection::cloud_only:
            if (!use_cloud) throw InvalidConfig("3d modality requested but not available everywhere");
            use_image = false;
            break;
        case ModalitySelection::multimodal:
            if (!use_image || !use_cloud)
                throw InvalidConfig("multimodal requested but a modality is missing");
            break;
        case ModalitySelection::automatic:
            break;
    }
    if (!use_image && !use_cloud)
        throw InvalidConfig("no modality is available across all samples");

    fs::create_directories(config.output_dir);
    fs::create_directories(fs::path(config.output_dir) / "maps");
    const std::string cache_dir = (fs::path(config.output_dir) / "cache").string();
    if (config.cache_enabled) fs::create_directories(cache_dir);

    json timings;
    std::vector<LoadedSample> samples(n);

    // ---- grouping + aggregation -------------------------------------
    auto t0 = std::chrono::steady_clock::now();
    parallel_for(n, config.workers, [&](std::size_t i) {
        LoadedSample& ls = samples[i];
        ls.manifest = dataset.samples[i];
        const SampleManifest& m = ls.manifest;

        if (use_image) {
            PatchFeatureStack raw = load_image_stack(dataset, m);
            ls.stacks.image = aggregate_stack(raw, config.degrees, 1);
            round_stack_f32(*ls.stacks.image);
        }

        if (use_cloud) {
            const std::string cloud_path = resolve_path(dataset, m.cloud_path);
            if (m.xyz_map_shape) {
                ls.organized = load_xyz_map(cloud_path, m.xyz_map_shape->first,
                                            m.xyz_map_shape->second);
                ls.cloud = PointCloud{ls.organized->points};
            } else {
                ls.cloud = PointCloud{load_tensor(cloud_path).as_matrix()};
            }
            if (ls.cloud->size() == 0) throw ShapeMismatch(m.sample_id + ": empty point cloud");

            GroupingParams params;
            params.group_count = std::min(config.group_count, ls.cloud->size());
            params.group_size = std::min(config.group_size, ls.cloud->size());
            params.iter_increment =
                std::min(config.iter_increment, std::max<std::size_t>(1, params.group_size - 1));
            params.curvature_threshold = config.curvature_threshold;

            GroupSet groups;
            std::string group_cache;
            if (config.cache_enabled) {
                std::uint64_t key = fnv1a_file(cloud_path);
                const std::string pkey = std::to_string(params.group_count) + ":" +
                                         std::to_string(params.group_size) + ":" +
                                         std::to_string(params.iter_increment) + ":" +
                                         std::to_string(params.curvature_threshold);
                key = fnv1a(pkey.data(), pkey.size(), key);
                group_cache = cache_dir + "/groups_" + hex64(key) + ".json";
            }
            if (!group_cache.empty() && fs::exists(group_cache)) {
                std::ifstream in(group_cache);
                std::string text((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
                groups = group_set_from_json(text);
            } else {
                groups = build_groups(*ls.cloud, params, 1);
                if (!group_cache.empty()) {
                    std::ofstream out(group_cache, std::ios::trunc);
                    out << group_set_to_json(groups);
                }
            }

            const std::size_t stage_count =
                use_image ? ls.stacks.image->stage_count() : std::size_t(3);
            PatchFeatureStack raw;
            raw.modality = Modality::cloud;
            raw.group_centers = groups.centers(*ls.cloud);
            for (const auto& g : groups.groups) {
                raw.high_curvature_flags.push_back(g.curvature > params.curvature_threshold ? 1 : 0);
                ls.group_members.push_back(g.member_indices);
            }
            for (std::size_t s = 0; s < stage_count; ++s) {
                const std::size_t member_count =
                    std::max<std::size_t>(4, params.group_size * (s + 1) / stage_count);
                Eigen::MatrixXd stage(static_cast<Eigen::Index>(groups.groups.size()),
                                      static_cast<Eigen::Index>(descriptor_dim({})));
                for (std::size_t g = 0; g < groups.groups.size(); ++g)
                    stage.row(static_cast<Eigen::Index>(g)) =
                        geometric_descriptor_partial(groups.groups[g], *ls.cloud, member_count)
                            .transpose();
                raw.stages.push_back(std::move(stage));
            }
            ls.stacks.cloud = aggregate_stack(raw, config.degrees, 1);
            round_stack_f32(*ls.stacks.cloud);
        }

        // Native map resolution: mask shape, then xyz map shape, then 8x grid.
        if (!m.mask_path.empty()) {
            TensorFile mask = load_tensor(resolve_path(dataset, m.mask_path));
            if (mask.shape.size() == 2) {
                ls.native_h = mask.shape[0];
                ls.native_w = mask.shape[1];
            }
        }
        if (ls.native_h == 0 && m.xyz_map_shape) {
            ls.native_h = m.xyz_map_shape->first;
            ls.native_w = m.xyz_map_shape->second;
        }
        if (ls.native_h == 0 && use_image) {
            ls.native_h = ls.stacks.image->grid_side * 8;
            ls.native_w = ls.native_h;
        }

        if (use_image && use_cloud) {
            const std::size_t gs = ls.stacks.image->grid_side;
            if (ls.organized) {
                ls.projection = build_projection_map(*ls.organized, gs,
                                                     ls.stacks.cloud->group_centers);
            } else if (m.intrinsics && ls.native_h > 0) {
                ls.projection = build_projection_map(ls.cloud->points, *m.intrinsics, ls.native_h,
                                                     ls.native_w, gs,
                                                     ls.stacks.cloud->group_centers);
            }
        }
    });
    timings["grouping_and_aggregation"] = seconds_since(t0);

    // ---- subsets + mutual scoring -----------------------------------
    t0 = std::chrono::steady_clock::now();
    const auto subsets = partition_subsets(n, config.subset_count, config.subset_seed);
    std::vector<std::size_t> subset_of(n, 0);
    for (std::size_t s = 0; s < subsets.size(); ++s)
        for (std::size_t i : subsets[s]) subset_of[i] = s;

    std::vector<SampleStacks> stack_view(n);
    for (std::size_t i = 0; i < n; ++i) stack_view[i] = samples[i].stacks;

    std::vector<SampleScoreResult> scores(n);
    parallel_for(n, config.workers, [&](std::size_t i) {
        scores[i] = score_sample(i, stack_view, subsets[subset_of[i]],
                                 samples[i].projection ? &*samples[i].projection : nullptr,
                                 samples[i].group_members.empty() ? nullptr
                                                                  : &samples[i].group_members,
                                 config.interval_percent, config.cae_enabled, 1);
    });
    timings["scoring"] = seconds_since(t0);

    // ---- anomaly maps -----------------------------------------------
    t0 = std::chrono::steady_clock::now();
    RunResult result;
    result.output_dir = config.output_dir;
    result.samples.resize(n);

    IdwParams idw;
    idw.power = config.idw_power;
    idw.k_nn = config.idw_k;

    parallel_for(n, config.workers, [&](std::size_t i) {
        const LoadedSample& ls = samples[i];
        const std::string map_base =
            (fs::path(config.output_dir) / "maps" / ls.manifest.sample_id).string();

        std::optional<AnomalyMap> image_map, cloud_pixel_map;
        std::optional<std::vector<double>> point_scores;

        if (scores[i].image) {
            image_map = upsample_2d(*scores[i].image, ls.stacks.image->grid_side, ls.native_h,
                                    ls.native_w);
            TensorFile t = TensorFile::from_f32(
                {ls.native_h, ls.native_w},
                std::vector<float>(image_map->values.begin(), image_map->values.end()));
            save_tensor(map_base + "_img.mt", t);
        }
        if (scores[i].cloud) {
            point_scores = idw_interpolate(ls.stacks.cloud->group_centers, *scores[i].cloud,
                                           ls.cloud->points, idw);
            save_tensor(map_base + "_cloud_points.mt",
                        TensorFile::from_f32({point_scores->size()},
                                             std::vector<float>(point_scores->begin(),
                                                                point_scores->end())));
            if (ls.organized) {
                cloud_pixel_map = render_3d_to_pixels(*point_scores, *ls.organized);
                save_tensor(map_base + "_cloud.mt",
                            TensorFile::from_f32({cloud_pixel_map->height, cloud_pixel_map->width},
                                                 std::vector<float>(cloud_pixel_map->values.begin(),
                                                                    cloud_pixel_map->values.end())));
            }
        }

        std::optional<AnomalyMap> fused;
        if (image_map && cloud_pixel_map && image_map->height == cloud_pixel_map->height &&
            image_map->width == cloud_pixel_map->width) {
            fused = fuse_maps(*image_map, *cloud_pixel_map);
        } else if (image_map) {
            fused = image_map;
        } else if (cloud_pixel_map) {
            fused = cloud_pixel_map;
        }
        if (fused) {
            save_tensor(map_base + "_fused.mt",
                        TensorFile::from_f32({fused->height, fused->width},
                                             std::vector<float>(fused->values.begin(),
                                                                fused->values.end())));
        }

        double c = 0.0;
        if (fused) {
            c = classify(*fused);
            if (!cloud_pixel_map && point_scores)
                c += *std::max_element(point_scores->begin(), point_scores->end());
        } else if (point_scores) {
            c = *std::max_element(point_scores->begin(), point_scores->end());
        }

        result.samples[i].sample_id = ls.manifest.sample_id;
        result.samples[i].subset = subset_of[i];
        result.samples[i].score_raw = c;
        result.samples[i].score_rescored = c;
    });
    timings["maps"] = seconds_since(t0);

    // ---- re-scoring with constrained neighborhood -------------------
    t0 = std::chrono::steady_clock::now();
    json diagnostics = json::array();
    if (config.rescon_enabled) {
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            const auto& members = subsets[s];
            const bool can_rescore =
                members.size() >= 2 &&
                (!use_image || samples[members[0]].stacks.image->stage_count() >= 2) &&
                (!use_cloud || samples[members[0]].stacks.cloud->stage_count() >= 2);
            if (!can_rescore) continue;

            Eigen::MatrixXd features;
            Eigen::VectorXd c(static_cast<Eigen::Index>(members.size()));
            for (std::size_t idx = 0; idx < members.size(); ++idx) {
                const std::size_t i = members[idx];
                Eigen::VectorXd f;
                if (use_image && use_cloud) {
                    f = concat_salient(
                        salient_feature(*samples[i].stacks.image, *scores[i].image),
                        salient_feature(*samples[i].stacks.cloud, *scores[i].cloud));
                } else if (use_image) {
                    f = salient_feature(*samples[i].stacks.image, *scores[i].image);
                } else {
                    f = salient_feature(*samples[i].stacks.cloud, *scores[i].cloud);
                }
                if (features.size() == 0)
                    features.resize(static_cast<Eigen::Index>(members.size()), f.size());
                features.row(static_cast<Eigen::Index>(idx)) = f.transpose();
                c(static_cast<Eigen::Index>(idx)) = result.samples[i].score_raw;
            }

            const Eigen::MatrixXd w = similarity_graph(features);
            const std::size_t k = std::min(config.window_size, members.size() - 1);
            const Eigen::MatrixXd mask = window_mask(w, k);
            const RescoreResult rescored = rescore(c, w, mask);
            const ResconDiagnostics diag = rescon_diagnostics(w, mask);

            for (std::size_t idx = 0; idx < members.size(); ++idx) {
                const std::size_t i = members[idx];
                result.samples[i].score_rescored = rescored.scores(static_cast<Eigen::Index>(idx));
                result.samples[i].isolated =
                    std::find(rescored.isolated.begin(), rescored.isolated.end(), idx) !=
                    rescored.isolated.end();
                json neighbors = json::array();
                for (std::size_t jn = 0; jn < diag.neighbor_ids[idx].size(); ++jn)
                    neighbors.push_back(
                        {{"sample_id",
                          samples[members[diag.neighbor_ids[idx][jn]]].manifest.sample_id},
                         {"weight", diag.neighbor_weights[idx][jn]}});
                diagnostics.push_back({{"sample_id", samples[i].manifest.sample_id},
                                       {"subset", s},
                                       {"score_raw", result.samples[i].score_raw},
                                       {"score_rescored", result.samples[i].score_rescored},
                                       {"neighbors", neighbors}});
            }
        }
    }
    timings["rescon"] = seconds_since(t0);

    // ---- artifacts ---------------------------------------------------
    json scores_json = json::array();
    for (const auto& s : result.samples)
        scores_json.push_back({{"sample_id", s.sample_id},
                               {"subset", s.subset},
                               {"score_raw", s.score_raw},
                               {"score_rescored", s.score_rescored},
                               {"isolated", s.isolated}});
    std::ofstream(fs::path(config.output_dir) / "scores.json") << scores_json.dump(2) << "\n";
    std::ofstream(fs::path(config.output_dir) / "rescon_diagnostics.json")
        << diagnostics.dump(2) << "\n";

    json summary;
    summary["config"] = json::parse(config.to_json());
    summary["sample_count"] = n;
    summary["modalities"] = {{"image", use_image}, {"cloud", use_cloud}};
    summary["subset_sizes"] = json::array();
    for (const auto& s : subsets) summary["subset_sizes"].push_back(s.size());
    summary["timings_seconds"] = timings;
    summary["timings_seconds"]["total"] = seconds_since(start_total);
    std::ofstream(fs::path(config.output_dir) / "summary.json") << summary.dump(2) << "\n";

    return result;
}

namespace {

struct RunMetrics {
    std::map<std::string, double> values;
};

RunMetrics evaluate_single(const std::string& run_dir, const Dataset& dataset) {
    const fs::path scores_path = fs::path(run_dir) / "scores.json";
    if (!fs::exists(scores_path)) throw MissingArtifacts(scores_path.string());
    json scores_json;
    std::ifstream(scores_path) >> scores_json;

    std::map<std::string, double> score_by_id;
    for (const auto& s : scores_json)
        score_by_id[s.at("sample_id").get<std::string>()] = s.at("score_rescored").get<double>();

    LabeledScores cls;
    LabeledScores seg;
    RegionSet regions;

    for (const auto& m : dataset.samples) {
        auto it = score_by_id.find(m.sample_id);
        if (it == score_by_id.end())
            throw MissingArtifacts("no score for sample " + m.sample_id);
        if (m.label == SampleLabel::unknown) continue;
        cls.scores.push_back(it->second);
        cls.labels.push_back(m.label == SampleLabel::anomalous ? 1 : 0);

        if (m.mask_path.empty()) continue;
        const fs::path map_path = fs::path(run_dir) / "maps" / (m.sample_id + "_fused.mt");
        if (!fs::exists(map_path)) continue;
        TensorFile map = load_tensor(map_path.string());
        TensorFile mask = load_tensor(resolve_path(dataset, m.mask_path));
        if (map.shape != mask.shape)
            throw ShapeMismatch("map/mask shape mismatch for " + m.sample_id);

        RegionSample rs;
        rs.height = map.shape[0];
        rs.width = map.shape[1];
        rs.scores.assign(map.f32.begin(), map.f32.end());
        rs.truth.resize(mask.u8.size());
        for (std::size_t p = 0; p < mask.u8.size(); ++p) {
            rs.truth[p] = mask.u8[p] ? 1 : 0;
            seg.scores.push_back(rs.scores[p]);
            seg.labels.push_back(rs.truth[p]);
        }
        regions.samples.push_back(std::move(rs));
    }

    RunMetrics out;
    out.values["AUROC-cls"] = auroc(cls);
    out.values["F1-max-cls"] = f1_max(cls);
    out.values["AP-cls"] = average_precision(cls);
    if (!seg.scores.empty()) {
        out.values["AUROC-seg"] = auroc(seg);
        out.values["F1-max-seg"] = f1_max(seg);
        out.values["AP-seg"] = average_precision(seg);
        out.values["PRO@30%"] = pro_at_fpr(regions, 0.30);
    }
    return out;
}

}  // namespace

std::vector<MetricsRow> evaluate_runs(const std::vector<std::string>& run_dirs,
                                      const std::string& dataset_path) {
    if (run_dirs.empty()) throw MissingArtifacts("no run directories given");
    const Dataset dataset = load_dataset(dataset_path);

    std::vector<RunMetrics> all;
    for (const auto& dir : run_dirs) all.push_back(evaluate_single(dir, dataset));

    std::vector<MetricsRow> rows;
    for (const auto& [metric, first] : all[0].values) {
        (void)first;
        std::vector<double> v;
        for (const auto& r : all) {
            auto it = r.values.find(metric);
            if (it != r.values.end()) v.push_back(it->second);
        }
        MetricsRow row;
        row.metric = metric;
        row.runs = v.size();
        row.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - row.mean) * (x - row.mean);
        row.stddev = v.size() > 1 ? std::sqrt(ss / double(v.size())) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << "metric,mean,std,runs\n";
    for (const auto& r : rows)
        out << r.metric << "," << r.mean << "," << r.stddev << "," << r.runs << "\n";
}

void plot_run(const std::string& run_dir, const std::string& out_dir,
              const std::string& dataset_path_for_overlay) {
    const fs::path maps_dir = fs::path(run_dir) / "maps";
    if (!fs::exists(maps_dir)) throw MissingArtifacts(maps_dir.string());
    fs::create_directories(out_dir);

    std::optional<Dataset> dataset;
    if (!dataset_path_for_overlay.empty()) dataset = load_dataset(dataset_path_for_overlay);

    for (const auto& entry : fs::directory_iterator(maps_dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = "_fused.mt";
        if (name.size() <= suffix.size() ||
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        const std::string sample_id = name.substr(0, name.size() - suffix.size());

        TensorFile map = load_tensor(entry.path().string());
        if (map.shape.size() != 2) continue;
        const std::size_t h = map.shape[0], w = map.shape[1];
        const float peak = *std::max_element(map.f32.begin(), map.f32.end());

        std::vector<std::uint8_t> rgb(h * w * 3);
        for (std::size_t p = 0; p < h * w; ++p) {
            std::uint8_t r, g, b;
            turbo_color(peak > 0.0f ? map.f32[p] / peak : 0.0, r, g, b);
            rgb[p * 3] = r;
            rgb[p * 3 + 1] = g;
            rgb[p * 3 + 2] = b;
        }

        if (dataset) {
            for (const auto& m : dataset->samples) {
                if (m.sample_id != sample_id || m.mask_path.empty()) continue;
                TensorFile mask = load_tensor(resolve_path(*dataset, m.mask_path));
                if (mask.shape.size() != 2 || mask.shape[0] != h || mask.shape[1] != w) break;
                // white contour where the mask borders background
                for (std::size_t r = 0; r < h; ++r) {
                    for (std::size_t c = 0; c < w; ++c) {
                        const std::size_t p = r * w + c;
                        if (!mask.u8[p]) continue;
                        const bool edge = (r == 0 || !mask.u8[p - w]) ||
                                          (r + 1 == h || !mask.u8[p + w]) ||
                                          (c == 0 || !mask.u8[p - 1]) ||
                                          (c + 1 == w || !mask.u8[p + 1]);
                        if (edge) {
                            rgb[p * 3] = 255;
                            rgb[p * 3 + 1] = 255;
                            rgb[p * 3 + 2] = 255;
                        }
                    }
                }
            }
        }
        write_png_rgb((fs::path(out_dir) / (sample_id + ".png")).string(), h, w, rgb);
    }
}

}  // namespace muscore
