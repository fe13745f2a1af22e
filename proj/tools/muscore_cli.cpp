// muscore command line: validate / run / eval / plot / synth.
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "muscore/config.hpp"
#include "muscore/dataset.hpp"
#include "muscore/errors.hpp"
#include "muscore/pipeline.hpp"
#include "muscore/synth.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int env_workers() {
    const char* env = std::getenv("MUSCORE_WORKERS");
    if (!env) return 1;
    try {
        const int w = std::stoi(env);
        return w >= 1 ? w : 1;
    } catch (...) {
        return 1;
    }
}

int cmd_validate(const std::string& dataset_path) {
    const muscore::Dataset dataset = muscore::load_dataset(dataset_path);
    const muscore::ValidationReport report = muscore::validate_dataset(dataset);
    if (report.ok()) {
        std::cout << "ok: " << dataset.samples.size() << " samples\n";
        return 0;
    }
    for (const auto& issue : report.issues)
        std::cout << (issue.sample_id.empty() ? std::string("<dataset>") : issue.sample_id) << ": "
                  << issue.message << "\n";
    return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"muscore: training-free multimodal anomaly scoring"};
    app.require_subcommand(1);

    // validate
    std::string v_dataset;
    auto* validate = app.add_subcommand("validate", "Check a dataset manifest");
    validate->add_option("--dataset", v_dataset, "path to dataset.json")->required();

    // run
    muscore::RunConfig run_cfg;
    std::string run_config_file, run_modality, run_degrees;
    auto* run = app.add_subcommand("run", "Score a dataset end to end");
    run->add_option("--config", run_config_file, "config file (key = value sections)");
    auto* f_dataset = run->add_option("--dataset", run_cfg.dataset_path, "path to dataset.json");
    auto* f_out = run->add_option("--out", run_cfg.output_dir, "output directory");
    auto* f_modality = run->add_option("--modality", run_modality, "auto|2d|3d|multimodal");
    auto* f_workers = run->add_option("--workers", run_cfg.workers, "worker threads");
    auto* f_gcount = run->add_option("--group-count", run_cfg.group_count, "3D groups per cloud");
    auto* f_gsize = run->add_option("--group-size", run_cfg.group_size, "points per group");
    auto* f_iter = run->add_option("--iter-increment", run_cfg.iter_increment,
                                   "regrouping points added per round");
    auto* f_curv = run->add_option("--curvature-threshold", run_cfg.curvature_threshold,
                                   "surface-variation gate");
    auto* f_degrees = run->add_option("--degrees", run_degrees, "pooling degrees, e.g. 1,3,5");
    auto* f_interval = run->add_option("--interval-percent", run_cfg.interval_percent,
                                       "lowest-X% interval average");
    auto* f_cae = run->add_flag("--cae,!--no-cae", run_cfg.cae_enabled,
                                "cross-modal enhancement");
    auto* f_window = run->add_option("--window-size", run_cfg.window_size, "re-scoring neighbors");
    auto* f_rescon = run->add_flag("--rescon,!--no-rescon", run_cfg.rescon_enabled,
                                   "constrained re-scoring");
    auto* f_g = run->add_option("--subsets", run_cfg.subset_count, "gallery subset count g");
    auto* f_seed = run->add_option("--subset-seed", run_cfg.subset_seed, "subset split seed");
    auto* f_idw_p = run->add_option("--idw-power", run_cfg.idw_power, "IDW exponent");
    auto* f_idw_k = run->add_option("--idw-k", run_cfg.idw_k, "IDW neighbor count");
    auto* f_cache = run->add_flag("--cache,!--no-cache", run_cfg.cache_enabled,
                                  "cache groups on disk");

    // eval
    std::vector<std::string> e_runs;
    std::string e_dataset, e_csv;
    auto* eval = app.add_subcommand("eval", "Metrics for finished runs");
    eval->add_option("--run", e_runs, "run directory (repeatable)")->required();
    eval->add_option("--dataset", e_dataset, "path to dataset.json")->required();
    eval->add_option("--csv", e_csv, "metrics CSV output path");

    // plot
    std::string p_run, p_out, p_dataset;
    auto* plot = app.add_subcommand("plot", "Heatmap PNGs from run maps");
    plot->add_option("--run", p_run, "run directory")->required();
    plot->add_option("--out", p_out, "PNG output directory")->required();
    plot->add_option("--dataset", p_dataset, "dataset.json for mask contour overlay");

    // synth
    muscore::SynthConfig synth_cfg;
    std::string s_out;
    auto* synth = app.add_subcommand("synth", "Generate a planted-anomaly dataset");
    synth->add_option("--out", s_out, "dataset output directory")->required();
    synth->add_option("--samples", synth_cfg.sample_count, "sample count");
    synth->add_option("--grid", synth_cfg.grid_side, "2D patch grid side");
    synth->add_option("--channels", synth_cfg.channels, "feature channels per stage");
    synth->add_option("--stages", synth_cfg.stages, "stage count");
    synth->add_option("--prototypes", synth_cfg.prototype_count, "normal prototype count");
    synth->add_option("--anomaly-rate", synth_cfg.anomaly_rate, "anomalous sample fraction");
    synth->add_option("--anomaly-magnitude", synth_cfg.anomaly_magnitude,
                      "outlier distance from prototypes");
    synth->add_option("--noise-sigma", synth_cfg.noise_sigma, "normal feature noise");
    synth->add_option("--plane-grid", synth_cfg.plane_grid, "organized cloud resolution");
    synth->add_option("--bump-amplitude", synth_cfg.bump_amplitude, "geometric bump height");
    synth->add_option("--plane-noise", synth_cfg.plane_noise, "surface noise");
    synth->add_option("--seed", synth_cfg.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(v_dataset);

        if (run->parsed()) {
            // run_cfg currently holds defaults + command-line values.
            // Flags win over the config file, so snapshot them, apply the
            // file on top of fresh defaults, then restore what was given
            // explicitly.
            const muscore::RunConfig flagged = run_cfg;
            if (!run_config_file.empty()) {
                run_cfg = muscore::RunConfig{};
                muscore::apply_config(run_cfg, muscore::parse_config_file(run_config_file));
            }
            if (f_dataset->count()) run_cfg.dataset_path = flagged.dataset_path;
            if (f_out->count()) run_cfg.output_dir = flagged.output_dir;
            if (f_modality->count()) run_cfg.modality = muscore::parse_modality(run_modality);
            if (f_workers->count()) run_cfg.workers = flagged.workers;
            if (f_gcount->count()) run_cfg.group_count = flagged.group_count;
            if (f_gsize->count()) run_cfg.group_size = flagged.group_size;
            if (f_iter->count()) run_cfg.iter_increment = flagged.iter_increment;
            if (f_curv->count()) run_cfg.curvature_threshold = flagged.curvature_threshold;
            if (f_degrees->count()) {
                std::map<std::string, std::string> one{{"snamd.degrees", run_degrees}};
                muscore::apply_config(run_cfg, one);
            }
            if (f_interval->count()) run_cfg.interval_percent = flagged.interval_percent;
            if (f_cae->count()) run_cfg.cae_enabled = flagged.cae_enabled;
            if (f_window->count()) run_cfg.window_size = flagged.window_size;
            if (f_rescon->count()) run_cfg.rescon_enabled = flagged.rescon_enabled;
            if (f_g->count()) run_cfg.subset_count = flagged.subset_count;
            if (f_seed->count()) run_cfg.subset_seed = flagged.subset_seed;
            if (f_idw_p->count()) run_cfg.idw_power = flagged.idw_power;
            if (f_idw_k->count()) run_cfg.idw_k = flagged.idw_k;
            if (f_cache->count()) run_cfg.cache_enabled = flagged.cache_enabled;
            if (run_cfg.dataset_path.empty() || run_cfg.output_dir.empty())
                throw muscore::InvalidConfig("--dataset and --out are required (flag or config)");
            if (!f_workers->count() && run_cfg.workers <= 1) run_cfg.workers = env_workers();

            const muscore::RunResult result = muscore::run_pipeline(run_cfg);
            std::cout << "scored " << result.samples.size() << " samples -> "
                      << result.output_dir << "\n";
            return 0;
        }

        if (eval->parsed()) {
            const auto rows = muscore::evaluate_runs(e_runs, e_dataset);
            for (const auto& r : rows)
                std::cout << r.metric << ": " << r.mean
                          << (r.runs > 1 ? " +/- " + std::to_string(r.stddev) : "") << "\n";
            if (!e_csv.empty()) muscore::write_metrics_csv(e_csv, rows);
            return 0;
        }

        if (plot->parsed()) {
            muscore::plot_run(p_run, p_out, p_dataset);
            std::cout << "heatmaps written to " << p_out << "\n";
            return 0;
        }

        if (synth->parsed()) {
            const muscore::SynthSummary s = muscore::generate_synthetic_dataset(synth_cfg, s_out);
            std::cout << "wrote " << s.manifest_path << " (" << s.anomalous_ids.size()
                      << " anomalous)\n";
            return 0;
        }
    } catch (const muscore::InvalidConfig& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
