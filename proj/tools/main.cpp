#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "deepcontrast/clahe.hpp"
#include "deepcontrast/gain.hpp"
#include "deepcontrast/harness.hpp"
#include "deepcontrast/svgplot.hpp"
#include "deepcontrast/tiff.hpp"
#include "deepcontrast/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace deepcontrast;

namespace {

// Every subcommand runs through a handler taking (config, args, out_dir) and
// returning the files it wrote; `rerun` re-dispatches a stored manifest
// through the same path, which is what makes reruns bit-exact.
using Handler = std::function<std::vector<std::string>(const ExperimentConfig&, const json&,
                                                       const fs::path&)>;

Volume read_input_volume(const std::string& path) { return read_volume(path); }

std::vector<SegmentationMask> read_mask_stack(const std::string& path) {
    const Volume v = read_volume(path);
    std::vector<SegmentationMask> masks;
    for (const Plane& p : v.planes) {
        SegmentationMask m(p.height, p.width);
        for (size_t i = 0; i < p.pixels.size(); ++i) m.pixels[i] = p.pixels[i] > 127.0f ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

std::vector<std::string> run_phantom(const ExperimentConfig& cfg, const json& args,
                                     const fs::path& out) {
    const int count = args.value("count", 1);
    std::vector<std::string> outputs;
    for (int i = 0; i < count; ++i) {
        const PhantomSample sample = make_phantom(cfg.phantom, cfg.phantom.seed + i);
        const std::string stem = "phantom_" + std::to_string(i);
        const fs::path clean_path = out / (stem + "_clean.tif");
        const fs::path raw_path = out / (stem + "_raw.tif");
        const fs::path mask_path = out / (stem + "_masks.tif");
        write_volume(sample.clean, clean_path.string());
        write_volume(sample.pseudo_raw, raw_path.string());
        std::vector<std::vector<uint8_t>> mask_bytes;
        for (const auto& m : sample.masks) mask_bytes.push_back(m.pixels);
        write_mask_stack(mask_bytes, cfg.phantom.height, cfg.phantom.width, mask_path.string());
        outputs.push_back(clean_path.filename().string());
        outputs.push_back(raw_path.filename().string());
        outputs.push_back(mask_path.filename().string());
    }
    return outputs;
}

std::vector<std::string> run_degrade(const ExperimentConfig& cfg, const json& args,
                                     const fs::path& out) {
    const Volume input = read_input_volume(args.at("input"));
    std::vector<std::string> outputs;
    if (args.value("double", false)) {
        const auto [d, e] = double_degrade(input, cfg.degradation);
        write_volume(d, (out / "degraded.tif").string());
        write_volume(e, (out / "degraded_twice.tif").string());
        outputs = {"degraded.tif", "degraded_twice.tif"};
    } else {
        write_volume(degrade_volume(input, cfg.degradation), (out / "degraded.tif").string());
        outputs = {"degraded.tif"};
    }
    return outputs;
}

std::vector<std::pair<Volume, Volume>> build_training_pairs(const ExperimentConfig& cfg,
                                                            const json& args) {
    std::vector<Volume> raws;
    if (args.contains("inputs") && !args.at("inputs").empty()) {
        for (const auto& p : args.at("inputs")) raws.push_back(read_input_volume(p));
    } else {
        for (const auto& sample :
             make_phantom_set(cfg.phantom, cfg.n_train_phantoms, cfg.phantom.seed))
            raws.push_back(sample.pseudo_raw);
    }
    const bool double_pairs = args.value("pairs", std::string("single")) == "double";
    std::vector<std::pair<Volume, Volume>> pairs;
    for (size_t i = 0; i < raws.size(); ++i) {
        DegradationConfig deg = cfg.degradation;
        deg.seed = cfg.degradation.seed + i;
        if (double_pairs) {
            auto [d, e] = double_degrade(raws[i], deg);
            pairs.emplace_back(std::move(e), std::move(d));
        } else {
            pairs.emplace_back(degrade_volume(raws[i], deg), raws[i]);
        }
    }
    return pairs;
}

std::vector<std::string> run_train(const ExperimentConfig& cfg, const json& args,
                                   const fs::path& out) {
    const auto pairs = build_training_pairs(cfg, args);
    const TrainOutcome outcome = train_on_pairs(pairs, cfg.model, cfg.training);
    save_checkpoint(outcome.checkpoint, (out / "model.ckpt").string());

    std::string hist = "epoch,train_loss,val_loss,learning_rate\n";
    for (size_t e = 0; e < outcome.checkpoint.history.size(); ++e) {
        const auto& row = outcome.checkpoint.history[e];
        hist += std::to_string(e) + "," + std::to_string(row.train_loss) + "," +
                std::to_string(row.val_loss) + "," + std::to_string(row.learning_rate) + "\n";
    }
    write_text_file((out / "history.csv").string(), hist);
    std::fprintf(stderr, "[train] best val MAE %.6f (identity baseline %.6f)\n",
                 outcome.best_val_loss, outcome.identity_val_loss);
    return {"model.ckpt", "history.csv"};
}

std::vector<std::string> run_enhance(const ExperimentConfig& cfg, const json& args,
                                     const fs::path& out) {
    const Volume input = read_input_volume(args.at("input"));
    const Checkpoint ckpt = load_checkpoint(args.at("checkpoint"));
    NetworkPlaneModel model(ckpt);
    InferenceConfig infer_cfg = cfg.inference;
    if (args.contains("iterations")) infer_cfg.iterations = args.at("iterations");
    const auto iters = enhance_iterative(model, input, infer_cfg);
    std::vector<std::string> outputs;
    for (size_t k = 0; k < iters.size(); ++k) {
        const std::string name = "enhanced_" + std::to_string(k + 1) + "x.tif";
        write_volume(iters[k], (out / name).string());
        outputs.push_back(name);
    }
    return outputs;
}

std::vector<std::string> run_metrics(const ExperimentConfig& cfg, const json& args,
                                     const fs::path& out) {
    (void)cfg;
    const fs::path csv_path = out / "metrics.csv";
    if (!args.value("render_only", false)) {
        std::vector<MetricsRow> rows;
        Volume ref;
        const bool has_ref = args.contains("ref");
        if (has_ref) ref = read_input_volume(args.at("ref"));
        for (const auto& [name, path] : args.at("inputs").items()) {
            const Volume v = read_input_volume(path);
            const auto variant_rows = compute_volume_metrics(name, v, has_ref ? &ref : nullptr);
            rows.insert(rows.end(), variant_rows.begin(), variant_rows.end());
        }
        write_report_csv(aggregate_report(rows), csv_path.string());
    }
    // plots are always rendered from the CSV file itself
    const auto stats = parse_report_csv(read_text_file(csv_path.string()));
    write_text_file((out / "wci.svg").string(), render_metric_plot(stats, "wci"));
    write_text_file((out / "pci.svg").string(), render_metric_plot(stats, "pci"));
    std::vector<std::string> outputs = {"metrics.csv", "wci.svg", "pci.svg"};
    bool any_ssim = false;
    for (const auto& g : stats) any_ssim = any_ssim || g.ssim_mean.has_value();
    if (any_ssim) {
        write_text_file((out / "ssim.svg").string(), render_metric_plot(stats, "ssim"));
        outputs.push_back("ssim.svg");
    }
    return outputs;
}

std::vector<std::string> run_sweep(const ExperimentConfig& cfg, const json& args,
                                   const fs::path& out) {
    (void)cfg;
    std::vector<Volume> volumes;
    for (const auto& p : args.at("inputs")) volumes.push_back(read_input_volume(p));
    const auto masks = read_mask_stack(args.at("gt"));
    const SweepResult result = iteration_sweep(volumes, masks);

    json summary;
    summary["selected_k"] = result.selected_k;
    json per_k = json::array();
    for (const auto& entry : result.per_k)
        per_k.push_back({{"k", entry.k},
                         {"mean_best_threshold", entry.mean_best_threshold},
                         {"mean_best_iou", entry.mean_best_iou},
                         {"iou_distribution", entry.iou_distribution}});
    summary["per_k"] = std::move(per_k);
    write_text_file((out / "sweep.json").string(), summary.dump(2) + "\n");

    std::string csv = "k,plane,iou\n";
    std::vector<std::string> labels;
    std::vector<std::vector<double>> dists;
    for (const auto& entry : result.per_k) {
        for (size_t z = 0; z < entry.iou_distribution.size(); ++z)
            csv += std::to_string(entry.k) + "," + std::to_string(z) + "," +
                   std::to_string(entry.iou_distribution[z]) + "\n";
        labels.push_back("k=" + std::to_string(entry.k));
        dists.push_back(entry.iou_distribution);
    }
    write_text_file((out / "sweep.csv").string(), csv);
    write_text_file((out / "sweep_violin.svg").string(),
                    render_violin_svg("best-threshold IoU by iteration", "IoU", labels, dists));
    return {"sweep.json", "sweep.csv", "sweep_violin.svg"};
}

std::vector<std::string> run_verify_double_cmd(const ExperimentConfig& cfg, const json& args,
                                               const fs::path& out) {
    (void)args;
    Checkpoint model_a, model_b;
    const VerifyDoubleResult result = run_verify_double(cfg, &model_a, &model_b);
    write_text_file((out / "table1.csv").string(), result.csv());
    save_checkpoint(model_a, (out / "model_a.ckpt").string());
    save_checkpoint(model_b, (out / "model_b.ckpt").string());
    std::printf("%s", result.csv().c_str());
    return {"table1.csv", "model_a.ckpt", "model_b.ckpt"};
}

std::vector<std::string> run_ablate_bias_cmd(const ExperimentConfig& cfg, const json& args,
                                             const fs::path& out) {
    (void)args;
    const AblateBiasResult result = run_ablate_bias(cfg);
    write_text_file((out / "ablate.csv").string(), result.csv());
    std::printf("%s", result.csv().c_str());
    return {"ablate.csv"};
}

std::vector<std::string> run_estimate_gain(const ExperimentConfig& cfg, const json& args,
                                           const fs::path& out) {
    (void)cfg;
    const Volume v = read_input_volume(args.at("input"));
    const double gain = estimate_gain(v, args.value("patch", 8));
    json j;
    j["gain"] = gain;
    write_text_file((out / "gain.json").string(), j.dump(2) + "\n");
    std::printf("estimated gain: %g photons per intensity unit\n", gain);
    return {"gain.json"};
}

std::vector<std::string> run_clahe(const ExperimentConfig& cfg, const json& args,
                                   const fs::path& out) {
    (void)cfg;
    const Volume v = read_input_volume(args.at("input"));
    Volume result = v;
    for (size_t z = 0; z < v.planes.size(); ++z)
        result.planes[z] = clahe(v.planes[z], args.value("tile", 8),
                                 args.value("clip_limit", 3.0f), args.value("bins", 256));
    write_volume(result, (out / "clahe.tif").string());
    return {"clahe.tif"};
}

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> table = {
        {"phantom", run_phantom},       {"degrade", run_degrade},
        {"train", run_train},           {"enhance", run_enhance},
        {"metrics", run_metrics},       {"sweep", run_sweep},
        {"verify-double", run_verify_double_cmd},
        {"ablate-bias", run_ablate_bias_cmd},
        {"estimate-gain", run_estimate_gain},
        {"clahe", run_clahe},
    };
    return table;
}

// collect hashes of every input file mentioned in args
std::map<std::string, uint64_t> hash_inputs(const json& args) {
    std::map<std::string, uint64_t> hashes;
    auto hash_file = [&](const std::string& path) {
        const std::string bytes = read_text_file(path);
        hashes[path] = fnv1a64(bytes.data(), bytes.size());
    };
    for (const char* key : {"input", "gt", "ref", "checkpoint"})
        if (args.contains(key)) hash_file(args.at(key));
    if (args.contains("inputs")) {
        const json& inputs = args.at("inputs");
        if (inputs.is_array())
            for (const auto& p : inputs) hash_file(p);
        else
            for (const auto& [name, p] : inputs.items()) hash_file(p);
    }
    return hashes;
}

int dispatch(const std::string& subcommand, const ExperimentConfig& cfg, const json& args,
             const std::string& out_dir) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    const auto it = handlers().find(subcommand);
    if (it == handlers().end()) {
        std::fprintf(stderr, "unknown subcommand: %s\n", subcommand.c_str());
        return 2;
    }
    const std::vector<std::string> outputs = it->second(cfg, args, out);
    RunManifest manifest;
    manifest.subcommand = subcommand;
    manifest.config_json = config_to_json_text(cfg);
    manifest.args_json = args.dump();
    manifest.input_hashes = hash_inputs(args);
    manifest.outputs = outputs;
    manifest.code_version = kVersion;
    manifest.deterministic = deterministic_mode();
    write_run_manifest(manifest, out.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depth-degradation contrast enhancement toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path, out_dir = "out";
    uint64_t seed = 0;
    bool seed_set = false;
    std::string profile;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option_function<uint64_t>(
           "--seed", [&](uint64_t s) { seed = s; seed_set = true; }, "master seed");
    app.add_option("--profile", profile, "hyperparameter profile: desk or paper");

    // subcommand-specific state
    int phantom_count = 1;
    std::string input_path, checkpoint_path, gt_path, ref_path, manifest_path, pairs = "single";
    std::vector<std::string> input_list;
    std::vector<std::string> named_inputs;
    int iterations = 0, patch = 8, tile = 8, bins = 256;
    float clip_limit = 3.0f;
    bool double_flag = false, render_only = false;

    CLI::App* cmd_phantom = app.add_subcommand("phantom", "generate clean/pseudo-raw/mask TIFFs");
    cmd_phantom->add_option("--count", phantom_count, "number of phantoms");

    CLI::App* cmd_degrade = app.add_subcommand("degrade", "apply the degradation model");
    cmd_degrade->add_option("--input", input_path, "raw volume TIFF")->required();
    cmd_degrade->add_flag("--double", double_flag, "also emit the twice-degraded volume");

    CLI::App* cmd_train = app.add_subcommand("train", "train an enhancement model");
    cmd_train->add_option("--input", input_list, "raw volume TIFFs (default: phantoms)");
    cmd_train->add_option("--pairs", pairs, "single: (d(x), x); double: (d(d(x)), d(x))")
        ->check(CLI::IsMember({"single", "double"}));

    CLI::App* cmd_enhance = app.add_subcommand("enhance", "apply a trained model iteratively");
    cmd_enhance->add_option("--input", input_path, "volume TIFF")->required();
    cmd_enhance->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    cmd_enhance->add_option("--iterations", iterations, "number of applications");

    CLI::App* cmd_metrics = app.add_subcommand("metrics", "per-depth contrast metrics + plots");
    cmd_metrics->add_option("--input", named_inputs, "variant=path TIFF volumes");
    cmd_metrics->add_option("--ref", ref_path, "reference volume for SSIM");
    cmd_metrics->add_flag("--render-only", render_only, "re-render plots from metrics.csv");

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "segmentation IoU iteration sweep");
    cmd_sweep->add_option("--input", input_list, "volumes ordered k=0 (raw), k=1, ...")
        ->required();
    cmd_sweep->add_option("--gt", gt_path, "ground-truth mask stack TIFF")->required();

    app.add_subcommand("verify-double", "double-degradation verification protocol");
    app.add_subcommand("ablate-bias", "train and compare -bias / +bias twins");

    CLI::App* cmd_gain = app.add_subcommand("estimate-gain", "patch mean-variance gain fit");
    cmd_gain->add_option("--input", input_path, "raw volume TIFF")->required();
    cmd_gain->add_option("--patch", patch, "patch side in px");

    CLI::App* cmd_clahe = app.add_subcommand("clahe", "CLAHE baseline transform");
    cmd_clahe->add_option("--input", input_path, "volume TIFF")->required();
    cmd_clahe->add_option("--tile", tile, "tiles per dimension");
    cmd_clahe->add_option("--clip", clip_limit, "histogram clip limit");
    cmd_clahe->add_option("--bins", bins, "histogram bins");

    CLI::App* cmd_rerun = app.add_subcommand("rerun", "re-execute a run manifest");
    cmd_rerun->add_option("--manifest", manifest_path, "run-manifest.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_rerun->parsed()) {
            const RunManifest m = read_run_manifest(manifest_path);
            const ExperimentConfig cfg = config_from_json_text(m.config_json);
            return dispatch(m.subcommand, cfg, json::parse(m.args_json), out_dir);
        }

        ExperimentConfig cfg =
            config_path.empty() ? default_config() : load_config_file(config_path);
        if (!profile.empty()) {
            cfg.profile = profile;
            cfg.apply_profile();
        }
        if (seed_set) cfg.apply_seed(seed);
        cfg.validate();

        json args = json::object();
        std::string subcommand;
        if (cmd_phantom->parsed()) {
            subcommand = "phantom";
            args["count"] = phantom_count;
        } else if (cmd_degrade->parsed()) {
            subcommand = "degrade";
            args["input"] = input_path;
            args["double"] = double_flag;
        } else if (cmd_train->parsed()) {
            subcommand = "train";
            if (!input_list.empty()) args["inputs"] = input_list;
            args["pairs"] = pairs;
        } else if (cmd_enhance->parsed()) {
            subcommand = "enhance";
            args["input"] = input_path;
            args["checkpoint"] = checkpoint_path;
            if (iterations > 0) args["iterations"] = iterations;
        } else if (cmd_metrics->parsed()) {
            subcommand = "metrics";
            json inputs = json::object();
            for (const std::string& spec : named_inputs) {
                const size_t eq = spec.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("--input expects variant=path, got: " + spec);
                inputs[spec.substr(0, eq)] = spec.substr(eq + 1);
            }
            args["inputs"] = std::move(inputs);
            if (!ref_path.empty()) args["ref"] = ref_path;
            args["render_only"] = render_only;
        } else if (cmd_sweep->parsed()) {
            subcommand = "sweep";
            args["inputs"] = input_list;
            args["gt"] = gt_path;
        } else if (app.get_subcommand("verify-double")->parsed()) {
            subcommand = "verify-double";
        } else if (app.get_subcommand("ablate-bias")->parsed()) {
            subcommand = "ablate-bias";
        } else if (cmd_gain->parsed()) {
            subcommand = "estimate-gain";
            args["input"] = input_path;
            args["patch"] = patch;
        } else if (cmd_clahe->parsed()) {
            subcommand = "clahe";
            args["input"] = input_path;
            args["tile"] = tile;
            args["clip_limit"] = clip_limit;
            args["bins"] = bins;
        }
        return dispatch(subcommand, cfg, args, out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
