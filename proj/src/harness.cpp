#include "deepcontrast/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "deepcontrast/svgplot.hpp"
#include "deepcontrast/version.hpp"

namespace deepcontrast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigVersion = 1;

json phantom_to_json(const PhantomConfig& p) {
    return {{"width", p.width},
            {"height", p.height},
            {"n_slices", p.n_slices},
            {"n_cells", p.n_cells},
            {"border_width_px", p.border_width_px},
            {"border_intensity", p.border_intensity},
            {"background_intensity", p.background_intensity},
            {"depth_blur_sigma_max", p.depth_blur_sigma_max},
            {"depth_attenuation", p.depth_attenuation},
            {"gain", p.gain},
            {"seed", p.seed}};
}

void phantom_from_json(const json& j, PhantomConfig& p) {
    p.width = j.value("width", p.width);
    p.height = j.value("height", p.height);
    p.n_slices = j.value("n_slices", p.n_slices);
    p.n_cells = j.value("n_cells", p.n_cells);
    p.border_width_px = j.value("border_width_px", p.border_width_px);
    p.border_intensity = j.value("border_intensity", p.border_intensity);
    p.background_intensity = j.value("background_intensity", p.background_intensity);
    p.depth_blur_sigma_max = j.value("depth_blur_sigma_max", p.depth_blur_sigma_max);
    p.depth_attenuation = j.value("depth_attenuation", p.depth_attenuation);
    p.gain = j.value("gain", p.gain);
    p.seed = j.value("seed", p.seed);
}

json degradation_to_json(const DegradationConfig& d) {
    return {{"sigma_px", d.sigma_px},
            {"gain", d.gain},
            {"alpha_top", d.alpha_top},
            {"alpha_bottom", d.alpha_bottom},
            {"seed", d.seed}};
}

void degradation_from_json(const json& j, DegradationConfig& d) {
    d.sigma_px = j.value("sigma_px", d.sigma_px);
    d.gain = j.value("gain", d.gain);
    d.alpha_top = j.value("alpha_top", d.alpha_top);
    d.alpha_bottom = j.value("alpha_bottom", d.alpha_bottom);
    d.seed = j.value("seed", d.seed);
}

json model_to_json(const ModelSpec& m) {
    return {{"depth", m.depth},
            {"base_channels", m.base_channels},
            {"kernel_size", m.kernel_size},
            {"bias_free", m.bias_free}};
}

void model_from_json(const json& j, ModelSpec& m) {
    m.depth = j.value("depth", m.depth);
    m.base_channels = j.value("base_channels", m.base_channels);
    m.kernel_size = j.value("kernel_size", m.kernel_size);
    m.bias_free = j.value("bias_free", m.bias_free);
}

json training_to_json(const TrainConfig& t) {
    return {{"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"steps_per_epoch", t.steps_per_epoch},
            {"batch_size", t.batch_size},
            {"patch_size", t.patch_size},
            {"validation_fraction", t.validation_fraction},
            {"lr_reduce_factor", t.lr_reduce_factor},
            {"lr_reduce_patience_epochs", t.lr_reduce_patience_epochs},
            {"augment", t.augment},
            {"seed", t.seed}};
}

void training_from_json(const json& j, TrainConfig& t) {
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.epochs = j.value("epochs", t.epochs);
    t.steps_per_epoch = j.value("steps_per_epoch", t.steps_per_epoch);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.patch_size = j.value("patch_size", t.patch_size);
    t.validation_fraction = j.value("validation_fraction", t.validation_fraction);
    t.lr_reduce_factor = j.value("lr_reduce_factor", t.lr_reduce_factor);
    t.lr_reduce_patience_epochs = j.value("lr_reduce_patience_epochs", t.lr_reduce_patience_epochs);
    t.augment = j.value("augment", t.augment);
    t.seed = j.value("seed", t.seed);
}

json inference_to_json(const InferenceConfig& i) {
    return {{"iterations", i.iterations},
            {"tile_size", i.tile_size},
            {"tile_overlap", i.tile_overlap},
            {"clip_floor", i.clip_floor}};
}

void inference_from_json(const json& j, InferenceConfig& i) {
    i.iterations = j.value("iterations", i.iterations);
    i.tile_size = j.value("tile_size", i.tile_size);
    i.tile_overlap = j.value("tile_overlap", i.tile_overlap);
    i.clip_floor = j.value("clip_floor", i.clip_floor);
}

}  // namespace

void ExperimentConfig::apply_profile() {
    if (profile == "desk") {
        model = desk_model_spec();
        training = desk_train_config();
    } else if (profile == "paper") {
        model = paper_model_spec();
        training = paper_train_config();
    } else {
        throw std::invalid_argument("unknown profile: " + profile + " (expected desk or paper)");
    }
}

void ExperimentConfig::apply_seed(uint64_t s) {
    seed = s;
    phantom.seed = s;
    degradation.seed = s;
    training.seed = s;
}

void ExperimentConfig::validate() const {
    phantom.validate();
    degradation.validate();
    training.validate(model);
    inference.validate();
    if (n_train_phantoms < 1 || n_eval_phantoms < 1)
        throw std::invalid_argument("phantom counts must be >= 1");
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.apply_profile();
    cfg.apply_seed(cfg.seed);
    // The DegradationConfig default gain (0.1) is calibrated for 16-bit-range
    // intensities; phantom volumes live on a ~8-bit scale, so the experiment
    // default uses the matching photon budget.
    cfg.degradation.gain = 1.0f;
    return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    json j;
    j["config_version"] = kConfigVersion;
    j["profile"] = cfg.profile;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["n_train_phantoms"] = cfg.n_train_phantoms;
    j["n_eval_phantoms"] = cfg.n_eval_phantoms;
    j["phantom"] = phantom_to_json(cfg.phantom);
    j["degradation"] = degradation_to_json(cfg.degradation);
    j["model"] = model_to_json(cfg.model);
    j["training"] = training_to_json(cfg.training);
    j["inference"] = inference_to_json(cfg.inference);
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_text(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("config_version", kConfigVersion) != kConfigVersion)
        throw std::invalid_argument("unsupported config_version");
    ExperimentConfig cfg;
    cfg.profile = j.value("profile", cfg.profile);
    cfg.apply_profile();
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.n_train_phantoms = j.value("n_train_phantoms", cfg.n_train_phantoms);
    cfg.n_eval_phantoms = j.value("n_eval_phantoms", cfg.n_eval_phantoms);
    if (j.contains("phantom")) phantom_from_json(j["phantom"], cfg.phantom);
    if (j.contains("degradation")) degradation_from_json(j["degradation"], cfg.degradation);
    if (j.contains("model")) model_from_json(j["model"], cfg.model);
    if (j.contains("training")) training_from_json(j["training"], cfg.training);
    if (j.contains("inference")) inference_from_json(j["inference"], cfg.inference);
    if (j.contains("seed")) cfg.apply_seed(j["seed"].get<uint64_t>());
    // sub-config seeds may still be overridden explicitly
    if (j.contains("phantom") && j["phantom"].contains("seed"))
        cfg.phantom.seed = j["phantom"]["seed"].get<uint64_t>();
    if (j.contains("degradation") && j["degradation"].contains("seed"))
        cfg.degradation.seed = j["degradation"]["seed"].get<uint64_t>();
    if (j.contains("training") && j["training"].contains("seed"))
        cfg.training.seed = j["training"]["seed"].get<uint64_t>();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    return config_from_json_text(read_text_file(path));
}

bool deterministic_mode() {
    const char* v = std::getenv("DEEPCONTRAST_DETERMINISTIC");
    return v != nullptr && std::string(v) == "1";
}

void write_run_manifest(const RunManifest& m, const std::string& out_dir) {
    json j;
    j["tool"] = "deepcontrast";
    j["code_version"] = m.code_version.empty() ? kVersion : m.code_version;
    j["subcommand"] = m.subcommand;
    j["deterministic"] = m.deterministic;
    j["config"] = json::parse(m.config_json);
    j["args"] = m.args_json.empty() ? json::object() : json::parse(m.args_json);
    json inputs = json::object();
    for (const auto& [path, hash] : m.input_hashes) {
        std::ostringstream os;
        os << std::hex << hash;
        inputs[path] = os.str();
    }
    j["inputs"] = std::move(inputs);
    j["outputs"] = m.outputs;
    write_text_file((fs::path(out_dir) / "run-manifest.json").string(), j.dump(2) + "\n");
}

RunManifest read_run_manifest(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    RunManifest m;
    m.subcommand = j.at("subcommand");
    m.config_json = j.at("config").dump();
    m.args_json = j.at("args").dump();
    m.code_version = j.at("code_version");
    m.deterministic = j.at("deterministic");
    for (const auto& [key, value] : j.at("inputs").items())
        m.input_hashes[key] = std::stoull(value.get<std::string>(), nullptr, 16);
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
}

PhantomSample make_phantom(PhantomConfig cfg, uint64_t seed) {
    cfg.seed = seed;
    PhantomSample sample;
    auto [clean, masks] = generate_clean(cfg);
    sample.clean = std::move(clean);
    sample.masks = std::move(masks);
    sample.pseudo_raw = apply_pseudo_raw(sample.clean, cfg);
    return sample;
}

std::vector<PhantomSample> make_phantom_set(const PhantomConfig& cfg, int count, uint64_t seed0) {
    std::vector<PhantomSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(make_phantom(cfg, seed0 + i));
    return out;
}

TrainOutcome train_on_pairs(const std::vector<std::pair<Volume, Volume>>& pairs,
                            const ModelSpec& spec, const TrainConfig& cfg) {
    PatchSampler sampler(pairs, cfg, spec);
    UNet<float> net(spec, cfg.seed);
    TrainOutcome outcome;
    outcome.identity_val_loss = static_cast<double>(
        mae_loss(sampler.validation_inputs(), sampler.validation_targets()));
    outcome.checkpoint = train(net, sampler, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : outcome.checkpoint.history) best = std::min(best, e.val_loss);
    outcome.best_val_loss = best;
    return outcome;
}

std::vector<MetricsRow> compute_volume_metrics(const std::string& variant, const Volume& v,
                                               const Volume* ssim_reference) {
    std::vector<MetricsRow> rows;
    rows.reserve(v.planes.size());
    for (size_t z = 0; z < v.planes.size(); ++z) {
        MetricsRow row;
        row.variant = variant;
        row.depth_index = static_cast<int>(z);
        row.wci_value = wci(v.planes[z]);
        row.pci_value = pci(v.planes[z]);
        if (ssim_reference) row.ssim_vs_ref = ssim(v.planes[z], ssim_reference->planes[z]);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

double cell_to_double(const std::string& s) {
    return s.empty() ? std::nan("") : std::stod(s);
}

}  // namespace

std::vector<GroupStat> parse_report_csv(const std::string& csv_text) {
    std::istringstream is(csv_text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty report CSV");
    std::vector<GroupStat> stats;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 11) throw std::runtime_error("malformed report CSV row: " + line);
        GroupStat g;
        g.variant = cells[0];
        g.depth_index = std::stoi(cells[1]);
        g.n = std::stoi(cells[2]);
        g.wci_mean = cell_to_double(cells[3]);
        g.wci_ci95 = cell_to_double(cells[4]);
        g.pci_mean = cell_to_double(cells[5]);
        g.pci_ci95 = cell_to_double(cells[6]);
        if (!cells[7].empty()) {
            g.ssim_mean = cell_to_double(cells[7]);
            g.ssim_ci95 = cell_to_double(cells[8]);
        }
        if (!cells[9].empty()) {
            g.iou_mean = cell_to_double(cells[9]);
            g.iou_ci95 = cell_to_double(cells[10]);
        }
        stats.push_back(std::move(g));
    }
    return stats;
}

std::string render_metric_plot(const std::vector<GroupStat>& stats, const std::string& metric) {
    std::map<std::string, LineSeries> by_variant;
    for (const auto& g : stats) {
        double mean, ci;
        if (metric == "wci") {
            mean = g.wci_mean;
            ci = g.wci_ci95;
        } else if (metric == "pci") {
            mean = g.pci_mean;
            ci = g.pci_ci95;
        } else if (metric == "ssim") {
            if (!g.ssim_mean) continue;
            mean = *g.ssim_mean;
            ci = g.ssim_ci95 ? *g.ssim_ci95 : std::nan("");
        } else {
            throw std::invalid_argument("unknown metric for plotting: " + metric);
        }
        LineSeries& s = by_variant[g.variant];
        s.label = g.variant;
        s.x.push_back(g.depth_index);
        s.y.push_back(mean);
        s.ci.push_back(ci);
    }
    std::vector<LineSeries> series;
    for (auto& [_, s] : by_variant) series.push_back(std::move(s));
    std::string upper = metric;
    for (char& c : upper) c = static_cast<char>(std::toupper(c));
    return render_line_plot_svg(upper + " per depth", "depth index", upper, series);
}

namespace {

struct ColumnSamples {
    std::vector<double> values[VerifyDoubleResult::kColumns];
};

VerifyDoubleResult summarize_bands(const std::vector<ColumnSamples>& per_plane_bands,
                                   int n_slices) {
    // five equal fifths; band 0 is the deepest (largest depth_index)
    static const char* kBandNames[5] = {"very-deep", "deep", "intermediate", "shallow",
                                        "very-shallow"};
    VerifyDoubleResult result;
    std::vector<double> overall[VerifyDoubleResult::kColumns];
    for (int band = 0; band < 5; ++band) {
        const int z_lo = n_slices - (band + 1) * n_slices / 5;
        const int z_hi = n_slices - band * n_slices / 5;
        VerifyDoubleResult::BandRow row;
        row.band = kBandNames[band];
        for (int col = 0; col < VerifyDoubleResult::kColumns; ++col) {
            std::vector<double> vals;
            for (int z = z_lo; z < z_hi; ++z)
                for (double v : per_plane_bands[z].values[col]) vals.push_back(v);
            row.n = static_cast<int>(vals.size());
            row.mean[col] = mean_of(vals);
            row.sd[col] = vals.size() > 1 ? sample_sd(vals) : 0.0;
            overall[col].insert(overall[col].end(), vals.begin(), vals.end());
        }
        result.bands.push_back(std::move(row));
    }
    for (int col = 0; col < VerifyDoubleResult::kColumns; ++col)
        result.overall_mean[col] = mean_of(overall[col]);
    return result;
}

}  // namespace

std::string VerifyDoubleResult::csv() const {
    std::ostringstream os;
    os << "band,n,ssim_mb1_vs_raw_mean,ssim_mb1_vs_raw_sd,ssim_mb2_vs_ma1_mean,"
          "ssim_mb2_vs_ma1_sd,ssim_mb3_vs_ma2_mean,ssim_mb3_vs_ma2_sd\n";
    os.precision(6);
    for (const auto& b : bands) {
        os << b.band << ',' << b.n;
        for (int col = 0; col < kColumns; ++col) os << ',' << b.mean[col] << ',' << b.sd[col];
        os << '\n';
    }
    os << "overall,," << overall_mean[0] << ",," << overall_mean[1] << ",," << overall_mean[2]
       << ",\n";
    return os.str();
}

VerifyDoubleResult evaluate_verify_double(const ExperimentConfig& cfg, const Checkpoint& model_a,
                                          const Checkpoint& model_b) {
    const auto eval_set =
        make_phantom_set(cfg.phantom, cfg.n_eval_phantoms, cfg.phantom.seed + kEvalSeedOffset);

    NetworkPlaneModel ma(model_a);
    NetworkPlaneModel mb(model_b);
    InferenceConfig infer_cfg = cfg.inference;

    const int n_slices = cfg.phantom.n_slices;
    std::vector<ColumnSamples> per_plane(n_slices);
    for (size_t pi = 0; pi < eval_set.size(); ++pi) {
        const Volume& x = eval_set[pi].pseudo_raw;
        DegradationConfig deg = cfg.degradation;
        deg.seed = cfg.degradation.seed + kEvalSeedOffset + pi;
        const Volume d = degrade_volume(x, deg, 0);

        infer_cfg.iterations = 3;
        const std::vector<Volume> mb_iters = enhance_iterative(mb, d, infer_cfg);
        infer_cfg.iterations = 2;
        const std::vector<Volume> ma_iters = enhance_iterative(ma, x, infer_cfg);

        for (int z = 0; z < n_slices; ++z) {
            per_plane[z].values[0].push_back(ssim(mb_iters[0].planes[z], x.planes[z]));
            per_plane[z].values[1].push_back(ssim(mb_iters[1].planes[z], ma_iters[0].planes[z]));
            per_plane[z].values[2].push_back(ssim(mb_iters[2].planes[z], ma_iters[1].planes[z]));
        }
    }
    return summarize_bands(per_plane, n_slices);
}

VerifyDoubleResult run_verify_double(const ExperimentConfig& cfg, Checkpoint* model_a_out,
                                     Checkpoint* model_b_out) {
    cfg.validate();
    const auto train_set = make_phantom_set(cfg.phantom, cfg.n_train_phantoms, cfg.phantom.seed);

    std::vector<std::pair<Volume, Volume>> pairs_a, pairs_b;
    for (size_t i = 0; i < train_set.size(); ++i) {
        DegradationConfig deg = cfg.degradation;
        deg.seed = cfg.degradation.seed + i;
        auto [d, e] = double_degrade(train_set[i].pseudo_raw, deg);
        pairs_a.emplace_back(d, train_set[i].pseudo_raw);  // (d(x), x)
        pairs_b.emplace_back(std::move(e), std::move(d));  // (e, d)
    }

    TrainOutcome a = train_on_pairs(pairs_a, cfg.model, cfg.training);
    TrainOutcome b = train_on_pairs(pairs_b, cfg.model, cfg.training);
    if (model_a_out) *model_a_out = a.checkpoint;
    if (model_b_out) *model_b_out = b.checkpoint;
    return evaluate_verify_double(cfg, a.checkpoint, b.checkpoint);
}

std::string AblateBiasResult::csv() const {
    std::ostringstream os;
    os << "iteration,ssim_between,pci_bias_free,pci_with_bias,wci_bias_free,wci_with_bias\n";
    os.precision(6);
    os << "offsets,,," << offset_params_bias_free << ",," << offset_params_with_bias << "\n";
    for (size_t k = 0; k < ssim_between.size(); ++k)
        os << (k + 1) << ',' << ssim_between[k] << ',' << pci_bias_free[k] << ','
           << pci_with_bias[k] << ',' << wci_bias_free[k] << ',' << wci_with_bias[k] << '\n';
    return os.str();
}

AblateBiasResult run_ablate_bias(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto train_set = make_phantom_set(cfg.phantom, cfg.n_train_phantoms, cfg.phantom.seed);
    std::vector<std::pair<Volume, Volume>> pairs;
    for (size_t i = 0; i < train_set.size(); ++i) {
        DegradationConfig deg = cfg.degradation;
        deg.seed = cfg.degradation.seed + i;
        pairs.emplace_back(degrade_volume(train_set[i].pseudo_raw, deg), train_set[i].pseudo_raw);
    }

    ModelSpec spec_free = cfg.model;
    spec_free.bias_free = true;
    ModelSpec spec_bias = cfg.model;
    spec_bias.bias_free = false;
    TrainOutcome free_out = train_on_pairs(pairs, spec_free, cfg.training);
    TrainOutcome bias_out = train_on_pairs(pairs, spec_bias, cfg.training);

    AblateBiasResult result;
    result.offset_params_bias_free = free_out.checkpoint.to_model().offset_parameter_count();
    result.offset_params_with_bias = bias_out.checkpoint.to_model().offset_parameter_count();

    const auto eval_set =
        make_phantom_set(cfg.phantom, cfg.n_eval_phantoms, cfg.phantom.seed + kEvalSeedOffset);
    NetworkPlaneModel model_free(free_out.checkpoint);
    NetworkPlaneModel model_bias(bias_out.checkpoint);
    InferenceConfig infer_cfg = cfg.inference;
    infer_cfg.iterations = 3;

    const int k_max = infer_cfg.iterations;
    result.ssim_between.assign(k_max, 0.0);
    result.pci_bias_free.assign(k_max, 0.0);
    result.pci_with_bias.assign(k_max, 0.0);
    result.wci_bias_free.assign(k_max, 0.0);
    result.wci_with_bias.assign(k_max, 0.0);
    size_t n_planes = 0;
    for (const auto& sample : eval_set) {
        const auto iters_free = enhance_iterative(model_free, sample.pseudo_raw, infer_cfg);
        const auto iters_bias = enhance_iterative(model_bias, sample.pseudo_raw, infer_cfg);
        for (int k = 0; k < k_max; ++k) {
            for (size_t z = 0; z < sample.pseudo_raw.planes.size(); ++z) {
                result.ssim_between[k] +=
                    ssim(iters_free[k].planes[z], iters_bias[k].planes[z]);
                result.pci_bias_free[k] += pci(iters_free[k].planes[z]);
                result.pci_with_bias[k] += pci(iters_bias[k].planes[z]);
                result.wci_bias_free[k] += wci(iters_free[k].planes[z]);
                result.wci_with_bias[k] += wci(iters_bias[k].planes[z]);
            }
        }
        n_planes += sample.pseudo_raw.planes.size();
    }
    for (int k = 0; k < k_max; ++k) {
        result.ssim_between[k] /= static_cast<double>(n_planes);
        result.pci_bias_free[k] /= static_cast<double>(n_planes);
        result.pci_with_bias[k] /= static_cast<double>(n_planes);
        result.wci_bias_free[k] /= static_cast<double>(n_planes);
        result.wci_with_bias[k] /= static_cast<double>(n_planes);
    }
    return result;
}

}  // namespace deepcontrast
