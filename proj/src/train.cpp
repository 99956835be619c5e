#include "deepcontrast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "deepcontrast/version.hpp"

namespace deepcontrast {

using nlohmann::json;

void TrainConfig::validate(const ModelSpec& spec) const {
    spec.validate();
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (epochs < 1 || steps_per_epoch < 1) throw std::invalid_argument("epochs/steps must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (patch_size % spec.size_multiple() != 0)
        throw std::invalid_argument("patch_size must be divisible by 2^depth");
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
        throw std::invalid_argument("validation_fraction must be in (0, 0.5)");
    if (!(lr_reduce_factor > 0.0 && lr_reduce_factor <= 1.0))
        throw std::invalid_argument("lr_reduce_factor must be in (0, 1]");
    if (lr_reduce_patience_epochs < 1) throw std::invalid_argument("patience must be >= 1");
}

ModelSpec desk_model_spec() {
    ModelSpec s;
    s.depth = 3;
    s.base_channels = 16;
    return s;
}

TrainConfig desk_train_config() {
    TrainConfig c;
    c.epochs = 20;
    c.steps_per_epoch = 50;
    c.batch_size = 16;
    c.patch_size = 64;
    return c;
}

ModelSpec paper_model_spec() { return ModelSpec{}; }
TrainConfig paper_train_config() { return TrainConfig{}; }

namespace {

constexpr int kValPatches = 64;

// dihedral-8 patch copy: variant 0 is identity, 1-3 rotations, 4-7 mirrored
void copy_patch_d8(const Plane& src, int y0, int x0, int ps, int variant, float* dst) {
    for (int y = 0; y < ps; ++y) {
        for (int x = 0; x < ps; ++x) {
            int sy = y, sx = x;
            switch (variant & 3) {
                case 1: sy = x, sx = ps - 1 - y; break;
                case 2: sy = ps - 1 - y, sx = ps - 1 - x; break;
                case 3: sy = ps - 1 - x, sx = y; break;
                default: break;
            }
            if (variant & 4) sx = ps - 1 - sx;
            dst[y * ps + x] = src.at(y0 + sy, x0 + sx);
        }
    }
}

}  // namespace

PatchSampler::PatchSampler(const std::vector<std::pair<Volume, Volume>>& pairs,
                           const TrainConfig& cfg, const ModelSpec& spec)
    : cfg_(cfg), rng_(0) {
    cfg.validate(spec);
    if (pairs.empty()) throw std::invalid_argument("no training pairs");

    std::vector<PlaneRef> all;
    uint64_t dhash = 0xcbf29ce484222325ull;
    for (const auto& [input_vol, target_vol] : pairs) {
        if (input_vol.n_slices() != target_vol.n_slices() ||
            input_vol.height() != target_vol.height() || input_vol.width() != target_vol.width())
            throw std::invalid_argument("training pair volumes are not aligned");
        if (input_vol.height() < cfg.patch_size || input_vol.width() < cfg.patch_size)
            throw std::invalid_argument("plane smaller than patch_size");
        dhash = fnv1a64(&dhash, sizeof(dhash), hash_volume(input_vol));
        dhash = fnv1a64(&dhash, sizeof(dhash), hash_volume(target_vol));
        for (int z = 0; z < input_vol.n_slices(); ++z) {
            PlaneRef ref;
            NormalizationParams params;
            ref.input = normalize(input_vol.planes[z], params);
            ref.target = normalize_with(target_vol.planes[z], params);
            all.push_back(std::move(ref));
        }
    }
    dataset_hash_ = dhash;

    // seeded shuffle, then split off the validation planes
    Rng split_rng = substream(cfg.seed, {stream_tag::kSampler, 0});
    std::vector<size_t> order(all.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.uniform_below(i)]);
    size_t n_val = static_cast<size_t>(std::llround(cfg.validation_fraction * all.size()));
    n_val = std::clamp<size_t>(n_val, 1, all.size() - 1);
    for (size_t i = 0; i < order.size(); ++i) {
        if (i < n_val)
            val_planes_.push_back(std::move(all[order[i]]));
        else
            train_planes_.push_back(std::move(all[order[i]]));
    }

    // fixed validation patch set
    Rng val_rng = substream(cfg.seed, {stream_tag::kValSampler});
    const int ps = cfg.patch_size;
    val_x_ = Tensor4<float>(kValPatches, 1, ps, ps);
    val_t_ = Tensor4<float>(kValPatches, 1, ps, ps);
    for (int i = 0; i < kValPatches; ++i) {
        const PlaneRef& ref = val_planes_[val_rng.uniform_below(val_planes_.size())];
        const int y0 = static_cast<int>(val_rng.uniform_below(ref.input.height - ps + 1));
        const int x0 = static_cast<int>(val_rng.uniform_below(ref.input.width - ps + 1));
        sample_patch(ref, y0, x0, 0, val_x_.channel(i, 0), val_t_.channel(i, 0));
    }

    rng_ = substream(cfg.seed, {stream_tag::kSampler, 1});
}

void PatchSampler::sample_patch(const PlaneRef& ref, int y0, int x0, int d8, float* x,
                                float* t) const {
    copy_patch_d8(ref.input, y0, x0, cfg_.patch_size, d8, x);
    copy_patch_d8(ref.target, y0, x0, cfg_.patch_size, d8, t);
}

void PatchSampler::next_batch(Tensor4<float>& x, Tensor4<float>& target) {
    const int ps = cfg_.patch_size;
    if (x.n != cfg_.batch_size || x.h != ps || x.w != ps || x.c != 1)
        x = Tensor4<float>(cfg_.batch_size, 1, ps, ps);
    if (!target.same_shape(x)) target = Tensor4<float>(cfg_.batch_size, 1, ps, ps);
    last_offsets_.clear();
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const PlaneRef& ref = train_planes_[rng_.uniform_below(train_planes_.size())];
        const int y0 = static_cast<int>(rng_.uniform_below(ref.input.height - ps + 1));
        const int x0 = static_cast<int>(rng_.uniform_below(ref.input.width - ps + 1));
        const int d8 = cfg_.augment ? static_cast<int>(rng_.uniform_below(8)) : 0;
        sample_patch(ref, y0, x0, d8, x.channel(b, 0), target.channel(b, 0));
        last_offsets_.emplace_back(y0, x0);
    }
}

AdamOptimizer::AdamOptimizer(const UNet<float>& net, double learning_rate) : lr_(learning_rate) {
    for (const auto& l : net.layers()) {
        m_w_.emplace_back(l.weight.size(), 0.0f);
        v_w_.emplace_back(l.weight.size(), 0.0f);
        m_b_.emplace_back(l.bias.size(), 0.0f);
        v_b_.emplace_back(l.bias.size(), 0.0f);
    }
}

void AdamOptimizer::step(UNet<float>& net, const UNetGrads<float>& grads) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    auto update = [&](float* param, float* m, float* v, const float* g, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            const double gi = g[i];
            const double mi = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
            const double vi = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            param[i] -= static_cast<float>(lr_ * (mi / bc1) / (std::sqrt(vi / bc2) + kEps));
        }
    };
    auto& layers = net.layers();
    for (size_t li = 0; li < layers.size(); ++li) {
        update(layers[li].weight.data.data(), m_w_[li].data(), v_w_[li].data(),
               grads.weight[li].data.data(), layers[li].weight.size());
        if (!layers[li].bias.empty())
            update(layers[li].bias.data(), m_b_[li].data(), v_b_[li].data(), grads.bias[li].data(),
                   layers[li].bias.size());
    }
}

Checkpoint Checkpoint::from_model(const UNet<float>& net) {
    Checkpoint c;
    c.spec = net.spec();
    for (const auto& l : net.layers()) {
        TensorBlob wb;
        wb.name = l.name + ".weight";
        wb.shape = {l.weight.n, l.weight.c, l.weight.h, l.weight.w};
        wb.values = l.weight.data;
        c.tensors.push_back(std::move(wb));
        if (!l.bias.empty()) {
            TensorBlob bb;
            bb.name = l.name + ".bias";
            bb.shape = {static_cast<int>(l.bias.size())};
            bb.values = l.bias;
            c.tensors.push_back(std::move(bb));
        }
    }
    return c;
}

UNet<float> Checkpoint::to_model() const {
    UNet<float> net(spec, 0);
    size_t ti = 0;
    for (auto& l : net.layers()) {
        if (ti >= tensors.size() || tensors[ti].name != l.name + ".weight")
            throw std::runtime_error("checkpoint does not match model spec (missing " + l.name +
                                     ".weight)");
        if (tensors[ti].values.size() != l.weight.size())
            throw std::runtime_error("checkpoint weight size mismatch for " + l.name);
        l.weight.data = tensors[ti].values;
        ++ti;
        if (!l.bias.empty()) {
            if (ti >= tensors.size() || tensors[ti].name != l.name + ".bias")
                throw std::runtime_error("checkpoint does not match model spec (missing " +
                                         l.name + ".bias)");
            l.bias = tensors[ti].values;
            ++ti;
        }
    }
    if (ti != tensors.size()) throw std::runtime_error("checkpoint has extra tensors");
    return net;
}

Checkpoint train(UNet<float>& net, PatchSampler& sampler, const TrainConfig& cfg) {
    cfg.validate(net.spec());
    const char* verbose_env = std::getenv("DEEPCONTRAST_VERBOSE");
    const bool verbose = verbose_env != nullptr && std::string(verbose_env) == "1";
    AdamOptimizer opt(net, cfg.learning_rate);
    UNetGrads<float> grads = net.make_grads();
    UNetCache<float> cache;
    Tensor4<float> x, target, dpred;

    std::vector<EpochStats> history;
    double best_val = std::numeric_limits<double>::infinity();
    Checkpoint best = Checkpoint::from_model(net);
    int epochs_since_improvement = 0;

    auto validation_loss = [&]() {
        const Tensor4<float>& vx = sampler.validation_inputs();
        const Tensor4<float>& vt = sampler.validation_targets();
        const Tensor4<float> pred = net.forward(vx);
        return static_cast<double>(mae_loss(pred, vt));
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            sampler.next_batch(x, target);
            const Tensor4<float> pred = net.forward_train(x, cache);
            const float loss = mae_loss(pred, target, &dpred);
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged: loss is not finite at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));
            loss_sum += loss;
            grads.zero();
            net.backward(dpred, cache, grads);
            opt.step(net, grads);
        }
        EpochStats stats;
        stats.train_loss = loss_sum / cfg.steps_per_epoch;
        stats.val_loss = validation_loss();
        stats.learning_rate = opt.learning_rate();
        history.push_back(stats);
        if (verbose)
            std::fprintf(stderr, "[train] epoch %d/%d train %.5f val %.5f lr %.3g\n", epoch + 1,
                         cfg.epochs, stats.train_loss, stats.val_loss, stats.learning_rate);

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best = Checkpoint::from_model(net);
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement >= cfg.lr_reduce_patience_epochs) {
                opt.set_learning_rate(opt.learning_rate() * cfg.lr_reduce_factor);
                epochs_since_improvement = 0;
            }
        }
    }
    best.train_cfg = cfg;
    best.history = std::move(history);
    best.dataset_hash = sampler.dataset_hash();
    best.code_version = kVersion;
    best.seed = cfg.seed;
    return best;
}

namespace {

constexpr char kMagic[8] = {'D', 'C', 'C', 'K', '0', '0', '0', '1'};

json spec_to_json(const ModelSpec& s) {
    return {{"depth", s.depth},
            {"base_channels", s.base_channels},
            {"kernel_size", s.kernel_size},
            {"bias_free", s.bias_free}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.depth = j.at("depth");
    s.base_channels = j.at("base_channels");
    s.kernel_size = j.at("kernel_size");
    s.bias_free = j.at("bias_free");
    return s;
}

json train_cfg_to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"steps_per_epoch", c.steps_per_epoch},
            {"batch_size", c.batch_size},
            {"patch_size", c.patch_size},
            {"validation_fraction", c.validation_fraction},
            {"lr_reduce_factor", c.lr_reduce_factor},
            {"lr_reduce_patience_epochs", c.lr_reduce_patience_epochs},
            {"augment", c.augment},
            {"seed", c.seed}};
}

TrainConfig train_cfg_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate");
    c.epochs = j.at("epochs");
    c.steps_per_epoch = j.at("steps_per_epoch");
    c.batch_size = j.at("batch_size");
    c.patch_size = j.at("patch_size");
    c.validation_fraction = j.at("validation_fraction");
    c.lr_reduce_factor = j.at("lr_reduce_factor");
    c.lr_reduce_patience_epochs = j.at("lr_reduce_patience_epochs");
    c.augment = j.at("augment");
    c.seed = j.at("seed");
    return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    json meta;
    meta["model_spec"] = spec_to_json(c.spec);
    meta["train_config"] = train_cfg_to_json(c.train_cfg);
    json hist = json::array();
    for (const auto& e : c.history)
        hist.push_back({{"train_loss", e.train_loss},
                        {"val_loss", e.val_loss},
                        {"learning_rate", e.learning_rate}});
    meta["history"] = std::move(hist);
    meta["provenance"] = {{"dataset_hash", c.dataset_hash},
                          {"code_version", c.code_version},
                          {"seed", c.seed}};
    json manifest = json::array();
    for (const auto& t : c.tensors)
        manifest.push_back({{"name", t.name}, {"shape", t.shape}});
    meta["tensors"] = std::move(manifest);

    const std::string meta_str = meta.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint path for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    const uint64_t meta_len = meta_str.size();
    f.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
    f.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (const auto& t : c.tensors)
        f.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    uint64_t meta_len = 0;
    f.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
    std::string meta_str(meta_len, '\0');
    f.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    json meta = json::parse(meta_str);

    Checkpoint c;
    c.spec = spec_from_json(meta.at("model_spec"));
    c.train_cfg = train_cfg_from_json(meta.at("train_config"));
    for (const auto& e : meta.at("history"))
        c.history.push_back({e.at("train_loss"), e.at("val_loss"), e.at("learning_rate")});
    c.dataset_hash = meta.at("provenance").at("dataset_hash");
    c.code_version = meta.at("provenance").at("code_version");
    c.seed = meta.at("provenance").at("seed");
    for (const auto& tj : meta.at("tensors")) {
        TensorBlob t;
        t.name = tj.at("name");
        t.shape = tj.at("shape").get<std::vector<int>>();
        size_t n = 1;
        for (int d : t.shape) n *= static_cast<size_t>(d);
        t.values.resize(n);
        f.read(reinterpret_cast<char*>(t.values.data()),
               static_cast<std::streamsize>(n * sizeof(float)));
        if (!f) throw std::runtime_error("truncated checkpoint tensor data: " + path);
        c.tensors.push_back(std::move(t));
    }
    return c;
}

}  // namespace deepcontrast
