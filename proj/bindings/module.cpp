#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deepcontrast/clahe.hpp"
#include "deepcontrast/degrade.hpp"
#include "deepcontrast/gain.hpp"
#include "deepcontrast/harness.hpp"
#include "deepcontrast/infer.hpp"
#include "deepcontrast/metrics.hpp"
#include "deepcontrast/phantom.hpp"
#include "deepcontrast/segment.hpp"
#include "deepcontrast/tiff.hpp"
#include "deepcontrast/train.hpp"
#include "deepcontrast/version.hpp"

namespace py = pybind11;
using namespace deepcontrast;

namespace {

using Array2f = py::array_t<float, py::array::c_style | py::array::forcecast>;
using Array3f = py::array_t<float, py::array::c_style | py::array::forcecast>;
using Array2b = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;
using Array3b = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

Plane plane_from_array(const Array2f& arr, int depth_index = 0) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Plane p(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)), 0.0f, depth_index);
    std::copy(arr.data(), arr.data() + arr.size(), p.pixels.begin());
    return p;
}

py::array_t<float> plane_to_array(const Plane& p) {
    py::array_t<float> out({p.height, p.width});
    std::copy(p.pixels.begin(), p.pixels.end(), out.mutable_data());
    return out;
}

Volume volume_from_array(const Array3f& arr) {
    if (arr.ndim() != 3) throw std::invalid_argument("expected a 3D array (z, y, x)");
    Volume v;
    const int nz = static_cast<int>(arr.shape(0));
    const int h = static_cast<int>(arr.shape(1));
    const int w = static_cast<int>(arr.shape(2));
    for (int z = 0; z < nz; ++z) {
        Plane p(h, w, 0.0f, z);
        std::copy(arr.data() + static_cast<size_t>(z) * h * w,
                  arr.data() + static_cast<size_t>(z + 1) * h * w, p.pixels.begin());
        v.planes.push_back(std::move(p));
    }
    return v;
}

py::array_t<float> volume_to_array(const Volume& v) {
    py::array_t<float> out({v.n_slices(), v.height(), v.width()});
    float* dst = out.mutable_data();
    for (const Plane& p : v.planes) dst = std::copy(p.pixels.begin(), p.pixels.end(), dst);
    return out;
}

SegmentationMask mask_from_array(const Array2b& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D mask array");
    SegmentationMask m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    for (size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = arr.data()[i] ? 1 : 0;
    return m;
}

std::vector<SegmentationMask> masks_from_array(const Array3b& arr) {
    if (arr.ndim() != 3) throw std::invalid_argument("expected a 3D mask array (z, y, x)");
    std::vector<SegmentationMask> masks;
    const int h = static_cast<int>(arr.shape(1)), w = static_cast<int>(arr.shape(2));
    for (int z = 0; z < arr.shape(0); ++z) {
        SegmentationMask m(h, w);
        const uint8_t* src = arr.data() + static_cast<size_t>(z) * h * w;
        for (size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = src[i] ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

py::array_t<uint8_t> masks_to_array(const std::vector<SegmentationMask>& masks) {
    py::array_t<uint8_t> out(
        {static_cast<int>(masks.size()), masks[0].height, masks[0].width});
    uint8_t* dst = out.mutable_data();
    for (const auto& m : masks) dst = std::copy(m.pixels.begin(), m.pixels.end(), dst);
    return out;
}

PhantomConfig phantom_config_from_kwargs(int width, int height, int n_slices, int n_cells,
                                         float border_width_px, float border_intensity,
                                         float background_intensity, float depth_blur_sigma_max,
                                         float depth_attenuation, float gain, uint64_t seed) {
    PhantomConfig cfg;
    cfg.width = width;
    cfg.height = height;
    cfg.n_slices = n_slices;
    cfg.n_cells = n_cells;
    cfg.border_width_px = border_width_px;
    cfg.border_intensity = border_intensity;
    cfg.background_intensity = background_intensity;
    cfg.depth_blur_sigma_max = depth_blur_sigma_max;
    cfg.depth_attenuation = depth_attenuation;
    cfg.gain = gain;
    cfg.seed = seed;
    return cfg;
}

DegradationConfig degradation_config(float sigma_px, float gain, float alpha_top,
                                     float alpha_bottom, uint64_t seed) {
    DegradationConfig cfg;
    cfg.sigma_px = sigma_px;
    cfg.gain = gain;
    cfg.alpha_top = alpha_top;
    cfg.alpha_bottom = alpha_bottom;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "contrast enhancement for depth-degraded volumetric microscopy";
    m.attr("__version__") = kVersion;

    m.def(
        "read_volume",
        [](const std::string& path) { return volume_to_array(read_volume(path)); },
        py::arg("path"), "Read a multi-page grayscale TIFF as a float32 (z, y, x) array.");
    m.def(
        "write_volume",
        [](const std::string& path, const Array3f& vol, const std::string& dtype) {
            const TiffDType t = dtype == "uint16" ? TiffDType::Uint16 : TiffDType::Float32;
            write_volume(volume_from_array(vol), path, t);
        },
        py::arg("path"), py::arg("volume"), py::arg("dtype") = "float32");

    m.def(
        "percentile",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> values, double p) {
            return percentile(std::span<const double>(values.data(), values.size()), p);
        },
        py::arg("values"), py::arg("p"),
        "Linear-interpolation percentile over sorted values.");

    m.def(
        "gaussian_blur",
        [](const Array2f& img, float sigma) {
            return plane_to_array(gaussian_blur(plane_from_array(img), sigma));
        },
        py::arg("image"), py::arg("sigma_px"));

    m.def("alpha_schedule", &alpha_schedule, py::arg("n_slices"), py::arg("alpha_top") = 0.5f,
          py::arg("alpha_bottom") = 0.3f);

    m.def(
        "degrade_volume",
        [](const Array3f& vol, float sigma_px, float gain, float alpha_top, float alpha_bottom,
           uint64_t seed, uint64_t round) {
            const auto cfg = degradation_config(sigma_px, gain, alpha_top, alpha_bottom, seed);
            return volume_to_array(degrade_volume(volume_from_array(vol), cfg, round));
        },
        py::arg("volume"), py::arg("sigma_px") = 20.0f, py::arg("gain") = 0.1f,
        py::arg("alpha_top") = 0.5f, py::arg("alpha_bottom") = 0.3f, py::arg("seed") = 0,
        py::arg("round") = 0,
        "Per-slice blur + Poisson noise blend: alpha*x + (1-alpha)*noise(blur(x)).");

    m.def(
        "double_degrade",
        [](const Array3f& vol, float sigma_px, float gain, float alpha_top, float alpha_bottom,
           uint64_t seed) {
            const auto cfg = degradation_config(sigma_px, gain, alpha_top, alpha_bottom, seed);
            auto [d, e] = double_degrade(volume_from_array(vol), cfg);
            return py::make_tuple(volume_to_array(d), volume_to_array(e));
        },
        py::arg("volume"), py::arg("sigma_px") = 20.0f, py::arg("gain") = 0.1f,
        py::arg("alpha_top") = 0.5f, py::arg("alpha_bottom") = 0.3f, py::arg("seed") = 0);

    m.def(
        "generate_phantom",
        [](int width, int height, int n_slices, int n_cells, float border_width_px,
           float border_intensity, float background_intensity, float depth_blur_sigma_max,
           float depth_attenuation, float gain, uint64_t seed) {
            const auto cfg = phantom_config_from_kwargs(
                width, height, n_slices, n_cells, border_width_px, border_intensity,
                background_intensity, depth_blur_sigma_max, depth_attenuation, gain, seed);
            auto [clean, masks] = generate_clean(cfg);
            const Volume raw = apply_pseudo_raw(clean, cfg);
            return py::make_tuple(volume_to_array(clean), volume_to_array(raw),
                                  masks_to_array(masks));
        },
        py::arg("width") = 128, py::arg("height") = 128, py::arg("n_slices") = 32,
        py::arg("n_cells") = 12, py::arg("border_width_px") = 2.5f,
        py::arg("border_intensity") = 200.0f, py::arg("background_intensity") = 20.0f,
        py::arg("depth_blur_sigma_max") = 4.0f, py::arg("depth_attenuation") = 0.5f,
        py::arg("gain") = 1.0f, py::arg("seed") = 0,
        "Returns (clean, pseudo_raw, masks) for a synthetic cell-border volume.");

    m.def(
        "wci", [](const Array2f& img) { return wci(plane_from_array(img)); }, py::arg("image"),
        "Wavelet Contrast Index: ln(P95/P50) of pooled Haar detail magnitudes.");
    m.def(
        "pci", [](const Array2f& img) { return pci(plane_from_array(img)); }, py::arg("image"),
        "Percentile Contrast Index: ln(P95/P50) of pixel intensities.");
    m.def(
        "ssim",
        [](const Array2f& a, const Array2f& b, std::optional<double> dynamic_range) {
            return ssim(plane_from_array(a), plane_from_array(b), dynamic_range);
        },
        py::arg("a"), py::arg("b"), py::arg("dynamic_range") = std::nullopt);
    m.def(
        "iou",
        [](const Array2b& a, const Array2b& b) {
            return iou(mask_from_array(a), mask_from_array(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "threshold_mask",
        [](const Array2f& img, float t) {
            const SegmentationMask mask = threshold_mask(plane_from_array(img), t);
            py::array_t<uint8_t> out({mask.height, mask.width});
            std::copy(mask.pixels.begin(), mask.pixels.end(), out.mutable_data());
            return out;
        },
        py::arg("image"), py::arg("threshold"));
    m.def(
        "best_threshold_iou",
        [](const Array2f& img, const Array2b& gt, int n_grid) {
            const auto [thr, best] = best_threshold_iou(plane_from_array(img),
                                                        mask_from_array(gt), n_grid);
            return py::make_tuple(thr, best);
        },
        py::arg("image"), py::arg("gt"), py::arg("n_grid") = 256);
    m.def(
        "iteration_sweep",
        [](const std::vector<Array3f>& volumes, const Array3b& gt, int n_grid) {
            std::vector<Volume> vols;
            for (const auto& a : volumes) vols.push_back(volume_from_array(a));
            const SweepResult r = iteration_sweep(vols, masks_from_array(gt), n_grid);
            py::dict out;
            out["selected_k"] = r.selected_k;
            py::list per_k;
            for (const auto& entry : r.per_k) {
                py::dict e;
                e["k"] = entry.k;
                e["mean_best_threshold"] = entry.mean_best_threshold;
                e["mean_best_iou"] = entry.mean_best_iou;
                e["iou_distribution"] = entry.iou_distribution;
                per_k.append(std::move(e));
            }
            out["per_k"] = std::move(per_k);
            return out;
        },
        py::arg("volumes_by_k"), py::arg("gt_masks"), py::arg("n_grid") = 256);

    m.def(
        "clahe",
        [](const Array2f& img, int tile, float clip_limit, int bins) {
            return plane_to_array(clahe(plane_from_array(img), tile, clip_limit, bins));
        },
        py::arg("image"), py::arg("tile") = 8, py::arg("clip_limit") = 3.0f,
        py::arg("bins") = 256);
    m.def(
        "estimate_gain",
        [](const Array3f& vol, int patch) { return estimate_gain(volume_from_array(vol), patch); },
        py::arg("volume"), py::arg("patch") = 8);

    m.def(
        "train_model",
        [](const std::vector<std::pair<Array3f, Array3f>>& pairs, const std::string& out_path,
           int depth, int base_channels, bool bias_free, double learning_rate, int epochs,
           int steps_per_epoch, int batch_size, int patch_size, uint64_t seed) {
            ModelSpec spec;
            spec.depth = depth;
            spec.base_channels = base_channels;
            spec.bias_free = bias_free;
            TrainConfig cfg;
            cfg.learning_rate = learning_rate;
            cfg.epochs = epochs;
            cfg.steps_per_epoch = steps_per_epoch;
            cfg.batch_size = batch_size;
            cfg.patch_size = patch_size;
            cfg.seed = seed;
            std::vector<std::pair<Volume, Volume>> vols;
            for (const auto& [x, t] : pairs)
                vols.emplace_back(volume_from_array(x), volume_from_array(t));
            const TrainOutcome outcome = train_on_pairs(vols, spec, cfg);
            save_checkpoint(outcome.checkpoint, out_path);
            py::dict result;
            result["best_val_loss"] = outcome.best_val_loss;
            result["identity_val_loss"] = outcome.identity_val_loss;
            py::list history;
            for (const auto& e : outcome.checkpoint.history) {
                py::dict row;
                row["train_loss"] = e.train_loss;
                row["val_loss"] = e.val_loss;
                row["learning_rate"] = e.learning_rate;
                history.append(std::move(row));
            }
            result["history"] = std::move(history);
            return result;
        },
        py::arg("pairs"), py::arg("checkpoint_path"), py::arg("depth") = 3,
        py::arg("base_channels") = 16, py::arg("bias_free") = true,
        py::arg("learning_rate") = 4e-4, py::arg("epochs") = 20, py::arg("steps_per_epoch") = 50,
        py::arg("batch_size") = 16, py::arg("patch_size") = 64, py::arg("seed") = 0,
        "Train an enhancement network on (input, target) volume pairs; saves a checkpoint.");

    m.def(
        "enhance",
        [](const Array3f& vol, const std::string& checkpoint_path, int iterations, int tile_size,
           int tile_overlap) {
            const Checkpoint ckpt = load_checkpoint(checkpoint_path);
            NetworkPlaneModel model(ckpt);
            InferenceConfig cfg;
            cfg.iterations = iterations;
            cfg.tile_size = tile_size;
            cfg.tile_overlap = tile_overlap;
            const auto iters = enhance_iterative(model, volume_from_array(vol), cfg);
            py::list out;
            for (const Volume& v : iters) out.append(volume_to_array(v));
            return out;
        },
        py::arg("volume"), py::arg("checkpoint_path"), py::arg("iterations") = 1,
        py::arg("tile_size") = 256, py::arg("tile_overlap") = 32,
        "Apply a trained model iteratively; returns all intermediate volumes.");

    m.def("checkpoint_info", [](const std::string& path) {
        const Checkpoint c = load_checkpoint(path);
        py::dict out;
        out["depth"] = c.spec.depth;
        out["base_channels"] = c.spec.base_channels;
        out["bias_free"] = c.spec.bias_free;
        out["epochs_trained"] = c.history.size();
        out["dataset_hash"] = c.dataset_hash;
        out["code_version"] = c.code_version;
        out["seed"] = c.seed;
        return out;
    });
}
