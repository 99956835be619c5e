#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deepcontrast/image.hpp"

namespace deepcontrast {

/// Binary mask aligned with a Plane.
struct SegmentationMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;  // 0 / 1

    SegmentationMask() = default;
    SegmentationMask(int h, int w, uint8_t fill = 0)
        : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}
    bool at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v) { pixels[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    size_t count() const;
};

/// Multi-level orthonormal Haar analysis. Each 1D step maps a pair (a, b) to
/// ((a+b)/sqrt(2), (a-b)/sqrt(2)), so coefficient energy equals pixel energy
/// and the inverse reconstructs exactly. Inputs whose sides are not divisible
/// by 2^levels are padded by symmetric reflection; the pad is recorded here.
struct WaveletDecomposition {
    struct DetailBand {
        int height = 0, width = 0;
        std::vector<double> horizontal, vertical, diagonal;
    };
    std::vector<DetailBand> levels;  // level 1 first
    std::vector<double> approx;      // final approximation band
    int approx_height = 0, approx_width = 0;
    int pad_bottom = 0, pad_right = 0;  // reflection padding applied to the input
    int input_height = 0, input_width = 0;
};

WaveletDecomposition haar_dwt2(const Plane& p, int levels);

/// Inverse transform; returns the padded image (input_height + pad_bottom by
/// input_width + pad_right).
std::vector<double> haar_idwt2(const WaveletDecomposition& d);

/// Wavelet Contrast Index: ln(P95 / P50) over the absolute values of all
/// detail coefficients from levels 1-4 pooled (approximation excluded).
/// Throws "degenerate contrast" when the median coefficient is zero.
double wci(const Plane& p);

/// Percentile Contrast Index: ln(P95 / P50) over pixel intensities.
/// Throws when the median intensity is not positive.
double pci(const Plane& p);

/// Mean local SSIM with a 7x7 uniform window over valid positions,
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2. When dynamic_range is not given it is
/// computed as max(a, b) - min(a, b).
double ssim(const Plane& a, const Plane& b, std::optional<double> dynamic_range = std::nullopt);

/// Intersection over union; 1.0 when both masks are empty.
double iou(const SegmentationMask& a, const SegmentationMask& b);

struct MetricsRow {
    std::string variant;
    int depth_index = 0;
    double wci_value = 0.0;
    double pci_value = 0.0;
    std::optional<double> ssim_vs_ref;
    std::optional<double> iou_vs_gt;
};

struct GroupStat {
    std::string variant;
    int depth_index = 0;
    int n = 0;
    double wci_mean = 0.0, wci_ci95 = 0.0;
    double pci_mean = 0.0, pci_ci95 = 0.0;
    std::optional<double> ssim_mean, ssim_ci95;
    std::optional<double> iou_mean, iou_ci95;
};

/// Per-(variant, depth) mean and 95% confidence interval half-width using the
/// t distribution with n-1 degrees of freedom. Groups of one sample report
/// the mean with an empty CI cell. Throws on an empty input.
std::vector<GroupStat> aggregate_report(const std::vector<MetricsRow>& rows);

/// CSV schema:
/// variant,depth_index,n,wci_mean,wci_ci95,pci_mean,pci_ci95,ssim_mean,ssim_ci95,iou_mean,iou_ci95
std::string report_to_csv(const std::vector<GroupStat>& stats);
void write_report_csv(const std::vector<GroupStat>& stats, const std::string& path);

/// Mean and sample standard deviation helpers (double accumulation).
double mean_of(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

/// Two-sided 95% t critical value for the given degrees of freedom.
double t_critical_975(int dof);

}  // namespace deepcontrast
