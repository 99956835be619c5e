#include "deepcontrast/segment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deepcontrast {

SegmentationMask threshold_mask(const Plane& p, float t) {
    SegmentationMask m(p.height, p.width);
    for (size_t i = 0; i < p.pixels.size(); ++i) m.pixels[i] = p.pixels[i] >= t ? 1 : 0;
    return m;
}

std::pair<float, double> best_threshold_iou(const Plane& p, const SegmentationMask& gt,
                                            int n_grid) {
    if (p.height != gt.height || p.width != gt.width)
        throw std::invalid_argument("best_threshold_iou: shape mismatch");
    if (n_grid < 2) throw std::invalid_argument("n_grid must be >= 2");

    const double p1 = percentile(p.values(), 1.0);
    const double p99 = percentile(p.values(), 99.0);
    std::vector<float> thresholds(n_grid);
    for (int i = 0; i < n_grid; ++i)
        thresholds[i] = static_cast<float>(p1 + (p99 - p1) * i / (n_grid - 1));

    // Counting via suffix sums over threshold bins; bin(v) = number of
    // thresholds <= v, found by binary search so the counts agree exactly
    // with direct pixel >= t comparisons.
    std::vector<size_t> above(n_grid + 1, 0);     // above[i]: #pixels >= thresholds[i]
    std::vector<size_t> above_gt(n_grid + 1, 0);  // same, restricted to gt-positive pixels
    size_t gt_count = 0;
    for (size_t i = 0; i < p.pixels.size(); ++i) {
        const float v = p.pixels[i];
        const auto it = std::upper_bound(thresholds.begin(), thresholds.end(), v);
        const size_t bin = static_cast<size_t>(it - thresholds.begin());  // v >= thresholds[0..bin-1]
        if (bin > 0) {
            ++above[bin - 1];
            if (gt.pixels[i]) ++above_gt[bin - 1];
        }
        if (gt.pixels[i]) ++gt_count;
    }
    for (int i = n_grid - 2; i >= 0; --i) {
        above[i] += above[i + 1];
        above_gt[i] += above_gt[i + 1];
    }

    double best_iou = -1.0;
    int best_i = 0;
    for (int i = 0; i < n_grid; ++i) {
        const size_t inter = above_gt[i];
        const size_t uni = gt_count + above[i] - inter;
        const double v = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        if (v > best_iou) {
            best_iou = v;
            best_i = i;
        }
    }
    return {thresholds[best_i], best_iou};
}

SweepResult iteration_sweep(const std::vector<Volume>& volumes_by_k,
                            const std::vector<SegmentationMask>& gt_masks, int n_grid) {
    if (volumes_by_k.empty()) throw std::invalid_argument("iteration_sweep: no volumes");
    for (const Volume& v : volumes_by_k)
        if (v.planes.size() != gt_masks.size())
            throw std::invalid_argument("iteration_sweep: volume/mask count mismatch");

    SweepResult result;
    double best_mean = -1.0;
    for (size_t k = 0; k < volumes_by_k.size(); ++k) {
        SweepResult::PerIteration entry;
        entry.k = static_cast<int>(k);
        double thr_sum = 0.0, iou_sum = 0.0;
        for (size_t z = 0; z < gt_masks.size(); ++z) {
            const auto [thr, best] = best_threshold_iou(volumes_by_k[k].planes[z], gt_masks[z], n_grid);
            entry.iou_distribution.push_back(best);
            thr_sum += thr;
            iou_sum += best;
        }
        entry.mean_best_threshold = static_cast<float>(thr_sum / gt_masks.size());
        entry.mean_best_iou = iou_sum / static_cast<double>(gt_masks.size());
        if (entry.mean_best_iou > best_mean) {
            best_mean = entry.mean_best_iou;
            result.selected_k = entry.k;
        }
        result.per_k.push_back(std::move(entry));
    }
    return result;
}

}  // namespace deepcontrast
