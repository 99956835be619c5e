#pragma once

#include <utility>
#include <vector>

#include "deepcontrast/image.hpp"
#include "deepcontrast/metrics.hpp"

namespace deepcontrast {

/// mask = pixels >= t
SegmentationMask threshold_mask(const Plane& p, float t);

/// Evaluates IoU against gt on n_grid thresholds evenly spaced between the
/// 1st and 99th pixel percentiles; returns (best threshold, best IoU), ties
/// broken toward the smallest threshold.
std::pair<float, double> best_threshold_iou(const Plane& p, const SegmentationMask& gt,
                                            int n_grid = 256);

struct SweepResult {
    struct PerIteration {
        int k = 0;
        float mean_best_threshold = 0.0f;  // mean of the per-plane optima (reporting only)
        double mean_best_iou = 0.0;
        std::vector<double> iou_distribution;  // one entry per plane
    };
    std::vector<PerIteration> per_k;
    int selected_k = 0;  // argmax of mean best IoU, ties toward smaller k
};

/// Per-plane threshold optimization for each iteration level k (k = index
/// into volumes_by_k, starting at 0 = raw). gt_masks align with the planes of
/// every volume.
SweepResult iteration_sweep(const std::vector<Volume>& volumes_by_k,
                            const std::vector<SegmentationMask>& gt_masks, int n_grid = 256);

}  // namespace deepcontrast
