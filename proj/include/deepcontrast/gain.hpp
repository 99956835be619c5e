#pragma once

#include "deepcontrast/image.hpp"

namespace deepcontrast {

/// Estimates the Poisson gain (photons per intensity unit) of a raw volume
/// from non-overlapping patch statistics: under Poisson(pixel*gain)/gain the
/// patch variance equals mean/gain, so the slope of variance vs mean through
/// the origin is 1/gain. The slope is fit by least absolute deviations,
/// whose through-the-origin solution is the weighted median of the per-patch
/// variance/mean ratios with the means as weights.
///
/// Requires at least 100 usable patches. A noiseless volume (zero variance
/// everywhere) returns +infinity with a warning on stderr.
double estimate_gain(const Volume& v, int patch = 8);

}  // namespace deepcontrast
