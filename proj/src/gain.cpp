#include "deepcontrast/gain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace deepcontrast {

double estimate_gain(const Volume& v, int patch) {
    validate_volume(v);
    if (patch < 2) throw std::invalid_argument("patch side must be >= 2");

    struct Obs {
        double ratio;   // variance / mean
        double weight;  // mean
    };
    std::vector<Obs> obs;
    for (const Plane& p : v.planes) {
        for (int y0 = 0; y0 + patch <= p.height; y0 += patch) {
            for (int x0 = 0; x0 + patch <= p.width; x0 += patch) {
                double s = 0.0, ss = 0.0;
                for (int y = y0; y < y0 + patch; ++y)
                    for (int x = x0; x < x0 + patch; ++x) {
                        const double val = p.at(y, x);
                        s += val;
                        ss += val * val;
                    }
                const double n = static_cast<double>(patch) * patch;
                const double mean = s / n;
                const double var = (ss - s * s / n) / (n - 1.0);
                if (mean > 1e-9) obs.push_back({var / mean, mean});
            }
        }
    }
    if (obs.size() < 100)
        throw std::invalid_argument("estimate_gain: need at least 100 usable patches, got " +
                                    std::to_string(obs.size()));

    std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.ratio < b.ratio; });
    double total_w = 0.0;
    for (const Obs& o : obs) total_w += o.weight;
    double acc = 0.0;
    double slope = obs.back().ratio;
    for (const Obs& o : obs) {
        acc += o.weight;
        if (acc >= 0.5 * total_w) {
            slope = o.ratio;
            break;
        }
    }
    if (!(slope > 0.0)) {
        std::fprintf(stderr, "[gain] volume appears noiseless; gain estimate is infinite\n");
        return std::numeric_limits<double>::infinity();
    }
    return 1.0 / slope;
}

}  // namespace deepcontrast
