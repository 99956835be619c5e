#include "deepcontrast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace deepcontrast {

size_t SegmentationMask::count() const {
    size_t n = 0;
    for (uint8_t v : pixels) n += (v != 0);
    return n;
}

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

WaveletDecomposition haar_dwt2(const Plane& p, int levels) {
    if (levels < 1) throw std::invalid_argument("levels must be >= 1");
    if (p.height < 1 || p.width < 1) throw std::invalid_argument("empty plane");

    const int mult = 1 << levels;
    const int padded_h = (p.height + mult - 1) / mult * mult;
    const int padded_w = (p.width + mult - 1) / mult * mult;

    WaveletDecomposition d;
    d.input_height = p.height;
    d.input_width = p.width;
    d.pad_bottom = padded_h - p.height;
    d.pad_right = padded_w - p.width;

    std::vector<double> cur(static_cast<size_t>(padded_h) * padded_w);
    for (int y = 0; y < padded_h; ++y)
        for (int x = 0; x < padded_w; ++x)
            cur[static_cast<size_t>(y) * padded_w + x] =
                p.at(reflect_index(y, p.height), reflect_index(x, p.width));

    int h = padded_h, w = padded_w;
    for (int level = 0; level < levels; ++level) {
        const int hh = h / 2, hw = w / 2;
        WaveletDecomposition::DetailBand band;
        band.height = hh;
        band.width = hw;
        band.horizontal.resize(static_cast<size_t>(hh) * hw);
        band.vertical.resize(static_cast<size_t>(hh) * hw);
        band.diagonal.resize(static_cast<size_t>(hh) * hw);
        std::vector<double> next(static_cast<size_t>(hh) * hw);

        // rows then columns in one fused 2x2 step
        for (int y = 0; y < hh; ++y) {
            for (int x = 0; x < hw; ++x) {
                const double a = cur[static_cast<size_t>(2 * y) * w + 2 * x];
                const double b = cur[static_cast<size_t>(2 * y) * w + 2 * x + 1];
                const double c = cur[static_cast<size_t>(2 * y + 1) * w + 2 * x];
                const double e = cur[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1];
                const size_t o = static_cast<size_t>(y) * hw + x;
                next[o] = (a + b + c + e) * 0.5;
                band.horizontal[o] = (a - b + c - e) * 0.5;
                band.vertical[o] = (a + b - c - e) * 0.5;
                band.diagonal[o] = (a - b - c + e) * 0.5;
            }
        }
        d.levels.push_back(std::move(band));
        cur = std::move(next);
        h = hh;
        w = hw;
    }
    d.approx = std::move(cur);
    d.approx_height = h;
    d.approx_width = w;
    return d;
}

std::vector<double> haar_idwt2(const WaveletDecomposition& d) {
    std::vector<double> cur = d.approx;
    int h = d.approx_height, w = d.approx_width;
    for (auto it = d.levels.rbegin(); it != d.levels.rend(); ++it) {
        const auto& band = *it;
        const int nh = 2 * h, nw = 2 * w;
        std::vector<double> next(static_cast<size_t>(nh) * nw);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t o = static_cast<size_t>(y) * w + x;
                const double ll = cur[o], lh = band.horizontal[o];
                const double hl = band.vertical[o], hh2 = band.diagonal[o];
                next[static_cast<size_t>(2 * y) * nw + 2 * x] = (ll + lh + hl + hh2) * 0.5;
                next[static_cast<size_t>(2 * y) * nw + 2 * x + 1] = (ll - lh + hl - hh2) * 0.5;
                next[static_cast<size_t>(2 * y + 1) * nw + 2 * x] = (ll + lh - hl - hh2) * 0.5;
                next[static_cast<size_t>(2 * y + 1) * nw + 2 * x + 1] = (ll - lh - hl + hh2) * 0.5;
            }
        }
        cur = std::move(next);
        h = nh;
        w = nw;
    }
    return cur;
}

double wci(const Plane& p) {
    constexpr int kLevels = 4;
    const WaveletDecomposition d = haar_dwt2(p, kLevels);
    std::vector<double> pool;
    size_t total = 0;
    for (const auto& band : d.levels)
        total += band.horizontal.size() + band.vertical.size() + band.diagonal.size();
    pool.reserve(total);
    for (const auto& band : d.levels) {
        for (double v : band.horizontal) pool.push_back(std::fabs(v));
        for (double v : band.vertical) pool.push_back(std::fabs(v));
        for (double v : band.diagonal) pool.push_back(std::fabs(v));
    }
    const double p50 = percentile(std::span<const double>(pool), 50.0);
    if (!(p50 > 0.0))
        throw std::runtime_error("degenerate contrast: median wavelet coefficient is zero");
    const double p95 = percentile(std::span<const double>(pool), 95.0);
    return std::log(p95 / p50);
}

double pci(const Plane& p) {
    const double p50 = percentile(p.values(), 50.0);
    if (!(p50 > 0.0)) throw std::runtime_error("background floor is zero: median intensity <= 0");
    const double p95 = percentile(p.values(), 95.0);
    return std::log(p95 / p50);
}

double ssim(const Plane& a, const Plane& b, std::optional<double> dynamic_range) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("ssim: shape mismatch");
    constexpr int kWin = 7;
    if (a.height < kWin || a.width < kWin)
        throw std::invalid_argument("ssim: plane smaller than the 7x7 window");

    double range;
    if (dynamic_range) {
        range = *dynamic_range;
    } else {
        float mn = a.pixels[0], mx = a.pixels[0];
        for (float v : a.pixels) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        for (float v : b.pixels) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        range = static_cast<double>(mx) - static_cast<double>(mn);
    }
    if (!(range > 0.0)) range = 1.0;  // identical constant images: SSIM terms reduce to 1
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    const int h = a.height, w = a.width;
    const int oh = h - kWin + 1, ow = w - kWin + 1;
    const double inv_n = 1.0 / (kWin * kWin);

    double total = 0.0;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int dy = 0; dy < kWin; ++dy) {
                const float* ra = a.pixels.data() + static_cast<size_t>(y + dy) * w + x;
                const float* rb = b.pixels.data() + static_cast<size_t>(y + dy) * w + x;
                for (int dx = 0; dx < kWin; ++dx) {
                    const double va = ra[dx], vb = rb[dx];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            const double mu_a = sa * inv_n, mu_b = sb * inv_n;
            const double var_a = saa * inv_n - mu_a * mu_a;
            const double var_b = sbb * inv_n - mu_b * mu_b;
            const double cov = sab * inv_n - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
        }
    }
    return total / (static_cast<double>(oh) * static_cast<double>(ow));
}

double iou(const SegmentationMask& a, const SegmentationMask& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("iou: shape mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const bool pa = a.pixels[i] != 0, pb = b.pixels[i] != 0;
        inter += (pa && pb);
        uni += (pa || pb);
    }
    if (uni == 0) return 1.0;  // both empty: degenerate agreement
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double t_critical_975(int dof) {
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

namespace {

std::pair<double, double> mean_ci(const std::vector<double>& v) {
    const double m = mean_of(v);
    if (v.size() < 2) return {m, std::nan("")};
    const double sd = sample_sd(v);
    const double hw = t_critical_975(static_cast<int>(v.size()) - 1) * sd /
                      std::sqrt(static_cast<double>(v.size()));
    return {m, hw};
}

std::string cell(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

}  // namespace

std::vector<GroupStat> aggregate_report(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate_report: empty input");
    std::map<std::pair<std::string, int>, std::vector<const MetricsRow*>> groups;
    for (const auto& r : rows) groups[{r.variant, r.depth_index}].push_back(&r);

    std::vector<GroupStat> out;
    for (const auto& [key, members] : groups) {
        GroupStat g;
        g.variant = key.first;
        g.depth_index = key.second;
        g.n = static_cast<int>(members.size());
        std::vector<double> wcis, pcis, ssims, ious;
        for (const MetricsRow* r : members) {
            wcis.push_back(r->wci_value);
            pcis.push_back(r->pci_value);
            if (r->ssim_vs_ref) ssims.push_back(*r->ssim_vs_ref);
            if (r->iou_vs_gt) ious.push_back(*r->iou_vs_gt);
        }
        std::tie(g.wci_mean, g.wci_ci95) = mean_ci(wcis);
        std::tie(g.pci_mean, g.pci_ci95) = mean_ci(pcis);
        if (!ssims.empty()) {
            auto [m, ci] = mean_ci(ssims);
            g.ssim_mean = m;
            g.ssim_ci95 = ci;
        }
        if (!ious.empty()) {
            auto [m, ci] = mean_ci(ious);
            g.iou_mean = m;
            g.iou_ci95 = ci;
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::string report_to_csv(const std::vector<GroupStat>& stats) {
    std::ostringstream os;
    os << "variant,depth_index,n,wci_mean,wci_ci95,pci_mean,pci_ci95,"
          "ssim_mean,ssim_ci95,iou_mean,iou_ci95\n";
    for (const auto& g : stats) {
        os << g.variant << ',' << g.depth_index << ',' << g.n << ',' << cell(g.wci_mean) << ','
           << cell(g.wci_ci95) << ',' << cell(g.pci_mean) << ',' << cell(g.pci_ci95) << ','
           << cell(g.ssim_mean ? *g.ssim_mean : std::nan("")) << ','
           << cell(g.ssim_ci95 ? *g.ssim_ci95 : std::nan("")) << ','
           << cell(g.iou_mean ? *g.iou_mean : std::nan("")) << ','
           << cell(g.iou_ci95 ? *g.iou_ci95 : std::nan("")) << '\n';
    }
    return os.str();
}

void write_report_csv(const std::vector<GroupStat>& stats, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open path for writing: " + path);
    f << report_to_csv(stats);
}

}  // namespace deepcontrast
