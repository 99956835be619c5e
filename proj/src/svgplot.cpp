#include "deepcontrast/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace deepcontrast {

namespace {

constexpr int kWidth = 720, kHeight = 480;
constexpr int kMarginL = 70, kMarginR = 160, kMarginT = 50, kMarginB = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

struct AxisRange {
    double lo = 0.0, hi = 1.0;
    void expand(double v) {
        if (std::isnan(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(hi > lo)) hi = lo + 1.0;
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    const double span = hi - lo;
    double step = std::pow(10.0, std::floor(std::log10(span / target)));
    if (span / step > target * 5) step *= 5;
    else if (span / step > target * 2) step *= 2;
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12; t += step) ticks.push_back(t);
    return ticks;
}

}  // namespace

std::string render_line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<LineSeries>& series) {
    AxisRange xr, yr;
    bool first = true;
    for (const auto& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                xr.lo = xr.hi = s.x[i];
                yr.lo = yr.hi = s.y[i];
                first = false;
            }
            xr.expand(s.x[i]);
            yr.expand(s.y[i]);
            if (i < s.ci.size() && !std::isnan(s.ci[i])) {
                yr.expand(s.y[i] - s.ci[i]);
                yr.expand(s.y[i] + s.ci[i]);
            }
        }
    }
    xr.finish();
    yr.finish();
    const double pw = kWidth - kMarginL - kMarginR;
    const double ph = kHeight - kMarginT - kMarginB;
    auto sx = [&](double v) { return kMarginL + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double v) { return kMarginT + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";

    for (double t : nice_ticks(xr.lo, xr.hi)) {
        svg << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << kMarginT + ph << "\" x2=\""
            << fmt(sx(t)) << "\" y2=\"" << kMarginT + ph + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << kMarginT + ph + 18
            << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
    }
    for (double t : nice_ticks(yr.lo, yr.hi)) {
        svg << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << kMarginL
            << "\" y2=\"" << fmt(sy(t)) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << kMarginL - 8 << "\" y=\"" << fmt(sy(t) + 4)
            << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
    }
    svg << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << fmt(pw)
        << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kMarginL + pw / 2 << "\" y=\"" << kHeight - 16
        << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    svg << "<text x=\"18\" y=\"" << kMarginT + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kMarginT + ph / 2 << ")\">"
        << y_label << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        bool has_band = false;
        for (size_t i = 0; i < s.ci.size(); ++i)
            if (!std::isnan(s.ci[i])) has_band = true;
        if (has_band && s.x.size() > 1) {
            svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
            for (size_t i = 0; i < s.x.size(); ++i) {
                const double ci = i < s.ci.size() && !std::isnan(s.ci[i]) ? s.ci[i] : 0.0;
                svg << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i] + ci)) << ' ';
            }
            for (size_t i = s.x.size(); i-- > 0;) {
                const double ci = i < s.ci.size() && !std::isnan(s.ci[i]) ? s.ci[i] : 0.0;
                svg << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i] - ci)) << ' ';
            }
            svg << "\"/>\n";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i)
            svg << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i])) << ' ';
        svg << "\"/>\n";
        const int ly = kMarginT + 10 + static_cast<int>(si) * 18;
        svg << "<line x1=\"" << kWidth - kMarginR + 10 << "\" y1=\"" << ly << "\" x2=\""
            << kWidth - kMarginR + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        svg << "<text x=\"" << kWidth - kMarginR + 40 << "\" y=\"" << ly + 4 << "\">" << s.label
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_violin_svg(const std::string& title, const std::string& y_label,
                              const std::vector<std::string>& group_labels,
                              const std::vector<std::vector<double>>& distributions) {
    if (group_labels.size() != distributions.size())
        throw std::invalid_argument("violin plot: label/distribution count mismatch");
    AxisRange yr;
    bool first = true;
    for (const auto& d : distributions)
        for (double v : d) {
            if (first) {
                yr.lo = yr.hi = v;
                first = false;
            }
            yr.expand(v);
        }
    yr.finish();
    const double pw = kWidth - kMarginL - 40;
    const double ph = kHeight - kMarginT - kMarginB;
    const double slot = pw / std::max<size_t>(1, distributions.size());
    auto sy = [&](double v) { return kMarginT + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    for (double t : nice_ticks(yr.lo, yr.hi)) {
        svg << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << kMarginL
            << "\" y2=\"" << fmt(sy(t)) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << kMarginL - 8 << "\" y=\"" << fmt(sy(t) + 4)
            << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
    }
    svg << "<text x=\"18\" y=\"" << kMarginT + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kMarginT + ph / 2 << ")\">"
        << y_label << "</text>\n";

    for (size_t g = 0; g < distributions.size(); ++g) {
        const auto& d = distributions[g];
        if (d.empty()) continue;
        const double cx = kMarginL + slot * (g + 0.5);
        const char* color = kPalette[g % (sizeof(kPalette) / sizeof(kPalette[0]))];
        // Gaussian KDE with Silverman bandwidth, evaluated on 41 points
        std::vector<double> sorted = d;
        std::sort(sorted.begin(), sorted.end());
        const double med = sorted[sorted.size() / 2];
        double m = 0.0;
        for (double v : d) m += v;
        m /= d.size();
        double sd = 0.0;
        for (double v : d) sd += (v - m) * (v - m);
        sd = std::sqrt(sd / std::max<size_t>(1, d.size() - 1));
        const double bw = std::max(1e-9, 1.06 * sd * std::pow(static_cast<double>(d.size()), -0.2));
        constexpr int kPts = 41;
        std::vector<double> ys(kPts), dens(kPts);
        double dmax = 0.0;
        for (int i = 0; i < kPts; ++i) {
            ys[i] = sorted.front() + (sorted.back() - sorted.front()) * i / (kPts - 1);
            double acc = 0.0;
            for (double v : d) {
                const double z = (ys[i] - v) / bw;
                acc += std::exp(-0.5 * z * z);
            }
            dens[i] = acc;
            dmax = std::max(dmax, acc);
        }
        const double half_w = slot * 0.4;
        svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.4\" stroke=\"" << color
            << "\" points=\"";
        for (int i = 0; i < kPts; ++i)
            svg << fmt(cx - half_w * dens[i] / dmax) << ',' << fmt(sy(ys[i])) << ' ';
        for (int i = kPts; i-- > 0;)
            svg << fmt(cx + half_w * dens[i] / dmax) << ',' << fmt(sy(ys[i])) << ' ';
        svg << "\"/>\n";
        svg << "<line x1=\"" << fmt(cx - half_w) << "\" y1=\"" << fmt(sy(med)) << "\" x2=\""
            << fmt(cx + half_w) << "\" y2=\"" << fmt(sy(med))
            << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
        svg << "<text x=\"" << fmt(cx) << "\" y=\"" << kMarginT + ph + 18
            << "\" text-anchor=\"middle\">" << group_labels[g] << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error("cannot open path for writing: " + path);
    f << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace deepcontrast
