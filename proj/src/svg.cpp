#include "grip/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace grip {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 40, kB = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s)
{
    std::string o;
    for (char c : s) {
        switch (c) {
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '&': o += "&amp;"; break;
        default: o += c;
        }
    }
    return o;
}

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

void frame(std::ostringstream& o, const std::string& title, const std::string& xlabel, const std::string& ylabel)
{
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << esc(xlabel) << "</text>\n"
      << "<text transform=\"translate(18," << kH / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(ylabel)
      << "</text>\n"
      << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\"" << kH - kT - kB
      << "\" fill=\"none\" stroke=\"black\"/>\n";
}

struct Axis {
    double lo, hi, p0, p1;
    bool log = false;
    [[nodiscard]] double map(double v) const
    {
        const double a = log ? std::log10(lo) : lo;
        const double b = log ? std::log10(hi) : hi;
        const double t = ((log ? std::log10(v) : v) - a) / (b - a);
        return p0 + t * (p1 - p0);
    }
};

void ticks(std::ostringstream& o, const Axis& ax, bool horizontal)
{
    for (int i = 0; i <= 4; ++i) {
        const double f = i / 4.0;
        const double v = ax.log ? std::pow(10.0, std::log10(ax.lo) + f * (std::log10(ax.hi) - std::log10(ax.lo)))
                                : ax.lo + f * (ax.hi - ax.lo);
        const double p = ax.map(v);
        if (horizontal) {
            o << "<text x=\"" << p << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">" << fmt(v) << "</text>\n";
        } else {
            o << "<text x=\"" << kL - 6 << "\" y=\"" << p + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
        }
    }
}

void expand(double& lo, double& hi)
{
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series, bool log_x)
{
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = 0.0, yhi = -xlo;
    for (const auto& s : series) {
        for (double v : s.x) {
            xlo = std::min(xlo, v);
            xhi = std::max(xhi, v);
        }
        for (double v : s.y) {
            ylo = std::min(ylo, v);
            yhi = std::max(yhi, v);
        }
    }
    if (!std::isfinite(xlo)) xlo = xhi = log_x ? 1.0 : 0.0;
    if (!std::isfinite(yhi)) yhi = 1.0;
    if (log_x && xhi <= xlo) xhi = xlo * 10.0;
    expand(xlo, xhi);
    expand(ylo, yhi);
    std::ostringstream o;
    frame(o, title, xlabel, ylabel);
    const Axis ax{xlo, xhi, kL, kW - kR, log_x && xlo > 0};
    const Axis ay{ylo, yhi * 1.05, kH - kB, kT};
    ticks(o, ax, true);
    ticks(o, ay, false);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* c = kColors[k % 6];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) o << ax.map(s.x[i]) << ',' << ay.map(s.y[i]) << ' ';
        o << "\"/>\n";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            o << "<circle cx=\"" << ax.map(s.x[i]) << "\" cy=\"" << ay.map(s.y[i]) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
        }
        o << "<text x=\"" << kL + 10 << "\" y=\"" << kT + 16 + 16 * k << "\" fill=\"" << c << "\">" << esc(s.name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string svg_histogram(const std::string& title, const std::string& xlabel, const std::vector<double>& values,
                          int bins, double lo, double hi)
{
    bins = std::max(bins, 1);
    if (!(hi > lo)) {
        lo = values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
        hi = values.empty() ? 1.0 : *std::max_element(values.begin(), values.end());
        expand(lo, hi);
    }
    std::vector<int> counts(bins, 0);
    for (double v : values) {
        const int b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
        ++counts[b];
    }
    const int cmax = std::max(1, *std::max_element(counts.begin(), counts.end()));
    std::ostringstream o;
    frame(o, title, xlabel, "count");
    const Axis ax{lo, hi, kL, kW - kR};
    const Axis ay{0.0, cmax * 1.05, kH - kB, kT};
    ticks(o, ax, true);
    ticks(o, ay, false);
    const double w = (kW - kL - kR) / bins;
    for (int b = 0; b < bins; ++b) {
        const double y = ay.map(counts[b]);
        o << "<rect x=\"" << kL + b * w << "\" y=\"" << y << "\" width=\"" << w * 0.95 << "\" height=\""
          << (kH - kB) - y << "\" fill=\"" << kColors[0] << "\"/>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<Series>& series)
{
    double ymax = 0.0;
    for (const auto& s : series)
        for (double v : s.y) ymax = std::max(ymax, v);
    if (ymax <= 0.0) ymax = 1.0;
    std::ostringstream o;
    frame(o, title, "", "");
    const Axis ay{0.0, ymax * 1.1, kH - kB, kT};
    ticks(o, ay, false);
    const std::size_t nc = std::max<std::size_t>(categories.size(), 1);
    const double gw = (kW - kL - kR) / static_cast<double>(nc);
    const double bw = gw * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    for (std::size_t c = 0; c < categories.size(); ++c) {
        o << "<text x=\"" << kL + (c + 0.5) * gw << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">"
          << esc(categories[c]) << "</text>\n";
        for (std::size_t k = 0; k < series.size(); ++k) {
            if (c >= series[k].y.size()) continue;
            const double y = ay.map(series[k].y[c]);
            o << "<rect x=\"" << kL + c * gw + 0.1 * gw + k * bw << "\" y=\"" << y << "\" width=\"" << bw * 0.95
              << "\" height=\"" << (kH - kB) - y << "\" fill=\"" << kColors[k % 6] << "\"/>\n";
        }
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        o << "<text x=\"" << kW - kR - 10 << "\" y=\"" << kT + 16 + 16 * k << "\" text-anchor=\"end\" fill=\""
          << kColors[k % 6] << "\">" << esc(series[k].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace grip
