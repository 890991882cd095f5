#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "selfsim/grid.hpp"

namespace selfsim {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct PlotStyle {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "y";
    bool log_y = false;
    int width = 640;
    int height = 420;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '&': o += "&amp;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

inline std::string fmt_short(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace detail

// Line plot; the raw data is repeated in a comment block after the header.
inline std::string emit_plot(const std::vector<PlotSeries>& series, const PlotStyle& st) {
    using detail::fmt_short;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};
    const double W = st.width, H = st.height, ml = 70, mr = 20, mt = 36, mb = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto ty = [&](double y) { return st.log_y ? std::log10(y) : y; };
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y) || (st.log_y && y <= 0.0)) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!std::isfinite(x0)) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (ty(y) - y0) / (y1 - y0) * (H - mt - mb); };

    std::string o = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(st.width) + "\" height=\"" +
         std::to_string(st.height) + "\" viewBox=\"0 0 " + std::to_string(st.width) + " " + std::to_string(st.height) + "\">\n";
    o += "<!-- data\n";
    for (const auto& s : series) {
        o += "series " + detail::svg_escape(s.label) + "\n";
        for (const auto& [x, y] : s.points) o += detail::format_double(x) + "," + detail::format_double(y) + "\n";
    }
    o += "-->\n";
    o += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + fmt_short(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         detail::svg_escape(st.title) + "</text>\n";
    o += "<rect x=\"" + fmt_short(ml) + "\" y=\"" + fmt_short(mt) + "\" width=\"" + fmt_short(W - ml - mr) +
         "\" height=\"" + fmt_short(H - mt - mb) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        const double X = ml + (W - ml - mr) * i / 4.0, Y = H - mb - (H - mt - mb) * i / 4.0;
        o += "<text x=\"" + fmt_short(X) + "\" y=\"" + fmt_short(H - mb + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + fmt_short(xv) + "</text>\n";
        const std::string ylab = st.log_y ? "1e" + fmt_short(yv) : fmt_short(yv);
        o += "<text x=\"" + fmt_short(ml - 6) + "\" y=\"" + fmt_short(Y + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + ylab + "</text>\n";
    }
    o += "<text x=\"" + fmt_short(W / 2) + "\" y=\"" + fmt_short(H - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + detail::svg_escape(st.x_label) + "</text>\n";
    o += "<text x=\"16\" y=\"" + fmt_short(H / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
         fmt_short(H / 2) + ")\">" + detail::svg_escape(st.y_label) + "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        std::string pts;
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y) || (st.log_y && y <= 0.0)) continue;
            pts += fmt_short(px(x)) + "," + fmt_short(py(y)) + " ";
        }
        if (pts.empty()) continue;
        pts.pop_back();
        o += "<polyline fill=\"none\" stroke=\"" + std::string(colors[si % 8]) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        o += "<text x=\"" + fmt_short(W - mr - 4) + "\" y=\"" + fmt_short(mt + 14 + 14.0 * si) + "\" text-anchor=\"end\" fill=\"" +
             colors[si % 8] + "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::svg_escape(s.label) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

}  // namespace selfsim
