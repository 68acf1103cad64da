#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace harvest::svg {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool step = false; // draw as a staircase instead of straight segments
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline const char* palette(std::size_t k) {
    static const char* colors[] = {"#1f6fb4", "#d95f02", "#2ca05a", "#8452a8",
                                   "#c23b68", "#7a7a22"};
    return colors[k % 6];
}

/// Round tick spacing to 1/2/5 times a power of ten.
inline double nice_tick(double span) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    if (frac <= 1.5) return mag;
    if (frac <= 3.5) return 2.0 * mag;
    if (frac <= 7.5) return 5.0 * mag;
    return 10.0 * mag;
}

} // namespace detail

/**
 * Small self-contained SVG renderer for the line/step plots emitted next to
 * the CSV tables. One file holds one or more side-by-side panels.
 */
inline void write_plot(const std::string& path, const std::string& title,
                       const std::vector<Panel>& panels) {
    if (panels.empty()) throw std::invalid_argument("svg: no panels");
    const double pw = 520.0, ph = 400.0;             // panel box
    const double ml = 62.0, mr = 18.0, mt = 52.0, mb = 48.0; // margins
    const double width = panels.size() * pw + 20.0;
    const double height = ph + 30.0;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
        << "<style>text{font-family:sans-serif;font-size:12px;fill:#222}"
           ".t{font-size:14px;font-weight:bold}.axis{stroke:#444;stroke-width:1}"
           ".grid{stroke:#ddd;stroke-width:0.5}</style>\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text class=\"t\" x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\">"
        << title << "</text>\n";

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& panel = panels[p];
        const double x0 = 10.0 + p * pw;

        double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
        for (const Series& s : panel.series)
            for (const auto& [x, y] : s.points) {
                lo_x = std::min(lo_x, x);
                hi_x = std::max(hi_x, x);
                lo_y = std::min(lo_y, y);
                hi_y = std::max(hi_y, y);
            }
        if (lo_x > hi_x) { lo_x = 0; hi_x = 1; }
        if (lo_y > hi_y) { lo_y = 0; hi_y = 1; }
        if (hi_y - lo_y < 1e-12) { hi_y += 1.0; lo_y -= 1.0; }
        const double pad = 0.04 * (hi_y - lo_y);
        lo_y -= pad;
        hi_y += pad;

        const double plot_w = pw - ml - mr, plot_h = ph - mt - mb;
        auto sx = [&](double x) { return x0 + ml + (x - lo_x) / (hi_x - lo_x) * plot_w; };
        auto sy = [&](double y) { return 30.0 + mt + plot_h - (y - lo_y) / (hi_y - lo_y) * plot_h; };

        // gridlines and ticks
        const double tx = detail::nice_tick(hi_x - lo_x);
        for (double x = std::ceil(lo_x / tx) * tx; x <= hi_x + 1e-12; x += tx) {
            out << "<line class=\"grid\" x1=\"" << sx(x) << "\" y1=\"" << sy(lo_y)
                << "\" x2=\"" << sx(x) << "\" y2=\"" << sy(hi_y) << "\"/>\n"
                << "<text x=\"" << sx(x) << "\" y=\"" << sy(lo_y) + 16
                << "\" text-anchor=\"middle\">" << detail::fmt(x) << "</text>\n";
        }
        const double ty = detail::nice_tick(hi_y - lo_y);
        for (double y = std::ceil(lo_y / ty) * ty; y <= hi_y + 1e-12; y += ty) {
            out << "<line class=\"grid\" x1=\"" << sx(lo_x) << "\" y1=\"" << sy(y)
                << "\" x2=\"" << sx(hi_x) << "\" y2=\"" << sy(y) << "\"/>\n"
                << "<text x=\"" << sx(lo_x) - 6 << "\" y=\"" << sy(y) + 4
                << "\" text-anchor=\"end\">" << detail::fmt(y) << "</text>\n";
        }
        out << "<line class=\"axis\" x1=\"" << sx(lo_x) << "\" y1=\"" << sy(lo_y)
            << "\" x2=\"" << sx(hi_x) << "\" y2=\"" << sy(lo_y) << "\"/>\n"
            << "<line class=\"axis\" x1=\"" << sx(lo_x) << "\" y1=\"" << sy(lo_y)
            << "\" x2=\"" << sx(lo_x) << "\" y2=\"" << sy(hi_y) << "\"/>\n";

        // labels and panel title
        out << "<text x=\"" << x0 + ml + plot_w / 2 << "\" y=\"" << 30.0 + ph - 8
            << "\" text-anchor=\"middle\">" << panel.x_label << "</text>\n"
            << "<text x=\"" << x0 + 14 << "\" y=\"" << 30.0 + mt + plot_h / 2
            << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << x0 + 14 << ' '
            << 30.0 + mt + plot_h / 2 << ")\">" << panel.y_label << "</text>\n"
            << "<text class=\"t\" x=\"" << x0 + ml + plot_w / 2 << "\" y=\"" << 30.0 + mt - 10
            << "\" text-anchor=\"middle\">" << panel.title << "</text>\n";

        // series
        for (std::size_t k = 0; k < panel.series.size(); ++k) {
            const Series& s = panel.series[k];
            if (s.points.empty()) continue;
            out << "<polyline fill=\"none\" stroke=\"" << detail::palette(k)
                << "\" stroke-width=\"1.6\" points=\"";
            double prev_y = s.points.front().second;
            for (std::size_t q = 0; q < s.points.size(); ++q) {
                const auto& [x, y] = s.points[q];
                if (s.step && q > 0)
                    out << detail::fmt(sx(x)) << ',' << detail::fmt(sy(prev_y)) << ' ';
                out << detail::fmt(sx(x)) << ',' << detail::fmt(sy(y)) << ' ';
                prev_y = y;
            }
            out << "\"/>\n";
            // legend entry
            const double lx = x0 + ml + 10, ly = 30.0 + mt + 16 + 16.0 * k;
            out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 22
                << "\" y2=\"" << ly - 4 << "\" stroke=\"" << detail::palette(k)
                << "\" stroke-width=\"2\"/>\n"
                << "<text x=\"" << lx + 28 << "\" y=\"" << ly << "\">" << s.label
                << "</text>\n";
        }
    }
    out << "</svg>\n";
}

} // namespace harvest::svg
