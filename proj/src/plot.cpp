#include "pitchrl/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pitchrl/text.hpp"

namespace pitchrl::plot {

namespace {

using text::format_fixed;

std::string num(double v) { return format_fixed(v, 2); }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double left, top, width, height;
    Axis x, y;

    double px(double v) const { return left + (v - x.lo) / (x.hi - x.lo) * width; }
    double py(double v) const { return top + height - (v - y.lo) / (y.hi - y.lo) * height; }
};

void draw_axes(std::ostringstream& os, const Frame& f, const std::string& x_title, const std::string& y_title) {
    os << "<g class=\"grid\" stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (double v = f.x.lo; v <= f.x.hi + 0.5 * f.x.step; v += f.x.step) {
        os << "<line x1=\"" << num(f.px(v)) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(f.px(v))
           << "\" y2=\"" << num(f.top + f.height) << "\"/>\n";
    }
    for (double v = f.y.lo; v <= f.y.hi + 0.5 * f.y.step; v += f.y.step) {
        os << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.py(v)) << "\" x2=\"" << num(f.left + f.width)
           << "\" y2=\"" << num(f.py(v)) << "\"/>\n";
    }
    os << "</g>\n";
    os << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.width)
       << "\" height=\"" << num(f.height) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (double v = f.x.lo; v <= f.x.hi + 0.5 * f.x.step; v += f.x.step) {
        os << "<text x=\"" << num(f.px(v)) << "\" y=\"" << num(f.top + f.height + 16)
           << "\" text-anchor=\"middle\">" << format_fixed(v, f.x.decimals) << "</text>\n";
    }
    for (double v = f.y.lo; v <= f.y.hi + 0.5 * f.y.step; v += f.y.step) {
        os << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">"
           << format_fixed(v, f.y.decimals) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.top + f.height + 38)
       << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << escape(x_title)
       << "</text>\n";
    const double yx = f.left - 58;
    const double yy = f.top + f.height / 2;
    os << "<text x=\"" << num(yx) << "\" y=\"" << num(yy) << "\" transform=\"rotate(-90 " << num(yx) << ' '
       << num(yy) << ")\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
       << escape(y_title) << "</text>\n";
}

void draw_circle(std::ostringstream& os, double cx, double cy, const std::string& colour) {
    os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"5\" fill=\"none\" stroke=\"" << colour
       << "\" stroke-width=\"2\"/>\n";
}

void draw_cross(std::ostringstream& os, double cx, double cy, const std::string& colour) {
    const double d = 4.5;
    os << "<path d=\"M" << num(cx - d) << ' ' << num(cy - d) << " L" << num(cx + d) << ' ' << num(cy + d) << " M"
       << num(cx - d) << ' ' << num(cy + d) << " L" << num(cx + d) << ' ' << num(cy - d) << "\" stroke=\""
       << colour << "\" stroke-width=\"2\"/>\n";
}

std::string svg_open(int w, int h) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
       << w << ' ' << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    return os.str();
}

}  // namespace

std::string alpha_colour(double alpha) {
    static constexpr std::array<std::array<double, 3>, 5> kRamp{{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {220, 200, 30}}};
    const double a = std::clamp(std::isfinite(alpha) ? alpha : 0.0, 0.0, 1.0) * (kRamp.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(a), kRamp.size() - 2);
    const double t = a - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c) {
        rgb[c] = static_cast<int>(std::lround(kRamp[i][c] + t * (kRamp[i + 1][c] - kRamp[i][c])));
    }
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

Axis nice_axis(double lo, double hi, int ticks) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("axis range must be finite");
    if (hi < lo) std::swap(lo, hi);
    if (hi - lo < 1e-12) {
        const double pad = std::max(std::abs(hi) * 0.1, 1e-3);
        lo -= pad;
        hi += pad;
    }
    const double raw = (hi - lo) / std::max(ticks, 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double step = 10.0 * mag;
    if (norm <= 1.0) {
        step = mag;
    } else if (norm <= 2.0) {
        step = 2.0 * mag;
    } else if (norm <= 5.0) {
        step = 5.0 * mag;
    }
    Axis a;
    a.step = step;
    a.lo = std::floor(lo / step) * step;
    a.hi = std::ceil(hi / step) * step;
    a.decimals = std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9)));
    return a;
}

std::string render_scatter_svg(const std::vector<ScatterPoint>& points, const ScatterLabels& labels) {
    if (points.empty()) throw std::invalid_argument("scatter plot needs at least one point");
    double x_hi = 0.0, y_hi = 0.0;
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.x_std) || !std::isfinite(p.y_std)) {
            throw std::invalid_argument("scatter points must be finite");
        }
        x_hi = std::max(x_hi, p.x + p.x_std);
        y_hi = std::max(y_hi, p.y + p.y_std);
    }
    const int w = 760, h = 520;
    Frame f{90, 50, 480, 400, nice_axis(0.0, x_hi * 1.05), nice_axis(0.0, y_hi * 1.05)};

    std::ostringstream os;
    os << svg_open(w, h);
    // unused marker for a measured series
    os << "<defs>\n<symbol id=\"marker-triangle\" viewBox=\"-6 -6 12 12\">"
          "<path d=\"M0 -5 L5 4 L-5 4 Z\" fill=\"none\" stroke-width=\"2\"/></symbol>\n</defs>\n";
    os << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" "
          "text-anchor=\"middle\">"
       << escape(labels.title) << "</text>\n";
    draw_axes(os, f, labels.x_axis, labels.y_axis);

    os << "<g class=\"std\">\n";
    for (const auto& p : points) {
        if (p.x_std <= 0.0 && p.y_std <= 0.0) continue;
        const std::string c = alpha_colour(p.alpha);
        const double x0 = f.px(std::max(f.x.lo, p.x - p.x_std));
        const double x1 = f.px(p.x + p.x_std);
        const double y0 = f.py(p.y + p.y_std);
        const double y1 = f.py(std::max(f.y.lo, p.y - p.y_std));
        os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0) << "\" height=\""
           << num(y1 - y0) << "\" fill=\"" << c << "\" fill-opacity=\"0.12\" stroke=\"" << c
           << "\" stroke-width=\"1\"/>\n";
    }
    os << "</g>\n<g class=\"markers\">\n";
    for (const auto& p : points) {
        const std::string c = alpha_colour(p.alpha);
        if (p.on_front) {
            draw_circle(os, f.px(p.x), f.py(p.y), c);
        } else {
            draw_cross(os, f.px(p.x), f.py(p.y), c);
        }
    }
    os << "</g>\n";

    // legend
    const double lx = f.left + f.width + 30;
    double ly = f.top + 10;
    os << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    draw_circle(os, lx, ly, "#333333");
    os << "<text x=\"" << num(lx + 14) << "\" y=\"" << num(ly + 4) << "\">Pareto optimal</text>\n";
    ly += 22;
    draw_cross(os, lx, ly, "#333333");
    os << "<text x=\"" << num(lx + 14) << "\" y=\"" << num(ly + 4) << "\">dominated</text>\n";
    ly += 32;
    std::vector<double> alphas;
    for (const auto& p : points) alphas.push_back(p.alpha);
    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
    for (double a : alphas) {
        os << "<rect x=\"" << num(lx - 6) << "\" y=\"" << num(ly - 6) << "\" width=\"12\" height=\"12\" fill=\""
           << alpha_colour(a) << "\"/>\n";
        os << "<text x=\"" << num(lx + 14) << "\" y=\"" << num(ly + 4) << "\">&#945; = " << text::format_double(a)
           << "</text>\n";
        ly += 20;
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

std::string render_trace_svg(const std::vector<env::TraceRow>& rows, const std::string& title) {
    if (rows.empty()) throw std::invalid_argument("trace plot needs at least one row");
    double t_lo = rows.front().t, t_hi = rows.front().t;
    double a_lo = 0.0, a_hi = 0.0, u_lo = 0.0, u_hi = 0.0;
    for (const auto& r : rows) {
        t_lo = std::min(t_lo, r.t);
        t_hi = std::max(t_hi, r.t);
        a_lo = std::min({a_lo, r.phi_deg, r.r_deg});
        a_hi = std::max({a_hi, r.phi_deg, r.r_deg});
        u_lo = std::min(u_lo, r.u_v);
        u_hi = std::max(u_hi, r.u_v);
    }
    const int w = 760, h = 620;
    const Axis tx = nice_axis(t_lo, t_hi, 6);
    Frame top{90, 50, 620, 220, tx, nice_axis(a_lo, a_hi)};
    Frame bottom{90, 350, 620, 200, tx, nice_axis(u_lo, u_hi)};

    auto polyline = [&](std::ostringstream& os, const Frame& f, auto value, const std::string& colour,
                        const char* extra) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"" << extra << " points=\"";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0) os << ' ';
            os << num(f.px(rows[i].t)) << ',' << num(f.py(value(rows[i])));
        }
        os << "\"/>\n";
    };

    std::ostringstream os;
    os << svg_open(w, h);
    os << "<text x=\"" << num(top.left + top.width / 2) << "\" y=\"28\" font-family=\"sans-serif\" "
          "font-size=\"16\" text-anchor=\"middle\">"
       << escape(title) << "</text>\n";
    draw_axes(os, top, "", "Pitch [deg]");
    polyline(os, top, [](const env::TraceRow& r) { return r.r_deg; }, "#888888", " stroke-dasharray=\"6 4\"");
    polyline(os, top, [](const env::TraceRow& r) { return r.phi_deg; }, "#21918c", "");
    draw_axes(os, bottom, "Time [s]", "Voltage [V]");
    polyline(os, bottom, [](const env::TraceRow& r) { return r.u_v; }, "#3b528b", "");
    os << "<g font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<line x1=\"560\" y1=\"64\" x2=\"590\" y2=\"64\" stroke=\"#21918c\" stroke-width=\"1.5\"/>"
          "<text x=\"596\" y=\"68\">pitch</text>\n"
       << "<line x1=\"560\" y1=\"82\" x2=\"590\" y2=\"82\" stroke=\"#888888\" stroke-width=\"1.5\" "
          "stroke-dasharray=\"6 4\"/><text x=\"596\" y=\"86\">reference</text>\n"
       << "</g>\n</svg>\n";
    return os.str();
}

std::vector<env::TraceRow> read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("t,phi_deg,r_deg,u_V", 0) != 0) {
        throw std::runtime_error("not a trace CSV (unexpected header)");
    }
    std::vector<env::TraceRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 6) {
            throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": expected 6 fields");
        }
        try {
            rows.push_back({text::parse_double(f[0]), text::parse_double(f[1]), text::parse_double(f[2]),
                            text::parse_double(f[3]), text::parse_double(f[4]), text::parse_double(f[5])});
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace pitchrl::plot
