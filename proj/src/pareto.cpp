#include "pitchrl/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pitchrl/plot.hpp"
#include "pitchrl/text.hpp"

namespace pitchrl::pareto {

namespace fs = std::filesystem;
using text::format_double;

bool dominates(const Point2& a, const Point2& b) {
    return a.x <= b.x && a.y <= b.y && (a.x < b.x || a.y < b.y);
}

namespace {

void check_points(const std::vector<Point2>& points) {
    if (points.empty()) throw std::invalid_argument("pareto front of an empty set");
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0) {
            throw std::invalid_argument("pareto points must be finite and non-negative");
        }
    }
}

}  // namespace

FrontSplit pareto_front(const std::vector<Point2>& points) {
    check_points(points);
    const std::size_t n = points.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].x != points[b].x) return points[a].x < points[b].x;
        return points[a].y < points[b].y;
    });

    FrontSplit out;
    out.on_front.assign(n, false);
    // min y over all points with strictly smaller x
    double best_y = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        const double x = points[order[i]].x;
        while (j < n && points[order[j]].x == x) ++j;
        const double group_min = points[order[i]].y;  // sorted by y within equal x
        for (std::size_t k = i; k < j; ++k) {
            const double y = points[order[k]].y;
            out.on_front[order[k]] = !(best_y <= y) && !(group_min < y);
        }
        best_y = std::min(best_y, group_min);
        i = j;
    }
    for (std::size_t i = 0; i < n; ++i) {
        (out.on_front[i] ? out.front : out.dominated).push_back(points[i]);
    }
    return out;
}

std::vector<bool> pareto_mask_bruteforce(const std::vector<Point2>& points) {
    check_points(points);
    std::vector<bool> mask(points.size(), true);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i != j && dominates(points[j], points[i])) {
                mask[i] = false;
                break;
            }
        }
    }
    return mask;
}

std::vector<Point2> to_points(const std::vector<experiment::AggregatePoint>& aggs) {
    std::vector<Point2> out;
    for (const auto& a : aggs) out.push_back({a.deviation_deg_mean, a.power_w_mean, format_double(a.alpha)});
    return out;
}

std::vector<Point2> to_points(const std::vector<experiment::EvalPoint>& points) {
    std::vector<Point2> out;
    for (const auto& p : points) {
        out.push_back({p.deviation_deg, p.power_w, format_double(p.alpha) + "/" + std::to_string(p.seed)});
    }
    return out;
}

void write_front_csv(std::ostream& os, const std::vector<FrontRow>& rows) {
    os << "alpha,deviation_deg_mean,deviation_deg_std,power_w_mean,power_w_std,on_front\n";
    for (const auto& r : rows) {
        const auto& a = r.point;
        os << format_double(a.alpha) << ',' << format_double(a.deviation_deg_mean) << ','
           << format_double(a.deviation_deg_std) << ',' << format_double(a.power_w_mean) << ','
           << format_double(a.power_w_std) << ',' << (r.on_front ? 1 : 0) << '\n';
    }
}

std::vector<FrontRow> read_front_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("alpha,deviation_deg_mean,", 0) != 0) {
        throw std::runtime_error("not a front CSV (unexpected header)");
    }
    std::vector<FrontRow> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 6) {
            throw std::runtime_error("front CSV line " + std::to_string(lineno) + ": expected 6 fields");
        }
        try {
            FrontRow r;
            r.point.alpha = text::parse_double(f[0]);
            r.point.deviation_deg_mean = text::parse_double(f[1]);
            r.point.deviation_deg_std = text::parse_double(f[2]);
            r.point.power_w_mean = text::parse_double(f[3]);
            r.point.power_w_std = text::parse_double(f[4]);
            r.on_front = text::parse_int(f[5]) != 0;
            out.push_back(r);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("front CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<FrontRow> read_front_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return read_front_csv(is);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::vector<FrontRow> classify(const std::vector<experiment::AggregatePoint>& aggs) {
    const FrontSplit split = pareto_front(to_points(aggs));
    std::vector<FrontRow> rows;
    for (std::size_t i = 0; i < aggs.size(); ++i) rows.push_back({aggs[i], split.on_front[i]});
    return rows;
}

ExportPaths export_front(const std::vector<experiment::AggregatePoint>& aggs, const fs::path& dir,
                         const std::string& stem) {
    if (aggs.empty()) throw std::invalid_argument("export_front needs at least one aggregate");
    const auto rows = classify(aggs);
    ExportPaths paths{dir / (stem + ".csv"), dir / (stem + ".svg")};
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());

    std::ostringstream csv;
    write_front_csv(csv, rows);
    plot::write_file(paths.csv, csv.str());

    std::vector<plot::ScatterPoint> sp;
    for (const auto& r : rows) {
        sp.push_back({r.point.deviation_deg_mean, r.point.power_w_mean, r.point.deviation_deg_std,
                      r.point.power_w_std, r.point.alpha, r.on_front});
    }
    plot::write_file(paths.svg, plot::render_scatter_svg(sp));
    return paths;
}

ExportPaths export_seed_front(const std::vector<experiment::EvalPoint>& points, const fs::path& dir,
                              const std::string& stem) {
    if (points.empty()) throw std::invalid_argument("export_seed_front needs at least one point");
    const FrontSplit split = pareto_front(to_points(points));
    ExportPaths paths{dir / (stem + ".csv"), dir / (stem + ".svg")};
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());

    std::ostringstream csv;
    csv << "alpha,seed,deviation_deg,power_w,on_front\n";
    std::vector<plot::ScatterPoint> sp;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        csv << format_double(p.alpha) << ',' << p.seed << ',' << format_double(p.deviation_deg) << ','
            << format_double(p.power_w) << ',' << (split.on_front[i] ? 1 : 0) << '\n';
        sp.push_back({p.deviation_deg, p.power_w, 0.0, 0.0, p.alpha, split.on_front[i]});
    }
    plot::write_file(paths.csv, csv.str());
    plot::ScatterLabels labels;
    labels.title = "Pareto front (per seed)";
    plot::write_file(paths.svg, plot::render_scatter_svg(sp, labels));
    return paths;
}

}  // namespace pitchrl::pareto
