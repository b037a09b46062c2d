#pragma once

// Self-contained SVG rendering; no external renderer needed.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pitchrl/env.hpp"

namespace pitchrl::plot {

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    double x_std = 0.0;  // rectangle half-width; 0 draws none
    double y_std = 0.0;
    double alpha = 0.0;  // colour key
    bool on_front = false;
};

struct ScatterLabels {
    std::string title = "Pareto front";
    std::string x_axis = "Pitch deviation [deg]";
    std::string y_axis = "Power consumption [W]";
};

/// Circles for front members, crosses for dominated points, std-dev
/// rectangles, colour by alpha, legend. Byte-identical for identical input.
std::string render_scatter_svg(const std::vector<ScatterPoint>& points, const ScatterLabels& labels = {});

/// Two panels over time: pitch and reference (deg), then voltage (V).
std::string render_trace_svg(const std::vector<env::TraceRow>& rows, const std::string& title = "Evaluation trace");

/// Reads the t,phi_deg,r_deg,u_V,power_W,reward layout.
std::vector<env::TraceRow> read_trace_csv(std::istream& is);

/// Colour for alpha in [0, 1] along a perceptual ramp, "#rrggbb".
std::string alpha_colour(double alpha);

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    double step = 0.2;
    int decimals = 1;
};
/// Rounded range covering [lo, hi] with about `ticks` intervals.
Axis nice_axis(double lo, double hi, int ticks = 5);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pitchrl::plot
