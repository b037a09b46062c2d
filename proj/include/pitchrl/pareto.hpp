#pragma once

// Two-objective Pareto classification (both minimized) and front export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pitchrl/experiment.hpp"

namespace pitchrl::pareto {

struct Point2 {
    double x = 0.0;  // deviation, deg
    double y = 0.0;  // power, W
    std::string label;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// a no worse in both coordinates and strictly better in at least one.
bool dominates(const Point2& a, const Point2& b);

struct FrontSplit {
    std::vector<Point2> front;      // input order
    std::vector<Point2> dominated;  // input order
    std::vector<bool> on_front;     // per input index
};

/// O(n log n): sort by x, sweep the running minimum of y. Points with equal
/// coordinates are all kept. Throws std::invalid_argument for empty input or
/// a non-finite / negative coordinate.
FrontSplit pareto_front(const std::vector<Point2>& points);

/// O(n^2) pairwise reference.
std::vector<bool> pareto_mask_bruteforce(const std::vector<Point2>& points);

std::vector<Point2> to_points(const std::vector<experiment::AggregatePoint>& aggs);
std::vector<Point2> to_points(const std::vector<experiment::EvalPoint>& points);

struct FrontRow {
    experiment::AggregatePoint point;
    bool on_front = false;
};

// alpha,deviation_deg_mean,deviation_deg_std,power_w_mean,power_w_std,on_front
void write_front_csv(std::ostream& os, const std::vector<FrontRow>& rows);
std::vector<FrontRow> read_front_csv(std::istream& is);
std::vector<FrontRow> read_front_csv(const std::filesystem::path& path);

std::vector<FrontRow> classify(const std::vector<experiment::AggregatePoint>& aggs);

struct ExportPaths {
    std::filesystem::path csv;
    std::filesystem::path svg;
};

/// <dir>/<stem>.csv and <dir>/<stem>.svg, dominance on the per-alpha means.
ExportPaths export_front(const std::vector<experiment::AggregatePoint>& aggs,
                         const std::filesystem::path& dir, const std::string& stem = "front");

/// Per-seed variant: every EvalPoint is its own marker, no rectangles.
/// CSV columns: alpha,seed,deviation_deg,power_w,on_front
ExportPaths export_seed_front(const std::vector<experiment::EvalPoint>& points,
                              const std::filesystem::path& dir, const std::string& stem = "front_per_seed");

}  // namespace pitchrl::pareto
