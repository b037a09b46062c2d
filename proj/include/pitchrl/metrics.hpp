#pragma once

#include <span>

namespace pitchrl::metrics {

// Quantifies bang-bang behaviour of an action trace.
struct OscillationMetrics {
    double mean_abs_change = 0.0;  // mean |a_t - a_{t-1}|
    double sign_flip_rate = 0.0;   // fraction of consecutive pairs with a_t * a_{t-1} < 0
};

/// Both metrics are 0 for traces shorter than two samples.
OscillationMetrics oscillation_metrics(std::span<const double> actions);

}  // namespace pitchrl::metrics
