#include "pitchrl/metrics.hpp"

#include <cmath>

namespace pitchrl::metrics {

OscillationMetrics oscillation_metrics(std::span<const double> actions) {
    if (actions.size() < 2) return {};
    double change = 0.0;
    std::size_t flips = 0;
    for (std::size_t t = 1; t < actions.size(); ++t) {
        change += std::abs(actions[t] - actions[t - 1]);
        if (actions[t] * actions[t - 1] < 0.0) ++flips;
    }
    const double pairs = static_cast<double>(actions.size() - 1);
    return {change / pairs, static_cast<double>(flips) / pairs};
}

}  // namespace pitchrl::metrics
