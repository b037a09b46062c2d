#pragma once

// Independent reference computations used by the unit tests and the
// acceptance runner. Nothing here calls into the library's numerics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

struct Motor {
    double R = 8.4, km = 0.042, Jm = 4.0e-6, Dm = 1.5e-5;
};

struct Pitch {
    double Jp = 0.0219, Dp = 0.0105, Ksp = 0.0375, Kf = 1.0e-3, l = 0.158;
};

// Rotor torque balance km (u - km w)/R = Dm w.
inline double rotor_speed_limit(double u, const Motor& m) { return u * m.km / (m.km * m.km + m.Dm * m.R); }

inline double rotor_tau(const Motor& m) { return m.Jm / (m.km * m.km / m.R + m.Dm); }

// Linear first-order response from rest.
inline double rotor_speed(double t, double u, const Motor& m) {
    return rotor_speed_limit(u, m) * (1.0 - std::exp(-t / rotor_tau(m)));
}

// Spring torque balances the differential thrust torque.
inline double pitch_rest_angle(double u, const Motor& m, const Pitch& p) {
    return p.l * p.Kf * (rotor_speed_limit(u, m) - rotor_speed_limit(-u, m)) / p.Ksp;
}

// Decay rate of the pitch envelope, zeta * omega_n.
inline double pitch_decay_rate(const Pitch& p) { return p.Dp / (2.0 * p.Jp); }

inline double scalarized_reward(double delta, double power, double alpha) {
    return -(1.0 - alpha) * std::abs(delta) - alpha * power;
}

// O(n^2) non-dominated mask, both coordinates minimized.
inline std::vector<bool> nondominated(const std::vector<std::pair<double, double>>& pts) {
    std::vector<bool> keep(pts.size(), true);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            const bool no_worse = pts[j].first <= pts[i].first && pts[j].second <= pts[i].second;
            const bool better = pts[j].first < pts[i].first || pts[j].second < pts[i].second;
            if (no_worse && better) {
                keep[i] = false;
                break;
            }
        }
    }
    return keep;
}

// Literal double sum A_t = sum_k (gamma lambda)^k delta_{t+k}, stopping after
// the transition that ends an episode.
inline std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<int>& done, double bootstrap, double gamma,
                               double lambda) {
    const std::size_t n = r.size();
    auto value_at = [&](std::size_t j) { return j < n ? v[j] : bootstrap; };
    std::vector<double> adv(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        double w = 1.0;
        for (std::size_t j = t; j < n; ++j) {
            const double next = done[j] ? 0.0 : value_at(j + 1);
            acc += w * (r[j] + gamma * next - v[j]);
            if (done[j]) break;
            w *= gamma * lambda;
        }
        adv[t] = acc;
    }
    return adv;
}

// Discounted return from t with a bootstrap tail, single episode.
inline double discounted_return(const std::vector<double>& r, std::size_t t, double bootstrap,
                                double gamma) {
    double g = 0.0;
    double w = 1.0;
    for (std::size_t j = t; j < r.size(); ++j) {
        g += w * r[j];
        w *= gamma;
    }
    return g + w * bootstrap;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Composite Simpson, n even.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t n) {
    if (n % 2 == 1) ++n;
    const double h = (b - a) / static_cast<double>(n);
    double s = f(a) + f(b);
    for (std::size_t i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Naive forward pass and PPO loss over the documented flat parameter layout:
// per trunk layer W (out x in) then b; mean head W (A x H), b (A); value head
// w (H), b; log_std (A).
struct ReferenceNet {
    std::vector<std::size_t> layers;  // obs dim, hidden widths
    std::size_t action_dim = 1;

    struct Out {
        std::vector<double> mean;
        double value = 0.0;
        std::vector<double> log_std;
    };

    Out forward(const std::vector<double>& theta, const double* obs) const {
        std::size_t off = 0;
        std::vector<double> h(obs, obs + layers.front());
        for (std::size_t l = 1; l < layers.size(); ++l) {
            const std::size_t in = layers[l - 1], out = layers[l];
            std::vector<double> next(out, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                double s = 0.0;
                for (std::size_t i = 0; i < in; ++i) s += theta[off + o * in + i] * h[i];
                next[o] = s;
            }
            off += in * out;
            for (std::size_t o = 0; o < out; ++o) next[o] = std::tanh(next[o] + theta[off + o]);
            off += out;
            h = next;
        }
        const std::size_t H = layers.back();
        Out r;
        r.mean.assign(action_dim, 0.0);
        for (std::size_t a = 0; a < action_dim; ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < H; ++i) s += theta[off + a * H + i] * h[i];
            r.mean[a] = s;
        }
        off += action_dim * H;
        for (std::size_t a = 0; a < action_dim; ++a) r.mean[a] += theta[off + a];
        off += action_dim;
        double v = 0.0;
        for (std::size_t i = 0; i < H; ++i) v += theta[off + i] * h[i];
        off += H;
        r.value = v + theta[off];
        off += 1;
        r.log_std.assign(theta.begin() + static_cast<long>(off), theta.begin() + static_cast<long>(off + action_dim));
        return r;
    }

    // Pre-squash Gaussian log-density minus the tanh Jacobian.
    static double log_density(const std::vector<double>& z, const Out& o) {
        double lp = 0.0;
        for (std::size_t a = 0; a < z.size(); ++a) {
            const double sd = std::exp(o.log_std[a]);
            const double u = (z[a] - o.mean[a]) / sd;
            const double t = std::tanh(z[a]);
            lp += -0.5 * u * u - o.log_std[a] - 0.5 * std::log(2.0 * kPi) - std::log(1.0 - t * t);
        }
        return lp;
    }

    double loss(const std::vector<double>& theta, const std::vector<double>& obs, const std::vector<double>& z,
                const std::vector<double>& old_lp, const std::vector<double>& adv, const std::vector<double>& ret,
                double clip, double value_coef, double entropy_coef) const {
        const std::size_t n = old_lp.size();
        const std::size_t d = layers.front();
        double pl = 0.0, vl = 0.0, ent = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Out o = forward(theta, obs.data() + i * d);
            std::vector<double> zi(z.begin() + static_cast<long>(i * action_dim),
                                   z.begin() + static_cast<long>((i + 1) * action_dim));
            const double ratio = std::exp(log_density(zi, o) - old_lp[i]);
            const double clipped = std::min(std::max(ratio, 1.0 - clip), 1.0 + clip);
            pl += -std::min(ratio * adv[i], clipped * adv[i]);
            vl += (o.value - ret[i]) * (o.value - ret[i]);
            double h = 0.0;
            for (double ls : o.log_std) h += 0.5 + 0.5 * std::log(2.0 * kPi) + ls;
            ent += h;
        }
        const double m = static_cast<double>(n);
        return pl / m + value_coef * vl / m - entropy_coef * ent / m;
    }
};

}  // namespace oracle
