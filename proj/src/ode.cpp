#include "traitlab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "traitlab/errors.hpp"

namespace traitlab {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeResult integrate_rk45(const OdeRhs& rhs, const std::vector<double>& y0,
                         const std::vector<double>& out_times, const OdeOptions& opts) {
    if (out_times.empty()) throw ConfigError("ode: at least one output time required");
    for (std::size_t k = 0; k < out_times.size(); ++k) {
        if (!(out_times[k] >= 0.0)) throw ConfigError("ode: output times must be >= 0");
        if (k > 0 && !(out_times[k] > out_times[k - 1])) {
            throw ConfigError("ode: output times must be strictly increasing");
        }
    }
    const std::size_t n = y0.size();
    const double t_end = out_times.back();

    OdeResult res;
    std::vector<double> y = y0, ynew(n), yerr(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n);
    double t = 0.0;

    std::size_t out_idx = 0;
    auto emit_if_due = [&](double now) {
        while (out_idx < out_times.size() && out_times[out_idx] <= now) {
            res.times.push_back(out_times[out_idx]);
            res.states.push_back(y);
            ++out_idx;
        }
    };
    emit_if_due(0.0);
    if (out_idx >= out_times.size()) return res;

    double h_work = opts.initial_step > 0.0 ? opts.initial_step : t_end / 100.0;
    const double h_min = opts.min_step_rel * std::max(t_end, 1.0);
    double prev_err = 1.0;

    rhs(t, y, k1);
    for (std::uint64_t step = 0; step < opts.max_steps; ++step) {
        if (out_idx >= out_times.size()) break;
        double target = out_times[out_idx];
        bool clipped = h_work >= target - t;
        double h = clipped ? target - t : h_work;
        if (h_work < h_min) {
            throw NumericsError("ode: step size underflow at t = " + std::to_string(t) +
                                " (stiffness); an implicit solver fallback would be required "
                                "for this configuration");
        }

        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        rhs(t + c2 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] +
                     h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(t + h, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] +
                      h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(t + h, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                            e7 * k7[i]);
            double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            double r = e / sc;
            err += r * r;
        }
        err = std::sqrt(err / static_cast<double>(n));

        bool negative = false;
        if (opts.enforce_nonnegative) {
            for (std::size_t i = 0; i < n; ++i) {
                if (ynew[i] < 0.0) { negative = true; break; }
            }
        }

        if (err <= 1.0 && !negative) {
            t = clipped ? target : t + h;
            y.swap(ynew);
            k1.swap(k7);  // first-same-as-last
            ++res.steps_accepted;
            emit_if_due(t);
            double grow = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                          std::pow(std::max(prev_err, 1e-10), 0.4 / 5.0);
            prev_err = std::max(err, 1e-10);
            h_work *= std::clamp(grow, 0.2, 5.0);
        } else {
            ++res.steps_rejected;
            double shrink = negative ? 0.5 : std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            h_work = h * shrink;
        }
    }
    if (out_idx < out_times.size()) {
        throw NumericsError("ode: max step budget exhausted before reaching the horizon");
    }
    return res;
}

}  // namespace traitlab
