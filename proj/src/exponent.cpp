#include "traitlab/exponent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "traitlab/errors.hpp"

namespace traitlab {

void exponent_rhs(const Model& model, const std::vector<double>& u, std::vector<double>& du) {
    const std::size_t w = model.width();
    const std::int64_t L = model.kernel.l_max;
    const double log_k = model.grid.log_k;
    const auto& wts = model.kernel.weights;
    du.assign(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
        std::int64_t lo = std::max<std::int64_t>(-L, static_cast<std::int64_t>(i) -
                                                         (static_cast<std::int64_t>(w) - 1));
        std::int64_t hi = std::min<std::int64_t>(L, static_cast<std::int64_t>(i));
        double dmax = 0.0;  // offset l = 0 contributes exponent zero
        for (std::int64_t l = lo; l <= hi; ++l) {
            double d = u[static_cast<std::size_t>(static_cast<std::int64_t>(i) - l)] - u[i];
            dmax = std::max(dmax, d);
        }
        if (log_k * dmax > 690.0) {
            throw NumericsError("exponent system: exp(ln K * du) overflows after max-shift "
                                "(spatial Lipschitz blow-up or window too small)");
        }
        double acc = 0.0;
        for (std::int64_t l = lo; l <= hi; ++l) {
            double d = u[static_cast<std::size_t>(static_cast<std::int64_t>(i) - l)] - u[i];
            acc += wts[static_cast<std::size_t>(l + L)] * std::exp(log_k * (d - dmax));
        }
        du[i] = model.b_at(i) - model.d_at(i) + std::exp(log_k * dmax) * acc;
    }
}

FieldSeries integrate_exponent(const Model& model, const std::vector<double>& u0,
                               const std::vector<double>& out_times_rescaled,
                               const OdeOptions& ode) {
    if (u0.size() != model.width()) throw ConfigError("integrate_exponent: u0 width mismatch");
    for (double v : u0) {
        if (!std::isfinite(v)) {
            throw ConfigError("integrate_exponent: u0 must be finite on the window");
        }
    }
    OdeRhs rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        exponent_rhs(model, y, dy);
    };
    OdeOptions opts = ode;
    opts.enforce_nonnegative = false;
    OdeResult r = integrate_rk45(rhs, u0, out_times_rescaled, opts);
    FieldSeries s;
    s.times = std::move(r.times);
    s.values = std::move(r.states);
    return s;
}

}  // namespace traitlab
