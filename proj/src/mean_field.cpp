#include "traitlab/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "traitlab/errors.hpp"

namespace traitlab {

namespace {

// Per-site rate of convolution mass leaving the window (offsets with i + l
// outside). Symmetric kernels make the in/out bookkeeping direction-free.
std::vector<double> out_rates(const Model& m) {
    const std::size_t w = m.width();
    const std::int64_t L = m.kernel.l_max;
    std::vector<double> out(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
        double s = 0.0;
        for (std::int64_t l = -L; l <= L; ++l) {
            std::int64_t j = static_cast<std::int64_t>(i) + l;
            if (j < 0 || j >= static_cast<std::int64_t>(w)) s += m.kernel.w(l);
        }
        out[i] = s;
    }
    return out;
}

}  // namespace

void mean_rhs(const Model& model, const std::vector<double>& n, std::vector<double>& dn) {
    const std::size_t w = model.width();
    const std::int64_t L = model.kernel.l_max;
    const auto& wts = model.kernel.weights;
    dn.assign(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
        std::int64_t lo = std::max<std::int64_t>(-L, static_cast<std::int64_t>(i) -
                                                         (static_cast<std::int64_t>(w) - 1));
        std::int64_t hi = std::min<std::int64_t>(L, static_cast<std::int64_t>(i));
        double conv = 0.0;
        for (std::int64_t l = lo; l <= hi; ++l) {
            conv += wts[static_cast<std::size_t>(l + L)] *
                    n[static_cast<std::size_t>(static_cast<std::int64_t>(i) - l)];
        }
        dn[i] = (model.b_at(i) - model.d_at(i)) * n[i] + conv;
    }
}

MeanFieldResult integrate_mean(const Model& model, const std::vector<double>& n0,
                               const std::vector<double>& out_times, const OdeOptions& ode,
                               BoundaryPolicy boundary, double strict_leak_tol) {
    const std::size_t w = model.width();
    if (n0.size() != w) throw ConfigError("integrate_mean: n0 width mismatch");
    for (double v : n0) {
        if (v < 0.0) throw ConfigError("integrate_mean: initial means must be >= 0");
    }

    std::vector<double> leak_rate = out_rates(model);
    std::vector<double> y0(w + 1, 0.0);
    std::copy(n0.begin(), n0.end(), y0.begin());

    std::vector<double> scratch;
    OdeRhs rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy.resize(w + 1);
        // reuse mean_rhs on the field part
        static thread_local std::vector<double> nview, dview;
        nview.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(w));
        mean_rhs(model, nview, dview);
        std::copy(dview.begin(), dview.end(), dy.begin());
        double leak = 0.0;
        for (std::size_t i = 0; i < w; ++i) leak += leak_rate[i] * y[i];
        dy[w] = leak;
    };

    OdeOptions opts = ode;
    opts.enforce_nonnegative = true;
    OdeResult r = integrate_rk45(rhs, y0, out_times, opts);

    MeanFieldResult res;
    res.steps_accepted = r.steps_accepted;
    res.series.times = r.times;
    res.series.values.reserve(r.states.size());
    for (auto& st : r.states) {
        res.series.values.emplace_back(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(w));
    }
    res.leak_mass = r.states.empty() ? 0.0 : r.states.back()[w];

    if (boundary == BoundaryPolicy::strict) {
        double mass0 = 0.0;
        for (double v : n0) mass0 += v;
        if (res.leak_mass > strict_leak_tol * std::max(mass0, 1.0)) {
            throw ConfigError("integrate_mean: strict boundary policy rejected the "
                              "configuration: integrated leak " +
                              std::to_string(res.leak_mass) + " exceeds the tolerance; "
                              "enlarge the window or use the absorb policy");
        }
    }
    return res;
}

}  // namespace traitlab
