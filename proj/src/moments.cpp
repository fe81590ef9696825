#include "traitlab/moments.hpp"

#include <algorithm>
#include <cmath>

#include "traitlab/errors.hpp"

namespace traitlab {

namespace {

struct Packer {
    std::size_t w;
    std::size_t operator()(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return i * w - i * (i - 1) / 2 + (j - i);
    }
};

}  // namespace

MomentSeries integrate_second_moments(const Model& model, const std::vector<double>& mean0,
                                      MomentInitStyle style,
                                      const std::vector<double>& out_times,
                                      const MomentOptions& opts) {
    const std::size_t w = model.width();
    if (mean0.size() != w) throw ConfigError("moments: mean0 width mismatch");
    if (w > opts.max_window) {
        throw ConfigError("moments: window of " + std::to_string(w) +
                          " sites exceeds the second-moment budget (max " +
                          std::to_string(opts.max_window) +
                          "); use a reduced window or Monte Carlo variance estimates");
    }
    const std::size_t pairs = w * (w + 1) / 2;
    Packer pk{w};

    std::vector<double> y0(w + pairs, 0.0);
    for (std::size_t i = 0; i < w; ++i) y0[i] = mean0[i];
    for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = i; j < w; ++j) {
            double s = mean0[i] * mean0[j];
            if (style == MomentInitStyle::poisson && i == j) s += mean0[i];
            y0[w + pk(i, j)] = s;
        }
    }

    const std::int64_t L = model.kernel.l_max;
    const auto& wts = model.kernel.weights;
    const std::int64_t wi = static_cast<std::int64_t>(w);

    OdeRhs rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy.assign(w + pairs, 0.0);
        const double* m = y.data();
        const double* s = y.data() + w;
        double* dm = dy.data();
        double* ds = dy.data() + w;
        for (std::size_t i = 0; i < w; ++i) {
            std::int64_t lo = std::max<std::int64_t>(-L, static_cast<std::int64_t>(i) - (wi - 1));
            std::int64_t hi = std::min<std::int64_t>(L, static_cast<std::int64_t>(i));
            double conv = 0.0;
            for (std::int64_t l = lo; l <= hi; ++l) {
                conv += wts[static_cast<std::size_t>(l + L)] *
                        m[static_cast<std::size_t>(static_cast<std::int64_t>(i) - l)];
            }
            dm[i] = (model.b_at(i) - model.d_at(i)) * m[i] + conv;
        }
        for (std::size_t i = 0; i < w; ++i) {
            double gi = model.b_at(i) - model.d_at(i);
            for (std::size_t j = i; j < w; ++j) {
                double gj = model.b_at(j) - model.d_at(j);
                double acc = (gi + gj) * s[pk(i, j)];
                // mutation inflow pairing: sources i-l against j, j-l against i
                std::int64_t lo_i = std::max<std::int64_t>(-L, static_cast<std::int64_t>(i) - (wi - 1));
                std::int64_t hi_i = std::min<std::int64_t>(L, static_cast<std::int64_t>(i));
                for (std::int64_t l = lo_i; l <= hi_i; ++l) {
                    std::size_t src = static_cast<std::size_t>(static_cast<std::int64_t>(i) - l);
                    acc += wts[static_cast<std::size_t>(l + L)] * s[pk(src, j)];
                }
                std::int64_t lo_j = std::max<std::int64_t>(-L, static_cast<std::int64_t>(j) - (wi - 1));
                std::int64_t hi_j = std::min<std::int64_t>(L, static_cast<std::int64_t>(j));
                for (std::int64_t l = lo_j; l <= hi_j; ++l) {
                    std::size_t src = static_cast<std::size_t>(static_cast<std::int64_t>(j) - l);
                    acc += wts[static_cast<std::size_t>(l + L)] * s[pk(src, i)];
                }
                if (i == j) {
                    // martingale bracket injection
                    double inj = (model.b_at(i) + model.d_at(i)) * m[i];
                    for (std::int64_t l = lo_i; l <= hi_i; ++l) {
                        inj += wts[static_cast<std::size_t>(l + L)] *
                               m[static_cast<std::size_t>(static_cast<std::int64_t>(i) - l)];
                    }
                    acc += inj;
                }
                ds[pk(i, j)] = acc;
            }
        }
    };

    OdeOptions ode = opts.ode;
    ode.enforce_nonnegative = false;
    OdeResult r = integrate_rk45(rhs, y0, out_times, ode);

    MomentSeries out;
    out.width = w;
    out.times = std::move(r.times);
    out.mean.reserve(r.states.size());
    out.second.reserve(r.states.size());
    for (auto& st : r.states) {
        out.mean.emplace_back(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(w));
        out.second.emplace_back(st.begin() + static_cast<std::ptrdiff_t>(w), st.end());
    }
    return out;
}

namespace {

// sup over the trajectory of the mean-normalized bracket
// b_i + d_i + sum_l w_l m_{i-l}(t) / m_i(t).
double bracket_sup(const Model& model, const MomentSeries& ms) {
    const std::size_t w = ms.width;
    const std::int64_t L = model.kernel.l_max;
    const std::int64_t wi = static_cast<std::int64_t>(w);
    double sup = 0.0;
    for (std::size_t t = 0; t < ms.times.size(); ++t) {
        for (std::size_t i = 0; i < w; ++i) {
            double mi = ms.m(t, i);
            if (!(mi > 0.0)) {
                throw NumericsError("variance bound: mean field must stay positive on the "
                                    "window to normalize the bracket");
            }
            std::int64_t lo = std::max<std::int64_t>(-L, static_cast<std::int64_t>(i) - (wi - 1));
            std::int64_t hi = std::min<std::int64_t>(L, static_cast<std::int64_t>(i));
            double conv = 0.0;
            for (std::int64_t l = lo; l <= hi; ++l) {
                conv += model.kernel.w(l) *
                        ms.m(t, static_cast<std::size_t>(static_cast<std::int64_t>(i) - l));
            }
            sup = std::max(sup, model.b_at(i) + model.d_at(i) + conv / mi);
        }
    }
    return sup;
}

}  // namespace

BoundReport check_variance_bound_subcritical(const Model& model, const MomentSeries& ms) {
    Regime reg = classify_regime(model.rates);
    if (reg.tag != RegimeTag::subcritical) {
        throw AssumptionError("subcritical variance bound requires alpha <= 0; got alpha = " +
                              std::to_string(reg.alpha));
    }
    if (ms.times.empty() || ms.times.front() != 0.0) {
        throw ConfigError("variance bound: the moment series must start at t = 0");
    }
    BoundReport rep;
    rep.kind = "subcritical";
    rep.alpha = reg.alpha;
    rep.eps_k = model.kernel.riemann_defect();
    rep.c_bracket = bracket_sup(model, ms);

    const std::size_t w = ms.width;
    std::vector<double> y0(w);
    double sup0 = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        y0[i] = ms.y_norm(0, i);
        sup0 = std::max(sup0, y0[i]);
    }
    rep.initial_sup = sup0;

    rep.min_margin = 1e300;
    for (std::size_t t = 0; t < ms.times.size(); ++t) {
        double tt = ms.times[t];
        double envelope = std::exp((rep.alpha + rep.eps_k) * tt) * sup0 + rep.c_bracket * tt;
        for (std::size_t i = 0; i < w; ++i) {
            double lhs = t == 0 ? y0[i] : ms.y_norm(t, i);
            BoundRow row{tt, model.grid.index_of(i), lhs, envelope, envelope - lhs};
            rep.min_margin = std::min(rep.min_margin, row.margin);
            rep.rows.push_back(row);
        }
    }
    return rep;
}

BoundReport check_variance_bound_supercritical(const Model& model, const MomentSeries& ms,
                                               double a_exponent) {
    if (!rates_supercritical(model.rates)) {
        throw AssumptionError("supercritical variance bound requires b >= d on the window");
    }
    if (ms.times.empty() || ms.times.front() != 0.0) {
        throw ConfigError("variance bound: the moment series must start at t = 0");
    }
    BoundReport rep;
    rep.kind = "supercritical";
    rep.alpha = classify_regime(model.rates).alpha;
    rep.eps_k = model.kernel.riemann_defect();
    rep.c_bracket = bracket_sup(model, ms);
    const double ka = std::exp(a_exponent * model.grid.log_k);

    const std::size_t w = ms.width;
    std::vector<double> y0(w);
    double sup0 = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        y0[i] = ms.s2_norm(0, i);
        sup0 = std::max(sup0, y0[i]);
    }
    rep.initial_sup = sup0;

    rep.min_margin = 1e300;
    for (std::size_t t = 0; t < ms.times.size(); ++t) {
        double tt = ms.times[t];
        double envelope = sup0 + rep.c_bracket * tt / ka;
        for (std::size_t i = 0; i < w; ++i) {
            double lhs = t == 0 ? y0[i] : ms.s2_norm(t, i);
            BoundRow row{tt, model.grid.index_of(i), lhs, envelope, envelope - lhs};
            rep.min_margin = std::min(rep.min_margin, row.margin);
            rep.rows.push_back(row);
        }
    }
    return rep;
}

double weighted_l1_norm(const TraitGrid& grid, const std::vector<double>& v, double c_a) {
    if (v.size() != grid.size()) throw ConfigError("weighted_l1_norm: width mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        double ih = static_cast<double>(grid.index_of(k)) * grid.h_k;
        s += std::exp(-c_a * std::abs(ih)) * std::abs(v[k]);
    }
    return s;
}

}  // namespace traitlab
