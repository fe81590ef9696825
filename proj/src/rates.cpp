#include "traitlab/rates.hpp"

#include <algorithm>
#include <cmath>

#include "traitlab/errors.hpp"

namespace traitlab {

RateFunction RateFunction::constant(double v) {
    RateFunction f;
    f.kind = Kind::constant;
    f.value = v;
    return f;
}

RateFunction RateFunction::affine(double intercept, double slope) {
    RateFunction f;
    f.kind = Kind::affine;
    f.intercept = intercept;
    f.slope = slope;
    return f;
}

RateFunction RateFunction::gaussian_bump(double base, double height, double center,
                                         double width) {
    if (!(width > 0.0)) throw ConfigError("rates: gaussian_bump width must be positive");
    RateFunction f;
    f.kind = Kind::gaussian_bump;
    f.base = base;
    f.height = height;
    f.center = center;
    f.width = width;
    return f;
}

RateFunction RateFunction::table(std::vector<double> xs, std::vector<double> vs) {
    if (xs.size() != vs.size() || xs.size() < 2) {
        throw ConfigError("rates: table needs matching xs/vs with at least two points");
    }
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) throw ConfigError("rates: table xs must be increasing");
    }
    RateFunction f;
    f.kind = Kind::table;
    f.xs = std::move(xs);
    f.vs = std::move(vs);
    return f;
}

double RateFunction::eval(double x, double cap) const {
    double v = 0.0;
    switch (kind) {
        case Kind::constant: v = value; break;
        case Kind::affine: v = intercept + slope * x; break;
        case Kind::gaussian_bump: {
            double z = (x - center) / width;
            v = base + height * std::exp(-z * z);
            break;
        }
        case Kind::table: {
            if (x <= xs.front()) { v = vs.front(); break; }
            if (x >= xs.back()) { v = vs.back(); break; }
            auto it = std::upper_bound(xs.begin(), xs.end(), x);
            std::size_t j = static_cast<std::size_t>(it - xs.begin());
            double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
            v = vs[j - 1] + t * (vs[j] - vs[j - 1]);
            break;
        }
    }
    return std::clamp(v, 0.0, cap);
}

RateTables build_rate_tables(const TraitGrid& grid, const RateFunction& birth,
                             const RateFunction& death, double p, double bbar, double dbar) {
    // p = 0 is allowed as a degenerate testing configuration; the assumption
    // report requires p > 0 for real experiments.
    if (!(p >= 0.0)) throw ConfigError("rates: mutation rate p must be >= 0");
    if (!(bbar > 0.0) || !(dbar > 0.0)) {
        throw ConfigError("rates: uniform bounds bbar, dbar must be positive");
    }
    RateTables t;
    t.p = p;
    t.bbar = bbar;
    t.dbar = dbar;
    std::size_t w = grid.size();
    t.b.resize(w);
    t.d.resize(w);
    for (std::size_t k = 0; k < w; ++k) {
        double x = grid.x_at(k);
        t.b[k] = birth.eval(x, bbar);
        t.d[k] = death.eval(x, dbar);
    }
    return t;
}

Regime classify_regime(const RateTables& rates) {
    double max_net = -1e300;
    double min_net = 1e300;
    for (std::size_t i = 0; i < rates.b.size(); ++i) {
        double net = rates.b[i] - rates.d[i];
        max_net = std::max(max_net, net);
        min_net = std::min(min_net, net);
    }
    Regime r;
    r.alpha = max_net + rates.p;
    if (r.alpha <= 0.0) {
        r.tag = RegimeTag::subcritical;
    } else if (min_net >= 0.0) {
        r.tag = RegimeTag::supercritical;
    } else {
        r.tag = RegimeTag::mixed;
    }
    return r;
}

bool rates_supercritical(const RateTables& rates) {
    for (std::size_t i = 0; i < rates.b.size(); ++i) {
        if (rates.b[i] < rates.d[i]) return false;
    }
    return true;
}

std::string regime_name(RegimeTag tag) {
    switch (tag) {
        case RegimeTag::subcritical: return "subcritical";
        case RegimeTag::supercritical: return "supercritical";
        case RegimeTag::mixed: return "mixed";
    }
    return "unknown";
}

}  // namespace traitlab
