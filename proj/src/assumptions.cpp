#include "traitlab/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "traitlab/errors.hpp"

namespace traitlab {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

AssumptionReport verify_assumptions(const Model& model, const std::vector<double>& u0,
                                    std::optional<RegimeTag> declared) {
    const TraitGrid& g = model.grid;
    const bool have_u0 = !u0.empty();
    if (have_u0 && u0.size() != g.size()) {
        throw ConfigError("assumptions: u0 must be sampled at every grid site");
    }

    AssumptionReport rep;
    rep.regime = classify_regime(model.rates);
    RegimeTag target = declared.value_or(rep.regime.tag);

    double lip = 0.0, a2 = 0.0, bconst = 0.0, umin = 0.0;
    if (have_u0) {
        // Discrete Lipschitz constant of the initial exponent.
        for (std::size_t k = 0; k + 1 < u0.size(); ++k) {
            lip = std::max(lip, std::abs(u0[k + 1] - u0[k]) / g.delta_k);
        }
        // Envelope slopes measured relative to the origin site: the decay
        // slope is the best uniform rate with u0_i <= u0_0 - A1 |x_i|; the
        // intercept is then the tightest constant given that slope (achieved
        // at some site).
        std::size_t k0 = g.offset(0);
        double worst = -1e300;
        for (std::size_t k = 0; k < u0.size(); ++k) {
            if (k == k0) continue;
            double ax = std::abs(g.x_at(k));
            worst = std::max(worst, (u0[k] - u0[k0]) / ax);
        }
        rep.decay_a1 = std::max(0.0, -worst);
        rep.growth_a = std::max(0.0, worst);
        a2 = -1e300;
        bconst = -1e300;
        umin = 1e300;
        for (std::size_t k = 0; k < u0.size(); ++k) {
            double ax = std::abs(g.x_at(k));
            a2 = std::max(a2, u0[k] + rep.decay_a1 * ax);
            bconst = std::max(bconst, u0[k] - rep.growth_a * ax);
            umin = std::min(umin, u0[k]);
        }
    }
    rep.lipschitz = lip;
    rep.decay_a2 = a2;
    rep.growth_b = bconst;
    rep.c_a = 2.0 * rep.growth_a + 1.0;
    rep.initial_min = umin;

    auto add = [&](const std::string& id, bool pass, bool required, double measured,
                   const std::string& detail) {
        rep.entries.push_back({id, pass, required, measured, detail});
    };

    double bmax = *std::max_element(model.rates.b.begin(), model.rates.b.end());
    double dmax = *std::max_element(model.rates.d.begin(), model.rates.d.end());
    add("rate-bounds", bmax <= model.rates.bbar && dmax <= model.rates.dbar, true,
        std::max(bmax, dmax),
        "max b = " + fmt(bmax) + " <= " + fmt(model.rates.bbar) + ", max d = " + fmt(dmax) +
            " <= " + fmt(model.rates.dbar));
    add("mutation-rate-positive", model.rates.p > 0.0, true, model.rates.p,
        "p = " + fmt(model.rates.p));
    add("kernel-tail", model.kernel.tail_mass <= 1.0, true, model.kernel.tail_mass,
        model.kernel_spec.name() + ", truncated mass " + fmt(model.kernel.tail_mass));
    double defect = std::abs(model.kernel.riemann_defect());
    add("kernel-riemann", defect <= model.kernel.riemann_tol, true, defect,
        "|sum w_l - p| = " + fmt(defect) + " <= " + fmt(model.kernel.riemann_tol));
    add("mesh-condition", g.delta_k < 1.0 / g.log_k, true, g.delta_k,
        "delta_K = " + fmt(g.delta_k) + " < 1/ln K = " + fmt(1.0 / g.log_k));

    bool want_sub = target == RegimeTag::subcritical;
    bool want_sup = target == RegimeTag::supercritical;
    if (have_u0) {
        add("initial-lipschitz", std::isfinite(lip), true, lip, "L = " + fmt(lip));
        add("initial-decay-envelope", rep.decay_a1 > 0.0, want_sub, rep.decay_a1,
            "u0 <= -" + fmt(rep.decay_a1) + "|x| + " + fmt(rep.decay_a2));
        add("initial-growth-envelope", std::isfinite(rep.growth_b), want_sup, rep.growth_a,
            "u0 <= " + fmt(rep.growth_a) + "|x| + " + fmt(rep.growth_b) +
                ", C_A = " + fmt(rep.c_a));
        add("initial-mean-floor", rep.initial_min > 0.0, want_sup, rep.initial_min,
            "a = min u0 = " + fmt(rep.initial_min) + " (mean floor K^a)");
    } else {
        add("initial-lipschitz", true, false, 0.0, "u0 not provided; skipped");
        add("initial-decay-envelope", true, false, 0.0, "u0 not provided; skipped");
        add("initial-growth-envelope", true, false, 0.0, "u0 not provided; skipped");
        add("initial-mean-floor", true, false, 0.0, "u0 not provided; skipped");
    }
    add("regime-subcritical", rep.regime.alpha <= 0.0, want_sub, rep.regime.alpha,
        "alpha = sup(b - d) + p = " + fmt(rep.regime.alpha));
    bool sup_rates = true;
    for (std::size_t k = 0; k < model.rates.b.size(); ++k) {
        if (model.rates.b[k] < model.rates.d[k]) { sup_rates = false; break; }
    }
    add("regime-supercritical", sup_rates, want_sup, sup_rates ? 1.0 : 0.0,
        sup_rates ? "b >= d on the whole window" : "b < d somewhere on the window");

    rep.all_required_pass = true;
    for (const auto& e : rep.entries) {
        if (e.required && !e.pass) rep.all_required_pass = false;
    }
    return rep;
}

}  // namespace traitlab
