#include "traitlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "traitlab/ensemble.hpp"
#include "traitlab/errors.hpp"

namespace traitlab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BetaField hopf_cole(const Trajectory& traj, const TraitGrid& grid,
                    const std::vector<double>& rescaled_times) {
    if (traj.times.size() != rescaled_times.size()) {
        throw ConfigError("hopf_cole: observation grid does not match the rescaled grid "
                          "(no resampling is performed)");
    }
    BetaField f;
    f.log_k = grid.log_k;
    f.times = rescaled_times;
    f.beta.resize(traj.times.size());
    f.extinct.resize(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        double expected = rescaled_times[k] * grid.log_k;
        if (std::abs(traj.times[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
            throw ConfigError("hopf_cole: trajectory time " + std::to_string(traj.times[k]) +
                              " does not equal t*lnK = " + std::to_string(expected));
        }
        const auto& row = traj.counts[k];
        f.beta[k].assign(row.size(), 0.0);
        f.extinct[k].assign(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i] == 0) {
                f.extinct[k][i] = 1;
            } else {
                f.beta[k][i] = std::log(static_cast<double>(row[i])) / grid.log_k;
            }
        }
    }
    return f;
}

InterpolatedSlice interpolate(const BetaField& field, std::size_t t_index,
                              const TraitGrid& grid) {
    InterpolatedSlice s;
    s.grid = grid;
    s.beta = field.beta.at(t_index);
    s.extinct = field.extinct.at(t_index);
    return s;
}

InterpolatedSlice::Value InterpolatedSlice::eval(double x) const {
    double pos = x / grid.delta_k - static_cast<double>(grid.i_min);
    if (pos <= 0.0) pos = 0.0;
    double pmax = static_cast<double>(beta.size() - 1);
    if (pos >= pmax) pos = pmax;
    std::size_t j = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(j);
    if (frac < 1e-12) {  // node-exact
        return {extinct[j] ? 0.0 : beta[j], extinct[j] != 0};
    }
    if (extinct[j] || extinct[j + 1]) return {0.0, true};
    return {beta[j] * (1.0 - frac) + beta[j + 1] * frac, false};
}

RefCurve ref_curve(const HjSolution& sol, double t) {
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        if (std::abs(sol.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
            return RefCurve{sol.xs, sol.u[k]};
        }
    }
    throw ConfigError("ref_curve: t is not one of the solved output times");
}

double RefCurve::eval(double x) const {
    if (x <= xs.front()) return vs.front();
    if (x >= xs.back()) return vs.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t j = static_cast<std::size_t>(it - xs.begin());
    double frac = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return vs[j - 1] * (1.0 - frac) + vs[j] * frac;
}

double sup_distance_on_compact(const InterpolatedSlice& slice, const RefCurve& ref, double a,
                               double b) {
    if (!(a < b)) throw ConfigError("sup_distance_on_compact: need a < b");
    const TraitGrid& g = slice.grid;
    // Any extinct marker whose closed segment touches [a, b] makes the
    // distance to a finite reference +infinity.
    for (std::size_t j = 0; j < slice.beta.size(); ++j) {
        if (!slice.extinct[j]) continue;
        double xl = j == 0 ? g.x_at(0) : g.x_at(j - 1);
        double xr = j + 1 == slice.beta.size() ? g.x_at(j) : g.x_at(j + 1);
        if (xr >= a && xl <= b) return kInf;
    }
    // Piecewise-linear difference: the sup sits at a break point of either
    // mesh or at the compact endpoints.
    double sup = 0.0;
    auto visit = [&](double x) {
        if (x < a || x > b) return;
        auto v = slice.eval(x);
        sup = std::max(sup, std::abs(v.v - ref.eval(x)));
    };
    visit(a);
    visit(b);
    for (std::size_t j = 0; j < slice.beta.size(); ++j) visit(g.x_at(j));
    for (double x : ref.xs) visit(x);
    return sup;
}

bool all_extinct_on_compact(const InterpolatedSlice& slice, double a, double b) {
    if (!(a < b)) throw ConfigError("all_extinct_on_compact: need a < b");
    const TraitGrid& g = slice.grid;
    bool any_node = false;
    for (std::size_t j = 0; j < slice.beta.size(); ++j) {
        double x = g.x_at(j);
        if (x >= a && x <= b) {
            any_node = true;
            if (!slice.extinct[j]) return false;
        }
    }
    if (any_node) return true;
    // The compact sits inside one segment: its interior is -infinity iff an
    // endpoint is extinct.
    auto v = slice.eval(0.5 * (a + b));
    return v.extinct;
}

Wilson wilson_interval(std::uint64_t count, std::uint64_t n, double z) {
    if (n == 0) throw ConfigError("wilson_interval: n must be positive");
    double nn = static_cast<double>(n);
    double p = static_cast<double>(count) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------

DeviationReducer::DeviationReducer(const FieldSeries* mean, std::size_t scan_lo,
                                   std::size_t scan_hi, double eta)
    : mean_(mean), lo_(scan_lo), hi_(scan_hi), eta_(eta) {
    std::size_t w = mean_->values.empty() ? 0 : mean_->values[0].size();
    s1_.assign(mean_->times.size() * w, 0.0);
    s2_.assign(mean_->times.size() * w, 0.0);
}

void DeviationReducer::add(const Trajectory& traj) {
    ++reps_;
    const std::size_t w = mean_->values[0].size();
    bool exceeded = false;
    for (std::size_t t = 0; t < mean_->times.size(); ++t) {
        for (std::size_t i = 0; i < w; ++i) {
            double n = mean_->values[t][i];
            double cnt = static_cast<double>(traj.counts[t][i]);
            if (n <= 0.0) {
                if (cnt > 0.0) ++inconsistent_;
                continue;
            }
            double dev = cnt / n - 1.0;
            double d2 = dev * dev;
            s1_[t * w + i] += d2;
            s2_[t * w + i] += d2 * d2;
            if (i >= lo_ && i <= hi_ && std::abs(dev) > eta_) exceeded = true;
        }
    }
    if (exceeded) ++exceed_;
}

void DeviationReducer::merge(const DeviationReducer& o) {
    reps_ += o.reps_;
    exceed_ += o.exceed_;
    inconsistent_ += o.inconsistent_;
    for (std::size_t i = 0; i < s1_.size(); ++i) s1_[i] += o.s1_[i];
    for (std::size_t i = 0; i < s2_.size(); ++i) s2_[i] += o.s2_[i];
}

DeviationStats DeviationReducer::stats() const {
    DeviationStats st;
    st.times = mean_->times;
    st.replicates = reps_;
    st.inconsistent = inconsistent_;
    const std::size_t w = mean_->values[0].size();
    double r = static_cast<double>(reps_);
    st.mean_sq.resize(mean_->times.size());
    st.se.resize(mean_->times.size());
    for (std::size_t t = 0; t < mean_->times.size(); ++t) {
        st.mean_sq[t].resize(w);
        st.se[t].resize(w);
        for (std::size_t i = 0; i < w; ++i) {
            double m = s1_[t * w + i] / r;
            double var = r > 1.5 ? (s2_[t * w + i] - r * m * m) / (r - 1.0) : 0.0;
            st.mean_sq[t][i] = m;
            st.se[t][i] = std::sqrt(std::max(var, 0.0) / r);
        }
    }
    return st;
}

DeviationStats deviation_stats(const Model& model, const FieldSeries& mean,
                               const std::vector<double>& mean0, InitialMode mode,
                               std::uint64_t replicates, std::uint64_t base_seed,
                               unsigned workers, const SimOptions& sim) {
    if (mean.times != sim.observation_times) {
        throw ConfigError("deviation_stats: mean-field grid and observation grid must match");
    }
    DeviationReducer proto(&mean, 0, model.width() - 1, kInf);
    auto body = [&](std::uint64_t, std::uint64_t seed, DeviationReducer& acc) {
        PopulationState st = sample_initial(mean0, mode, derive_stream(seed, 0));
        Trajectory traj = simulate_exact(model, st, sim, derive_stream(seed, 1));
        acc.add(traj);
    };
    DeviationReducer red =
        run_blocks(replicates, base_seed, workers, 64, body, std::move(proto));
    return red.stats();
}

// ---------------------------------------------------------------------------

namespace {

struct CompactCounts {
    std::vector<std::uint64_t> survival_failures;
    std::vector<std::uint64_t> extinction_hits;
    std::uint64_t reps = 0;
    std::uint64_t leak = 0;

    void merge(const CompactCounts& o) {
        reps += o.reps;
        leak += o.leak;
        for (std::size_t i = 0; i < survival_failures.size(); ++i) {
            survival_failures[i] += o.survival_failures[i];
        }
        for (std::size_t i = 0; i < extinction_hits.size(); ++i) {
            extinction_hits[i] += o.extinction_hits[i];
        }
    }
};

}  // namespace

ConvergenceReport survival_extinction_experiment(const ModelFactory& factory,
                                                 const std::function<double(double)>& u0,
                                                 const HjSolution& reference,
                                                 const SurvivalExtinctionParams& params) {
    if (params.replicates == 0) {
        throw ConfigError("experiment: at least one replicate required");
    }
    if (params.log_k_list.empty()) throw ConfigError("experiment: empty K ladder");

    RefCurve ref = ref_curve(reference, params.t);
    double band = 2.0 * reference.error_estimate;
    for (const auto& c : params.survival_compacts) {
        double lo = kInf;
        for (double x = c.a; x <= c.b + 1e-12; x += std::max(1e-3, (c.b - c.a) / 512.0)) {
            lo = std::min(lo, ref.eval(x));
        }
        if (!(lo >= band)) {
            throw ConfigError("experiment: survival compact [" + std::to_string(c.a) + ", " +
                              std::to_string(c.b) + "] is not inside {u > 0} with margin >= "
                              "band_tol = " + std::to_string(band) +
                              " (it touches the undecided band)");
        }
    }
    for (const auto& c : params.extinction_compacts) {
        double hi = -kInf;
        for (double x = c.a; x <= c.b + 1e-12; x += std::max(1e-3, (c.b - c.a) / 512.0)) {
            hi = std::max(hi, ref.eval(x));
        }
        if (!(hi <= -band)) {
            throw ConfigError("experiment: extinction compact [" + std::to_string(c.a) + ", " +
                              std::to_string(c.b) + "] is not inside {u < 0} with margin >= "
                              "band_tol (it touches the undecided band)");
        }
    }

    ConvergenceReport report;
    std::vector<double> prev_fail_rate(params.survival_compacts.size(), 2.0);
    std::vector<double> prev_hit_rate(params.extinction_compacts.size(), -1.0);

    for (double log_k : params.log_k_list) {
        Model model = factory(log_k);
        const TraitGrid& grid = model.grid;
        std::vector<double> n0(grid.size());
        for (std::size_t i = 0; i < n0.size(); ++i) {
            n0[i] = std::exp(log_k * u0(grid.x_at(i)));
        }
        SimOptions sim;
        sim.observation_times = {params.t * log_k};
        sim.boundary = BoundaryPolicy::absorb;
        sim.max_population = params.max_population;
        std::vector<double> rescaled = {params.t};

        CompactCounts proto;
        proto.survival_failures.assign(params.survival_compacts.size(), 0);
        proto.extinction_hits.assign(params.extinction_compacts.size(), 0);

        auto body = [&](std::uint64_t, std::uint64_t seed, CompactCounts& acc) {
            PopulationState st =
                sample_initial(n0, params.initial_mode, derive_stream(seed, 0));
            Trajectory traj = simulate_exact(model, st, sim, derive_stream(seed, 1));
            BetaField f = hopf_cole(traj, grid, rescaled);
            InterpolatedSlice slice = interpolate(f, 0, grid);
            for (std::size_t c = 0; c < params.survival_compacts.size(); ++c) {
                double d = sup_distance_on_compact(slice, ref, params.survival_compacts[c].a,
                                                   params.survival_compacts[c].b);
                if (!(d <= params.eta)) ++acc.survival_failures[c];
            }
            for (std::size_t c = 0; c < params.extinction_compacts.size(); ++c) {
                if (all_extinct_on_compact(slice, params.extinction_compacts[c].a,
                                           params.extinction_compacts[c].b)) {
                    ++acc.extinction_hits[c];
                }
            }
            ++acc.reps;
            acc.leak += traj.boundary_leak;
        };
        CompactCounts counts = run_blocks(params.replicates, params.base_seed, params.workers,
                                          16, body, proto);
        report.boundary_leak += counts.leak;

        for (std::size_t c = 0; c < params.survival_compacts.size(); ++c) {
            ConvergenceCell cell;
            cell.log_k = log_k;
            cell.t = params.t;
            cell.compact = params.survival_compacts[c];
            cell.kind = "survival";
            cell.count = counts.survival_failures[c];
            cell.replicates = counts.reps;
            cell.p_hat = static_cast<double>(cell.count) / static_cast<double>(cell.replicates);
            cell.ci = wilson_interval(cell.count, cell.replicates);
            if (cell.p_hat > prev_fail_rate[c] + 1e-12) {
                report.survival_failure_nonincreasing = false;
            }
            prev_fail_rate[c] = cell.p_hat;
            report.cells.push_back(cell);
        }
        for (std::size_t c = 0; c < params.extinction_compacts.size(); ++c) {
            ConvergenceCell cell;
            cell.log_k = log_k;
            cell.t = params.t;
            cell.compact = params.extinction_compacts[c];
            cell.kind = "extinction";
            cell.count = counts.extinction_hits[c];
            cell.replicates = counts.reps;
            cell.p_hat = static_cast<double>(cell.count) / static_cast<double>(cell.replicates);
            cell.ci = wilson_interval(cell.count, cell.replicates);
            if (cell.p_hat < prev_hit_rate[c] - 1e-12) {
                report.extinction_hit_nondecreasing = false;
            }
            prev_hit_rate[c] = cell.p_hat;
            report.cells.push_back(cell);
        }
    }
    return report;
}

TrackingReport supercritical_tracking_experiment(const ModelFactory& factory,
                                                 const TrackingParams& params) {
    if (params.log_k_list.empty()) throw ConfigError("experiment: empty K ladder");
    if (params.replicates == 0) throw ConfigError("experiment: at least one replicate required");

    TrackingReport report;
    double prev_p = 2.0;
    double prev_e = -1.0;

    for (double log_k : params.log_k_list) {
        Model model = factory(log_k);
        const TraitGrid& grid = model.grid;
        if (!rates_supercritical(model.rates)) {
            throw AssumptionError("tracking experiment requires a supercritical model");
        }
        double ka = std::exp(params.a_exponent * log_k);
        std::vector<double> n0(grid.size(), params.init_multiplier * ka);

        std::vector<double> obs(params.n_obs);
        for (std::size_t k = 0; k < params.n_obs; ++k) {
            obs[k] = params.t_horizon * log_k * static_cast<double>(k + 1) /
                     static_cast<double>(params.n_obs);
        }
        SimOptions sim;
        sim.observation_times = obs;
        sim.boundary = BoundaryPolicy::absorb;
        sim.max_population = params.max_population;

        OdeOptions ode;
        ode.rtol = 1e-8;
        ode.atol = 1e-12;
        MeanFieldResult mf = integrate_mean(model, n0, obs, ode);

        std::size_t lo = grid.size(), hi = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (std::abs(grid.x_at(i)) <= params.d_radius + 1e-12) {
                lo = std::min(lo, i);
                hi = std::max(hi, i);
            }
        }
        if (lo > hi) throw ConfigError("tracking experiment: no sites inside |x| <= D");

        DeviationReducer proto(&mf.series, lo, hi, params.eta);
        auto body = [&](std::uint64_t, std::uint64_t seed, DeviationReducer& acc) {
            PopulationState st = sample_initial(n0, InitialMode::poisson,
                                                derive_stream(seed, 0));
            Trajectory traj =
                simulate_windowed_supercritical(model, st, sim, params.a_exponent,
                                                derive_stream(seed, 1));
            acc.add(traj);
        };
        DeviationReducer red =
            run_blocks(params.replicates, params.base_seed, params.workers, 16, body, proto);
        DeviationStats st = red.stats();

        TrackingCell cell;
        cell.log_k = log_k;
        cell.replicates = red.replicates();
        cell.exceed = red.exceed_count();
        cell.p_hat = static_cast<double>(cell.exceed) / static_cast<double>(cell.replicates);
        cell.ci = wilson_interval(cell.exceed, cell.replicates);
        std::size_t t_last = st.times.size() - 1;
        for (std::size_t i = lo; i <= hi; ++i) {
            if (st.mean_sq[t_last][i] > cell.max_e_s2) {
                cell.max_e_s2 = st.mean_sq[t_last][i];
                cell.max_e_s2_se = st.se[t_last][i];
            }
        }
        if (cell.p_hat > prev_p + 1e-12) report.p_nonincreasing = false;
        if (prev_e > 0.0) report.e_s2_ratios.push_back(prev_e / cell.max_e_s2);
        prev_p = cell.p_hat;
        prev_e = cell.max_e_s2;
        report.cells.push_back(cell);
    }
    return report;
}

}  // namespace traitlab
