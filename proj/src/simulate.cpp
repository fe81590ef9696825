#include "traitlab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "traitlab/errors.hpp"
#include "traitlab/fenwick.hpp"
#include "traitlab/rng.hpp"

namespace traitlab {

namespace {

void validate_observations(const std::vector<double>& obs, double t0) {
    if (obs.empty()) throw ConfigError("simulate: at least one observation time required");
    for (std::size_t k = 0; k < obs.size(); ++k) {
        if (!(obs[k] >= t0)) {
            throw ConfigError("simulate: observation times must be >= start time");
        }
        if (k > 0 && !(obs[k] > obs[k - 1])) {
            throw ConfigError("simulate: observation times must be strictly increasing");
        }
    }
}

[[noreturn]] void throw_cap(double t, std::int64_t total, std::int64_t cap) {
    throw NumericsError("simulate: population cap exceeded at t = " + std::to_string(t) +
                        " (total " + std::to_string(total) + " > cap " + std::to_string(cap) +
                        "); raise run.max_population or rescale the experiment");
}

[[noreturn]] void throw_strict_leak(double t, std::int64_t target) {
    throw ConfigError("simulate: strict boundary policy rejected the configuration: a "
                      "mutation reached site index " + std::to_string(target) +
                      " outside the window at t = " + std::to_string(t) +
                      "; enlarge the window or use the absorb policy");
}

}  // namespace

Trajectory simulate_exact(const Model& model, const PopulationState& state0,
                          const SimOptions& opts, std::uint64_t seed) {
    const std::size_t w = model.width();
    if (state0.counts.size() != w) throw ConfigError("simulate: state width mismatch");
    validate_observations(opts.observation_times, state0.time);

    Rng rng(seed);
    std::vector<std::int64_t> n = state0.counts;
    const double mu = model.mu();
    std::vector<double> percap(w);
    for (std::size_t i = 0; i < w; ++i) percap[i] = model.b_at(i) + model.d_at(i) + mu;

    FenwickTree tree = make_fenwick(w);
    std::int64_t total_pop = 0;
    for (std::size_t i = 0; i < w; ++i) {
        tree.set(i, percap[i] * static_cast<double>(n[i]));
        total_pop += n[i];
    }
    if (total_pop > opts.max_population) throw_cap(state0.time, total_pop, opts.max_population);

    Trajectory traj;
    traj.seed = seed;
    double t = state0.time;
    if (total_pop == 0) traj.extinct_at = t;

    std::size_t obs_idx = 0;
    const auto& obs = opts.observation_times;
    std::uint64_t events_since_rebuild = 0;

    auto record_through = [&](double horizon) {
        while (obs_idx < obs.size() && obs[obs_idx] <= horizon) {
            traj.times.push_back(obs[obs_idx]);
            traj.counts.push_back(n);
            ++obs_idx;
        }
    };

    while (obs_idx < obs.size()) {
        double total_rate = tree.total();
        if (total_rate <= 0.0) {
            record_through(obs.back());
            break;
        }
        double t_next = t + rng.exponential(total_rate);
        record_through(std::nextafter(t_next, 0.0));
        if (obs_idx >= obs.size()) break;
        t = t_next;

        std::size_t site = tree.sample(rng.uniform01() * total_rate);
        double v = rng.uniform01() * percap[site];
        if (v < model.b_at(site)) {
            ++n[site];
            ++total_pop;
            if (total_pop > opts.max_population) throw_cap(t, total_pop, opts.max_population);
            tree.set(site, percap[site] * static_cast<double>(n[site]));
        } else if (v < model.b_at(site) + model.d_at(site)) {
            --n[site];
            --total_pop;
            tree.set(site, percap[site] * static_cast<double>(n[site]));
            if (total_pop == 0 && !traj.extinct_at) traj.extinct_at = t;
        } else {
            std::int64_t l = model.kernel.sample_offset(rng.uniform01());
            std::int64_t target = static_cast<std::int64_t>(site) + l;
            if (target >= 0 && target < static_cast<std::int64_t>(w)) {
                std::size_t j = static_cast<std::size_t>(target);
                ++n[j];
                ++total_pop;
                if (total_pop > opts.max_population) throw_cap(t, total_pop, opts.max_population);
                tree.set(j, percap[j] * static_cast<double>(n[j]));
            } else if (opts.boundary == BoundaryPolicy::absorb) {
                ++traj.boundary_leak;
            } else {
                throw_strict_leak(t, model.grid.i_min + target);
            }
        }
        ++traj.event_count;
        if (++events_since_rebuild >= opts.rebuild_interval) {
            tree.rebuild();
            events_since_rebuild = 0;
        }
    }
    return traj;
}

Trajectory simulate_tau_leap(const Model& model, const PopulationState& state0,
                             const SimOptions& opts, const TauLeapOptions& leap,
                             std::uint64_t seed) {
    const std::size_t w = model.width();
    if (state0.counts.size() != w) throw ConfigError("simulate: state width mismatch");
    if (!(leap.dt > 0.0)) throw ConfigError("tau-leap: dt must be positive");
    validate_observations(opts.observation_times, state0.time);

    Rng rng(seed);
    std::vector<std::int64_t> n = state0.counts;
    std::vector<std::int64_t> delta(w, 0);
    const double mu = model.mu();

    Trajectory traj;
    traj.seed = seed;
    double t = state0.time;
    std::size_t obs_idx = 0;
    const auto& obs = opts.observation_times;

    auto record_if_due = [&](double now) {
        while (obs_idx < obs.size() && obs[obs_idx] <= now + 1e-12 * std::max(1.0, now)) {
            traj.times.push_back(obs[obs_idx]);
            traj.counts.push_back(n);
            ++obs_idx;
        }
    };
    record_if_due(t);

    while (obs_idx < obs.size()) {
        double dt = std::min(leap.dt, obs[obs_idx] - t);
        std::fill(delta.begin(), delta.end(), 0);
        for (std::size_t i = 0; i < w; ++i) {
            if (n[i] == 0) continue;
            double pop = static_cast<double>(n[i]);
            double mb = model.b_at(i) * pop * dt;
            double md = model.d_at(i) * pop * dt;
            double mm = mu * pop * dt;
            if (mb > leap.channel_mean_bound || md > leap.channel_mean_bound ||
                mm > leap.channel_mean_bound) {
                throw NumericsError("tau-leap: channel mean exceeds the leap bound at t = " +
                                    std::to_string(t) + "; reduce dt_leap");
            }
            delta[i] += static_cast<std::int64_t>(rng.poisson(mb));
            delta[i] -= static_cast<std::int64_t>(rng.poisson(md));
            std::uint64_t mut = rng.poisson(mm);
            for (std::uint64_t m = 0; m < mut; ++m) {
                std::int64_t l = model.kernel.sample_offset(rng.uniform01());
                std::int64_t target = static_cast<std::int64_t>(i) + l;
                if (target >= 0 && target < static_cast<std::int64_t>(w)) {
                    ++delta[static_cast<std::size_t>(target)];
                } else if (opts.boundary == BoundaryPolicy::absorb) {
                    ++traj.boundary_leak;
                } else {
                    throw_strict_leak(t, model.grid.i_min + target);
                }
            }
            ++traj.event_count;
        }
        std::int64_t total = 0;
        for (std::size_t i = 0; i < w; ++i) {
            n[i] += delta[i];
            if (n[i] < 0) {
                n[i] = 0;
                ++traj.clip_count;
            }
            total += n[i];
        }
        if (total > opts.max_population) throw_cap(t + dt, total, opts.max_population);
        t += dt;
        if (total == 0 && !traj.extinct_at) traj.extinct_at = t;
        record_if_due(t);
    }
    return traj;
}

Trajectory simulate_windowed_supercritical(const Model& model, const PopulationState& state0,
                                           const SimOptions& opts, double a_exponent,
                                           std::uint64_t seed) {
    if (!rates_supercritical(model.rates)) {
        throw AssumptionError("windowed simulation requires a supercritical model "
                              "(b >= d on the whole window)");
    }
    double floor = std::exp(0.5 * a_exponent * model.grid.log_k);  // K^(a/2)
    for (std::size_t i = 0; i < state0.counts.size(); ++i) {
        if (static_cast<double>(state0.counts[i]) < floor) {
            throw AssumptionError("windowed simulation requires initial counts >= K^(a/2) = " +
                                  std::to_string(floor) + " at every site");
        }
    }
    SimOptions local = opts;
    local.boundary = BoundaryPolicy::absorb;  // localization discards and counts
    return simulate_exact(model, state0, local, seed);
}

std::pair<Trajectory, Trajectory> simulate_nested_coupled(const Model& model,
                                                          std::int64_t small_lo,
                                                          std::int64_t small_hi,
                                                          const PopulationState& state0,
                                                          const SimOptions& opts,
                                                          std::uint64_t seed) {
    const std::size_t w = model.width();
    if (state0.counts.size() != w) throw ConfigError("simulate: state width mismatch");
    if (small_lo < model.grid.i_min || small_hi > model.grid.i_max || small_lo > small_hi) {
        throw ConfigError("simulate: nested window must sit inside the grid window");
    }
    validate_observations(opts.observation_times, state0.time);

    Rng rng(seed);
    std::vector<std::int64_t> nb = state0.counts;  // large-window process
    std::vector<std::int64_t> ns(w, 0);            // small-window process
    const std::size_t lo = model.grid.offset(small_lo);
    const std::size_t hi = model.grid.offset(small_hi);
    for (std::size_t i = lo; i <= hi; ++i) ns[i] = nb[i];

    const double mu = model.mu();
    std::vector<double> percap(w);
    FenwickTree tree = make_fenwick(w);
    std::int64_t total_pop = 0;
    for (std::size_t i = 0; i < w; ++i) {
        percap[i] = model.b_at(i) + model.d_at(i) + mu;
        tree.set(i, percap[i] * static_cast<double>(nb[i]));
        total_pop += nb[i];
    }

    Trajectory big, small;
    big.seed = small.seed = seed;
    double t = state0.time;
    std::size_t obs_idx = 0;
    const auto& obs = opts.observation_times;
    std::uint64_t events_since_rebuild = 0;

    auto record_through = [&](double horizon) {
        while (obs_idx < obs.size() && obs[obs_idx] <= horizon) {
            big.times.push_back(obs[obs_idx]);
            big.counts.push_back(nb);
            small.times.push_back(obs[obs_idx]);
            small.counts.push_back(ns);
            ++obs_idx;
        }
    };

    auto applies_to_small = [&](std::size_t site) {
        if (site < lo || site > hi) return false;
        if (ns[site] == nb[site]) return true;
        return rng.uniform01() * static_cast<double>(nb[site]) < static_cast<double>(ns[site]);
    };

    while (obs_idx < obs.size()) {
        double total_rate = tree.total();
        if (total_rate <= 0.0) {
            record_through(obs.back());
            break;
        }
        double t_next = t + rng.exponential(total_rate);
        record_through(std::nextafter(t_next, 0.0));
        if (obs_idx >= obs.size()) break;
        t = t_next;

        std::size_t site = tree.sample(rng.uniform01() * total_rate);
        double v = rng.uniform01() * percap[site];
        if (v < model.b_at(site)) {
            bool in_small = applies_to_small(site);
            ++nb[site];
            ++total_pop;
            if (total_pop > opts.max_population) throw_cap(t, total_pop, opts.max_population);
            if (in_small) ++ns[site];
            tree.set(site, percap[site] * static_cast<double>(nb[site]));
        } else if (v < model.b_at(site) + model.d_at(site)) {
            bool in_small = applies_to_small(site);
            --nb[site];
            --total_pop;
            if (in_small) --ns[site];
            tree.set(site, percap[site] * static_cast<double>(nb[site]));
        } else {
            bool in_small = applies_to_small(site);
            std::int64_t l = model.kernel.sample_offset(rng.uniform01());
            std::int64_t target = static_cast<std::int64_t>(site) + l;
            if (target >= 0 && target < static_cast<std::int64_t>(w)) {
                std::size_t j = static_cast<std::size_t>(target);
                ++nb[j];
                ++total_pop;
                if (total_pop > opts.max_population) throw_cap(t, total_pop, opts.max_population);
                tree.set(j, percap[j] * static_cast<double>(nb[j]));
                if (in_small) {
                    if (j >= lo && j <= hi) ++ns[j];
                    else ++small.boundary_leak;
                }
            } else {
                ++big.boundary_leak;
                if (in_small) ++small.boundary_leak;
            }
        }
        ++big.event_count;
        if (++events_since_rebuild >= opts.rebuild_interval) {
            tree.rebuild();
            events_since_rebuild = 0;
        }
    }
    small.event_count = big.event_count;
    return {std::move(small), std::move(big)};
}

}  // namespace traitlab
