#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "traitlab/model.hpp"
#include "traitlab/population.hpp"

namespace traitlab {

// Boundary policy for mutation offspring falling outside the window:
// `absorb` discards and counts them (the localized process), `strict` treats
// any would-be leak as a configuration error.
enum class BoundaryPolicy { absorb, strict };

struct SimOptions {
    std::vector<double> observation_times;  // strictly increasing, >= initial time
    BoundaryPolicy boundary = BoundaryPolicy::absorb;
    std::int64_t max_population = 100'000'000;
    std::uint64_t rebuild_interval = 1'000'000;  // Fenwick refresh cadence
};

// Statistically exact continuous-time Markov chain via composite per-site
// rates r_i = (b_i + d_i + mu) N_i: next event time is exponential in the
// total rate, the site is drawn from an indexed binary tree in O(log W), the
// event type proportionally to (b_i, d_i, mu), and the mutation offset from
// the truncated kernel. A mutation adds one individual at site i + l and
// leaves the source untouched.
Trajectory simulate_exact(const Model& model, const PopulationState& state0,
                          const SimOptions& opts, std::uint64_t seed);

struct TauLeapOptions {
    double dt = 0.0;
    double channel_mean_bound = 1e7;  // largest admissible per-channel mean per leap
};

// Poisson-leap approximation with per-channel counts drawn from the state at
// the start of each leap. Negative counts are clipped to zero and counted.
// Approximate by construction; use simulate_exact for distributional claims.
Trajectory simulate_tau_leap(const Model& model, const PopulationState& state0,
                             const SimOptions& opts, const TauLeapOptions& leap,
                             std::uint64_t seed);

// The localized supercritical process: dynamics restricted to the window,
// mutations targeting the outside discarded and counted. Requires a
// supercritical model and initial counts >= K^(a/2) at every site.
Trajectory simulate_windowed_supercritical(const Model& model, const PopulationState& state0,
                                           const SimOptions& opts, double a_exponent,
                                           std::uint64_t seed);

// Simulates the localized processes for a nested pair of windows driven by
// shared per-site event streams: every channel fires at the larger process's
// rate and applies to the smaller one by exact thinning. Both marginals are
// the correct localized chains and the smaller is dominated pathwise. The
// small window is the index range [small_lo, small_hi] in grid coordinates;
// both trajectories are reported on the full grid window.
std::pair<Trajectory, Trajectory> simulate_nested_coupled(const Model& model,
                                                          std::int64_t small_lo,
                                                          std::int64_t small_hi,
                                                          const PopulationState& state0,
                                                          const SimOptions& opts,
                                                          std::uint64_t seed);

}  // namespace traitlab
