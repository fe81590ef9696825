#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "traitlab/grid.hpp"

namespace traitlab {

// Integer subpopulation counts over the grid window at one instant.
struct PopulationState {
    std::vector<std::int64_t> counts;
    double time = 0.0;
    std::uint64_t event_count = 0;

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

// Snapshots of a single stochastic path at the configured observation times.
struct Trajectory {
    std::vector<double> times;                       // strictly increasing
    std::vector<std::vector<std::int64_t>> counts;   // [time][site]
    std::uint64_t seed = 0;
    std::uint64_t event_count = 0;
    std::uint64_t boundary_leak = 0;   // mutation offspring discarded at window edges
    std::uint64_t clip_count = 0;      // tau-leap only: negative counts clipped to zero
    // Exact time the total population first hit zero, if it happened.
    std::optional<double> extinct_at;
};

enum class InitialMode { poisson, deterministic };

// Draws N_i(0) from the initial mean field: independent Poisson(n_i(0)) per
// site, or nearest-integer rounding.
PopulationState sample_initial(const std::vector<double>& mean0, InitialMode mode,
                               std::uint64_t seed);

struct ExtinctionTime {
    bool censored = true;
    double time = 0.0;  // extinction time, or the censoring horizon
};

// First observation time at which the total population is zero (whole window
// or the sites with x in [a, b]). Prefers the exact in-run extinction time
// when the trajectory carries one and the whole window is asked for.
ExtinctionTime extinction_time(const Trajectory& traj);
ExtinctionTime extinction_time_on(const Trajectory& traj, const TraitGrid& grid, double a,
                                  double b);

}  // namespace traitlab
