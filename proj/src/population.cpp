#include "traitlab/population.hpp"

#include <cmath>

#include "traitlab/errors.hpp"
#include "traitlab/rng.hpp"

namespace traitlab {

PopulationState sample_initial(const std::vector<double>& mean0, InitialMode mode,
                               std::uint64_t seed) {
    PopulationState st;
    st.counts.resize(mean0.size(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < mean0.size(); ++i) {
        double m = mean0[i];
        if (m < 0.0) throw ConfigError("sample_initial: negative mean at site");
        if (mode == InitialMode::poisson) {
            st.counts[i] = static_cast<std::int64_t>(rng.poisson(m));
        } else {
            st.counts[i] = static_cast<std::int64_t>(std::llround(m));
        }
    }
    return st;
}

ExtinctionTime extinction_time(const Trajectory& traj) {
    if (traj.extinct_at) return {false, *traj.extinct_at};
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::int64_t tot = 0;
        for (auto c : traj.counts[k]) tot += c;
        if (tot == 0) return {false, traj.times[k]};
    }
    return {true, traj.times.empty() ? 0.0 : traj.times.back()};
}

ExtinctionTime extinction_time_on(const Trajectory& traj, const TraitGrid& grid, double a,
                                  double b) {
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        bool empty = true;
        for (std::size_t j = 0; j < traj.counts[k].size(); ++j) {
            double x = grid.x_at(j);
            if (x >= a && x <= b && traj.counts[k][j] > 0) {
                empty = false;
                break;
            }
        }
        if (empty) return {false, traj.times[k]};
    }
    return {true, traj.times.empty() ? 0.0 : traj.times.back()};
}

}  // namespace traitlab
