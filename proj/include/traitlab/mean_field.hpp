#pragma once

#include <vector>

#include "traitlab/model.hpp"
#include "traitlab/ode.hpp"
#include "traitlab/simulate.hpp"

namespace traitlab {

// Values on the grid window at a sequence of times.
struct FieldSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // [time][site]

    double at(std::size_t t, std::size_t i) const { return values[t][i]; }
};

struct MeanFieldResult {
    FieldSeries series;
    double leak_mass = 0.0;  // time-integrated convolution mass discarded at the edges
    std::uint64_t steps_accepted = 0;
};

// Integrates dn_i/dt = (b_i - d_i) n_i + sum_l w_l n_{i-l} with the truncated
// convolution (sources missing outside the window contribute nothing, mass
// sent outside is accumulated as leak). Positivity is preserved by step
// rejection; the system is linear with nonnegative off-diagonal coupling, so
// exact solutions are nonnegative and rejection converges.
MeanFieldResult integrate_mean(const Model& model, const std::vector<double>& n0,
                               const std::vector<double>& out_times, const OdeOptions& ode,
                               BoundaryPolicy boundary = BoundaryPolicy::absorb,
                               double strict_leak_tol = 1e-9);

// Applies one mean-system right-hand side evaluation (exposed for the
// dual-route consistency checks).
void mean_rhs(const Model& model, const std::vector<double>& n, std::vector<double>& dn);

}  // namespace traitlab
