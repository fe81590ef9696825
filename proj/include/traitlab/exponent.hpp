#pragma once

#include <vector>

#include "traitlab/mean_field.hpp"
#include "traitlab/model.hpp"
#include "traitlab/ode.hpp"

namespace traitlab {

// Integrates the exponent system in rescaled time,
//   du_i/dt = b_i - d_i + sum_l w_l exp(ln K (u_{i-l} - u_i)),
// directly in the log domain. Exponential terms are evaluated with max-shift
// stabilization so that K up to e^30 cannot overflow; offsets pointing outside
// the window contribute nothing (absorbed mean field has u = -inf there).
FieldSeries integrate_exponent(const Model& model, const std::vector<double>& u0,
                               const std::vector<double>& out_times_rescaled,
                               const OdeOptions& ode);

// One right-hand side evaluation of the exponent system (dual-route checks).
void exponent_rhs(const Model& model, const std::vector<double>& u, std::vector<double>& du);

}  // namespace traitlab
