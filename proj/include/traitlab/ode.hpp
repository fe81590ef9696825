#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace traitlab {

using OdeRhs = std::function<void(double t, const std::vector<double>& y,
                                  std::vector<double>& dy)>;

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-12;
    double initial_step = 0.0;        // 0: choose automatically
    double min_step_rel = 1e-14;      // relative to the horizon; underflow -> stiffness
    bool enforce_nonnegative = false; // reject any step producing a negative component
    std::uint64_t max_steps = 200'000'000;
};

struct OdeResult {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::uint64_t steps_accepted = 0;
    std::uint64_t steps_rejected = 0;
};

// Adaptive Dormand-Prince 5(4) with PI step control. Integrates from t0 = 0
// through the sorted output times, landing on each exactly. Positivity is
// enforced by step rejection when requested (valid for systems whose exact
// flow preserves the nonnegative cone). Throws NumericsError with a stiffness
// diagnostic when the step size underflows.
OdeResult integrate_rk45(const OdeRhs& rhs, const std::vector<double>& y0,
                         const std::vector<double>& out_times, const OdeOptions& opts);

}  // namespace traitlab
