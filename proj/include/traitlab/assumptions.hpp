#pragma once

#include <optional>
#include <string>
#include <vector>

#include "traitlab/model.hpp"

namespace traitlab {

struct AssumptionEntry {
    std::string id;
    bool pass = false;
    bool required = false;
    double measured = 0.0;
    std::string detail;
};

// Report-only verification of the model assumptions on a concrete
// configuration. Every constant is measured from the inputs (tightest value
// satisfying its inequality on the window) and recomputable.
struct AssumptionReport {
    double lipschitz = 0.0;        // L: max_i |u0_{i+1} - u0_i| / delta_K
    double decay_a1 = 0.0;         // u0 <= -A1 |x| + A2 on the window
    double decay_a2 = 0.0;
    double growth_a = 0.0;         // u0 <=  A |x| + B on the window
    double growth_b = 0.0;
    double c_a = 0.0;              // 2A + 1, weighted-norm exponent
    double initial_min = 0.0;      // a: min_i u0_i, mean floor is K^a
    Regime regime;
    std::vector<AssumptionEntry> entries;
    bool all_required_pass = false;
};

// u0 must be sampled at every grid site. `declared` selects which regime's
// assumption set is required; unset means "use the classified regime".
AssumptionReport verify_assumptions(const Model& model, const std::vector<double>& u0,
                                    std::optional<RegimeTag> declared = std::nullopt);

}  // namespace traitlab
