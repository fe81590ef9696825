#include "traitlab/grid.hpp"

#include <cmath>

#include "traitlab/errors.hpp"

namespace traitlab {

TraitGrid build_grid(double log_k, double delta, double x_min, double x_max) {
    if (!(log_k >= std::log(2.0))) {
        throw ConfigError("grid: require K >= 2, i.e. log_k >= ln 2");
    }
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw ConfigError("grid: window must be finite with x_min < x_max");
    }
    if (delta <= 0.0) delta = 1.0 / (log_k * log_k);
    if (!(delta < 1.0 / log_k)) {
        throw ConfigError("grid: mesh condition violated, need delta_K < 1/ln K");
    }
    TraitGrid g;
    g.log_k = log_k;
    g.delta_k = delta;
    g.h_k = delta * log_k;
    // Snap near-integer ratios so windows like [-1, 1] with delta = 0.01 land
    // on the intended indices despite rounding.
    g.i_min = static_cast<std::int64_t>(std::floor(x_min / delta + 1e-9));
    g.i_max = static_cast<std::int64_t>(std::ceil(x_max / delta - 1e-9));
    if (g.i_min > 0 || g.i_max < 0) {
        throw ConfigError("grid: window must contain the origin trait x = 0");
    }
    return g;
}

}  // namespace traitlab
