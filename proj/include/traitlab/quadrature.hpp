#pragma once

#include <functional>

namespace traitlab {

// Adaptive Simpson integration of f on [a, b] to the given absolute
// tolerance. Depth-limited; the built-in kernels are smooth so the limit is
// never reached in practice.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 40);

}  // namespace traitlab
