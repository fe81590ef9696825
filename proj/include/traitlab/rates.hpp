#pragma once

#include <functional>
#include <string>
#include <vector>

#include "traitlab/grid.hpp"

namespace traitlab {

// Built-in per-trait rate functions. Every evaluation is clamped to [0, cap]
// so the uniform-bound condition on b and d holds by construction.
struct RateFunction {
    enum class Kind { constant, affine, gaussian_bump, table };

    Kind kind = Kind::constant;
    double value = 0.0;                    // constant
    double intercept = 0.0, slope = 0.0;   // affine
    double base = 0.0, height = 0.0, center = 0.0, width = 1.0;  // gaussian_bump
    std::vector<double> xs, vs;            // table (linear interpolation)

    static RateFunction constant(double v);
    static RateFunction affine(double intercept, double slope);
    static RateFunction gaussian_bump(double base, double height, double center, double width);
    static RateFunction table(std::vector<double> xs, std::vector<double> vs);

    double eval(double x, double cap) const;
};

struct RateTables {
    std::vector<double> b, d;  // sampled on the grid window
    double p = 0.0;
    double bbar = 0.0, dbar = 0.0;
};

RateTables build_rate_tables(const TraitGrid& grid, const RateFunction& birth,
                             const RateFunction& death, double p, double bbar, double dbar);

enum class RegimeTag { subcritical, supercritical, mixed };

struct Regime {
    RegimeTag tag = RegimeTag::mixed;
    double alpha = 0.0;  // sup_i (b_i - d_i) + p
};

// Subcritical iff alpha <= 0; supercritical iff b >= d on the whole window;
// mixed otherwise. The two first cases are mutually exclusive since p > 0;
// in the degenerate testing case b = d, p = 0 the subcritical tag wins and
// rates_supercritical() still reports the pointwise condition.
Regime classify_regime(const RateTables& rates);

// The pointwise supercritical condition b >= d on the whole window.
bool rates_supercritical(const RateTables& rates);

std::string regime_name(RegimeTag tag);

}  // namespace traitlab
