#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "traitlab/kernel.hpp"
#include "traitlab/model.hpp"

namespace traitlab {

// Continuum limit problem: d_t u = net(x) + p * M_G(grad u), u(0) = u0.
struct HjProblem {
    std::function<double(double)> net_growth;  // b(x) - d(x)
    std::function<double(double)> u0;
    double p = 0.0;
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    double rate_sum_bound = 0.0;  // sup (b + d), for the time-Lipschitz cap
};

HjProblem make_hj_problem(const Model& model, std::function<double(double)> u0);

enum class HjScheme { nonlocal_exponential, local_upwind, cross_validated };

struct HjOptions {
    double x_lo = -1.0, x_hi = 1.0;  // reported core window
    double dx = 0.01;                // report mesh and base local-scheme mesh
    std::vector<double> out_times;   // positive, increasing; t = 0 is always kept
    HjScheme scheme = HjScheme::cross_validated;
    double ref_tol = 0.02;           // refinement / cross-validation tolerance
    int max_refine = 2;              // extra levels beyond the base one
    double pad = -1.0;               // < 0: sized from the propagation estimate
    double nl_sharpness = 28.0;      // base sharpness of the nonlocal scheme
    double nl_tail_tol = 1e-9;
    double nl_rtol = 1e-6;
    double fixed_dt = 0.0;           // local scheme: 0 = from the CFL bound
};

struct HjSolution {
    std::vector<double> times;              // 0 followed by the requested times
    std::vector<double> xs;                 // report grid
    std::vector<std::vector<double>> u;     // [time][x]
    std::string scheme_tag;
    double dx = 0.0;
    double pad = 0.0;
    double error_estimate = 0.0;            // scheme error on the report window
    double cross_gap = 0.0;                 // sup gap between the two schemes
    std::vector<double> refine_deltas_local;
    std::vector<double> refine_deltas_nonlocal;
};

// Reference viscosity solutions by cross-validated monotone schemes.
//
//  - local-upwind: Lax-Friedrichs with closed-form Hamiltonian, artificial
//    viscosity p M_G'(L_T + 1) re-evaluated as the measured Lipschitz constant
//    grows, dt from the monotonicity (CFL) bound dx / (2 sigma);
//  - nonlocal-exponential: the discrete exponent system run at a solver-chosen
//    sharpness ladder with mesh 1/sharpness^2 and extrapolated-slope ghosts.
//
// Both are solved on a padded window so boundary influence cannot reach the
// reported compact within the horizon; refinement continues until successive
// levels differ by less than ref_tol. In cross-validated mode the schemes
// must agree within 2 ref_tol, otherwise a NumericsError is raised rather
// than returning a silent answer.
HjSolution solve_hj(const HjProblem& problem, const HjOptions& opts);

struct CutoffSolution {
    std::vector<double> times;
    std::vector<double> xs;
    std::vector<std::vector<double>> value;      // finite values where surviving
    std::vector<std::vector<std::uint8_t>> tag;  // 0 survive, 1 extinct, 2 undecided
    double band_tol = 0.0;
};

// Applies the survival cut-off: value where u > band_tol, extinct where
// u < -band_tol, undecided inside the band (never classified). band_tol < 0
// selects 2 * error_estimate.
CutoffSolution apply_cutoff(const HjSolution& sol, double band_tol = -1.0);

struct SurvivalSet {
    double t = 0.0;
    std::vector<std::pair<double, double>> intervals;  // maximal {u > 0} intervals
};

// Maximal positive intervals of u(t, .) with endpoints located by linear
// interpolation between sign-changing nodes.
SurvivalSet survival_set(const HjSolution& sol, double t);

struct LipschitzReport {
    std::vector<double> per_time;  // discrete spatial Lipschitz constant per output time
    double space_sup = 0.0;        // L_T
    double time_measured = 0.0;    // max |u(t_{k+1}) - u(t_k)| / dt over outputs
    double time_cap = 0.0;         // sup(b + d) + 2 p int G e^{L_T |y|}
};

LipschitzReport lipschitz_report(const HjProblem& problem, const HjSolution& sol);

}  // namespace traitlab
