#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "traitlab/grid.hpp"

namespace traitlab {

// Mutation kernels are restricted to built-in families whose super-exponential
// tail bounds are available analytically, so truncation radii and exponential
// moments are reproducible instead of searched for numerically.
//
//   gaussian : G(y) = exp(-y^2 / 2 sigma^2) / (sigma sqrt(2 pi))
//   expsq    : G(y) = c * exp(-|y/s|^nu), nu >= 2, c = nu / (2 s Gamma(1/nu))
class KernelSpec {
public:
    enum class Family { gaussian, expsq };

    static KernelSpec gaussian(double sigma);
    static KernelSpec expsq(double scale, double power);

    Family family() const { return family_; }
    double sigma() const { return sigma_; }
    double scale() const { return scale_; }
    double power() const { return power_; }

    double density(double y) const;

    // Analytic upper bound on the mass outside [-r, r]. Exact for the
    // Gaussian (erfc), a declared super-exponential envelope for expsq.
    double tail_mass(double r) const;

    // M_G(q) = integral G(y) e^{q y} dy. Closed form for the Gaussian,
    // adaptive quadrature otherwise. Throws NumericsError on exponent
    // saturation instead of returning infinity.
    double exp_moment(double q) const;

    // integral |y| G(y) e^{qbar |y|} dy, an upper bound for |d/dq M_G| over
    // |q| <= qbar.
    double abs_exp_moment(double qbar) const;

    // M_G'(q) = integral y G(y) e^{q y} dy. For the even built-in kernels
    // sup_{|q| <= qbar} |M_G'| = M_G'(qbar); drives the monotone-scheme
    // viscosity and the CFL bound.
    double exp_moment_deriv(double q) const;

    // integral G(y) e^{q |y|} dy (the time-Lipschitz cap of the limit
    // solutions involves this symmetrized moment).
    double sym_exp_moment(double q) const;

    // Total-variation constant of the density (= 2 G(0) for these unimodal
    // families); first-order Riemann-sum error is tv_constant() * h.
    double tv_constant() const;

    std::string name() const;

private:
    Family family_ = Family::gaussian;
    double sigma_ = 1.0;             // gaussian
    double scale_ = 1.0, power_ = 2.0;  // expsq
    double norm_ = 1.0;              // expsq normalization constant
};

// Truncated per-offset mutation rates w_l = p * h_K * G(l * h_K) for
// |l| <= l_max, with the truncation radius chosen from the analytic tail.
struct DiscreteKernel {
    std::int64_t l_max = 0;
    std::vector<double> weights;  // size 2*l_max+1, index l + l_max
    std::vector<double> cum;      // cumulative weights for offset sampling
    double total_rate = 0.0;      // mu = sum_l w_l, close to p
    double tail_mass = 0.0;       // analytic kernel mass beyond the truncation
    double p = 0.0;
    double h_k = 0.0;
    double riemann_tol = 0.0;     // p * h_K * tv_constant

    double w(std::int64_t l) const { return weights[static_cast<std::size_t>(l + l_max)]; }
    // Riemann defect eps_K = sum_l w_l - p; the concrete o(1) of the
    // subcritical variance bound.
    double riemann_defect() const { return total_rate - p; }
    std::int64_t sample_offset(double u01) const;
};

DiscreteKernel discretize_kernel(const KernelSpec& spec, const TraitGrid& grid, double p,
                                 double tail_tol);

}  // namespace traitlab
