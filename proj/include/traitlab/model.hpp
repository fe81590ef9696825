#pragma once

#include "traitlab/grid.hpp"
#include "traitlab/kernel.hpp"
#include "traitlab/rates.hpp"

namespace traitlab {

// Static model data: lattice, rates, discretized mutation kernel. Immutable
// after construction and safe to share across workers.
struct Model {
    TraitGrid grid;
    RateFunction birth_fn, death_fn;
    RateTables rates;
    KernelSpec kernel_spec = KernelSpec::gaussian(1.0);
    DiscreteKernel kernel;

    std::size_t width() const { return grid.size(); }
    double mu() const { return kernel.total_rate; }
    double b_at(std::size_t k) const { return rates.b[k]; }
    double d_at(std::size_t k) const { return rates.d[k]; }
};

Model make_model(const TraitGrid& grid, const RateFunction& birth, const RateFunction& death,
                 double p, double bbar, double dbar, const KernelSpec& kernel,
                 double tail_tol);

// H(x, q) = b(x) - d(x) + p * M_G(q); the effective Hamiltonian of the limit
// equation. Convex in q for fixed x.
double hamiltonian(const Model& m, double x, double q);

}  // namespace traitlab
