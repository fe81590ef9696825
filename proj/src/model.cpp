#include "traitlab/model.hpp"

#include <cmath>

#include "traitlab/errors.hpp"

namespace traitlab {

Model make_model(const TraitGrid& grid, const RateFunction& birth, const RateFunction& death,
                 double p, double bbar, double dbar, const KernelSpec& kernel,
                 double tail_tol) {
    Model m;
    m.grid = grid;
    m.birth_fn = birth;
    m.death_fn = death;
    m.rates = build_rate_tables(grid, birth, death, p, bbar, dbar);
    m.kernel_spec = kernel;
    m.kernel = discretize_kernel(kernel, grid, p, tail_tol);
    return m;
}

double hamiltonian(const Model& m, double x, double q) {
    if (!std::isfinite(q)) throw NumericsError("hamiltonian: gradient value must be finite");
    double b = m.birth_fn.eval(x, m.rates.bbar);
    double d = m.death_fn.eval(x, m.rates.dbar);
    return b - d + m.rates.p * m.kernel_spec.exp_moment(q);
}

}  // namespace traitlab
