#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace traitlab {

// Discretized trait lattice {i * delta_K, i_min <= i <= i_max}. The scaling
// parameter is carried as log_k = ln K so that K = e^28 and beyond never
// overflows an integer field. Natural logarithms are used throughout.
struct TraitGrid {
    double log_k = 0.0;    // ln K, >= ln 2
    double delta_k = 0.0;  // trait mesh
    double h_k = 0.0;      // delta_k * ln K
    std::int64_t i_min = 0;
    std::int64_t i_max = 0;

    std::size_t size() const { return static_cast<std::size_t>(i_max - i_min + 1); }
    double x(std::int64_t i) const { return static_cast<double>(i) * delta_k; }
    double x_at(std::size_t k) const { return x(i_min + static_cast<std::int64_t>(k)); }
    std::int64_t index_of(std::size_t k) const { return i_min + static_cast<std::int64_t>(k); }
    bool contains(std::int64_t i) const { return i >= i_min && i <= i_max; }
    std::size_t offset(std::int64_t i) const { return static_cast<std::size_t>(i - i_min); }

    std::vector<double> sites() const {
        std::vector<double> xs(size());
        for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = x_at(k);
        return xs;
    }
};

// Builds the lattice covering [x_min, x_max]. delta <= 0 selects the default
// mesh rule delta_K = (ln K)^-2; an explicit positive delta is validated
// against the mesh condition delta_K < 1 / ln K.
TraitGrid build_grid(double log_k, double delta, double x_min, double x_max);

}  // namespace traitlab
