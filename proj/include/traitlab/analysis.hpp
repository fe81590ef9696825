#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "traitlab/hj.hpp"
#include "traitlab/mean_field.hpp"
#include "traitlab/model.hpp"
#include "traitlab/population.hpp"
#include "traitlab/simulate.hpp"

namespace traitlab {

// Rescaled-time bookkeeping lives in this module exclusively: simulation runs
// in plain time, analysis divides by ln K once.

// Sitewise exponents beta_i = ln(N_i) / ln K with explicit extinct markers
// (N = 0 never becomes a sentinel float that could enter arithmetic).
struct BetaField {
    double log_k = 0.0;
    std::vector<double> times;                       // rescaled
    std::vector<std::vector<double>> beta;           // [t][site], valid where !extinct
    std::vector<std::vector<std::uint8_t>> extinct;  // [t][site]
};

// Requires the trajectory observation grid to equal {t * ln K} for the given
// rescaled times; mismatches are an error, never resampled.
BetaField hopf_cole(const Trajectory& traj, const TraitGrid& grid,
                    const std::vector<double>& rescaled_times);

// Piecewise-linear interpolation of one time slice. Exact on grid nodes; a
// segment with an extinct endpoint is extinct on its interior (a convex
// combination with weight on -inf), and for sup-metric purposes on the closed
// segment.
struct InterpolatedSlice {
    TraitGrid grid;
    std::vector<double> beta;
    std::vector<std::uint8_t> extinct;

    struct Value {
        double v = 0.0;
        bool extinct = false;
    };
    Value eval(double x) const;
};

InterpolatedSlice interpolate(const BetaField& field, std::size_t t_index,
                              const TraitGrid& grid);

// Reference curve on its own mesh (one HJ solution time slice).
struct RefCurve {
    std::vector<double> xs;
    std::vector<double> vs;
    double eval(double x) const;
};

RefCurve ref_curve(const HjSolution& sol, double t);

// sup_{x in [a,b]} |slice(x) - ref(x)|, +infinity when any extinct segment
// (closed) intersects the compact. Exact for piecewise-linear pairs: the sup
// is scanned over both break sets plus the endpoints.
double sup_distance_on_compact(const InterpolatedSlice& slice, const RefCurve& ref, double a,
                               double b);

// Whether sup_{x in [a,b]} of the interpolated exponent is -infinity, i.e.
// every node in the compact is extinct and no bracketing finite segment
// covers it.
bool all_extinct_on_compact(const InterpolatedSlice& slice, double a, double b);

struct Wilson {
    double lo = 0.0, hi = 1.0;
};
Wilson wilson_interval(std::uint64_t count, std::uint64_t n, double z = 1.959963984540054);

// ---------------------------------------------------------------------------
// Ensemble deviation statistics against the deterministic mean field.

struct DeviationStats {
    std::vector<double> times;                  // simulation times
    std::vector<std::vector<double>> mean_sq;   // E[(N/n - 1)^2] per (t, i)
    std::vector<std::vector<double>> se;        // standard errors
    std::uint64_t replicates = 0;
    std::uint64_t inconsistent = 0;  // n = 0 with N > 0 observations
};

class DeviationReducer {
public:
    DeviationReducer() = default;
    DeviationReducer(const FieldSeries* mean, std::size_t scan_lo, std::size_t scan_hi,
                     double eta);
    void add(const Trajectory& traj);
    void merge(const DeviationReducer& o);
    DeviationStats stats() const;
    std::uint64_t exceed_count() const { return exceed_; }
    std::uint64_t replicates() const { return reps_; }

private:
    const FieldSeries* mean_ = nullptr;
    std::size_t lo_ = 0, hi_ = 0;
    double eta_ = 0.0;
    std::uint64_t reps_ = 0, exceed_ = 0, inconsistent_ = 0;
    std::vector<double> s1_, s2_;  // [t*W+i] sums of (N/n-1)^2 and its square
};

DeviationStats deviation_stats(const Model& model, const FieldSeries& mean,
                               const std::vector<double>& mean0, InitialMode mode,
                               std::uint64_t replicates, std::uint64_t base_seed,
                               unsigned workers, const SimOptions& sim);

// ---------------------------------------------------------------------------
// Experiments.

struct CompactInterval {
    double a = 0.0, b = 0.0;
};

struct ConvergenceCell {
    double log_k = 0.0;
    double t = 0.0;
    CompactInterval compact;
    std::string kind;  // "survival" or "extinction"
    std::uint64_t count = 0;       // failures (survival) or total-extinction hits
    std::uint64_t replicates = 0;
    double p_hat = 0.0;
    Wilson ci;
};

struct ConvergenceReport {
    std::vector<ConvergenceCell> cells;
    bool survival_failure_nonincreasing = true;   // along the K ladder
    bool extinction_hit_nondecreasing = true;
    std::uint64_t boundary_leak = 0;
};

using ModelFactory = std::function<Model(double log_k)>;

// Empirical check of the cut-off limit at desk scale: on survival compacts the
// interpolated stochastic exponent must track the reference solution within
// eta; on extinction compacts all sites must be empty at the observation
// time. Compacts are validated against the reference with margin >= band_tol
// before any simulation is run.
struct SurvivalExtinctionParams {
    std::vector<double> log_k_list;
    double t = 1.0;          // rescaled time
    double eta = 0.15;
    std::vector<CompactInterval> survival_compacts;
    std::vector<CompactInterval> extinction_compacts;
    std::uint64_t replicates = 100;
    std::uint64_t base_seed = 1;
    unsigned workers = 1;
    InitialMode initial_mode = InitialMode::poisson;
    std::int64_t max_population = 100'000'000;
};

ConvergenceReport survival_extinction_experiment(const ModelFactory& factory,
                                                 const std::function<double(double)>& u0,
                                                 const HjSolution& reference,
                                                 const SurvivalExtinctionParams& params);

// Supercritical tracking: P(sup over the rescaled window of |N/n - 1| > eta)
// per K, plus the maximal squared deviation at the final rescaled time. The
// sup runs over the observation grid; per-time snapshots are this artifact's
// operationalization of the path supremum.
struct TrackingParams {
    std::vector<double> log_k_list;
    double a_exponent = 0.5;
    double t_horizon = 0.5;    // rescaled T
    double d_radius = 0.5;     // compact |x| <= D
    double eta = 0.1;
    std::size_t n_obs = 11;    // observation grid on (0, T]
    double init_multiplier = 1.0;  // n0 = multiplier * K^a
    std::uint64_t replicates = 100;
    std::uint64_t base_seed = 1;
    unsigned workers = 1;
    std::int64_t max_population = 400'000'000;
};

struct TrackingCell {
    double log_k = 0.0;
    std::uint64_t exceed = 0;
    std::uint64_t replicates = 0;
    double p_hat = 0.0;
    Wilson ci;
    double max_e_s2 = 0.0;  // max_i E[(N/n-1)^2] at the final time, |x_i| <= D
    double max_e_s2_se = 0.0;
};

struct TrackingReport {
    std::vector<TrackingCell> cells;
    bool p_nonincreasing = true;
    std::vector<double> e_s2_ratios;  // consecutive-cell decay factors
};

TrackingReport supercritical_tracking_experiment(const ModelFactory& factory,
                                                 const TrackingParams& params);

}  // namespace traitlab
