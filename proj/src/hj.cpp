#include "traitlab/hj.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "traitlab/errors.hpp"
#include "traitlab/ode.hpp"

namespace traitlab {

namespace {

// Linear sampling of a mesh function at x (meshes are uniform).
double lin_sample(double x0, double dx, const std::vector<double>& v, double x) {
    double s = (x - x0) / dx;
    if (s <= 0.0) return v.front();
    double smax = static_cast<double>(v.size() - 1);
    if (s >= smax) return v.back();
    std::size_t j = static_cast<std::size_t>(s);
    double frac = s - static_cast<double>(j);
    return v[j] * (1.0 - frac) + v[j + 1] * frac;
}

double lipschitz_of(const std::vector<double>& v, double dx) {
    double lip = 0.0;
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
        lip = std::max(lip, std::abs(v[j + 1] - v[j]) / dx);
    }
    return lip;
}

struct ReportGrid {
    std::vector<double> xs;
    double x0 = 0.0, dx = 0.0;
};

// One scheme run sampled onto the report grid at {0, out_times...}.
using SchemeRows = std::vector<std::vector<double>>;

double sup_gap(const SchemeRows& a, const SchemeRows& b) {
    double g = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t j = 0; j < a[t].size(); ++j) {
            g = std::max(g, std::abs(a[t][j] - b[t][j]));
        }
    }
    return g;
}

// Cubic-interpolated table of M_G(q); avoids one quadrature per node and step
// for kernels without a closed-form moment.
class MomentTable {
public:
    MomentTable(const KernelSpec& k, double q_abs_max) : kernel_(k) {
        gaussian_ = k.family() == KernelSpec::Family::gaussian;
        if (gaussian_) {
            sigma2_ = k.sigma() * k.sigma();
            return;
        }
        qmax_ = q_abs_max + 0.5;
        dq_ = 1e-3;
        std::size_t n = static_cast<std::size_t>(2.0 * qmax_ / dq_) + 4;
        vals_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            vals_[i] = kernel_.exp_moment(-qmax_ + static_cast<double>(i) * dq_);
        }
    }

    double operator()(double q) const {
        if (gaussian_) return std::exp(0.5 * q * q * sigma2_);
        double s = (q + qmax_) / dq_;
        double smax = static_cast<double>(vals_.size() - 3);
        s = std::clamp(s, 1.0, smax);
        std::size_t j = static_cast<std::size_t>(s);
        double t = s - static_cast<double>(j);
        // Catmull-Rom through the four surrounding samples
        double p0 = vals_[j - 1], p1 = vals_[j], p2 = vals_[j + 1], p3 = vals_[j + 2];
        return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
                                              t * (3.0 * (p1 - p2) + p3 - p0)));
    }

private:
    const KernelSpec& kernel_;
    bool gaussian_ = true;
    double sigma2_ = 1.0;
    double qmax_ = 0.0, dq_ = 1.0;
    std::vector<double> vals_;
};

// Monotone Lax-Friedrichs marching: u^{k+1}_j = u_j + dt [ H(x_j, (D+ + D-)/2)
// + sigma (D+ - D-)/2 ] with sigma >= sup |H_q| over the slopes present, and
// dt <= dx / (2 sigma) so the update is monotone in every stencil value.
SchemeRows solve_local_upwind(const HjProblem& pb, const ReportGrid& report, double x_lo,
                              double x_hi, double dxs, const std::vector<double>& out_times,
                              double fixed_dt) {
    std::size_t n = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / dxs)) + 1;
    std::vector<double> u(n), unew(n), net(n);
    for (std::size_t j = 0; j < n; ++j) {
        double x = x_lo + static_cast<double>(j) * dxs;
        u[j] = pb.u0(x);
        net[j] = pb.net_growth(x);
    }

    MomentTable mg(pb.kernel, lipschitz_of(u, dxs) + 3.0);

    SchemeRows rows;
    auto emit = [&]() {
        std::vector<double> row(report.xs.size());
        for (std::size_t j = 0; j < report.xs.size(); ++j) {
            row[j] = lin_sample(x_lo, dxs, u, report.xs[j]);
        }
        rows.push_back(std::move(row));
    };
    emit();  // t = 0

    double t = 0.0;
    double sigma = 0.0, sigma_at = -1.0;
    for (double target : out_times) {
        while (t < target) {
            double lip = lipschitz_of(u, dxs);
            if (lip > sigma_at) {
                sigma_at = lip + 0.25;
                sigma = pb.p * pb.kernel.exp_moment_deriv(sigma_at + 1.0);
                sigma = std::max(sigma, 1e-12);
            }
            double dt_cfl = dxs / (2.0 * sigma);
            double dt = dt_cfl;
            if (fixed_dt > 0.0) {
                if (fixed_dt > dt_cfl) {
                    throw NumericsError("hj: fixed dt violates the CFL bound; largest "
                                        "admissible dt = " + std::to_string(dt_cfl));
                }
                dt = fixed_dt;
            }
            dt = std::min(dt, target - t);
            for (std::size_t j = 0; j < n; ++j) {
                double um = j > 0 ? u[j - 1] : 2.0 * u[0] - u[1];
                double up = j + 1 < n ? u[j + 1] : 2.0 * u[n - 1] - u[n - 2];
                double dminus = (u[j] - um) / dxs;
                double dplus = (up - u[j]) / dxs;
                double h = net[j] + pb.p * mg(0.5 * (dminus + dplus));
                unew[j] = u[j] + dt * (h + 0.5 * sigma * (dplus - dminus));
            }
            u.swap(unew);
            t += dt;
        }
        emit();
    }
    return rows;
}

// The discrete exponent system run as a solver: mesh 1/sharpness^2, kernel
// step 1/sharpness, extrapolated-slope ghost cells, integrated in time by the
// adaptive RK45. Exponential terms are max-shifted.
SchemeRows solve_nonlocal(const HjProblem& pb, const ReportGrid& report, double x_lo,
                          double x_hi, double sharpness, double tail_tol, double rtol,
                          const std::vector<double>& out_times) {
    const double delta = 1.0 / (sharpness * sharpness);
    const double hk = delta * sharpness;  // 1 / sharpness
    std::int64_t lmax = 1;
    while (pb.kernel.tail_mass(static_cast<double>(lmax) * hk) > tail_tol) {
        ++lmax;
        if (lmax > 2'000'000) throw ConfigError("hj: nonlocal kernel radius exploded");
    }
    std::vector<double> wts(static_cast<std::size_t>(2 * lmax + 1));
    for (std::int64_t m = 0; m <= lmax; ++m) {
        double w = pb.p * hk * pb.kernel.density(static_cast<double>(m) * hk);
        wts[static_cast<std::size_t>(lmax + m)] = w;
        wts[static_cast<std::size_t>(lmax - m)] = w;
    }

    const std::size_t n = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / delta)) + 1;
    const std::size_t ghost = static_cast<std::size_t>(lmax);
    std::vector<double> u0v(n), net(n);
    for (std::size_t j = 0; j < n; ++j) {
        double x = x_lo + static_cast<double>(j) * delta;
        u0v[j] = pb.u0(x);
        net[j] = pb.net_growth(x);
    }

    std::vector<double> ext(n + 2 * ghost);
    OdeRhs rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy.assign(n, 0.0);
        double slope_l = y[1] - y[0];
        double slope_r = y[n - 1] - y[n - 2];
        for (std::size_t g = 0; g < ghost; ++g) {
            ext[ghost - 1 - g] = y[0] - slope_l * static_cast<double>(g + 1);
            ext[ghost + n + g] = y[n - 1] + slope_r * static_cast<double>(g + 1);
        }
        std::copy(y.begin(), y.end(), ext.begin() + static_cast<std::ptrdiff_t>(ghost));
        const double lam = sharpness;
        for (std::size_t j = 0; j < n; ++j) {
            const double* center = ext.data() + ghost + j;
            double uj = y[j];
            double dmax = 0.0;
            for (std::int64_t l = -lmax; l <= lmax; ++l) {
                dmax = std::max(dmax, center[-l] - uj);
            }
            if (lam * dmax > 690.0) {
                throw NumericsError("hj: nonlocal exponential overflow after max-shift");
            }
            double acc = 0.0;
            for (std::int64_t l = -lmax; l <= lmax; ++l) {
                acc += wts[static_cast<std::size_t>(l + lmax)] *
                       std::exp(lam * (center[-l] - uj - dmax));
            }
            dy[j] = net[j] + std::exp(lam * dmax) * acc;
        }
    };

    OdeOptions ode;
    ode.rtol = rtol;
    ode.atol = 1e-9;
    OdeResult r = integrate_rk45(rhs, u0v, out_times, ode);

    SchemeRows rows;
    rows.reserve(out_times.size() + 1);
    {
        std::vector<double> row(report.xs.size());
        for (std::size_t j = 0; j < report.xs.size(); ++j) {
            row[j] = lin_sample(x_lo, delta, u0v, report.xs[j]);
        }
        rows.push_back(std::move(row));
    }
    for (const auto& st : r.states) {
        std::vector<double> row(report.xs.size());
        for (std::size_t j = 0; j < report.xs.size(); ++j) {
            row[j] = lin_sample(x_lo, delta, st, report.xs[j]);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

struct LadderResult {
    SchemeRows rows;
    std::vector<double> deltas;
};

template <class Solve>
LadderResult refine_ladder(Solve&& solve, int max_refine, double ref_tol) {
    LadderResult res;
    res.rows = solve(0);
    for (int level = 1; level <= max_refine; ++level) {
        SchemeRows finer = solve(level);
        double d = sup_gap(res.rows, finer);
        res.deltas.push_back(d);
        res.rows = std::move(finer);
        if (d < ref_tol) break;
    }
    return res;
}

}  // namespace

HjProblem make_hj_problem(const Model& model, std::function<double(double)> u0) {
    HjProblem pb;
    double bbar = model.rates.bbar, dbar = model.rates.dbar;
    RateFunction bf = model.birth_fn, df = model.death_fn;
    pb.net_growth = [bf, df, bbar, dbar](double x) {
        return bf.eval(x, bbar) - df.eval(x, dbar);
    };
    pb.u0 = std::move(u0);
    pb.p = model.rates.p;
    pb.kernel = model.kernel_spec;
    double rs = 0.0;
    for (std::size_t k = 0; k < model.rates.b.size(); ++k) {
        rs = std::max(rs, model.rates.b[k] + model.rates.d[k]);
    }
    pb.rate_sum_bound = rs;
    return pb;
}

HjSolution solve_hj(const HjProblem& problem, const HjOptions& opts) {
    if (opts.out_times.empty()) throw ConfigError("hj: at least one output time required");
    for (std::size_t k = 0; k < opts.out_times.size(); ++k) {
        if (!(opts.out_times[k] > 0.0)) throw ConfigError("hj: output times must be > 0");
        if (k > 0 && !(opts.out_times[k] > opts.out_times[k - 1])) {
            throw ConfigError("hj: output times must be increasing");
        }
    }
    if (!(opts.x_lo < opts.x_hi)) throw ConfigError("hj: window must satisfy x_lo < x_hi");

    ReportGrid report;
    report.x0 = opts.x_lo;
    report.dx = opts.dx;
    std::size_t n_report =
        static_cast<std::size_t>(std::ceil((opts.x_hi - opts.x_lo) / opts.dx - 1e-9)) + 1;
    report.xs.resize(n_report);
    for (std::size_t j = 0; j < n_report; ++j) {
        report.xs[j] = opts.x_lo + static_cast<double>(j) * opts.dx;
    }

    const double t_end = opts.out_times.back();

    // Pad so that boundary influence (characteristic speed at the initial
    // Lipschitz constant, plus slack) cannot reach the core window.
    double pad = opts.pad;
    if (pad < 0.0) {
        double lip0 = 0.0;
        for (std::size_t j = 0; j + 1 < report.xs.size(); ++j) {
            lip0 = std::max(lip0, std::abs(problem.u0(report.xs[j + 1]) - problem.u0(report.xs[j])) /
                                      opts.dx);
        }
        double speed = problem.p * std::abs(problem.kernel.exp_moment_deriv(lip0 + 0.25));
        pad = 1.25 * speed * t_end + 0.5;
    }
    const double x_lo = opts.x_lo - pad;
    const double x_hi = opts.x_hi + pad;

    HjSolution sol;
    sol.times.push_back(0.0);
    for (double t : opts.out_times) sol.times.push_back(t);
    sol.xs = report.xs;
    sol.dx = opts.dx;
    sol.pad = pad;

    auto run_local = [&](int level) {
        double dxs = opts.dx / std::pow(2.0, level);
        return solve_local_upwind(problem, report, x_lo, x_hi, dxs, opts.out_times,
                                  opts.fixed_dt);
    };
    auto run_nonlocal = [&](int level) {
        double lam = opts.nl_sharpness * std::pow(2.0, level);
        return solve_nonlocal(problem, report, x_lo, x_hi, lam, opts.nl_tail_tol,
                              opts.nl_rtol, opts.out_times);
    };

    if (opts.scheme == HjScheme::local_upwind) {
        LadderResult lr = refine_ladder(run_local, opts.max_refine, opts.ref_tol);
        sol.u = std::move(lr.rows);
        sol.refine_deltas_local = lr.deltas;
        sol.error_estimate = lr.deltas.empty() ? opts.ref_tol : lr.deltas.back();
        sol.scheme_tag = "local-upwind";
        return sol;
    }
    if (opts.scheme == HjScheme::nonlocal_exponential) {
        LadderResult nr = refine_ladder(run_nonlocal, opts.max_refine, opts.ref_tol);
        sol.u = std::move(nr.rows);
        sol.refine_deltas_nonlocal = nr.deltas;
        sol.error_estimate = nr.deltas.empty() ? opts.ref_tol : nr.deltas.back();
        sol.scheme_tag = "nonlocal-exponential";
        return sol;
    }

    LadderResult lr = refine_ladder(run_local, opts.max_refine, opts.ref_tol);
    LadderResult nr = refine_ladder(run_nonlocal, opts.max_refine, opts.ref_tol);
    double gap = sup_gap(lr.rows, nr.rows);
    if (gap > 2.0 * opts.ref_tol) {
        throw NumericsError("hj: the two schemes disagree by " + std::to_string(gap) +
                            " > 2 * ref_tol = " + std::to_string(2.0 * opts.ref_tol) +
                            " on the report window; refusing to return a reference solution");
    }
    double dl = lr.deltas.empty() ? opts.ref_tol : lr.deltas.back();
    double dn = nr.deltas.empty() ? opts.ref_tol : nr.deltas.back();
    bool pick_local = dl <= dn;
    sol.u = pick_local ? std::move(lr.rows) : std::move(nr.rows);
    sol.refine_deltas_local = lr.deltas;
    sol.refine_deltas_nonlocal = nr.deltas;
    sol.cross_gap = gap;
    sol.error_estimate = std::max(std::min(dl, dn), 0.5 * gap);
    sol.scheme_tag = pick_local ? "cross-validated(local-upwind)"
                                : "cross-validated(nonlocal-exponential)";
    return sol;
}

CutoffSolution apply_cutoff(const HjSolution& sol, double band_tol) {
    CutoffSolution c;
    c.times = sol.times;
    c.xs = sol.xs;
    c.band_tol = band_tol >= 0.0 ? band_tol : 2.0 * sol.error_estimate;
    c.value.resize(sol.u.size());
    c.tag.resize(sol.u.size());
    for (std::size_t t = 0; t < sol.u.size(); ++t) {
        c.value[t].assign(sol.u[t].size(), 0.0);
        c.tag[t].assign(sol.u[t].size(), 2);
        for (std::size_t j = 0; j < sol.u[t].size(); ++j) {
            double v = sol.u[t][j];
            if (v > c.band_tol) {
                c.value[t][j] = v;
                c.tag[t][j] = 0;
            } else if (v < -c.band_tol) {
                c.tag[t][j] = 1;  // extinct: the -inf branch, kept as a marker
            }
        }
    }
    return c;
}

SurvivalSet survival_set(const HjSolution& sol, double t) {
    std::size_t ti = sol.times.size();
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        if (std::abs(sol.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
            ti = k;
            break;
        }
    }
    if (ti == sol.times.size()) {
        throw ConfigError("survival_set: t must be one of the solved output times");
    }
    const auto& row = sol.u[ti];
    const auto& xs = sol.xs;
    SurvivalSet s;
    s.t = t;
    bool open = false;
    double a = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        bool pos = row[j] > 0.0;
        if (pos && !open) {
            if (j == 0) {
                a = xs[0];
            } else {
                double frac = row[j - 1] / (row[j - 1] - row[j]);
                a = xs[j - 1] + frac * (xs[j] - xs[j - 1]);
            }
            open = true;
        } else if (!pos && open) {
            double frac = row[j - 1] / (row[j - 1] - row[j]);
            double b = xs[j - 1] + frac * (xs[j] - xs[j - 1]);
            s.intervals.emplace_back(a, b);
            open = false;
        }
    }
    if (open) s.intervals.emplace_back(a, xs.back());
    return s;
}

LipschitzReport lipschitz_report(const HjProblem& problem, const HjSolution& sol) {
    LipschitzReport rep;
    rep.per_time.reserve(sol.u.size());
    for (const auto& row : sol.u) {
        double lip = 0.0;
        for (std::size_t j = 0; j + 1 < row.size(); ++j) {
            lip = std::max(lip, std::abs(row[j + 1] - row[j]) / sol.dx);
        }
        rep.per_time.push_back(lip);
        rep.space_sup = std::max(rep.space_sup, lip);
    }
    for (std::size_t t = 0; t + 1 < sol.u.size(); ++t) {
        double dt = sol.times[t + 1] - sol.times[t];
        for (std::size_t j = 0; j < sol.u[t].size(); ++j) {
            rep.time_measured =
                std::max(rep.time_measured, std::abs(sol.u[t + 1][j] - sol.u[t][j]) / dt);
        }
    }
    rep.time_cap = problem.rate_sum_bound +
                   2.0 * problem.p * problem.kernel.sym_exp_moment(rep.space_sup);
    return rep;
}

}  // namespace traitlab
