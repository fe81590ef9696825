#include <doctest.h>

#include <cmath>
#include <string>

#include "traitlab/errors.hpp"
#include "traitlab/hj.hpp"

using namespace traitlab;

namespace {

HjProblem constant_problem(double net, double p, double u0_level, double sigma = 1.0) {
    HjProblem pb;
    pb.net_growth = [net](double) { return net; };
    pb.u0 = [u0_level](double) { return u0_level; };
    pb.p = p;
    pb.kernel = KernelSpec::gaussian(sigma);
    pb.rate_sum_bound = std::abs(net) + 1.0;
    return pb;
}

double sup_row_error(const HjSolution& sol, std::size_t t,
                     const std::function<double(double)>& exact) {
    double sup = 0.0;
    for (std::size_t j = 0; j < sol.xs.size(); ++j) {
        sup = std::max(sup, std::abs(sol.u[t][j] - exact(sol.xs[j])));
    }
    return sup;
}

}  // namespace

TEST_CASE("hj: constant coefficients are reproduced to 1e-6 by both schemes") {
    HjProblem pb = constant_problem(-0.5, 0.25, 1.0);
    HjOptions opt;
    opt.x_lo = -1.0;
    opt.x_hi = 1.0;
    opt.dx = 0.01;
    opt.out_times = {1.0, 2.0};
    opt.max_refine = 0;
    for (HjScheme scheme : {HjScheme::local_upwind, HjScheme::nonlocal_exponential}) {
        opt.scheme = scheme;
        HjSolution sol = solve_hj(pb, opt);
        for (std::size_t t = 0; t < sol.times.size(); ++t) {
            double expect = 1.0 - 0.25 * sol.times[t];
            for (double v : sol.u[t]) CHECK(std::abs(v - expect) <= 1e-6);
        }
    }
}

TEST_CASE("hj: p = 0 reduces to pointwise growth of the exponent") {
    HjProblem pb;
    pb.net_growth = [](double x) { return -0.3 + 0.2 * std::exp(-x * x); };
    pb.u0 = [](double x) { return 0.2 - 0.4 * std::abs(x); };
    pb.p = 0.0;
    pb.kernel = KernelSpec::gaussian(1.0);
    pb.rate_sum_bound = 1.0;
    HjOptions opt;
    opt.x_lo = -1.0;
    opt.x_hi = 1.0;
    opt.dx = 0.005;
    opt.out_times = {0.7};
    opt.scheme = HjScheme::local_upwind;
    opt.max_refine = 0;
    opt.pad = 0.3;
    HjSolution sol = solve_hj(pb, opt);
    double err = sup_row_error(sol, 1, [&](double x) {
        return pb.u0(x) + 0.7 * pb.net_growth(x);
    });
    CHECK(err <= 1e-9);
}

TEST_CASE("hj: kinked initial data against the variational oracle") {
    // gaussian kernel, constant net growth r, p, u0 = c +- lambda |x|; the
    // exact values follow from the two dual variational formulas, which agree:
    //   peak  (c - lambda|x|): u(t,0) = c + t (r + p),   flanks ride H(lambda)
    //   valley(c + lambda|x|): u(t,x) = c + lambda|x| + t H(lambda)
    const double c = 1.0, lam = 0.5, r = -0.3, p = 0.25, t = 0.8;
    const double h_lam = r + p * std::exp(0.5 * lam * lam);
    const double fan = t * p * lam * std::exp(0.5 * lam * lam);

    HjOptions opt;
    opt.x_lo = -0.9;
    opt.x_hi = 0.9;
    opt.dx = 0.005;
    opt.out_times = {t};
    opt.scheme = HjScheme::cross_validated;
    opt.max_refine = 2;

    SUBCASE("peak") {
        HjProblem pb;
        pb.net_growth = [r](double) { return r; };
        pb.u0 = [=](double x) { return c - lam * std::abs(x); };
        pb.p = p;
        pb.kernel = KernelSpec::gaussian(1.0);
        pb.rate_sum_bound = 1.0;
        HjSolution sol = solve_hj(pb, opt);
        CHECK(sol.cross_gap <= 2.0 * opt.ref_tol);
        std::size_t j0 = static_cast<std::size_t>(std::llround((0.0 - opt.x_lo) / opt.dx));
        CHECK(sol.u[1][j0] == doctest::Approx(c + t * (r + p)).epsilon(0.02));
        for (double x : {0.5, 0.7, -0.6}) {
            REQUIRE(std::abs(x) > fan + 0.2);
            std::size_t j = static_cast<std::size_t>(std::llround((x - opt.x_lo) / opt.dx));
            CHECK(sol.u[1][j] ==
                  doctest::Approx(c - lam * std::abs(x) + t * h_lam).epsilon(0.02));
        }
    }
    SUBCASE("valley") {
        HjProblem pb;
        pb.net_growth = [r](double) { return r; };
        pb.u0 = [=](double x) { return c + lam * std::abs(x); };
        pb.p = p;
        pb.kernel = KernelSpec::gaussian(1.0);
        pb.rate_sum_bound = 1.0;
        HjSolution sol = solve_hj(pb, opt);
        for (double x : {0.0, 0.3, -0.5, 0.7}) {
            std::size_t j = static_cast<std::size_t>(std::llround((x - opt.x_lo) / opt.dx));
            CHECK(sol.u[1][j] ==
                  doctest::Approx(c + lam * std::abs(x) + t * h_lam).epsilon(0.02));
        }
    }
}

TEST_CASE("hj: numerical comparison principle") {
    HjProblem lo;
    lo.net_growth = [](double) { return -0.4; };
    lo.u0 = [](double x) { return 0.5 - 0.3 * x * x; };
    lo.p = 0.3;
    lo.kernel = KernelSpec::gaussian(1.0);
    lo.rate_sum_bound = 1.3;
    HjProblem hi = lo;
    hi.u0 = [](double x) { return 0.5 - 0.3 * x * x + 0.05 * (1.0 + std::cos(3.0 * x)); };

    HjOptions opt;
    opt.x_lo = -1.0;
    opt.x_hi = 1.0;
    opt.dx = 0.005;
    opt.out_times = {0.5, 1.0};
    opt.scheme = HjScheme::local_upwind;
    opt.max_refine = 0;
    HjSolution a = solve_hj(lo, opt);
    HjSolution b = solve_hj(hi, opt);
    for (std::size_t t = 0; t < a.times.size(); ++t) {
        for (std::size_t j = 0; j < a.xs.size(); ++j) {
            CHECK(a.u[t][j] <= b.u[t][j] + 0.01);
        }
    }
}

TEST_CASE("hj: mesh refinement contracts and schemes agree on the demo config") {
    HjProblem pb;
    pb.net_growth = [](double) { return -0.5; };
    pb.u0 = [](double x) { return 0.6 - 0.25 * x * x; };
    pb.p = 0.3;
    pb.kernel = KernelSpec::gaussian(1.0);
    pb.rate_sum_bound = 1.5;

    HjOptions opt;
    opt.x_lo = -1.0;
    opt.x_hi = 1.0;
    opt.dx = 0.01;
    opt.out_times = {1.0};
    opt.scheme = HjScheme::local_upwind;
    opt.max_refine = 2;
    opt.ref_tol = 1e-9;  // force the full ladder
    HjSolution lf = solve_hj(pb, opt);
    REQUIRE(lf.refine_deltas_local.size() == 2);
    CHECK(lf.refine_deltas_local[0] / lf.refine_deltas_local[1] >= 1.5);

    opt.scheme = HjScheme::cross_validated;
    opt.ref_tol = 0.02;
    HjSolution cv = solve_hj(pb, opt);
    CHECK(cv.cross_gap > 0.0);
    CHECK(cv.cross_gap <= 2.0 * opt.ref_tol);
    CHECK(cv.error_estimate > 0.0);
}

TEST_CASE("hj: survival set extraction") {
    SUBCASE("constant-coefficient crossing") {
        HjProblem pb = constant_problem(-0.5, 0.25, 1.0);  // u = 1 - 0.25 t
        HjOptions opt;
        opt.x_lo = -1.0;
        opt.x_hi = 1.0;
        opt.dx = 0.01;
        opt.out_times = {2.0, 4.4};
        opt.scheme = HjScheme::local_upwind;
        opt.max_refine = 0;
        HjSolution sol = solve_hj(pb, opt);
        SurvivalSet s2 = survival_set(sol, 2.0);
        REQUIRE(s2.intervals.size() == 1);
        CHECK(s2.intervals[0].first == doctest::Approx(-1.0));
        CHECK(s2.intervals[0].second == doctest::Approx(1.0));
        SurvivalSet s4 = survival_set(sol, 4.4);
        CHECK(s4.intervals.empty());
        CHECK_THROWS_AS(survival_set(sol, 3.3), ConfigError);
    }
    SUBCASE("kinked front: endpoints near the analytic roots") {
        // flanks: u(1, x) = 1 - |x| + H(1), root at |x| = 1 + H(1)
        HjProblem pb;
        pb.net_growth = [](double) { return -0.3; };
        pb.u0 = [](double x) { return 1.0 - std::abs(x); };
        pb.p = 0.1;
        pb.kernel = KernelSpec::gaussian(1.0);
        pb.rate_sum_bound = 0.7;
        double h1 = -0.3 + 0.1 * std::exp(0.5);
        double root = 1.0 + h1;
        HjOptions opt;
        opt.x_lo = -1.5;
        opt.x_hi = 1.5;
        opt.dx = 0.005;
        opt.out_times = {1.0};
        opt.scheme = HjScheme::cross_validated;
        HjSolution sol = solve_hj(pb, opt);
        SurvivalSet s = survival_set(sol, 1.0);
        REQUIRE(s.intervals.size() == 1);
        CHECK(std::abs(s.intervals[0].first + root) <= 0.02);
        CHECK(std::abs(s.intervals[0].second - root) <= 0.02);
    }
}

TEST_CASE("hj: cutoff classification with the undecided band") {
    HjOptions opt;
    opt.x_lo = -0.5;
    opt.x_hi = 0.5;
    opt.dx = 0.01;
    opt.out_times = {5.0};
    opt.scheme = HjScheme::local_upwind;
    opt.max_refine = 1;

    HjProblem pb = constant_problem(-0.25, 0.25, 0.3);  // u stays 0.3
    HjSolution sol = solve_hj(pb, opt);
    CutoffSolution cut = apply_cutoff(sol, 0.05);
    CHECK(cut.band_tol == 0.05);
    for (std::size_t t = 0; t < cut.times.size(); ++t) {
        for (std::size_t j = 0; j < cut.xs.size(); ++j) {
            CHECK(cut.tag[t][j] == 0);
            CHECK(cut.value[t][j] == doctest::Approx(0.3).epsilon(1e-6));
        }
    }

    HjProblem neg = constant_problem(-0.25, 0.25, -0.2);
    HjSolution nsol = solve_hj(neg, opt);
    CutoffSolution ncut = apply_cutoff(nsol, 0.05);
    for (std::size_t j = 0; j < ncut.xs.size(); ++j) CHECK(ncut.tag[1][j] == 1);

    // u = 1 - 0.25 t hits -0.25 < 0 at t = 5
    HjProblem cross = constant_problem(-0.5, 0.25, 1.0);
    HjSolution csol = solve_hj(cross, opt);
    CutoffSolution ccut = apply_cutoff(csol, 0.05);
    for (std::size_t j = 0; j < ccut.xs.size(); ++j) CHECK(ccut.tag[1][j] == 1);

    // values inside the band stay unclassified
    HjProblem band = constant_problem(-0.25, 0.25, 0.01);
    HjSolution bsol = solve_hj(band, opt);
    CutoffSolution bcut = apply_cutoff(bsol, 0.05);
    for (std::size_t j = 0; j < bcut.xs.size(); ++j) CHECK(bcut.tag[1][j] == 2);

    // automatic band: twice the solver error estimate
    CutoffSolution acut = apply_cutoff(sol);
    CHECK(acut.band_tol == doctest::Approx(2.0 * sol.error_estimate));
}

TEST_CASE("hj: lipschitz report") {
    SUBCASE("constant solution has zero constants") {
        HjProblem pb = constant_problem(-0.25, 0.25, 0.7);
        HjOptions opt;
        opt.x_lo = -0.5;
        opt.x_hi = 0.5;
        opt.dx = 0.01;
        opt.out_times = {1.0, 2.0};
        opt.scheme = HjScheme::local_upwind;
        opt.max_refine = 0;
        HjSolution sol = solve_hj(pb, opt);
        LipschitzReport rep = lipschitz_report(pb, sol);
        CHECK(rep.space_sup <= 1e-9);
        CHECK(rep.time_measured <= 1e-9);
        CHECK(rep.time_cap > 0.0);
    }
    SUBCASE("transport-free kinked data keeps its slope") {
        HjProblem pb;
        pb.net_growth = [](double) { return -0.3; };
        pb.u0 = [](double x) { return -0.4 * std::abs(x); };
        pb.p = 0.0;
        pb.kernel = KernelSpec::gaussian(1.0);
        pb.rate_sum_bound = 0.7;
        HjOptions opt;
        opt.x_lo = -1.0;
        opt.x_hi = 1.0;
        opt.dx = 0.005;
        opt.out_times = {0.5, 1.0};
        opt.scheme = HjScheme::local_upwind;
        opt.max_refine = 0;
        opt.pad = 0.2;
        HjSolution sol = solve_hj(pb, opt);
        LipschitzReport rep = lipschitz_report(pb, sol);
        CHECK(rep.space_sup == doctest::Approx(0.4).epsilon(1e-6));
        CHECK(rep.time_measured == doctest::Approx(0.3).epsilon(1e-6));
        CHECK(rep.time_cap >= rep.time_measured);
    }
}

TEST_CASE("hj: fixed dt beyond the CFL bound is rejected with a suggestion") {
    HjProblem pb;
    pb.net_growth = [](double) { return -0.4; };
    pb.u0 = [](double x) { return 0.5 - std::abs(x); };
    pb.p = 0.3;
    pb.kernel = KernelSpec::gaussian(1.0);
    pb.rate_sum_bound = 1.3;
    HjOptions opt;
    opt.x_lo = -0.5;
    opt.x_hi = 0.5;
    opt.dx = 0.01;
    opt.out_times = {0.5};
    opt.scheme = HjScheme::local_upwind;
    opt.max_refine = 0;
    opt.fixed_dt = 0.01;  // the admissible dt sits well below dx
    try {
        solve_hj(pb, opt);
        FAIL("expected a CFL rejection");
    } catch (const NumericsError& e) {
        CHECK(std::string(e.what()).find("largest admissible dt") != std::string::npos);
    }
}
