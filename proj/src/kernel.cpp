#include "traitlab/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "traitlab/errors.hpp"
#include "traitlab/quadrature.hpp"

namespace traitlab {

namespace {
constexpr double kMaxExponent = 700.0;  // e^700 is near the double limit
constexpr double kSqrt2Pi = 2.5066282746310002;
}  // namespace

KernelSpec KernelSpec::gaussian(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("kernel: gaussian sigma must be positive");
    KernelSpec k;
    k.family_ = Family::gaussian;
    k.sigma_ = sigma;
    return k;
}

KernelSpec KernelSpec::expsq(double scale, double power) {
    if (!(scale > 0.0)) throw ConfigError("kernel: expsq scale must be positive");
    if (!(power >= 2.0)) {
        // power < 2 has merely exponential tails; the exponential moments
        // needed by the Hamiltonian are then unbounded in the gradient.
        throw ConfigError("kernel: expsq power must be >= 2 (super-exponential decay)");
    }
    KernelSpec k;
    k.family_ = Family::expsq;
    k.scale_ = scale;
    k.power_ = power;
    k.norm_ = power / (2.0 * scale * std::tgamma(1.0 / power));
    return k;
}

double KernelSpec::density(double y) const {
    if (family_ == Family::gaussian) {
        double z = y / sigma_;
        return std::exp(-0.5 * z * z) / (sigma_ * kSqrt2Pi);
    }
    return norm_ * std::exp(-std::pow(std::abs(y) / scale_, power_));
}

double KernelSpec::tail_mass(double r) const {
    if (r <= 0.0) return 1.0;
    if (family_ == Family::gaussian) {
        return std::erfc(r / (sigma_ * std::sqrt(2.0)));
    }
    // For y >= r: (y/s)^nu >= (r/s)^(nu-1) * (y/s), so the tail is dominated
    // by an explicit exponential integral.
    double rs = r / scale_;
    if (rs < 1.0) return 1.0;
    double bound = 2.0 * norm_ * scale_ * std::pow(rs, 1.0 - power_) *
                   std::exp(-std::pow(rs, power_));
    return std::min(bound, 1.0);
}

double KernelSpec::exp_moment(double q) const {
    if (family_ == Family::gaussian) {
        double e = 0.5 * q * q * sigma_ * sigma_;
        if (e > kMaxExponent) {
            throw NumericsError("kernel: exponential moment saturates the double range "
                                "(q^2 sigma^2 / 2 > 700)");
        }
        return std::exp(e);
    }
    // Quadrature of c * exp(g(y)), g(y) = -( |y|/s )^nu + q y, shifted by the
    // maximum of g for overflow safety.
    double s = scale_, nu = power_;
    double aq = std::abs(q);
    double ystar = aq > 0.0 ? s * std::pow(aq * s / nu, 1.0 / (nu - 1.0)) : 0.0;
    double gmax = -std::pow(ystar / s, nu) + aq * ystar;
    if (gmax > kMaxExponent) {
        throw NumericsError("kernel: exponential moment saturates the double range");
    }
    auto g = [&](double y) { return -std::pow(std::abs(y) / s, nu) + q * y; };
    double radius = std::max(ystar, s);
    while (g(radius) > gmax - 80.0 || g(-radius) > gmax - 80.0) radius *= 1.5;
    auto f = [&](double y) { return std::exp(g(y) - gmax); };
    double integral = adaptive_simpson(f, -radius, radius, 1e-12 * 2.0 * radius);
    return norm_ * std::exp(gmax) * integral;
}

double KernelSpec::abs_exp_moment(double qbar) const {
    if (qbar < 0.0) qbar = -qbar;
    auto g = [&](double y) {
        if (family_ == Family::gaussian) return -0.5 * y * y / (sigma_ * sigma_) + qbar * y;
        return -std::pow(y / scale_, power_) + qbar * y;
    };
    double width = family_ == Family::gaussian ? sigma_ : scale_;
    double ystar = width;
    // crude ascent to the integrand mode, then push until negligible
    for (int it = 0; it < 200; ++it) {
        if (g(ystar * 1.25) > g(ystar)) ystar *= 1.25; else break;
    }
    double gmax = g(ystar) + std::log(std::max(ystar, 1e-300));
    if (gmax > kMaxExponent) {
        throw NumericsError("kernel: exponential moment saturates the double range");
    }
    double radius = std::max(ystar, width);
    while (g(radius) + std::log(radius) > gmax - 80.0) radius *= 1.5;
    double c = family_ == Family::gaussian ? 1.0 / (sigma_ * kSqrt2Pi) : norm_;
    auto f = [&](double y) { return y * std::exp(g(y) - gmax); };
    double integral = adaptive_simpson(f, 0.0, radius, 1e-12 * radius);
    return 2.0 * c * std::exp(gmax) * integral;
}

double KernelSpec::exp_moment_deriv(double q) const {
    if (family_ == Family::gaussian) {
        double e = 0.5 * q * q * sigma_ * sigma_;
        if (e > kMaxExponent) {
            throw NumericsError("kernel: exponential moment saturates the double range");
        }
        return q * sigma_ * sigma_ * std::exp(e);
    }
    double s = scale_, nu = power_;
    double aq = std::abs(q);
    double ystar = aq > 0.0 ? s * std::pow(aq * s / nu, 1.0 / (nu - 1.0)) : 0.0;
    double gmax = -std::pow(ystar / s, nu) + aq * ystar;
    if (gmax > kMaxExponent) {
        throw NumericsError("kernel: exponential moment saturates the double range");
    }
    auto g = [&](double y) { return -std::pow(std::abs(y) / s, nu) + q * y; };
    double radius = std::max(ystar, s);
    while (g(radius) > gmax - 80.0 || g(-radius) > gmax - 80.0) radius *= 1.5;
    auto f = [&](double y) { return y * std::exp(g(y) - gmax); };
    double integral = adaptive_simpson(f, -radius, radius, 1e-12 * 2.0 * radius);
    return norm_ * std::exp(gmax) * integral;
}

double KernelSpec::sym_exp_moment(double q) const {
    q = std::abs(q);
    if (family_ == Family::gaussian) {
        double e = 0.5 * q * q * sigma_ * sigma_;
        if (e > kMaxExponent) {
            throw NumericsError("kernel: exponential moment saturates the double range");
        }
        // 2 e^{q^2 s^2/2} Phi(q s)
        return 2.0 * std::exp(e) * 0.5 * std::erfc(-q * sigma_ / std::sqrt(2.0));
    }
    double s = scale_, nu = power_;
    double ystar = q > 0.0 ? s * std::pow(q * s / nu, 1.0 / (nu - 1.0)) : 0.0;
    double gmax = -std::pow(ystar / s, nu) + q * ystar;
    if (gmax > kMaxExponent) {
        throw NumericsError("kernel: exponential moment saturates the double range");
    }
    auto g = [&](double y) { return -std::pow(y / s, nu) + q * y; };
    double radius = std::max(ystar, s);
    while (g(radius) > gmax - 80.0) radius *= 1.5;
    auto f = [&](double y) { return std::exp(g(y) - gmax); };
    double integral = adaptive_simpson(f, 0.0, radius, 1e-12 * radius);
    return 2.0 * norm_ * std::exp(gmax) * integral;
}

double KernelSpec::tv_constant() const { return 2.0 * density(0.0); }

std::string KernelSpec::name() const {
    if (family_ == Family::gaussian) return "gaussian(sigma=" + std::to_string(sigma_) + ")";
    return "expsq(scale=" + std::to_string(scale_) + ",power=" + std::to_string(power_) + ")";
}

std::int64_t DiscreteKernel::sample_offset(double u01) const {
    double x = u01 * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), x);
    std::size_t idx = static_cast<std::size_t>(it - cum.begin());
    if (idx >= weights.size()) idx = weights.size() - 1;
    return static_cast<std::int64_t>(idx) - l_max;
}

DiscreteKernel discretize_kernel(const KernelSpec& spec, const TraitGrid& grid, double p,
                                 double tail_tol) {
    if (!(p >= 0.0)) throw ConfigError("kernel: mutation rate p must be >= 0");
    if (!(tail_tol > 0.0)) throw ConfigError("kernel: tail_tol must be positive");

    const double h = grid.h_k;
    std::int64_t l = 1;
    while (spec.tail_mass(static_cast<double>(l) * h) > tail_tol) {
        ++l;
        if (l > 5'000'000) {
            throw ConfigError("kernel: truncation radius exceeds 5e6 offsets; "
                              "loosen tail_tol or enlarge the mesh");
        }
    }

    DiscreteKernel dk;
    dk.l_max = l;
    dk.p = p;
    dk.h_k = h;
    dk.weights.assign(static_cast<std::size_t>(2 * l + 1), 0.0);
    // Evaluate offsets >= 0 and mirror so symmetry is exact bitwise.
    for (std::int64_t m = 0; m <= l; ++m) {
        double w = p * h * spec.density(static_cast<double>(m) * h);
        dk.weights[static_cast<std::size_t>(l + m)] = w;
        dk.weights[static_cast<std::size_t>(l - m)] = w;
    }
    dk.cum.resize(dk.weights.size());
    double run = 0.0;
    for (std::size_t i = 0; i < dk.weights.size(); ++i) {
        run += dk.weights[i];
        dk.cum[i] = run;
    }
    dk.total_rate = run;
    dk.tail_mass = spec.tail_mass(static_cast<double>(l) * h);
    dk.riemann_tol = p * h * spec.tv_constant();
    return dk;
}

}  // namespace traitlab
