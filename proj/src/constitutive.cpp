#include "chb/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace chb {

void PotentialParams::validate() const {
    if (lambda < 0.0) throw ConfigError("PotentialParams: lambda must be >= 0");
    if (!exact) {
        if (n < 1) throw ConfigError("PotentialParams: regularization index n must be >= 1");
        if (!(q0 > 2.0)) throw ConfigError("PotentialParams: q0 must be > 2");
        if (!(penalty_exponent_factor > 0.0))
            throw ConfigError("PotentialParams: penalty exponent factor must be > 0");
    }
}

void SensitivityParams::validate() const {
    if (!(p > 1.0 && p <= 2.0)) throw ConfigError("SensitivityParams: p must lie in (1, 2]");
    if (!(chi >= 0.0)) throw ConfigError("SensitivityParams: chi must be >= 0");
}

// ------------------------------------------------------------ singular log

double beta(double r) {
    if (!(r > -1.0 && r < 1.0)) {
        std::ostringstream ss;
        ss << "beta: argument " << r << " outside (-1, 1)";
        throw DomainError(ss.str());
    }
    return std::log1p(r) - std::log1p(-r);
}

double beta_prime(double r) {
    if (!(r > -1.0 && r < 1.0)) throw DomainError("beta_prime: argument outside (-1, 1)");
    return 1.0 / (1.0 + r) + 1.0 / (1.0 - r);
}

static double xlogx1p(double r) {
    // (1+r)*log(1+r), continuous at r = -1 with value 0
    const double one_plus = 1.0 + r;
    return one_plus > 0.0 ? one_plus * std::log1p(r) : 0.0;
}

double potential_F(double r, const PotentialParams& prm) {
    if (prm.exact) {
        if (!(r >= -1.0 && r <= 1.0)) {
            std::ostringstream ss;
            ss << "potential_F: argument " << r << " outside [-1, 1] in exact mode";
            throw DomainError(ss.str());
        }
        return xlogx1p(r) + xlogx1p(-r) - 0.5 * prm.lambda * r * r;
    }
    return potential_F_n(r, prm);
}

double potential_f(double r, const PotentialParams& prm) {
    if (prm.exact) return beta(r) - prm.lambda * r;
    return beta_n(r, prm) - prm.lambda * r;
}

// ------------------------------------------------------------ Yosida part

double yosida_resolvent(double s, int n) {
    if (n < 1) throw ConfigError("yosida_resolvent: n must be >= 1");
    if (s == 0.0) return 0.0;
    const double edge = 1.0 - 1e-16;
    double lo = -edge, hi = edge;
    // g is strictly increasing; saturate if the root is not representable.
    auto g = [&](double r) { return r + beta(r) / n - s; };
    if (g(lo) >= 0.0) return lo;
    if (g(hi) <= 0.0) return hi;
    double r = std::clamp(s * n / (n + 2.0), -0.9, 0.9);
    const double tol = 1e-14 * std::max(1.0, std::fabs(s));
    for (int it = 0; it < 300; ++it) {
        const double gr = g(r);
        if (std::fabs(gr) <= tol) return r;
        if (gr > 0.0) hi = r; else lo = r;
        // where beta' blows up the residual floor is above tol; the bracket
        // width is the honest convergence measure there
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon())
            return 0.5 * (lo + hi);
        const double slope = 1.0 + beta_prime(r) / n;
        double next = r - gr / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        r = next;
    }
    return 0.5 * (lo + hi);  // bracket is below ulp width by now
}

double yosida_beta(double s, int n) {
    const double r = yosida_resolvent(s, n);
    return n * (s - r);
}

double yosida_beta_prime(double s, int n) {
    const double r = yosida_resolvent(s, n);
    const double edge = 1.0 - 1e-16;
    if (r <= -edge || r >= edge) return (double)n;  // saturated resolvent
    const double bp = beta_prime(r);
    return bp / (1.0 + bp / n);
}

// ------------------------------------------------------------- penalty j_n

static double penalty_coefficient(int n, double q0, double factor) {
    const double c = std::pow((double)n, factor * q0);
    if (!std::isfinite(c)) {
        std::ostringstream ss;
        ss << "penalty_j: coefficient n^(" << factor << "*q0) overflows for n=" << n
           << ", q0=" << q0;
        throw DomainError(ss.str());
    }
    return c;
}

double penalty_j(double s, int n, double q0, double factor) {
    if (s >= -1.0 && s <= 1.0) return 0.0;
    const double c = penalty_coefficient(n, q0, factor);
    const double excess = std::fabs(s) - 1.0;
    const double v = q0 * c * std::pow(excess, q0 - 1.0);
    if (!std::isfinite(v)) {
        std::ostringstream ss;
        ss << "penalty_j: value overflows at s=" << s << ", n=" << n;
        throw DomainError(ss.str());
    }
    return s > 1.0 ? v : -v;
}

double penalty_j_prime(double s, int n, double q0, double factor) {
    if (s >= -1.0 && s <= 1.0) return 0.0;
    const double c = penalty_coefficient(n, q0, factor);
    const double excess = std::fabs(s) - 1.0;
    const double v = q0 * (q0 - 1.0) * c * std::pow(excess, q0 - 2.0);
    if (!std::isfinite(v)) throw DomainError("penalty_j_prime: overflow");
    return v;
}

double penalty_j_primitive(double s, int n, double q0, double factor) {
    if (s >= -1.0 && s <= 1.0) return 0.0;
    const double c = penalty_coefficient(n, q0, factor);
    const double v = c * std::pow(std::fabs(s) - 1.0, q0);
    if (!std::isfinite(v)) throw DomainError("penalty_j_primitive: overflow");
    return v;
}

// ------------------------------------------------------------ beta_n / F_n

double beta_n(double s, const PotentialParams& prm) {
    prm.validate();
    return yosida_beta(s, prm.n) + penalty_j(s, prm.n, prm.q0, prm.penalty_exponent_factor);
}

double beta_n_prime(double s, const PotentialParams& prm) {
    return yosida_beta_prime(s, prm.n) +
           penalty_j_prime(s, prm.n, prm.q0, prm.penalty_exponent_factor);
}

double beta_n_primitive(double s, const PotentialParams& prm) {
    // Moreau identity: the primitive of the Yosida approximation equals
    // B(r) + |beta_yosida|^2 / (2n) at the resolvent point r, with B the
    // primitive of beta. No quadrature needed.
    const double r = yosida_resolvent(s, prm.n);
    const double moreau = xlogx1p(r) + xlogx1p(-r) + 0.5 * prm.n * (s - r) * (s - r);
    return moreau + penalty_j_primitive(s, prm.n, prm.q0, prm.penalty_exponent_factor);
}

double potential_F_n(double s, const PotentialParams& prm) {
    return beta_n_primitive(s, prm) - 0.5 * prm.lambda * s * s;
}

double monotone_part(double s, const PotentialParams& prm) {
    return prm.exact ? beta(s) : beta_n(s, prm);
}

double monotone_part_prime(double s, const PotentialParams& prm) {
    return prm.exact ? beta_prime(s) : beta_n_prime(s, prm);
}

double potential(double s, const PotentialParams& prm) {
    return prm.exact ? potential_F(s, prm) : potential_F_n(s, prm);
}

// --------------------------------------------------- sensitivity / entropy

double alpha(double s, const SensitivityParams& sp) {
    if (s < 0.0) throw DomainError("alpha: argument must be >= 0");
    if (s == 0.0) return 0.0;
    return s / (1.0 + std::pow(s, sp.p - 1.0));
}

double alpha_prime(double s, const SensitivityParams& sp) {
    if (s < 0.0) throw DomainError("alpha_prime: argument must be >= 0");
    const double y = std::pow(s, sp.p - 1.0);
    const double d = 1.0 + y;
    return (1.0 + (2.0 - sp.p) * y) / (d * d);
}

double alpha_prime_max(const SensitivityParams&) {
    // (1 + (2-p) y) / (1+y)^2 <= 1 for y >= 0, with equality at y = 0.
    return 1.0;
}

double gamma_entropy(double s, const SensitivityParams& sp) {
    if (!(s > 0.0)) throw DomainError("gamma: argument must be > 0");
    return std::log(s) + (std::pow(s, sp.p - 1.0) - 1.0) / (sp.p - 1.0);
}

double gamma_hat(double s, const SensitivityParams& sp) {
    if (s < 0.0) throw DomainError("gamma_hat: argument must be >= 0");
    const double p = sp.p;
    const double slns = s > 0.0 ? s * std::log(s) : 0.0;
    return (std::pow(s, p) - 1.0) / (p * (p - 1.0)) + slns - p * (s - 1.0) / (p - 1.0);
}

// ----------------------------------------------------------------- sources

static SourceSpec zero_sources(const SourceConstants& c) {
    SourceSpec s;
    s.ell = c.ell;
    s.h = [](double, double) { return 0.0; };
    s.b_plus = [](double, double) { return 0.0; };
    s.b_minus = [](double, double) { return 0.0; };
    return s;
}

SourceSpec builtin_sources(const std::string& name, const SourceConstants& c) {
    if (!(c.ell > 0.0)) throw ConfigError("sources: ell must be > 0");
    SourceSpec s = zero_sources(c);
    if (name == "zero") return s;

    if (name == "logistic_h_saturating") {
        if (!(c.H / c.ell < 1.0)) {
            std::ostringstream ss;
            ss << "sources: H/ell = " << c.H / c.ell << " violates H/ell < 1";
            throw ConfigError(ss.str());
        }
        const double H = c.H;
        s.name_h = name;
        s.H = H;
        s.Ch1 = H;   // |d/dphi tanh(phi)| <= 1
        s.Ch2 = H;   // (1+sigma)|d/dsigma| <= H
        s.h = [H](double sigma, double phi) {
            return H * std::tanh(sigma / (1.0 + sigma)) * std::tanh(phi);
        };
        return s;
    }
    if (name == "linear_b") {
        // b = b_inf - b0 * sigma
        s.name_b = name;
        s.b0 = c.b0;
        s.b_inf = c.b_inf;
        s.b_plus = [bi = c.b_inf](double, double) { return bi; };
        s.b_minus = [b0 = c.b0](double, double) { return b0; };
        return s;
    }
    if (name == "logistic_b") {
        // b = b_inf * sigma (1 - sigma) / (1 + sigma^2); in class when
        // b0 >= 0.21 b_inf (validated by validate_sources in any case).
        s.name_b = name;
        s.b0 = c.b0;
        s.b_inf = c.b_inf;
        s.b_plus = [bi = c.b_inf](double sigma, double) {
            return bi * sigma / (1.0 + sigma * sigma);
        };
        s.b_minus = [bi = c.b_inf](double sigma, double) {
            return bi * sigma / (1.0 + sigma * sigma);
        };
        return s;
    }
    throw ConfigError("unknown builtin source: " + name);
}

SourceSpec combine_sources(const std::string& h_name, const std::string& b_name,
                           const SourceConstants& c) {
    SourceSpec h_part = builtin_sources(h_name, c);
    SourceSpec b_part = builtin_sources(b_name, c);
    h_part.name_b = b_part.name_b;
    h_part.b0 = b_part.b0;
    h_part.b_inf = b_part.b_inf;
    h_part.b_plus = b_part.b_plus;
    h_part.b_minus = b_part.b_minus;
    return h_part;
}

static double halton(int index, int base) {
    double f = 1.0, r = 0.0;
    int i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

SourceValidationReport validate_sources(const SourceSpec& spec, int samples,
                                        double sigma_max) {
    SourceValidationReport rep;
    rep.h_over_ell = spec.H / spec.ell;
    rep.min_b_plus = 0.0;
    rep.min_b_minus = 0.0;

    double min_bp = 1e300, min_bm = 1e300;
    const double dphi = 1e-5, dsig = 1e-5;
    for (int k = 1; k <= samples; ++k) {
        const double sigma = sigma_max * halton(k, 2);
        const double phi = -2.0 + 4.0 * halton(k, 3);

        const double hv = spec.h(sigma, phi);
        rep.max_abs_h = std::max(rep.max_abs_h, std::fabs(hv));

        const double dh_dphi = (spec.h(sigma, phi + dphi) - spec.h(sigma, phi - dphi)) / (2 * dphi);
        rep.max_dh_dphi = std::max(rep.max_dh_dphi, std::fabs(dh_dphi));

        const double s_lo = std::max(0.0, sigma - dsig);
        const double dh_dsig = (spec.h(sigma + dsig, phi) - spec.h(s_lo, phi)) / (sigma + dsig - s_lo);
        rep.max_weighted_dh_dsigma =
            std::max(rep.max_weighted_dh_dsigma, (1.0 + sigma) * std::fabs(dh_dsig));

        const double bv = spec.b(sigma, phi);
        rep.worst_b_low_violation = std::max(rep.worst_b_low_violation, -spec.b0 * sigma - bv);
        rep.worst_b_high_violation =
            std::max(rep.worst_b_high_violation, bv - spec.b_inf * (1.0 + sigma));
        min_bp = std::min(min_bp, spec.b_plus(sigma, phi));
        min_bm = std::min(min_bm, spec.b_minus(sigma, phi));
    }
    rep.min_b_plus = min_bp;
    rep.min_b_minus = min_bm;

    const double slack = 1e-9;
    const bool h_zero = spec.name_h == "zero";
    const bool b_zero = spec.name_b == "zero";
    rep.pass = rep.h_over_ell < 1.0 &&
               (h_zero || (rep.max_abs_h <= spec.H + slack &&
                           rep.max_dh_dphi <= spec.Ch1 + slack &&
                           rep.max_weighted_dh_dsigma <= spec.Ch2 + slack)) &&
               (b_zero || (rep.worst_b_low_violation <= slack &&
                           rep.worst_b_high_violation <= slack)) &&
               rep.min_b_plus >= -slack && rep.min_b_minus >= -slack;

    std::ostringstream ss;
    ss << (rep.pass ? "PASS" : "FAIL")
       << " H/ell=" << rep.h_over_ell
       << " max|h|=" << rep.max_abs_h << " (H=" << spec.H << ")"
       << " max|h_phi|=" << rep.max_dh_dphi << " (C_h1=" << spec.Ch1 << ")"
       << " max(1+s)|h_s|=" << rep.max_weighted_dh_dsigma << " (C_h2=" << spec.Ch2 << ")"
       << " b-band viol=(" << rep.worst_b_low_violation << ","
       << rep.worst_b_high_violation << ")";
    rep.summary = ss.str();
    return rep;
}

} // namespace chb
