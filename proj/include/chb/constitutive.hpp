#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chb/error.hpp"

namespace chb {

// Parameters of the logarithmic potential and its regularization family.
// exact=true selects the singular potential on (-1,1); otherwise beta_n with
// index n (Yosida of index 1/n plus a polynomial penalty of growth q0 and
// coefficient n^(penalty_exponent_factor * q0)).
struct PotentialParams {
    double lambda = 0.0;
    bool exact = true;
    int n = 1;
    double q0 = 3.0;
    double penalty_exponent_factor = 8.0;

    void validate() const;
};

struct SensitivityParams {
    double p = 2.0;  // in (1, 2]
    double chi = 1.0;

    void validate() const;
    double a() const { return 2.0 - p; }
    double p_conjugate() const { return p / (p - 1.0); }
    bool in_3d_regime() const { return p > 12.0 / 11.0; }
};

// ---- singular potential ----

// beta(r) = log(1+r) - log(1-r), the monotone part of F'. r in (-1,1).
double beta(double r);
double beta_prime(double r);
// F(r) = (1+r)log(1+r) + (1-r)log(1-r) - lambda/2 r^2, finite on [-1,1].
double potential_F(double r, const PotentialParams& prm);
// f = F' = beta - lambda * id (exact mode; throws DomainError for |r| >= 1).
double potential_f(double r, const PotentialParams& prm);

// ---- Yosida regularization (Lemma-6.1 family) ----

// The resolvent r solving r + beta(r)/n = s, found by safeguarded Newton.
double yosida_resolvent(double s, int n);
// Yosida approximation of beta at index 1/n: n*(s - resolvent).
double yosida_beta(double s, int n);
double yosida_beta_prime(double s, int n);

// Penalty j_n: zero on [-1,1], +-q0 * n^(f*q0) |s -+ 1|^(q0-1) outside.
double penalty_j(double s, int n, double q0, double factor = 8.0);
double penalty_j_prime(double s, int n, double q0, double factor = 8.0);
// Primitive of j_n vanishing on [-1,1].
double penalty_j_primitive(double s, int n, double q0, double factor = 8.0);

// beta_n = yosida_beta + j_n and its primitive/derivative.
double beta_n(double s, const PotentialParams& prm);
double beta_n_prime(double s, const PotentialParams& prm);
double beta_n_primitive(double s, const PotentialParams& prm);
// F_n = primitive(beta_n) - lambda/2 s^2, normalized F_n(0)=0.
double potential_F_n(double s, const PotentialParams& prm);

// Dispatch on prm.exact: beta/beta_n, their derivatives and potentials.
double monotone_part(double s, const PotentialParams& prm);
double monotone_part_prime(double s, const PotentialParams& prm);
double potential(double s, const PotentialParams& prm);

// ---- degenerate sensitivity and entropy pair ----

// alpha(s) = s / (1 + s^(p-1)) for s >= 0.
double alpha(double s, const SensitivityParams& sp);
double alpha_prime(double s, const SensitivityParams& sp);
// sup of alpha' over [0, inf); equals alpha'(0) = 1 for every p in (1,2].
double alpha_prime_max(const SensitivityParams& sp);
// gamma(s) = ln s + (s^(p-1) - 1)/(p-1): primitive of 1/alpha, gamma(1) = 0.
double gamma_entropy(double s, const SensitivityParams& sp);
// gamma_hat(s) = (s^p - 1)/(p(p-1)) + s ln s - p(s-1)/(p-1): primitive of
// gamma, gamma_hat(1) = 0, extended by its limit (p+1)/p at s = 0.
double gamma_hat(double s, const SensitivityParams& sp);

// ---- source terms ----

// Pair (h, b) with certified constants. b is carried in split form
// b = b_plus - sigma * b_minus with b_plus, b_minus >= 0, which is what the
// positivity-preserving nutrient step consumes.
struct SourceSpec {
    std::string name_h = "zero";
    std::string name_b = "zero";
    double H = 0.0, Ch1 = 0.0, Ch2 = 0.0;
    double b0 = 0.0, b_inf = 0.0;
    double ell = 1.0;

    std::function<double(double, double)> h;        // h(sigma, phi)
    std::function<double(double, double)> b_plus;   // (sigma, phi) -> >= 0
    std::function<double(double, double)> b_minus;  // (sigma, phi) -> >= 0

    double b(double sigma, double phi) const {
        return b_plus(sigma, phi) - sigma * b_minus(sigma, phi);
    }
    bool is_zero() const { return name_h == "zero" && name_b == "zero"; }
};

struct SourceConstants {
    double H = 0.1;
    double ell = 1.0;
    double b0 = 1.0;
    double b_inf = 1.0;
};

// name in {zero, logistic_h_saturating, linear_b, logistic_b}. Throws
// ConfigError when the constants violate H/ell < 1.
SourceSpec builtin_sources(const std::string& name, const SourceConstants& c);
// Compose the h-part of one builtin with the b-part of another.
SourceSpec combine_sources(const std::string& h_name, const std::string& b_name,
                           const SourceConstants& c);

struct SourceValidationReport {
    bool pass = false;
    double h_over_ell = 0.0;       // H/ell, must be < 1
    double max_abs_h = 0.0;        // vs H
    double max_dh_dphi = 0.0;      // vs Ch1
    double max_weighted_dh_dsigma = 0.0;  // max (1+sigma)|dh/dsigma| vs Ch2
    double worst_b_low_violation = 0.0;   // max(0, -b0*sigma - b)
    double worst_b_high_violation = 0.0;  // max(0, b - b_inf*(1+sigma))
    double min_b_plus = 0.0;
    double min_b_minus = 0.0;
    std::string summary;
};

// Samples (sigma, phi) on [0, sigma_max] x [-2, 2] with a low-discrepancy
// sequence; central differences for the derivative bounds. Report-only.
SourceValidationReport validate_sources(const SourceSpec& spec, int samples,
                                        double sigma_max = 100.0);

} // namespace chb
