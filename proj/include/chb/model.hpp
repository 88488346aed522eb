#pragma once

#include "chb/constitutive.hpp"

namespace chb {

enum class FlowMode { Off, Darcy, Brinkman };

// All constants of the coupled model in one place. chi couples the phases,
// ell is the Oono relaxation rate, lambda the concave part of the potential,
// p the sensitivity exponent (a = 2-p), epsilon the Brinkman viscosity.
struct ModelParams {
    double chi = 1.0;
    double ell = 1.0;
    double lambda = 0.0;
    double p = 2.0;
    double epsilon = 0.0;
    FlowMode flow = FlowMode::Off;

    bool exact_log = true;   // singular potential vs beta_n regularization
    int reg_n = 1;
    double q0 = 3.0;
    double penalty_exponent_factor = 8.0;

    double q_monitor = 2.0;  // exponent of the monitored entropy family

    PotentialParams potential() const {
        PotentialParams prm;
        prm.lambda = lambda;
        prm.exact = exact_log;
        prm.n = reg_n;
        prm.q0 = q0;
        prm.penalty_exponent_factor = penalty_exponent_factor;
        return prm;
    }
    SensitivityParams sensitivity() const { return SensitivityParams{p, chi}; }

    void validate() const {
        potential().validate();
        sensitivity().validate();
        if (!(ell > 0.0)) throw ConfigError("ModelParams: ell must be > 0");
        if (epsilon < 0.0) throw ConfigError("ModelParams: epsilon must be >= 0");
        if (flow == FlowMode::Brinkman && !(epsilon > 0.0))
            throw ConfigError("ModelParams: Brinkman flow requires epsilon > 0");
        if (!exact_log && chi > 0.0 && !(q0 > sensitivity().p_conjugate()))
            throw ConfigError("ModelParams: regularized chemotactic runs need q0 > p'");
        if (!(q_monitor >= 1.0)) throw ConfigError("ModelParams: q_monitor must be >= 1");
    }
};

} // namespace chb
