#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ionlab/breit_rabi.hpp"
#include "ionlab/ion_state.hpp"
#include "ionlab/rng.hpp"

namespace ionlab {

struct FieldNoiseParams {
    double b0 = 1.78;           // G
    double drift_rate = 0.0;    // G/s
    double ou_sigma = 0.0;      // G, stationary RMS of the OU component
    double ou_tau = 120.0;      // s, OU correlation time
    double lorentz_gamma = 0.0; // G, half-width of a static per-shot heavy-tailed
                                //    offset (truncated Cauchy); 0 disables it
};

struct MotionalNoiseParams {
    double trap_freq = 810e3;   // Hz, axial
    double v0 = 500.0;          // V, nominal end-cap voltage
    double v_sigma = 0.0;       // V, quasi-static RMS voltage noise
    double heating_rate = 0.0;  // quanta/s
};

struct ReadoutParams {
    double p_detect_down = 0.95;     // shelving succeeds given |down>
    double p_false_shelve_up = 0.002;
    double prep_success = 0.14;
};

inline void validate(const FieldNoiseParams& p) {
    if (p.ou_sigma < 0) throw std::invalid_argument("field noise: ou_sigma < 0");
    if (!(p.ou_tau > 0)) throw std::invalid_argument("field noise: ou_tau <= 0");
    if (p.lorentz_gamma < 0) throw std::invalid_argument("field noise: lorentz_gamma < 0");
}

inline void validate(const MotionalNoiseParams& p) {
    if (!(p.trap_freq > 0)) throw std::invalid_argument("motional noise: trap_freq <= 0");
    if (p.v0 < 0 || p.v_sigma < 0 || p.heating_rate < 0)
        throw std::invalid_argument("motional noise: negative parameter");
}

inline void validate(const ReadoutParams& p) {
    for (double v : {p.p_detect_down, p.p_false_shelve_up, p.prep_success})
        if (v < 0 || v > 1) throw std::invalid_argument("readout: probability outside [0,1]");
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck component, exactly stationary.
//
// Chain step:        x' = x rho + sigma sqrt(1-rho^2) xi,   rho = e^{-dt/tau}
// Time integral over a step, conditional on the left endpoint x:
//   E[I|x]     = x tau (1-rho)
//   Var(I|x)   = sigma^2 tau^2 (2 dt/tau - 3 + 4 rho - rho^2)
//   Cov(x',I|x)= sigma^2 tau (1-rho)^2
// (x', I) are sampled jointly so delays of any length relative to tau get the
// exact dephasing statistics; the quasi-static limit tau >> dt reduces to
// I = x dt.
// ---------------------------------------------------------------------------
class OuProcess {
public:
    OuProcess(double sigma, double tau) : sigma_(sigma), tau_(tau) {
        if (!(tau > 0)) throw std::invalid_argument("OuProcess: tau <= 0");
        if (sigma < 0) throw std::invalid_argument("OuProcess: sigma < 0");
    }

    static OuProcess started(double sigma, double tau, Philox& rng) {
        OuProcess p(sigma, tau);
        p.x_ = sigma > 0 ? sigma * rng.normal() : 0.0;
        return p;
    }

    double value() const { return x_; }
    void set_value(double x) { x_ = x; }

    // Advance by dt, returning the new value.
    double step(double dt, Philox& rng) {
        if (dt < 0) throw std::invalid_argument("OuProcess::step: dt < 0");
        if (dt == 0 || sigma_ == 0) return x_;
        const double rho = std::exp(-dt / tau_);
        x_ = x_ * rho + sigma_ * std::sqrt(1.0 - rho * rho) * rng.normal();
        return x_;
    }

    // Advance by dt and return the exact sample of integral x dt' over the step.
    double step_with_integral(double dt, Philox& rng) {
        if (dt < 0) throw std::invalid_argument("OuProcess::step_with_integral: dt < 0");
        if (dt == 0) return 0.0;
        if (sigma_ == 0) return 0.0;
        const double eps = dt / tau_;
        const double one_m_rho = -std::expm1(-eps);
        const double rho = 1.0 - one_m_rho;
        const double one_m_rho2 = one_m_rho * (1.0 + rho);
        const double xi1 = rng.normal();
        const double xi2 = rng.normal();
        const double x0 = x_;
        x_ = x0 * rho + sigma_ * std::sqrt(one_m_rho2) * xi1;
        // q = 2 eps - 3 + 4 rho - rho^2; the direct form cancels to O(eps^3),
        // so use the series below eps ~ 1e-3.
        const double q = eps < 1e-3
                             ? eps * eps * eps * (2.0 / 3.0 - 0.5 * eps + (7.0 / 30.0) * eps * eps)
                             : 2.0 * eps - 3.0 + 4.0 * rho - rho * rho;
        const double var_i = sigma_ * sigma_ * tau_ * tau_ * q;
        const double cov = sigma_ * sigma_ * tau_ * one_m_rho * one_m_rho;
        const double a = cov / (sigma_ * std::sqrt(one_m_rho2));
        const double b2 = var_i - a * a;
        const double b = b2 > 0 ? std::sqrt(b2) : 0.0;
        return x0 * tau_ * one_m_rho + a * xi1 + b * xi2;
    }

private:
    double sigma_, tau_;
    double x_ = 0.0;
};

// B(t_k) = b0 + drift t_k + x_k with x the stationary OU chain over the given
// times. The per-shot Lorentzian component is not part of this op; it is drawn
// per shot by the executor.
inline std::vector<double> sample_field(const FieldNoiseParams& p, std::span<const double> times,
                                        Philox& rng) {
    validate(p);
    for (size_t k = 1; k < times.size(); ++k)
        if (times[k] < times[k - 1]) throw std::invalid_argument("sample_field: times decrease");
    std::vector<double> out;
    out.reserve(times.size());
    OuProcess ou = OuProcess::started(p.ou_sigma, p.ou_tau, rng);
    double t_prev = 0;
    bool first = true;
    for (double t : times) {
        if (!first) ou.step(t - t_prev, rng);
        first = false;
        t_prev = t;
        out.push_back(p.b0 + p.drift_rate * t + ou.value());
    }
    return out;
}

// Static heavy-tailed per-shot field offset: Cauchy of half-width gamma,
// truncated at +-500 gamma (quantile transform of a symmetric uniform).
inline double lorentz_field_offset(double gamma, Philox& rng) {
    if (gamma <= 0) return 0.0;
    // atan(500)*2/pi
    constexpr double q = 0.99872719330650899;
    return gamma * std::tan(1.5707963267948966 * q * rng.uniform_sym());
}

// 2 pi (f_clock(b) - f_lo), rad/s
inline double qubit_detuning_from_field(const HyperfineConstants& c, double b, double lo_freq) {
    return 2.0 * 3.14159265358979323846 * (clock_transition_frequency(c, b) - lo_freq);
}

// Axial frequency shift for an end-cap voltage excursion dv under omega ~ sqrt(V):
// 2 pi f_trap (sqrt(1 + dv/v0) - 1), rad/s
inline double trap_freq_shift(const MotionalNoiseParams& p, double dv) {
    validate(p);
    const double r = 1.0 + dv / p.v0;
    if (r <= 0) throw std::domain_error("trap_freq_shift: 1 + dv/v0 <= 0");
    return 2.0 * 3.14159265358979323846 * p.trap_freq * (std::sqrt(r) - 1.0);
}

namespace detail {

// Normalized raising map: amp'(q,n+1) = amp(q,n) sqrt(n+1), renormalized.
inline void apply_raising(IonState& s) {
    if (s.fock_population(s.n_max()) > 1e-12)
        throw std::runtime_error("heating: jump would exceed n_max truncation");
    for (int q = 0; q <= 1; ++q)
        for (int n = s.n_max(); n >= 1; --n) s.at(q, n) = s.at(q, n - 1) * std::sqrt(double(n));
    for (int q = 0; q <= 1; ++q) s.at(q, 0) = 0.0;
    s.normalize();
}

// Normalized lowering map: amp'(q,n-1) = amp(q,n) sqrt(n), renormalized.
inline void apply_lowering(IonState& s) {
    for (int q = 0; q <= 1; ++q) {
        for (int n = 0; n + 1 <= s.n_max(); ++n) s.at(q, n) = s.at(q, n + 1) * std::sqrt(n + 1.0);
        s.at(q, s.n_max()) = 0.0;
    }
    s.normalize();
}

}  // namespace detail

// Two-sided jump unraveling of an infinite-temperature reservoir: upward rate
// rate*(⟨n⟩+1), downward rate*⟨n⟩, exponential waiting times, each jump applies
// the normalized raising/lowering map. Mean occupation grows at d<n>/dt = rate.
// `between(state, dt)` is applied to the no-jump segments in time order, so
// coherent phase evolution can be interleaved with the jumps.
template <class Between>
IonState evolve_with_heating(IonState state, double duration, double rate, Philox& rng,
                             Between&& between) {
    if (duration < 0) throw std::invalid_argument("heating: duration < 0");
    double t = 0;
    while (true) {
        const double n_mean = state.mean_n();
        const double r_up = rate * (n_mean + 1.0);
        const double r_dn = rate * n_mean;
        const double r_tot = r_up + r_dn;
        if (r_tot <= 0) break;
        const double wait = rng.exponential(r_tot);
        if (t + wait >= duration) break;
        between(state, wait);
        t += wait;
        if (rng.uniform() * r_tot < r_up)
            detail::apply_raising(state);
        else
            detail::apply_lowering(state);
    }
    between(state, duration - t);
    return state;
}

inline IonState heating_jumps(const IonState& state, double duration, double rate, Philox& rng) {
    return evolve_with_heating(state, duration, rate, rng, [](IonState&, double) {});
}

// Binary asymmetric readout channel (shelving of |down>).
inline bool readout_channel(bool true_up, const ReadoutParams& p, Philox& rng) {
    if (true_up) return rng.uniform() < 1.0 - p.p_false_shelve_up;
    return !(rng.uniform() < p.p_detect_down);
}

}  // namespace ionlab
