#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "ionlab/ion_state.hpp"

namespace ionlab {

enum class PulseKind { carrier, red_sideband };

struct PulseParams {
    double rabi_frequency = 0;  // rad/s (bare carrier Rabi frequency)
    double duration = 0;        // s
    double phase = 0;           // rad
    double detuning = 0;        // rad/s
    PulseKind kind = PulseKind::carrier;
    double lamb_dicke = 0.1;    // sideband coupling scale only
};

inline void validate_pulse(const PulseParams& p) {
    if (p.duration < 0) throw std::invalid_argument("pulse: duration < 0");
    if (p.rabi_frequency < 0) throw std::invalid_argument("pulse: rabi_frequency < 0");
    if (p.kind == PulseKind::red_sideband && !(p.lamb_dicke > 0 && p.lamb_dicke < 1))
        throw std::invalid_argument("pulse: lamb_dicke outside (0,1)");
}

namespace detail {

// exp(-i t [ (Omega/2)(cos phi sx + sin phi sy) + (delta/2) sz' ]) with
// sz' = diag(-1,+1) on (lower, upper), so the Omega->0 limit matches
// free_evolution's e^{-i delta t} on the upper member up to a global phase.
// Convention check: delta=0 gives R(theta,phi) = cos(theta/2) I
//                   - i sin(theta/2)(cos phi sx + sin phi sy), theta = Omega t.
struct TwoLevelU {
    std::complex<double> u00, u01, u10, u11;
};

inline TwoLevelU detuned_rabi(double omega, double delta, double t, double phi) {
    const double w = std::sqrt(omega * omega + delta * delta);
    const double half = 0.5 * w * t;
    const double c = std::cos(half);
    // sin(half)/w, finite at w -> 0
    const double s_over_w = (w * t < 1e-8) ? 0.5 * t : std::sin(half) / w;
    const std::complex<double> i(0, 1);
    const std::complex<double> eip = std::exp(i * phi);
    TwoLevelU u;
    u.u00 = c + i * delta * s_over_w;
    u.u11 = c - i * delta * s_over_w;
    u.u01 = -i * omega * s_over_w / eip;
    u.u10 = -i * omega * s_over_w * eip;
    return u;
}

inline void apply_pair(IonState& s, int lo_idx_q, int lo_idx_n, int hi_idx_q, int hi_idx_n,
                       const TwoLevelU& u) {
    auto a = s.at(lo_idx_q, lo_idx_n);
    auto b = s.at(hi_idx_q, hi_idx_n);
    s.at(lo_idx_q, lo_idx_n) = u.u00 * a + u.u01 * b;
    s.at(hi_idx_q, hi_idx_n) = u.u10 * a + u.u11 * b;
}

inline void require_normalized(const IonState& s, const char* who) {
    if (std::fabs(s.norm_sq() - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(who) + ": input state not normalized");
}

}  // namespace detail

// Two-level rotation on every (down,n)<->(up,n) pair; Fock index untouched.
inline IonState carrier_rotation(const IonState& state, const PulseParams& p) {
    if (p.kind != PulseKind::carrier) throw std::invalid_argument("carrier_rotation: wrong kind");
    validate_pulse(p);
    detail::require_normalized(state, "carrier_rotation");
    IonState s = state;
    const auto u = detail::detuned_rabi(p.rabi_frequency, p.detuning, p.duration, p.phase);
    for (int n = 0; n <= s.n_max(); ++n)
        detail::apply_pair(s, kQubitDown, n, kQubitUp, n, u);
    return s;
}

// Red sideband: couples |up,n> <-> |down,n+1> with Rabi frequency
// Omega * eta * sqrt(n+1); each pair sees the same detuning p.detuning, whose
// phase convention matches free_evolution (the n+1 member is the "upper").
// |down,0> has no partner and is untouched.
inline IonState sideband_rotation(const IonState& state, const PulseParams& p) {
    if (p.kind != PulseKind::red_sideband)
        throw std::invalid_argument("sideband_rotation: wrong kind");
    validate_pulse(p);
    detail::require_normalized(state, "sideband_rotation");
    if (state.n_max() < 2)
        throw std::invalid_argument("sideband_rotation: n_max must be >= 2 for leakage headroom");
    if (state.fock_population(state.n_max()) > 1e-4)
        throw std::runtime_error("sideband_rotation: truncation leak, population at n_max");
    IonState s = state;
    for (int n = 0; n + 1 <= s.n_max(); ++n) {
        const double coupling = p.rabi_frequency * p.lamb_dicke * std::sqrt(n + 1.0);
        const auto u = detail::detuned_rabi(coupling, p.detuning, p.duration, p.phase);
        detail::apply_pair(s, kQubitUp, n, kQubitDown, n + 1, u);
    }
    return s;
}

// amp(q,n) *= exp(-i (q*qubit_detuning + n*motional_detuning) tau)
inline IonState free_evolution(const IonState& state, double tau, double qubit_detuning,
                               double motional_detuning) {
    if (tau < 0) throw std::invalid_argument("free_evolution: tau < 0");
    IonState s = state;
    const std::complex<double> i(0, 1);
    for (int q = 0; q <= 1; ++q)
        for (int n = 0; n <= s.n_max(); ++n)
            s.at(q, n) *= std::exp(-i * ((q * qubit_detuning + n * motional_detuning) * tau));
    return s;
}

}  // namespace ionlab
