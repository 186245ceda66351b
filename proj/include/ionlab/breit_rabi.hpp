#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ionlab {

// Ground-level hyperfine manifold of a J=1/2 ion in a weak magnetic field.
// Defaults are the 43Ca+ 4S1/2 values: I = 7/2, F = 3 and 4.
struct HyperfineConstants {
    double nu_hf = 3225608286.4;        // Hz, zero-field splitting
    double g_j = 2.00225664;            // electronic g-factor
    double g_i_prime = -2.05e-4;        // nuclear g-factor, Bohr-magneton units
    double i_spin = 3.5;                // nuclear spin
    double mu_b_over_h = 1.3996245042e6;  // Hz/G
};

struct LevelLabel {
    int f;    // total angular momentum, i_spin +- 1/2
    int m_f;  // -f..f
};

inline LevelLabel clock_upper() { return {4, 0}; }
inline LevelLabel clock_lower() { return {3, 0}; }
inline LevelLabel stretch_upper() { return {4, 4}; }
inline LevelLabel stretch_lower() { return {3, 3}; }

inline void validate_label(const HyperfineConstants& c, LevelLabel lvl) {
    int f_low = static_cast<int>(c.i_spin - 0.5);
    int f_high = static_cast<int>(c.i_spin + 0.5);
    if (lvl.f != f_low && lvl.f != f_high)
        throw std::domain_error("level label: F=" + std::to_string(lvl.f) + " not in {" +
                                std::to_string(f_low) + "," + std::to_string(f_high) + "}");
    if (std::abs(lvl.m_f) > lvl.f)
        throw std::domain_error("level label: |m_F| > F");
}

// E/h in Hz.  E = -nu/(2(2I+1)) + g_i' muB m B +- (nu/2) sqrt(1 + 4 m x/(2I+1) + x^2),
// x = (g_j - g_i') muB B / nu, upper sign for the upper manifold (F = I+1/2).
// Stretch states m = +-(I+1/2) take the exact linear branch (1 +- x), where the
// radicand is a perfect square and the sqrt would cancel catastrophically.
inline double breit_rabi_energy(const HyperfineConstants& c, LevelLabel lvl, double b) {
    validate_label(c, lvl);
    if (b < 0) throw std::domain_error("breit_rabi_energy: b < 0");
    const double two_i_p1 = 2.0 * c.i_spin + 1.0;
    const double x = (c.g_j - c.g_i_prime) * c.mu_b_over_h * b / c.nu_hf;
    const double base = -c.nu_hf / (2.0 * two_i_p1) + c.g_i_prime * c.mu_b_over_h * lvl.m_f * b;
    const bool upper = lvl.f == static_cast<int>(c.i_spin + 0.5);
    const double sign = upper ? 1.0 : -1.0;
    if (upper && std::abs(lvl.m_f) == lvl.f) {
        const double lin = 1.0 + (lvl.m_f > 0 ? x : -x);
        if (lin < 0) throw std::domain_error("breit_rabi_energy: beyond stretch branch");
        return base + sign * 0.5 * c.nu_hf * lin;
    }
    const double rad = 1.0 + 4.0 * lvl.m_f * x / two_i_p1 + x * x;
    if (rad < 0) throw std::domain_error("breit_rabi_energy: negative radicand");
    return base + sign * 0.5 * c.nu_hf * std::sqrt(rad);
}

inline double transition_frequency(const HyperfineConstants& c, LevelLabel upper, LevelLabel lower,
                                   double b) {
    validate_label(c, upper);
    validate_label(c, lower);
    if (upper.f == lower.f)
        throw std::domain_error("transition_frequency: labels must be in opposite F manifolds");
    return breit_rabi_energy(c, upper, b) - breit_rabi_energy(c, lower, b);
}

inline double clock_transition_frequency(const HyperfineConstants& c, double b) {
    return transition_frequency(c, clock_upper(), clock_lower(), b);
}

inline double stretch_transition_frequency(const HyperfineConstants& c, double b) {
    return transition_frequency(c, stretch_upper(), stretch_lower(), b);
}

// d f_clock / dB in Hz/G, symmetric difference (one-sided at b = 0).
// The step scales with b so the quadratic term cannot alias into the slope
// near zero field.
inline double clock_sensitivity(const HyperfineConstants& c, double b) {
    const double h = std::max(1e-7, 1e-6 * b);
    const double bl = std::max(0.0, b - h);
    return (clock_transition_frequency(c, b + h) - clock_transition_frequency(c, bl)) /
           (b + h - bl);
}

// Invert the stretch transition on its monotone branch 0 <= b <= 100 G by bisection.
inline double field_from_stretch_frequency(const HyperfineConstants& c, double f_meas) {
    if (f_meas < c.nu_hf)
        throw std::domain_error("field_from_stretch_frequency: f below zero-field splitting");
    double lo = 0.0, hi = 100.0;
    if (f_meas > stretch_transition_frequency(c, hi))
        throw std::domain_error("field_from_stretch_frequency: f beyond 100 G branch");
    // 0.1 Hz on a ~2.45 MHz/G slope; bisection is ~50 iterations, all cheap.
    while (true) {
        double mid = 0.5 * (lo + hi);
        double f = stretch_transition_frequency(c, mid);
        if (std::fabs(f - f_meas) < 0.1 || hi - lo < 1e-12) return mid;
        (f < f_meas ? lo : hi) = mid;
    }
}

// Given a measured clock frequency at a measured field, solve for the zero-field
// splitting nu such that the Breit-Rabi clock frequency reproduces the measurement.
// Fixed-point iteration in nu; x depends on nu so the problem is self-consistent.
inline double extrapolate_zero_field_splitting(const HyperfineConstants& base,
                                               double clock_freq_meas, double b_meas) {
    if (b_meas < 0) throw std::domain_error("extrapolate_zero_field_splitting: b < 0");
    HyperfineConstants c = base;
    double nu = clock_freq_meas;
    for (int it = 0; it < 100; ++it) {
        c.nu_hf = nu;
        double f = clock_transition_frequency(c, b_meas);
        double next = nu * (clock_freq_meas / f);
        if (std::fabs(next - nu) < 0.01) return next;
        nu = next;
    }
    throw std::runtime_error("extrapolate_zero_field_splitting: no convergence in 100 iterations");
}

}  // namespace ionlab
