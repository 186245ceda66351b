#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace ionlab {

inline constexpr int kQubitDown = 0;  // 43Ca+: S1/2 (4,0); 40Ca+: S1/2 m=-1/2
inline constexpr int kQubitUp = 1;    // 43Ca+: S1/2 (3,0); 40Ca+: S1/2 m=+1/2

// Pure state of qubit (x) truncated axial Fock space.
// Amplitude layout: index(q, n) = q*(n_max+1) + n,  q in {down, up}, n in 0..n_max.
class IonState {
public:
    explicit IonState(int n_max) : n_max_(n_max), amp_(2 * (n_max + 1)) {
        if (n_max < 0) throw std::invalid_argument("IonState: n_max < 0");
    }

    static IonState basis(int n_max, int qubit, int n) {
        IonState s(n_max);
        s.at(qubit, n) = 1.0;
        return s;
    }

    int n_max() const { return n_max_; }
    int dim() const { return static_cast<int>(amp_.size()); }

    std::complex<double>& at(int qubit, int n) { return amp_[index(qubit, n)]; }
    const std::complex<double>& at(int qubit, int n) const { return amp_[index(qubit, n)]; }

    int index(int qubit, int n) const {
        if (qubit < 0 || qubit > 1 || n < 0 || n > n_max_)
            throw std::out_of_range("IonState: bad (qubit, n)");
        return qubit * (n_max_ + 1) + n;
    }

    double norm_sq() const {
        double s = 0;
        for (const auto& a : amp_) s += std::norm(a);
        return s;
    }

    void normalize() {
        double n = std::sqrt(norm_sq());
        if (n == 0) throw std::runtime_error("IonState: cannot normalize zero state");
        for (auto& a : amp_) a /= n;
    }

    // Sum_n |amp(up, n)|^2
    double population_up() const {
        double s = 0;
        for (int n = 0; n <= n_max_; ++n) s += std::norm(at(kQubitUp, n));
        return s;
    }

    double fock_population(int n) const {
        return std::norm(at(kQubitDown, n)) + std::norm(at(kQubitUp, n));
    }

    double mean_n() const {
        double s = 0;
        for (int n = 1; n <= n_max_; ++n) s += n * fock_population(n);
        return s;
    }

    // |<a|b>|^2, assuming both normalized
    double fidelity(const IonState& other) const {
        std::complex<double> ov = 0;
        for (int i = 0; i < dim(); ++i) ov += std::conj(amp_[i]) * other.amp_[i];
        return std::norm(ov);
    }

private:
    int n_max_;
    std::vector<std::complex<double>> amp_;
};

inline double measure_qubit_population(const IonState& s) { return s.population_up(); }

}  // namespace ionlab
