#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionlab/dataset.hpp"
#include "ionlab/noise.hpp"

namespace ionlab {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitPoint {
    double x, y, sigma;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> stderrs;
    std::vector<double> covariance;  // row-major n x n
    double chi_sq = 0;
    double reduced_chi_sq = 0;
    int n_points = 0;
    bool converged = false;
    bool flat = false;  // amplitude consistent with zero (flagged, not fatal)

    double value(const std::string& name) const { return values[index(name)]; }
    double stderr_of(const std::string& name) const { return stderrs[index(name)]; }
    double cov(int i, int j) const { return covariance[i * names.size() + j]; }
    int index(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("no fit parameter '" + name + "'");
    }
};

namespace detail {

// Gauss-Jordan solve / invert for tiny systems. Returns false when singular.
inline bool solve_sym(std::vector<double> a, std::vector<double>& b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
        if (std::fabs(a[piv * n + col]) < 1e-300) return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        const double d = a[col * n + col];
        for (int c = 0; c < n; ++c) a[col * n + c] /= d;
        b[col] /= d;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            if (f == 0) continue;
            for (int c = 0; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    return true;
}

inline bool invert_sym(std::vector<double> a, std::vector<double>& inv, int n) {
    inv.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
        if (std::fabs(a[piv * n + col]) < 1e-300) return false;
        if (piv != col)
            for (int c = 0; c < n; ++c) {
                std::swap(a[piv * n + c], a[col * n + c]);
                std::swap(inv[piv * n + c], inv[col * n + c]);
            }
        const double d = a[col * n + col];
        for (int c = 0; c < n; ++c) {
            a[col * n + c] /= d;
            inv[col * n + c] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col];
            if (f == 0) continue;
            for (int c = 0; c < n; ++c) {
                a[r * n + c] -= f * a[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    return true;
}

using ModelFn = std::function<double(double, const std::vector<double>&)>;
using JacFn = std::function<void(double, const std::vector<double>&, double*)>;
using GuardFn = std::function<bool(const std::vector<double>&)>;

inline double chi_sq_of(std::span<const FitPoint> pts, const ModelFn& f,
                        const std::vector<double>& p) {
    double s = 0;
    for (const auto& pt : pts) {
        const double r = (pt.y - f(pt.x, p)) / pt.sigma;
        s += r * r;
    }
    return s;
}

// Damped Gauss-Newton (Levenberg-Marquardt). `guard` rejects parameter vectors
// outside the model's domain.
inline bool levenberg_marquardt(std::span<const FitPoint> pts, const ModelFn& f, const JacFn& jac,
                                std::vector<double>& p, const GuardFn& guard = nullptr,
                                int max_iter = 200) {
    const int n = static_cast<int>(p.size());
    double lambda = 1e-3;
    double chi = chi_sq_of(pts, f, p);
    std::vector<double> row(n), jtj(n * n), jtr(n);
    int stall = 0;
    for (int it = 0; it < max_iter; ++it) {
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        for (const auto& pt : pts) {
            jac(pt.x, p, row.data());
            const double r = (pt.y - f(pt.x, p)) / pt.sigma;
            for (int i = 0; i < n; ++i) {
                const double ji = row[i] / pt.sigma;
                jtr[i] += ji * r;
                for (int j = i; j < n; ++j) jtj[i * n + j] += ji * row[j] / pt.sigma;
            }
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) jtj[i * n + j] = jtj[j * n + i];

        bool improved = false;
        for (int tries = 0; tries < 12 && !improved; ++tries) {
            std::vector<double> a = jtj, delta = jtr;
            for (int i = 0; i < n; ++i) a[i * n + i] += lambda * std::max(jtj[i * n + i], 1e-30);
            if (!solve_sym(a, delta, n)) {
                lambda *= 10;
                continue;
            }
            std::vector<double> cand(n);
            for (int i = 0; i < n; ++i) cand[i] = p[i] + delta[i];
            if (guard && !guard(cand)) {
                lambda *= 10;
                continue;
            }
            const double chi_cand = chi_sq_of(pts, f, cand);
            if (chi_cand <= chi) {
                improved = true;
                const double drop = chi - chi_cand;
                p = std::move(cand);
                chi = chi_cand;
                lambda = std::max(lambda / 3.0, 1e-12);
                if (drop < 1e-10 * std::max(chi, 1.0)) {
                    if (++stall >= 2) return true;
                } else {
                    stall = 0;
                }
            } else {
                lambda *= 10;
            }
        }
        if (!improved) return true;  // no downhill direction left
    }
    return true;
}

inline FitResult finalize(std::span<const FitPoint> pts, const ModelFn& f, const JacFn& jac,
                          const std::vector<double>& p, std::vector<std::string> names) {
    const int n = static_cast<int>(p.size());
    std::vector<double> row(n), jtj(n * n, 0.0);
    for (const auto& pt : pts) {
        jac(pt.x, p, row.data());
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                jtj[i * n + j] += row[i] * row[j] / (pt.sigma * pt.sigma);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) jtj[i * n + j] = jtj[j * n + i];

    FitResult res;
    res.names = std::move(names);
    res.values = p;
    res.n_points = static_cast<int>(pts.size());
    res.chi_sq = chi_sq_of(pts, f, p);
    const int dof = res.n_points - n;
    res.reduced_chi_sq = dof > 0 ? res.chi_sq / dof : 0.0;
    std::vector<double> inv;
    if (invert_sym(jtj, inv, n)) {
        res.covariance = inv;
        res.stderrs.resize(n);
        for (int i = 0; i < n; ++i) res.stderrs[i] = std::sqrt(std::max(inv[i * n + i], 0.0));
        res.converged = true;
    } else {
        res.covariance.assign(n * n, 0.0);
        res.stderrs.assign(n, std::numeric_limits<double>::infinity());
        res.converged = false;
    }
    return res;
}

}  // namespace detail

// sqrt(p(1-p)/shots) with add-one smoothing, p = (ups+1)/(shots+2); never zero.
inline double binomial_stderr(long ups, long shots) {
    if (shots < 1 || ups < 0 || ups > shots)
        throw std::invalid_argument("binomial_stderr: need 0 <= ups <= shots, shots >= 1");
    const double p = (ups + 1.0) / (shots + 2.0);
    return std::sqrt(p * (1.0 - p) / shots);
}

// -----------------------------------------------------------------------------
// Weighted sinusoid fit p(x) = baseline + (amplitude/2) cos(2 pi x / period + phase).
// `amplitude` is peak-to-peak. Multimodal in period and phase, so the start
// comes from a coarse periodogram (weighted cos/sin linear fit per trial
// period) before the damped Gauss-Newton refinement.
// -----------------------------------------------------------------------------
inline FitResult fit_sinusoid(std::span<const FitPoint> pts) {
    if (pts.size() < 5) throw FitError("fit_sinusoid: need at least 5 points");
    for (const auto& p : pts)
        if (!(p.sigma > 0)) throw FitError("fit_sinusoid: sigma must be positive");

    double x_min = pts[0].x, x_max = pts[0].x;
    double min_dx = std::numeric_limits<double>::infinity();
    std::vector<double> xs;
    for (const auto& p : pts) {
        x_min = std::min(x_min, p.x);
        x_max = std::max(x_max, p.x);
        xs.push_back(p.x);
    }
    std::sort(xs.begin(), xs.end());
    for (size_t i = 1; i < xs.size(); ++i)
        if (xs[i] > xs[i - 1]) min_dx = std::min(min_dx, xs[i] - xs[i - 1]);
    const double span = x_max - x_min;
    if (!(span > 0)) throw FitError("fit_sinusoid: degenerate x range");

    // periodogram: weighted LSQ of b + c cos + s sin at trial periods
    struct Trial {
        double period, ssr, b, amp, phase;
    };
    std::vector<Trial> trials;
    const double p_lo = std::max(2.0 * min_dx, span / 24.0);
    const double p_hi = 4.0 * span;
    for (int k = 0; k < 96; ++k) {
        const double period = p_lo * std::pow(p_hi / p_lo, k / 95.0);
        double m[9] = {0}, v[3] = {0};
        for (const auto& p : pts) {
            const double w = 1.0 / (p.sigma * p.sigma);
            const double th = 2 * M_PI * p.x / period;
            const double c = std::cos(th), s = std::sin(th);
            const double g[3] = {1.0, c, s};
            for (int i = 0; i < 3; ++i) {
                v[i] += w * g[i] * p.y;
                for (int j = 0; j < 3; ++j) m[i * 3 + j] += w * g[i] * g[j];
            }
        }
        std::vector<double> a(m, m + 9), rhs(v, v + 3);
        if (!detail::solve_sym(a, rhs, 3)) continue;
        double ssr = 0;
        for (const auto& p : pts) {
            const double th = 2 * M_PI * p.x / period;
            const double fit = rhs[0] + rhs[1] * std::cos(th) + rhs[2] * std::sin(th);
            const double r = (p.y - fit) / p.sigma;
            ssr += r * r;
        }
        trials.push_back({period, ssr, rhs[0], 2.0 * std::hypot(rhs[1], rhs[2]),
                          std::atan2(-rhs[2], rhs[1])});
    }
    if (trials.empty()) throw FitError("fit_sinusoid: periodogram failed");
    std::sort(trials.begin(), trials.end(), [](auto& a, auto& b) { return a.ssr < b.ssr; });

    auto model = [](double x, const std::vector<double>& p) {
        return p[0] + 0.5 * p[1] * std::cos(2 * M_PI * x / p[2] + p[3]);
    };
    auto jac = [](double x, const std::vector<double>& p, double* row) {
        const double th = 2 * M_PI * x / p[2] + p[3];
        row[0] = 1.0;
        row[1] = 0.5 * std::cos(th);
        row[2] = 0.5 * p[1] * std::sin(th) * 2 * M_PI * x / (p[2] * p[2]);
        row[3] = -0.5 * p[1] * std::sin(th);
    };
    // keep the period above the sampling alias limit and below the
    // amplitude/period degeneracy of near-linear long-period solutions
    const double per_min = 2.05 * min_dx, per_max = 4.0 * span;
    auto guard = [per_min, per_max](const std::vector<double>& p) {
        return p[2] > per_min && p[2] < per_max;
    };

    std::vector<double> best;
    double best_chi = std::numeric_limits<double>::infinity();
    const size_t n_seed = std::min<size_t>(5, trials.size());
    for (size_t k = 0; k < n_seed; ++k) {
        for (double dphi : {0.0, M_PI / 2, M_PI, 3 * M_PI / 2}) {
            std::vector<double> p{trials[k].b, trials[k].amp, trials[k].period,
                                  trials[k].phase + dphi};
            detail::levenberg_marquardt(pts, model, jac, p, guard);
            const double chi = detail::chi_sq_of(pts, model, p);
            if (chi < best_chi) {
                best_chi = chi;
                best = p;
            }
        }
    }

    // canonical form: amplitude >= 0, phase in (-pi, pi], period > 0
    if (best[1] < 0) {
        best[1] = -best[1];
        best[3] += M_PI;
    }
    best[3] = std::remainder(best[3], 2 * M_PI);
    auto res = detail::finalize(pts, model, jac, best,
                                {"baseline", "amplitude", "period", "phase"});
    if (res.converged && best[1] < 2.0 * res.stderrs[1]) res.flat = true;
    return res;
}

// Weighted fit of amplitude(tau) = intercept * exp(-tau / decay_constant).
inline FitResult fit_exponential_decay(std::span<const FitPoint> pts) {
    if (pts.size() < 3) throw FitError("fit_exponential_decay: need at least 3 points");
    for (const auto& p : pts) {
        if (p.x < 0) throw FitError("fit_exponential_decay: tau < 0");
        if (!(p.sigma > 0)) throw FitError("fit_exponential_decay: sigma must be positive");
        if (p.y <= 0) throw FitError("fit_exponential_decay: non-positive amplitude data");
    }
    // log-space weighted line for the start values
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
        const double w = std::pow(p.y / p.sigma, 2);
        const double ly = std::log(p.y);
        sw += w;
        sx += w * p.x;
        sy += w * ly;
        sxx += w * p.x * p.x;
        sxy += w * p.x * ly;
    }
    const double det = sw * sxx - sx * sx;
    double slope = det != 0 ? (sw * sxy - sx * sy) / det : -1e-3;
    if (slope >= 0) slope = -1e-3;  // non-decaying start still allowed to converge
    std::vector<double> p{std::exp((sy - slope * sx) / sw), -1.0 / slope};

    auto model = [](double x, const std::vector<double>& q) { return q[0] * std::exp(-x / q[1]); };
    auto jac = [](double x, const std::vector<double>& q, double* row) {
        const double e = std::exp(-x / q[1]);
        row[0] = e;
        row[1] = q[0] * e * x / (q[1] * q[1]);
    };
    auto guard = [](const std::vector<double>& q) { return q[1] > 0 && q[0] > 0; };
    if (!detail::levenberg_marquardt(pts, model, jac, p, guard))
        throw FitError("fit_exponential_decay: no convergence");
    return detail::finalize(pts, model, jac, p, {"intercept", "decay_constant"});
}

// Weighted straight line y = intercept + slope x (closed form).
inline FitResult fit_line(std::span<const FitPoint> pts) {
    if (pts.size() < 2) throw FitError("fit_line: need at least 2 points");
    auto model = [](double x, const std::vector<double>& p) { return p[0] + p[1] * x; };
    auto jac = [](double x, const std::vector<double>&, double* row) {
        row[0] = 1.0;
        row[1] = x;
    };
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
        if (!(p.sigma > 0)) throw FitError("fit_line: sigma must be positive");
        const double w = 1.0 / (p.sigma * p.sigma);
        sw += w;
        sx += w * p.x;
        sy += w * p.y;
        sxx += w * p.x * p.x;
        sxy += w * p.x * p.y;
    }
    const double det = sw * sxx - sx * sx;
    if (det == 0) throw FitError("fit_line: degenerate x values");
    std::vector<double> p{(sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det};
    return detail::finalize(pts, model, jac, p, {"intercept", "slope"});
}

// Weighted linear fit of control baselines against in-sequence delay; the
// caller supplies baselines already normalized by the fitted fringe amplitude.
inline FitResult fit_baseline_drift(std::span<const FitPoint> pts) { return fit_line(pts); }

// -t / ln(a): exponential-model coherence time implied by amplitude >= a at t.
inline double coherence_lower_bound_to_t2(double amp_lower, double t) {
    if (!(amp_lower > 0 && amp_lower < 1))
        throw std::domain_error("coherence_lower_bound_to_t2: amplitude must be in (0,1)");
    return -t / std::log(amp_lower);
}

struct Measurement {
    double value = 0;
    double stderr_ = 0;
};

struct Combined {
    double value = 0;
    double stderr_ = 0;
    double scatter_chi_sq = 0;  // sum((v - mean)^2 / sigma^2)
    int n = 0;
};

inline Combined combine_runs(std::span<const Measurement> ms) {
    if (ms.empty()) throw std::invalid_argument("combine_runs: empty input");
    double sw = 0, swv = 0;
    for (const auto& m : ms) {
        if (!(m.stderr_ > 0)) throw std::invalid_argument("combine_runs: stderr must be positive");
        const double w = 1.0 / (m.stderr_ * m.stderr_);
        sw += w;
        swv += w * m.value;
    }
    Combined c;
    c.value = swv / sw;
    c.stderr_ = 1.0 / std::sqrt(sw);
    c.n = static_cast<int>(ms.size());
    for (const auto& m : ms) c.scatter_chi_sq += std::pow((m.value - c.value) / m.stderr_, 2);
    return c;
}

// ---------------------------------------------------------------------------
// Dataset-level helpers
// ---------------------------------------------------------------------------

inline std::vector<FitPoint> fringe_points(const FringeDataset& d, const std::string& role) {
    std::vector<FitPoint> pts;
    for (const auto& p : d.points) {
        if (p.role != role || p.shots == 0) continue;
        pts.push_back({p.scan_value, double(p.ups) / p.shots, binomial_stderr(p.ups, p.shots)});
    }
    return pts;
}

inline double eval_sinusoid(const FitResult& fit, double x) {
    return fit.value("baseline") +
           0.5 * fit.value("amplitude") *
               std::cos(2 * M_PI * x / fit.value("period") + fit.value("phase"));
}

// One reweighting pass with model-based binomial errors. Raw binomial sigma
// estimates are correlated with the count fluctuations (an upward fluctuation
// near the fringe extremum shrinks its own error bar), which biases the fitted
// amplitude upward by a few tenths of a percent; weights from the fitted model
// remove that correlation.
inline std::vector<FitPoint> fringe_points_irls(const FringeDataset& d, const std::string& role) {
    auto pts = fringe_points(d, role);
    std::vector<long> shots;
    for (const auto& p : d.points)
        if (p.role == role && p.shots > 0) shots.push_back(p.shots);
    auto fit = fit_sinusoid(pts);
    for (size_t i = 0; i < pts.size(); ++i) {
        const double floor_p = 1.0 / (shots[i] + 2.0);
        const double pm = std::clamp(eval_sinusoid(fit, pts[i].x), floor_p, 1.0 - floor_p);
        pts[i].sigma = std::sqrt(pm * (1.0 - pm) / shots[i]);
    }
    return pts;
}

// Invert the binary readout channel: p = (p_obs - P(up|down)) / (P(up|up) - P(up|down)).
inline std::vector<FitPoint> readout_corrected_points(const FringeDataset& d,
                                                      const std::string& role,
                                                      const ReadoutParams& r) {
    const double e0 = 1.0 - r.p_detect_down;
    const double e1 = 1.0 - r.p_false_shelve_up;
    const double slope = e1 - e0;
    if (slope <= 0) throw std::invalid_argument("readout correction: non-invertible channel");
    auto pts = fringe_points(d, role);
    for (auto& p : pts) {
        p.y = (p.y - e0) / slope;
        p.sigma /= slope;
    }
    return pts;
}

struct AmplitudeRatio {
    double ratio = 0;
    double stderr_ = 0;
    FitResult test_fit;
    FitResult control_fit;   // valid when the control is fringed (phase scans)
    bool control_fringed = false;
};

// Test/control fringe amplitude ratio, both roles fringed (phase scans):
// ratio of fitted peak-to-peak amplitudes.
inline AmplitudeRatio amplitude_ratio_fringed(std::span<const FitPoint> test_pts,
                                              std::span<const FitPoint> ctrl_pts) {
    AmplitudeRatio out;
    out.control_fringed = true;
    out.test_fit = fit_sinusoid(test_pts);
    out.control_fit = fit_sinusoid(ctrl_pts);
    const double amp = out.test_fit.value("amplitude");
    const double s_amp = out.test_fit.stderr_of("amplitude");
    const double ca = out.control_fit.value("amplitude");
    const double s_ca = out.control_fit.stderr_of("amplitude");
    if (ca == 0) throw FitError("amplitude_ratio: control amplitude is zero");
    out.ratio = std::fabs(amp / ca);
    out.stderr_ = out.ratio * std::hypot(s_amp / amp, s_ca / ca);
    return out;
}

// Frequency scans: the control sits flat at the fringe extremum, so the full
// swing is twice the distance from the control level to the test baseline and
// ratio = amplitude / (2 |control - baseline|). Like the fringed form, any
// affine readout miscalibration applied to control and test alike cancels.
inline AmplitudeRatio amplitude_ratio_flat(std::span<const FitPoint> test_pts,
                                           double control_level, double control_err) {
    AmplitudeRatio out;
    out.control_fringed = false;
    out.test_fit = fit_sinusoid(test_pts);
    const double amp = out.test_fit.value("amplitude");
    const double s_amp = out.test_fit.stderr_of("amplitude");
    const double b = out.test_fit.value("baseline");
    const double s_b = out.test_fit.stderr_of("baseline");
    const int ia = out.test_fit.index("amplitude"), ib = out.test_fit.index("baseline");
    const double cov_ab = out.test_fit.cov(ia, ib);
    const double denom = control_level - b;
    if (denom == 0) throw FitError("amplitude_ratio: control equals baseline");
    const double r = std::fabs(amp / (2.0 * denom));
    // dr/dA = r/A, dr/db = r/denom, dr/dc = -r/denom
    const double var =
        r * r * ((s_amp * s_amp) / (amp * amp) +
                 (s_b * s_b + control_err * control_err) / (denom * denom) +
                 2.0 * cov_ab / (amp * denom));
    out.ratio = r;
    out.stderr_ = std::sqrt(std::max(var, 0.0));
    return out;
}

inline AmplitudeRatio amplitude_ratio(const FringeDataset& d, bool control_fringed) {
    auto test_pts = fringe_points_irls(d, "test");
    if (control_fringed)
        return amplitude_ratio_fringed(test_pts, fringe_points_irls(d, "control"));
    long shots = 0, ups = 0;
    for (const auto& p : d.points)
        if (p.role == "control") {
            shots += p.shots;
            ups += p.ups;
        }
    if (shots == 0) throw FitError("amplitude_ratio: no control shots");
    return amplitude_ratio_flat(test_pts, double(ups) / shots, binomial_stderr(ups, shots));
}

inline nlohmann::json fit_report_json(const std::string& model, const FitResult& r,
                                      const std::string& inputs_digest) {
    nlohmann::json params = nlohmann::json::object();
    for (size_t i = 0; i < r.names.size(); ++i)
        params[r.names[i]] = {{"value", r.values[i]}, {"stderr", r.stderrs[i]}};
    return nlohmann::json{{"model", model},
                          {"params", params},
                          {"reduced_chi_sq", r.reduced_chi_sq},
                          {"n_points", r.n_points},
                          {"inputs_digest", inputs_digest},
                          {"converged", r.converged},
                          {"error_model", "gaussian-propagation"}};
}

}  // namespace ionlab
