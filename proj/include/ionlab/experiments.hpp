#pragma once

#include <cmath>
#include <string>

#include "ionlab/config.hpp"
#include "ionlab/execute.hpp"
#include "ionlab/fit.hpp"

namespace ionlab {

namespace detail {

inline int count_pulses(const std::vector<SequenceOp>& seq, const char* channel_prefix) {
    int n = 0;
    for (const auto& op : seq)
        if (op.kind == SequenceOp::Kind::pulse && op.channel.rfind(channel_prefix, 0) == 0) ++n;
    return n;
}

inline double fixed_delay_total(const std::vector<SequenceOp>& seq) {
    double t = 0;
    for (const auto& op : seq)
        if (op.kind == SequenceOp::Kind::delay && !op.delay_is_scan) t += op.delay_s;
    return t;
}

inline FringeDataset assemble(const RunConfig& cfg, std::vector<FringePoint> points,
                              double duration) {
    FringeDataset d;
    d.points = std::move(points);
    d.meta.seed = cfg.ctx.seed;
    d.meta.config_digest = cfg.digest;
    d.meta.experiment = cfg.experiment;
    d.meta.scan_variable = to_string(cfg.scan.variable);
    d.meta.duration_s = duration;
    d.meta.extra = cfg.extra_meta.is_null() ? nlohmann::json::object() : cfg.extra_meta;
    d.meta.extra["test_fixed_delay_s"] = fixed_delay_total(cfg.sequence);
    d.meta.extra["b0_gauss"] = cfg.ctx.field.b0;
    if (cfg.ctx.sideband_detuning_hz != 0)
        d.meta.extra["sideband_detuning_hz"] = cfg.ctx.sideband_detuning_hz;
    return d;
}

}  // namespace detail

inline FringeDataset run_generic(const RunConfig& cfg, int threads = 1) {
    auto plan = build_shot_plan(cfg.sequence, cfg.scan, cfg.ctx.pulses, cfg.overhead, cfg.ctx.seed);
    auto points = run_plan(plan, cfg.sequence, cfg.scan, cfg.ctx, threads);
    return detail::assemble(cfg, std::move(points), plan.total_duration);
}

inline FringeDataset run_hyperfine_ramsey(const RunConfig& cfg, int threads = 1) {
    if (cfg.scan.variable == ScanVariable::delay_offset)
        throw ConfigError("hyperfine_ramsey: scan variable must be frequency or phase");
    if (detail::count_pulses(cfg.sequence, "microwave") +
            detail::count_pulses(cfg.sequence, "raman_carrier") < 2)
        throw ConfigError("hyperfine_ramsey: sequence needs two carrier pulses");
    return run_generic(cfg, threads);
}

inline FringeDataset run_spin_echo(const RunConfig& cfg, int threads = 1) {
    if (detail::count_pulses(cfg.sequence, "microwave") < 3)
        throw ConfigError("spin_echo: sequence needs pi/2, pi, pi/2 pulses");
    return run_generic(cfg, threads);
}

inline FringeDataset run_motional_ramsey(const RunConfig& cfg, int threads = 1) {
    if (cfg.scan.variable != ScanVariable::delay_offset)
        throw ConfigError("motional_ramsey: scan variable must be delay_offset");
    if (detail::count_pulses(cfg.sequence, "raman_rsb") < 2)
        throw ConfigError("motional_ramsey: sequence needs two red-sideband pulses");
    if (cfg.ctx.n_max < 2) throw ConfigError("motional_ramsey: run.n_max must be >= 2");
    return run_generic(cfg, threads);
}

// Rabi lineshape P(f) = baseline + amp * (W^2/(W^2+d^2)) sin^2(sqrt(W^2+d^2) t/2)
// with W the on-resonance Rabi frequency (rad/s), d = 2 pi (f - centre).
inline FitResult fit_rabi_line(std::span<const FitPoint> pts, double omega, double t_pulse) {
    if (pts.size() < 5) throw FitError("fit_rabi_line: need at least 5 points");
    auto model = [omega, t_pulse](double x, const std::vector<double>& p) {
        const double d = 2 * M_PI * (x - p[0]);
        const double w2 = omega * omega + d * d;
        const double s = std::sin(0.5 * std::sqrt(w2) * t_pulse);
        return p[2] + p[1] * (omega * omega / w2) * s * s;
    };
    auto jac = [&model](double x, const std::vector<double>& p, double* row) {
        // centre derivative numerically; amplitude/baseline are linear
        const double h = 1.0 + std::fabs(p[0]) * 1e-7;
        std::vector<double> pp = p, pm = p;
        pp[0] += h;
        pm[0] -= h;
        row[0] = (model(x, pp) - model(x, pm)) / (2 * h);
        row[1] = model(x, {p[0], 1.0, 0.0});
        row[2] = 1.0;
    };
    // centre start: weighted peak position
    double best_x = pts[0].x, best_y = -1e300;
    double lo = pts[0].x, hi = pts[0].x, y_min = 1e300;
    for (const auto& p : pts) {
        if (p.y > best_y) {
            best_y = p.y;
            best_x = p.x;
        }
        y_min = std::min(y_min, p.y);
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    std::vector<double> p0{best_x, std::max(best_y - y_min, 0.1), y_min};
    auto guard = [lo, hi](const std::vector<double>& p) { return p[0] >= lo && p[0] <= hi; };
    detail::levenberg_marquardt(pts, model, jac, p0, guard);
    auto res = detail::finalize(pts, model, jac, p0, {"centre", "amplitude", "baseline"});
    if (!res.converged) throw FitError("fit_rabi_line: singular fit");
    return res;
}

struct FieldCalibration {
    double b = 0;        // G
    double stderr_ = 0;  // G
    FitResult line_fit;
    FringeDataset dataset;
};

// Scans the field-sensitive stretch line, fits the resonance centre, and
// inverts it through the Breit-Rabi branch.
inline FieldCalibration run_field_calibration(const RunConfig& cfg, int threads = 1) {
    if (cfg.ctx.transition != Transition::stretch)
        throw ConfigError("field_calibration: lo.transition must be \"stretch\"");
    if (cfg.scan.variable != ScanVariable::frequency)
        throw ConfigError("field_calibration: scan variable must be frequency");
    int pulses = 0;
    const PulseParams* probe = nullptr;
    for (const auto& op : cfg.sequence)
        if (op.kind == SequenceOp::Kind::pulse) {
            ++pulses;
            probe = &lookup_pulse(cfg.ctx.pulses, op.pulse_name);
        }
    if (pulses != 1) throw ConfigError("field_calibration: sequence must contain one probe pulse");

    FieldCalibration out;
    out.dataset = run_generic(cfg, threads);
    auto pts = fringe_points(out.dataset, "test");
    if (pts.size() < 5) throw FitError("field_calibration: resonance not bracketed");
    out.line_fit = fit_rabi_line(pts, probe->rabi_frequency, probe->duration);
    const double f_base = stretch_transition_frequency(cfg.ctx.hfc, cfg.ctx.field.b0) +
                          cfg.ctx.lo_offset_hz;
    const double f_meas = f_base + out.line_fit.value("centre");
    const double span = pts.back().x - pts.front().x;
    if (out.line_fit.value("centre") <= pts.front().x + 1e-9 ||
        out.line_fit.value("centre") >= pts.front().x + span - 1e-9)
        throw FitError("field_calibration: resonance not bracketed by the scan");
    out.b = field_from_stretch_frequency(cfg.ctx.hfc, f_meas);
    // d b / d f from the local stretch slope
    const double db = 1e-4;
    const double dfdb = (stretch_transition_frequency(cfg.ctx.hfc, out.b + db) -
                         stretch_transition_frequency(cfg.ctx.hfc, std::max(0.0, out.b - db))) /
                        (out.b + db - std::max(0.0, out.b - db));
    out.stderr_ = out.line_fit.stderr_of("centre") / dfdb;
    return out;
}

inline FringeDataset run_experiment(const RunConfig& cfg, int threads = 1) {
    if (cfg.experiment == "hyperfine_ramsey") return run_hyperfine_ramsey(cfg, threads);
    if (cfg.experiment == "spin_echo") return run_spin_echo(cfg, threads);
    if (cfg.experiment == "motional_ramsey") return run_motional_ramsey(cfg, threads);
    throw ConfigError("run_experiment: '" + cfg.experiment + "' has a dedicated entry point");
}

// Scan value at which the fitted fringe is at its extremum nearest zero.
// `maximum` selects the cos = +1 (true) or cos = -1 (false) branch.
inline double fringe_centre_near_zero(const FitResult& sin_fit, bool maximum) {
    const double period = sin_fit.value("period");
    const double phase = sin_fit.value("phase");
    const double target = maximum ? 0.0 : M_PI;
    // 2 pi x / P + phase = target (mod 2 pi)
    double x0 = (target - phase) * period / (2 * M_PI);
    x0 = std::remainder(x0, period);
    return x0;
}

}  // namespace ionlab
