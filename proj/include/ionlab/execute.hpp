#pragma once

#include <cmath>
#include <map>
#include <thread>
#include <vector>

#include "ionlab/breit_rabi.hpp"
#include "ionlab/dataset.hpp"
#include "ionlab/noise.hpp"
#include "ionlab/shot_plan.hpp"

namespace ionlab {

enum class PrepPolicy { exclude, baseline };
enum class PrepState { up, down };

struct PrepModel {
    PrepState state = PrepState::up;       // up = (3,0) for the hyperfine qubit
    PrepPolicy policy = PrepPolicy::exclude;
    double f3_leak_rate = 0.0;             // 1/s, wrong-prep F=3 -> F=4 during delays
    double n_bar = 0.0;                    // initial thermal occupancy (overridden by cool op)
};

enum class Transition { clock, stretch };

struct ExperimentContext {
    HyperfineConstants hfc;
    FieldNoiseParams field;
    MotionalNoiseParams motional;
    ReadoutParams readout;
    PrepModel prep;
    PulseTable pulses;
    Transition transition = Transition::clock;  // which line the LO addresses
    double lo_offset_hz = 0.0;          // LO offset from the transition at b0
    double sideband_detuning_hz = 0.0;  // delta_M, enters free evolution per quantum
    int n_max = 10;
    std::uint64_t seed = 0;

    double transition_freq(double b) const {
        return transition == Transition::clock ? clock_transition_frequency(hfc, b)
                                               : stretch_transition_frequency(hfc, b);
    }
};

// OU field value at each shot start, sampled once from a dedicated run-level
// stream so the chain is independent of shot execution order.
struct NoiseWorld {
    std::vector<double> ou_at_shot;

    static NoiseWorld build(const ShotPlan& plan, const FieldNoiseParams& field,
                            std::uint64_t seed) {
        validate(field);
        NoiseWorld w;
        w.ou_at_shot.resize(plan.shots.size(), 0.0);
        Philox rng(seed, stream_id::field_chain);
        OuProcess ou = OuProcess::started(field.ou_sigma, field.ou_tau, rng);
        double t_prev = 0;
        for (size_t k = 0; k < plan.shots.size(); ++k) {
            const double t = plan.shots[k].wall_clock_start;
            if (k > 0) ou.step(t - t_prev, rng);
            t_prev = t;
            w.ou_at_shot[k] = ou.value();
        }
        return w;
    }
};

struct ShotOutcome {
    bool counted = false;
    bool observed_up = false;
};

// Runs one shot against physics_core + noise_models. All randomness comes from
// the shot's private stream (seed, shot_index); draw order is fixed by the
// sequence structure so identical inputs give identical outcomes on any thread.
inline ShotOutcome execute_shot(const std::vector<SequenceOp>& seq, ScanVariable var,
                                const ShotRecord& rec, const ExperimentContext& ctx,
                                double ou_x_start) {
    Philox rng(ctx.seed, rec.shot_index);

    const double lorentz = lorentz_field_offset(ctx.field.lorentz_gamma, rng);
    const bool prep_ok =
        ctx.readout.prep_success >= 1.0 || rng.uniform() < ctx.readout.prep_success;

    double n_bar = ctx.prep.n_bar;
    int last_pulse = -1;
    double total_delay = 0;
    for (size_t i = 0; i < seq.size(); ++i) {
        if (seq[i].kind == SequenceOp::Kind::cool) n_bar = seq[i].n_bar;
        if (seq[i].kind == SequenceOp::Kind::pulse) last_pulse = static_cast<int>(i);
        if (seq[i].kind == SequenceOp::Kind::delay) {
            double d = seq[i].delay_s;
            if (seq[i].delay_is_scan) d += rec.scan_value;
            total_delay += d;
        }
    }

    int n0 = 0;
    if (n_bar > 0) {
        // geometric (thermal) occupancy with mean n_bar
        const double q = n_bar / (1.0 + n_bar);
        n0 = static_cast<int>(std::log(1.0 - rng.uniform()) / std::log(q));
        n0 = std::min(n0, ctx.n_max - 1);
    }

    double dv = 0.0;
    if (ctx.motional.v_sigma > 0) dv = ctx.motional.v_sigma * rng.normal();

    if (!prep_ok) {
        if (ctx.prep.policy == PrepPolicy::exclude) return {false, false};
        // baseline policy: the ion sits in some other F=3 level, is never driven,
        // and reads bright (up) unless it leaked to F=4 during the delays.
        bool leaked = false;
        if (ctx.prep.f3_leak_rate > 0)
            leaked = rng.uniform() < 1.0 - std::exp(-ctx.prep.f3_leak_rate * total_delay);
        const bool observed = readout_channel(!leaked, ctx.readout, rng);
        return {true, observed};
    }

    const double f_lo = ctx.transition_freq(ctx.field.b0) + ctx.lo_offset_hz +
                        (var == ScanVariable::frequency ? rec.scan_value : 0.0);
    const double motional_base = 2.0 * M_PI * ctx.sideband_detuning_hz +
                                 (dv != 0.0 ? trap_freq_shift(ctx.motional, dv) : 0.0);

    OuProcess ou(ctx.field.ou_sigma, ctx.field.ou_tau);
    ou.set_value(ou_x_start);

    IonState state(ctx.n_max);
    state.at(ctx.prep.state == PrepState::up ? kQubitUp : kQubitDown, n0) = 1.0;

    double t_local = 0;
    auto b_det = [&](double t_mid) {
        return ctx.field.b0 + ctx.field.drift_rate * (rec.wall_clock_start + t_mid) + lorentz;
    };
    auto detuning_at = [&](double b) {
        return 2.0 * M_PI * (ctx.transition_freq(b) - f_lo);
    };

    for (size_t i = 0; i < seq.size(); ++i) {
        const auto& op = seq[i];
        switch (op.kind) {
            case SequenceOp::Kind::prepare:
            case SequenceOp::Kind::cool:
                break;
            case SequenceOp::Kind::pulse: {
                PulseParams p = lookup_pulse(ctx.pulses, op.pulse_name);
                check_channel_kind(op, p);
                if (op.phase_override) p.phase = *op.phase_override;
                if (var == ScanVariable::phase && static_cast<int>(i) == last_pulse)
                    p.phase = rec.scan_value;
                const double b_mid = b_det(t_local + 0.5 * p.duration) + ou.value();
                const double dq = detuning_at(b_mid);
                if (p.kind == PulseKind::red_sideband) {
                    p.detuning = dq + (dv != 0.0 ? trap_freq_shift(ctx.motional, dv) : 0.0);
                    state = sideband_rotation(state, p);
                } else {
                    p.detuning = dq;
                    state = carrier_rotation(state, p);
                }
                ou.step(p.duration, rng);
                t_local += p.duration;
                break;
            }
            case SequenceOp::Kind::delay: {
                double d = op.delay_s;
                if (op.delay_is_scan) d += rec.scan_value;
                if (d <= 0) break;
                const double integral = ou.step_with_integral(d, rng);
                // effective field over the delay: deterministic part at the
                // midpoint (exact for linear drift) plus the OU time average
                const double b_eff = b_det(t_local + 0.5 * d) + integral / d;
                const double dq = detuning_at(b_eff);
                if (ctx.motional.heating_rate > 0) {
                    state = evolve_with_heating(
                        state, d, ctx.motional.heating_rate, rng,
                        [&](IonState& s, double seg) {
                            if (seg > 0) s = free_evolution(s, seg, dq, motional_base);
                        });
                } else {
                    state = free_evolution(state, d, dq, motional_base);
                }
                t_local += d;
                break;
            }
            case SequenceOp::Kind::measure: {
                const bool true_up = rng.uniform() < measure_qubit_population(state);
                return {true, readout_channel(true_up, ctx.readout, rng)};
            }
        }
    }
    throw std::logic_error("execute_shot: sequence had no measure op");
}

// Executes the plan (shot-parallel when threads > 1) and aggregates per
// (point, role). Outcomes are bitwise independent of the thread count.
inline std::vector<FringePoint> run_plan(const ShotPlan& plan, const std::vector<SequenceOp>& test,
                                         const ScanSpec& scan, const ExperimentContext& ctx,
                                         int threads = 1) {
    const NoiseWorld world = NoiseWorld::build(plan, ctx.field, ctx.seed);
    const size_t n = plan.shots.size();
    std::vector<ShotOutcome> out(n);

    auto work = [&](size_t lo, size_t hi) {
        for (size_t k = lo; k < hi; ++k) {
            const auto& rec = plan.shots[k];
            const auto& seq = rec.role == ShotRole::control ? scan.control_sequence : test;
            out[k] = execute_shot(seq, scan.variable, rec, ctx, world.ou_at_shot[k]);
        }
    };
    if (threads <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (n + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const size_t lo = std::min(n, t * chunk), hi = std::min(n, (t + 1) * chunk);
            if (lo < hi) pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::map<std::pair<int, int>, FringePoint> agg;  // (point_index, role)
    for (size_t k = 0; k < n; ++k) {
        const auto& rec = plan.shots[k];
        const int role = rec.role == ShotRole::control ? 0 : 1;
        auto& p = agg[{rec.point_index, role}];
        if (p.shots == 0 && p.ups == 0 && p.role.empty()) {
            p.role = role == 0 ? "control" : "test";
            p.scan_value = rec.scan_value;
            p.wall_clock_start = rec.wall_clock_start;
        }
        p.wall_clock_start = std::min(p.wall_clock_start, rec.wall_clock_start);
        if (out[k].counted) {
            p.shots += 1;
            p.ups += out[k].observed_up;
        }
    }
    std::vector<FringePoint> points;
    points.reserve(agg.size());
    for (auto& [key, p] : agg) points.push_back(std::move(p));
    return points;
}

}  // namespace ionlab
