#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ionlab/pulses.hpp"
#include "ionlab/rng.hpp"
#include "ionlab/sequence.hpp"

namespace ionlab {

using PulseTable = std::map<std::string, PulseParams>;

enum class ScanVariable { frequency, phase, delay_offset };

inline const char* to_string(ScanVariable v) {
    switch (v) {
        case ScanVariable::frequency: return "frequency";
        case ScanVariable::phase: return "phase";
        case ScanVariable::delay_offset: return "delay_offset";
    }
    return "?";
}

inline ScanVariable scan_variable_from(const std::string& s) {
    if (s == "frequency") return ScanVariable::frequency;
    if (s == "phase") return ScanVariable::phase;
    if (s == "delay_offset") return ScanVariable::delay_offset;
    throw std::invalid_argument("unknown scan variable '" + s + "'");
}

struct ScanSpec {
    ScanVariable variable = ScanVariable::frequency;
    std::vector<double> values;            // Hz | rad | s
    int shots_per_point = 500;
    bool interleave_control = true;
    std::vector<SequenceOp> control_sequence;
    bool randomize_order = false;          // decorrelates scan value from wall clock
};

enum class ShotRole { control, test };

struct ShotRecord {
    ShotRole role;
    int point_index;          // index into ScanSpec::values
    double scan_value;
    double wall_clock_start;  // s from run start
    std::uint64_t shot_index; // stream id for the shot's private rng
};

struct ShotPlan {
    std::vector<ShotRecord> shots;
    double per_shot_overhead = 0.0;
    double total_duration = 0.0;
};

inline const PulseParams& lookup_pulse(const PulseTable& table, const std::string& name) {
    auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("undefined pulse '" + name + "'");
    return it->second;
}

inline void check_channel_kind(const SequenceOp& op, const PulseParams& p) {
    const bool rsb = op.channel == "raman_rsb";
    if (rsb && p.kind != PulseKind::red_sideband)
        throw std::invalid_argument("pulse '" + op.pulse_name + "' on raman_rsb must be red_sideband");
    if (!rsb && p.kind != PulseKind::carrier)
        throw std::invalid_argument("pulse '" + op.pulse_name + "' on " + op.channel + " must be carrier");
}

// Intrinsic in-sequence time: pulse durations plus delays under the binding.
inline double sequence_duration(const std::vector<SequenceOp>& seq, const PulseTable& pulses,
                                ScanVariable var, double scan_value) {
    double t = 0;
    for (const auto& op : seq) {
        if (op.kind == SequenceOp::Kind::pulse) {
            const auto& p = lookup_pulse(pulses, op.pulse_name);
            check_channel_kind(op, p);
            t += p.duration;
        } else if (op.kind == SequenceOp::Kind::delay) {
            double d = op.delay_s;
            if (op.delay_is_scan) {
                if (var != ScanVariable::delay_offset)
                    throw std::invalid_argument("sequence has 'delay $scan' but scan variable is not delay_offset");
                d += scan_value;
            }
            if (d < 0) throw std::invalid_argument("bound delay is negative");
            t += d;
        }
    }
    return t;
}

// For each scan value, shots_per_point (control, test) pairs when interleaving;
// otherwise all control shots precede the test shots of that point. Wall clock
// advances by intrinsic duration plus the per-shot overhead. Scan values are
// visited in listed order unless randomize_order shuffles the visit order.
inline ShotPlan build_shot_plan(const std::vector<SequenceOp>& test, const ScanSpec& scan,
                                const PulseTable& pulses, double overhead_s,
                                std::uint64_t seed = 0) {
    if (scan.values.empty()) throw std::invalid_argument("scan: values empty");
    if (scan.shots_per_point < 1) throw std::invalid_argument("scan: shots_per_point < 1");
    if (overhead_s < 0) throw std::invalid_argument("scan: negative overhead");
    const bool with_control = !scan.control_sequence.empty();
    if (scan.interleave_control && !with_control)
        throw std::invalid_argument("scan: interleave_control requires a control sequence");

    std::vector<int> order(scan.values.size());
    std::iota(order.begin(), order.end(), 0);
    if (scan.randomize_order) {
        Philox rng(seed, stream_id::plan_shuffle);
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[rng.next_u64() % (i + 1)]);
    }

    ShotPlan plan;
    plan.per_shot_overhead = overhead_s;
    double t = 0;
    std::uint64_t idx = 0;
    auto emit = [&](ShotRole role, int pt, double value, const std::vector<SequenceOp>& seq) {
        plan.shots.push_back({role, pt, value, t, idx++});
        t += sequence_duration(seq, pulses, scan.variable, value) + overhead_s;
    };
    for (int pt : order) {
        const double v = scan.values[pt];
        if (scan.interleave_control) {
            for (int s = 0; s < scan.shots_per_point; ++s) {
                emit(ShotRole::control, pt, v, scan.control_sequence);
                emit(ShotRole::test, pt, v, test);
            }
        } else {
            if (with_control)
                for (int s = 0; s < scan.shots_per_point; ++s)
                    emit(ShotRole::control, pt, v, scan.control_sequence);
            for (int s = 0; s < scan.shots_per_point; ++s) emit(ShotRole::test, pt, v, test);
        }
    }
    plan.total_duration = t;
    return plan;
}

}  // namespace ionlab
