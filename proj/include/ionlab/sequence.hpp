#pragma once

#include <cstdlib>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ionlab {

struct SequenceError : std::runtime_error {
    int line;
    SequenceError(int line_, const std::string& msg)
        : std::runtime_error("sequence line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

// One op per line:
//   prepare
//   cool <n_bar>
//   pulse <name> <channel> [phase=<rad>]
//   delay <seconds|$scan>
//   measure
// '#' starts a comment. A valid sequence begins with exactly one prepare and
// ends with exactly one measure.
struct SequenceOp {
    enum class Kind { prepare, cool, pulse, delay, measure };
    Kind kind = Kind::prepare;
    double n_bar = 0.0;                    // cool
    std::string pulse_name;                // pulse
    std::string channel;                   // microwave | raman_carrier | raman_rsb
    std::optional<double> phase_override;  // pulse phase=<rad>
    double delay_s = 0.0;                  // delay
    bool delay_is_scan = false;            // delay $scan
};

namespace detail {

inline double parse_number(const std::string& tok, int line, const char* what) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw SequenceError(line, std::string("expected a number for ") + what + ", got '" + tok + "'");
    return v;
}

inline std::vector<std::string> tokens_of(std::string_view line) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : line) {
        if (c == '#') break;
        if (c == ' ' || c == '\t' || c == '\r') {
            if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) toks.push_back(std::move(cur));
    return toks;
}

}  // namespace detail

inline std::vector<SequenceOp> parse_sequence(std::string_view text) {
    std::vector<SequenceOp> ops;
    int line_no = 0;
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::tokens_of(line);
        if (toks.empty()) continue;
        SequenceOp op;
        const std::string& head = toks[0];
        if (head == "prepare") {
            if (toks.size() != 1) throw SequenceError(line_no, "prepare takes no arguments");
            op.kind = SequenceOp::Kind::prepare;
        } else if (head == "measure") {
            if (toks.size() != 1) throw SequenceError(line_no, "measure takes no arguments");
            op.kind = SequenceOp::Kind::measure;
        } else if (head == "cool") {
            if (toks.size() != 2) throw SequenceError(line_no, "cool takes one argument: n_bar");
            op.kind = SequenceOp::Kind::cool;
            op.n_bar = detail::parse_number(toks[1], line_no, "n_bar");
            if (op.n_bar < 0) throw SequenceError(line_no, "n_bar must be >= 0");
        } else if (head == "delay") {
            if (toks.size() != 2) throw SequenceError(line_no, "delay takes one argument");
            op.kind = SequenceOp::Kind::delay;
            if (toks[1] == "$scan") {
                op.delay_is_scan = true;
            } else {
                op.delay_s = detail::parse_number(toks[1], line_no, "delay");
                if (op.delay_s < 0) throw SequenceError(line_no, "delay must be >= 0");
            }
        } else if (head == "pulse") {
            if (toks.size() < 3 || toks.size() > 4)
                throw SequenceError(line_no, "pulse takes: <name> <channel> [phase=<rad>]");
            op.kind = SequenceOp::Kind::pulse;
            op.pulse_name = toks[1];
            op.channel = toks[2];
            if (op.channel != "microwave" && op.channel != "raman_carrier" &&
                op.channel != "raman_rsb")
                throw SequenceError(line_no, "unknown channel '" + op.channel + "'");
            if (toks.size() == 4) {
                if (toks[3].rfind("phase=", 0) != 0)
                    throw SequenceError(line_no, "expected phase=<rad>, got '" + toks[3] + "'");
                op.phase_override =
                    detail::parse_number(toks[3].substr(6), line_no, "phase");
            }
        } else {
            throw SequenceError(line_no, "unknown directive '" + head + "'");
        }
        ops.push_back(std::move(op));
    }
    if (ops.empty()) throw SequenceError(line_no, "empty sequence");
    int prepares = 0, measures = 0;
    for (const auto& op : ops) {
        prepares += op.kind == SequenceOp::Kind::prepare;
        measures += op.kind == SequenceOp::Kind::measure;
    }
    if (prepares != 1 || ops.front().kind != SequenceOp::Kind::prepare)
        throw SequenceError(1, "sequence must start with exactly one prepare");
    if (measures != 1 || ops.back().kind != SequenceOp::Kind::measure)
        throw SequenceError(line_no, "sequence must end with exactly one measure");
    return ops;
}

inline std::string serialize_sequence(const std::vector<SequenceOp>& ops) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& op : ops) {
        switch (op.kind) {
            case SequenceOp::Kind::prepare: out << "prepare"; break;
            case SequenceOp::Kind::measure: out << "measure"; break;
            case SequenceOp::Kind::cool: out << "cool " << op.n_bar; break;
            case SequenceOp::Kind::delay:
                if (op.delay_is_scan)
                    out << "delay $scan";
                else
                    out << "delay " << op.delay_s;
                break;
            case SequenceOp::Kind::pulse:
                out << "pulse " << op.pulse_name << " " << op.channel;
                if (op.phase_override) out << " phase=" << *op.phase_override;
                break;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace ionlab
