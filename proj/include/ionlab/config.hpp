#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionlab/execute.hpp"
#include "ionlab/version.hpp"

namespace ionlab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimal TOML-style table: [section] / [a.b] headers, key = value pairs with
// strings, numbers, booleans and flat arrays. Keys are addressed by their full
// dotted path; error messages carry that path.
class ConfigTable {
public:
    struct Value {
        enum class Type { str, num, boolean, array };
        Type type = Type::num;
        std::string s;
        double n = 0;
        bool b = false;
        std::vector<double> arr;
        int line = 0;
    };

    static ConfigTable parse(const std::string& text) {
        ConfigTable t;
        std::istringstream in(text);
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = strip_comment(line);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError("config line " + std::to_string(line_no) +
                                                       ": unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) +
                                                       ": empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
            std::string key = trim(s.substr(0, eq));
            std::string val = trim(s.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
            const std::string path = section.empty() ? key : section + "." + key;
            if (t.values_.count(path))
                throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                                  path + "'");
            t.values_[path] = parse_value(val, path, line_no);
        }
        return t;
    }

    static ConfigTable parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& path) const { return values_.count(path) > 0; }

    double num(const std::string& path) const {
        const auto& v = at(path);
        if (v.type != Value::Type::num)
            throw ConfigError("config key '" + path + "': expected a number");
        return v.n;
    }
    double num_or(const std::string& path, double dflt) const {
        return has(path) ? num(path) : dflt;
    }
    std::int64_t integer(const std::string& path) const {
        const double v = num(path);
        const auto i = static_cast<std::int64_t>(v);
        if (static_cast<double>(i) != v)
            throw ConfigError("config key '" + path + "': expected an integer");
        return i;
    }
    std::string str(const std::string& path) const {
        const auto& v = at(path);
        if (v.type != Value::Type::str)
            throw ConfigError("config key '" + path + "': expected a string");
        return v.s;
    }
    std::string str_or(const std::string& path, const std::string& dflt) const {
        return has(path) ? str(path) : dflt;
    }
    bool boolean_or(const std::string& path, bool dflt) const {
        if (!has(path)) return dflt;
        const auto& v = at(path);
        if (v.type != Value::Type::boolean)
            throw ConfigError("config key '" + path + "': expected true or false");
        return v.b;
    }
    std::vector<double> num_array(const std::string& path) const {
        const auto& v = at(path);
        if (v.type != Value::Type::array)
            throw ConfigError("config key '" + path + "': expected an array");
        return v.arr;
    }

    std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        return out;
    }

private:
    const Value& at(const std::string& path) const {
        auto it = values_.find(path);
        if (it == values_.end()) throw ConfigError("config: missing required key '" + path + "'");
        return it->second;
    }

    static std::string trim(const std::string& s) {
        size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::string strip_comment(const std::string& s) {
        bool in_str = false;
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_str = !in_str;
            if (s[i] == '#' && !in_str) return s.substr(0, i);
        }
        return s;
    }

    static Value parse_value(const std::string& val, const std::string& path, int line_no) {
        Value v;
        v.line = line_no;
        if (val.empty()) throw ConfigError("config key '" + path + "': empty value");
        if (val.front() == '"') {
            if (val.size() < 2 || val.back() != '"')
                throw ConfigError("config key '" + path + "': unterminated string");
            v.type = Value::Type::str;
            v.s = val.substr(1, val.size() - 2);
            return v;
        }
        if (val == "true" || val == "false") {
            v.type = Value::Type::boolean;
            v.b = val == "true";
            return v;
        }
        if (val.front() == '[') {
            if (val.back() != ']')
                throw ConfigError("config key '" + path + "': unterminated array");
            v.type = Value::Type::array;
            std::string body = val.substr(1, val.size() - 2);
            std::istringstream bs(body);
            std::string item;
            while (std::getline(bs, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                v.arr.push_back(parse_number(item, path));
            }
            return v;
        }
        v.type = Value::Type::num;
        v.n = parse_number(val, path);
        return v;
    }

    static double parse_number(const std::string& s, const std::string& path) {
        char* end = nullptr;
        double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            throw ConfigError("config key '" + path + "': not a number: '" + s + "'");
        return d;
    }

    std::map<std::string, Value> values_;
};

// FNV-1a 64 over the parts, 0x1F between them so part boundaries matter
inline std::string digest_hex(std::initializer_list<const std::string*> parts) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const auto* p : parts) {
        for (unsigned char c : *p) mix(c);
        mix(0x1F);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct RunConfig {
    std::string experiment;  // hyperfine_ramsey | spin_echo | motional_ramsey | field_calibration
    std::vector<SequenceOp> sequence;
    ScanSpec scan;
    double overhead = 0.07;
    ExperimentContext ctx;
    std::string out_csv;
    std::string digest;
    nlohmann::json extra_meta;
};

namespace detail {

inline std::string dirname_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

inline std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string(what) + ": cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline PulseTable pulses_from(const ConfigTable& t) {
    PulseTable out;
    std::map<std::string, bool> seen;
    for (const auto& key : t.keys_with_prefix("pulse.")) {
        // pulse.<name>.<field>
        const auto rest = key.substr(6);
        const auto dot = rest.find('.');
        if (dot == std::string::npos) throw ConfigError("config key '" + key + "': expected pulse.<name>.<field>");
        seen[rest.substr(0, dot)] = true;
    }
    for (const auto& [name, _] : seen) {
        const std::string base = "pulse." + name + ".";
        PulseParams p;
        const std::string kind = t.str_or(base + "kind", "carrier");
        if (kind == "carrier")
            p.kind = PulseKind::carrier;
        else if (kind == "red_sideband")
            p.kind = PulseKind::red_sideband;
        else
            throw ConfigError("config key '" + base + "kind': unknown pulse kind '" + kind + "'");
        p.rabi_frequency = t.num(base + "rabi_frequency");
        p.duration = t.num(base + "duration");
        p.phase = t.num_or(base + "phase", 0.0);
        p.lamb_dicke = t.num_or(base + "lamb_dicke", 0.1);
        validate_pulse(p);
        out[name] = p;
    }
    return out;
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
    const std::string text = detail::read_text_file(path, "config");
    const ConfigTable t = ConfigTable::parse(text);

    const auto schema = t.integer("schema");
    if (schema != kConfigSchemaVersion)
        throw ConfigError("config key 'schema': unsupported version " + std::to_string(schema));

    RunConfig rc;
    rc.experiment = t.str("run.experiment");
    if (rc.experiment != "hyperfine_ramsey" && rc.experiment != "spin_echo" &&
        rc.experiment != "motional_ramsey" && rc.experiment != "field_calibration")
        throw ConfigError("config key 'run.experiment': unknown experiment '" + rc.experiment + "'");

    const std::string dir = detail::dirname_of(path);
    const std::string seq_path = dir + "/" + t.str("run.sequence");
    const std::string seq_text = detail::read_text_file(seq_path, "run.sequence");
    try {
        rc.sequence = parse_sequence(seq_text);
    } catch (const SequenceError& e) {
        throw ConfigError("run.sequence (" + seq_path + "): " + e.what());
    }

    rc.ctx.seed = static_cast<std::uint64_t>(t.integer("run.seed"));
    rc.ctx.n_max = t.has("run.n_max") ? static_cast<int>(t.integer("run.n_max")) : 10;
    if (rc.ctx.n_max < 0) throw ConfigError("config key 'run.n_max': must be >= 0");

    // scan
    rc.scan.variable = scan_variable_from(t.str("scan.variable"));
    if (t.has("scan.values")) {
        rc.scan.values = t.num_array("scan.values");
    } else {
        const double start = t.num("scan.start"), stop = t.num("scan.stop");
        const auto count = t.integer("scan.count");
        if (count < 2) throw ConfigError("config key 'scan.count': need at least 2");
        for (std::int64_t i = 0; i < count; ++i)
            rc.scan.values.push_back(start + (stop - start) * double(i) / double(count - 1));
    }
    if (rc.scan.values.empty()) throw ConfigError("config key 'scan.values': empty");
    rc.scan.shots_per_point =
        t.has("scan.shots_per_point") ? static_cast<int>(t.integer("scan.shots_per_point")) : 500;
    if (rc.scan.shots_per_point < 1)
        throw ConfigError("config key 'scan.shots_per_point': must be >= 1");
    rc.scan.interleave_control = t.boolean_or("scan.interleave_control", true);
    rc.scan.randomize_order = t.boolean_or("scan.randomize_order", false);
    rc.overhead = t.num_or("scan.per_shot_overhead", 0.07);
    std::string ctrl_text;
    if (t.has("scan.control_sequence")) {
        const std::string ctrl_path = dir + "/" + t.str("scan.control_sequence");
        ctrl_text = detail::read_text_file(ctrl_path, "scan.control_sequence");
        try {
            rc.scan.control_sequence = parse_sequence(ctrl_text);
        } catch (const SequenceError& e) {
            throw ConfigError("scan.control_sequence (" + ctrl_path + "): " + e.what());
        }
    } else if (rc.scan.interleave_control) {
        throw ConfigError("config: scan.interleave_control requires scan.control_sequence");
    }

    rc.ctx.pulses = detail::pulses_from(t);

    // constants overrides
    rc.ctx.hfc.nu_hf = t.num_or("constants.nu_hf", rc.ctx.hfc.nu_hf);
    rc.ctx.hfc.g_j = t.num_or("constants.g_j", rc.ctx.hfc.g_j);
    rc.ctx.hfc.g_i_prime = t.num_or("constants.g_i_prime", rc.ctx.hfc.g_i_prime);
    rc.ctx.hfc.i_spin = t.num_or("constants.i_spin", rc.ctx.hfc.i_spin);
    rc.ctx.hfc.mu_b_over_h = t.num_or("constants.mu_b_over_h", rc.ctx.hfc.mu_b_over_h);

    auto& f = rc.ctx.field;
    f.b0 = t.num_or("noise.field.b0", f.b0);
    f.drift_rate = t.num_or("noise.field.drift_rate", f.drift_rate);
    f.ou_sigma = t.num_or("noise.field.ou_sigma", f.ou_sigma);
    f.ou_tau = t.num_or("noise.field.ou_tau", f.ou_tau);
    f.lorentz_gamma = t.num_or("noise.field.lorentz_gamma", f.lorentz_gamma);
    validate(f);

    auto& m = rc.ctx.motional;
    m.trap_freq = t.num_or("noise.motional.trap_freq", m.trap_freq);
    m.v0 = t.num_or("noise.motional.v0", m.v0);
    m.v_sigma = t.num_or("noise.motional.v_sigma", m.v_sigma);
    m.heating_rate = t.num_or("noise.motional.heating_rate", m.heating_rate);
    validate(m);

    auto& r = rc.ctx.readout;
    r.p_detect_down = t.num_or("noise.readout.p_detect_down", r.p_detect_down);
    r.p_false_shelve_up = t.num_or("noise.readout.p_false_shelve_up", r.p_false_shelve_up);
    r.prep_success = t.num_or("noise.readout.prep_success", r.prep_success);
    validate(r);

    const std::string prep_state = t.str_or("prep.state", "up");
    if (prep_state == "up")
        rc.ctx.prep.state = PrepState::up;
    else if (prep_state == "down")
        rc.ctx.prep.state = PrepState::down;
    else
        throw ConfigError("config key 'prep.state': expected \"up\" or \"down\"");
    const std::string policy = t.str_or("prep.policy", "exclude");
    if (policy == "exclude")
        rc.ctx.prep.policy = PrepPolicy::exclude;
    else if (policy == "baseline")
        rc.ctx.prep.policy = PrepPolicy::baseline;
    else
        throw ConfigError("config key 'prep.policy': expected \"exclude\" or \"baseline\"");
    rc.ctx.prep.f3_leak_rate = t.num_or("prep.f3_leak_rate", 0.0);
    rc.ctx.prep.n_bar = t.num_or("prep.n_bar", 0.0);

    const std::string transition = t.str_or("lo.transition", "clock");
    if (transition == "clock")
        rc.ctx.transition = Transition::clock;
    else if (transition == "stretch")
        rc.ctx.transition = Transition::stretch;
    else
        throw ConfigError("config key 'lo.transition': expected \"clock\" or \"stretch\"");
    rc.ctx.lo_offset_hz = t.num_or("lo.offset_hz", 0.0);
    rc.ctx.sideband_detuning_hz = t.num_or("lo.sideband_detuning_hz", 0.0);

    rc.out_csv = t.str_or("output.csv", "");
    rc.digest = digest_hex({&text, &seq_text, &ctrl_text});
    return rc;
}

}  // namespace ionlab
