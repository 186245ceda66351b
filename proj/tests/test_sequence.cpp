#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ionlab/sequence.hpp"
#include "ionlab/shot_plan.hpp"

using namespace ionlab;

namespace {

PulseTable table() {
    PulseTable t;
    PulseParams pi2;
    pi2.kind = PulseKind::carrier;
    pi2.rabi_frequency = M_PI / 2 / 35e-6;
    pi2.duration = 35e-6;
    t["pi2"] = pi2;
    PulseParams pi = pi2;
    pi.duration = 70e-6;
    t["pi"] = pi;
    PulseParams rsb;
    rsb.kind = PulseKind::red_sideband;
    rsb.rabi_frequency = M_PI / 20e-6 / 0.1;
    rsb.duration = 20e-6;
    t["pi_rsb"] = rsb;
    return t;
}

}  // namespace

TEST_CASE("parse a five-op Ramsey sequence") {
    auto ops = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.2\npulse pi2 microwave\nmeasure\n");
    REQUIRE(ops.size() == 5);
    CHECK(ops[0].kind == SequenceOp::Kind::prepare);
    CHECK(ops[1].kind == SequenceOp::Kind::pulse);
    CHECK(ops[1].pulse_name == "pi2");
    CHECK(ops[1].channel == "microwave");
    CHECK(ops[2].kind == SequenceOp::Kind::delay);
    CHECK(ops[2].delay_s == 0.2);
    CHECK(ops[4].kind == SequenceOp::Kind::measure);
}

TEST_CASE("parse a spin-echo sequence with the pi pulse at the gap centre") {
    auto ops = parse_sequence(
        "prepare\n"
        "pulse pi2 microwave\n"
        "delay 0.5\n"
        "pulse pi microwave\n"
        "delay 0.5\n"
        "pulse pi2 microwave\n"
        "measure\n");
    REQUIRE(ops.size() == 7);
    CHECK(ops[3].pulse_name == "pi");
    CHECK(ops[2].delay_s == 0.5);
    CHECK(ops[4].delay_s == 0.5);
}

TEST_CASE("comments, blank lines, phase override, $scan") {
    auto ops = parse_sequence(
        "# motional Ramsey\n"
        "prepare\n"
        "cool 0.05\n"
        "pulse pi2 raman_carrier phase=1.5708  # first pulse\n"
        "pulse pi_rsb raman_rsb\n"
        "delay $scan\n"
        "pulse pi_rsb raman_rsb\n"
        "pulse pi2 raman_carrier\n"
        "measure\n");
    REQUIRE(ops.size() == 8);
    CHECK(ops[1].n_bar == 0.05);
    REQUIRE(ops[2].phase_override.has_value());
    CHECK(*ops[2].phase_override == Catch::Approx(1.5708));
    CHECK(ops[4].delay_is_scan);
}

TEST_CASE("parse errors carry line numbers") {
    CHECK_THROWS_AS(parse_sequence(""), SequenceError);
    try {
        parse_sequence("prepare\nfrobnicate 3\nmeasure\n");
        FAIL("expected SequenceError");
    } catch (const SequenceError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_sequence("prepare\npulse pi2 microwave\n"), SequenceError);
    CHECK_THROWS_AS(parse_sequence("pulse pi2 microwave\nmeasure\n"), SequenceError);
    CHECK_THROWS_AS(parse_sequence("prepare\ndelay -0.2\nmeasure\n"), SequenceError);
    CHECK_THROWS_AS(parse_sequence("prepare\npulse pi2 sideways\nmeasure\n"), SequenceError);
}

TEST_CASE("parse/serialize round trip is the identity") {
    const char* src =
        "prepare\n"
        "cool 0.05\n"
        "pulse pi2 raman_carrier phase=0.25\n"
        "pulse pi_rsb raman_rsb\n"
        "delay $scan\n"
        "delay 0.00123\n"
        "pulse pi2 raman_carrier\n"
        "measure\n";
    auto ops = parse_sequence(src);
    auto text = serialize_sequence(ops);
    auto ops2 = parse_sequence(text);
    REQUIRE(ops.size() == ops2.size());
    CHECK(serialize_sequence(ops2) == text);
    for (size_t i = 0; i < ops.size(); ++i) {
        CHECK(ops[i].kind == ops2[i].kind);
        CHECK(ops[i].delay_s == ops2[i].delay_s);
        CHECK(ops[i].pulse_name == ops2[i].pulse_name);
        CHECK(ops[i].phase_override.has_value() == ops2[i].phase_override.has_value());
    }
}

TEST_CASE("shot plan: interleaved order and monotone clock") {
    auto test = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.2\npulse pi2 microwave\nmeasure\n");
    auto ctrl = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.000145\npulse pi2 microwave\nmeasure\n");
    ScanSpec scan;
    scan.variable = ScanVariable::frequency;
    scan.values = {-1.0, 1.0};
    scan.shots_per_point = 2;
    scan.control_sequence = ctrl;
    auto plan = build_shot_plan(test, scan, table(), 0.07);
    REQUIRE(plan.shots.size() == 8);
    for (size_t i = 0; i < 8; ++i) {
        CHECK(plan.shots[i].role == (i % 2 == 0 ? ShotRole::control : ShotRole::test));
        CHECK(plan.shots[i].shot_index == i);
        if (i > 0) CHECK(plan.shots[i].wall_clock_start > plan.shots[i - 1].wall_clock_start);
    }
    CHECK(plan.shots[0].point_index == 0);
    CHECK(plan.shots[4].point_index == 1);
}

TEST_CASE("shot plan: 13 points x 500 shots at 0.2 s with 0.07 s overhead lasts ~37 min") {
    auto test = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.2\npulse pi2 microwave\nmeasure\n");
    auto ctrl = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.000145\npulse pi2 microwave\nmeasure\n");
    ScanSpec scan;
    scan.values.resize(13);
    for (int i = 0; i < 13; ++i) scan.values[i] = -5.0 + 10.0 * i / 12.0;
    scan.shots_per_point = 500;
    scan.control_sequence = ctrl;
    auto plan = build_shot_plan(test, scan, table(), 0.07);
    CHECK(plan.total_duration / 60.0 == Catch::Approx(37.0).margin(1.0));
}

TEST_CASE("shot plan: interleave off puts control before test per point") {
    auto test = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.01\npulse pi2 microwave\nmeasure\n");
    auto ctrl = parse_sequence("prepare\npulse pi2 microwave\ndelay 0.0001\npulse pi2 microwave\nmeasure\n");
    ScanSpec scan;
    scan.values = {0.0, 1.0};
    scan.shots_per_point = 3;
    scan.interleave_control = false;
    scan.control_sequence = ctrl;
    auto plan = build_shot_plan(test, scan, table(), 0.01);
    REQUIRE(plan.shots.size() == 12);
    for (int pt = 0; pt < 2; ++pt) {
        for (int s = 0; s < 3; ++s) CHECK(plan.shots[pt * 6 + s].role == ShotRole::control);
        for (int s = 3; s < 6; ++s) CHECK(plan.shots[pt * 6 + s].role == ShotRole::test);
    }
}

TEST_CASE("shot plan determinism and randomized order") {
    auto test = parse_sequence("prepare\ndelay $scan\nmeasure\n");
    ScanSpec scan;
    scan.variable = ScanVariable::delay_offset;
    scan.values = {0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008};
    scan.shots_per_point = 1;
    scan.interleave_control = false;
    auto p1 = build_shot_plan(test, scan, table(), 0.01, 5);
    auto p2 = build_shot_plan(test, scan, table(), 0.01, 5);
    REQUIRE(p1.shots.size() == p2.shots.size());
    for (size_t i = 0; i < p1.shots.size(); ++i) {
        CHECK(p1.shots[i].scan_value == p2.shots[i].scan_value);
        CHECK(p1.shots[i].wall_clock_start == p2.shots[i].wall_clock_start);
    }

    scan.randomize_order = true;
    auto pr = build_shot_plan(test, scan, table(), 0.01, 5);
    auto pr2 = build_shot_plan(test, scan, table(), 0.01, 5);
    bool shuffled = false;
    std::vector<int> seen;
    for (size_t i = 0; i < pr.shots.size(); ++i) {
        CHECK(pr.shots[i].scan_value == pr2.shots[i].scan_value);
        shuffled |= pr.shots[i].point_index != p1.shots[i].point_index;
        seen.push_back(pr.shots[i].point_index);
    }
    CHECK(shuffled);
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 8; ++i) CHECK(seen[i] == i);
}

TEST_CASE("plan rejects bad inputs") {
    auto test = parse_sequence("prepare\ndelay $scan\nmeasure\n");
    ScanSpec scan;
    scan.variable = ScanVariable::frequency;  // $scan delay unbound
    scan.values = {1.0};
    scan.shots_per_point = 1;
    scan.interleave_control = false;
    CHECK_THROWS(build_shot_plan(test, scan, table(), 0.01));

    auto t2 = parse_sequence("prepare\npulse nosuch microwave\nmeasure\n");
    ScanSpec s2;
    s2.values = {1.0};
    s2.interleave_control = false;
    try {
        build_shot_plan(t2, s2, table(), 0.01);
        FAIL("expected undefined pulse");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("nosuch") != std::string::npos);
    }

    ScanSpec s3;
    s3.values = {};
    CHECK_THROWS(build_shot_plan(test, s3, table(), 0.01));
}
