#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ionlab/execute.hpp"
#include "ionlab/fit.hpp"

using namespace ionlab;

namespace {

PulseTable mw_table() {
    PulseTable t;
    PulseParams pi2;
    pi2.kind = PulseKind::carrier;
    pi2.duration = 35e-6;
    pi2.rabi_frequency = (M_PI / 2) / pi2.duration;
    t["pi2"] = pi2;
    PulseParams pi = pi2;
    pi.rabi_frequency = M_PI / pi.duration;
    t["pi"] = pi;
    return t;
}

ExperimentContext quiet_ctx(std::uint64_t seed) {
    ExperimentContext ctx;
    ctx.pulses = mw_table();
    ctx.field.b0 = 1.78;
    ctx.field.ou_sigma = 0;
    ctx.field.lorentz_gamma = 0;
    ctx.field.drift_rate = 0;
    ctx.readout.p_detect_down = 1.0;
    ctx.readout.p_false_shelve_up = 0.0;
    ctx.readout.prep_success = 1.0;
    ctx.prep.state = PrepState::down;
    ctx.n_max = 0;
    ctx.seed = seed;
    return ctx;
}

std::vector<SequenceOp> ramsey_seq(double tau) {
    return parse_sequence("prepare\npulse pi2 microwave\ndelay " + std::to_string(tau) +
                          "\npulse pi2 microwave\nmeasure\n");
}

std::vector<SequenceOp> phase_ramsey_seq(double tau) { return ramsey_seq(tau); }

ScanSpec freq_scan(double tau_l, int npts, int shots, double span_factor = 1.0) {
    ScanSpec s;
    s.variable = ScanVariable::frequency;
    const double half = span_factor / tau_l;
    for (int i = 0; i < npts; ++i) s.values.push_back(-half + 2 * half * i / (npts - 1));
    s.shots_per_point = shots;
    s.control_sequence = ramsey_seq(0.000145);
    return s;
}

}  // namespace

TEST_CASE("noiseless resonant phase scan: up with certainty at phi = 0") {
    auto ctx = quiet_ctx(1);
    auto seq = phase_ramsey_seq(0.001);
    ScanSpec scan;
    scan.variable = ScanVariable::phase;
    scan.values = {0.0, M_PI};
    scan.shots_per_point = 50;
    scan.interleave_control = false;
    auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.01);
    auto pts = run_plan(plan, seq, scan, ctx);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].ups == pts[0].shots);  // phi = 0 -> P(up) = 1
    CHECK(pts[1].ups == 0);             // phi = pi -> P(up) = 0
}

TEST_CASE("noiseless frequency scan fits to the 1/tau_L period") {
    auto ctx = quiet_ctx(2);
    const double tau_l = 0.2;
    auto seq = ramsey_seq(tau_l);
    auto scan = freq_scan(tau_l, 13, 200);
    auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.07);
    auto points = run_plan(plan, seq, scan, ctx);
    FringeDataset d;
    d.points = points;
    auto fit = fit_sinusoid(fringe_points(d, "test"));
    CHECK(fit.value("period") == Catch::Approx(5.0).epsilon(0.01));
    auto ar = amplitude_ratio(d, false);
    CHECK(ar.ratio == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("drift-distortion law: apparent period is (1/tau_L)/(1 - d/r)") {
    const double tau_l = 0.2;
    const double S = clock_sensitivity(HyperfineConstants{}, 1.78);  // Hz/G
    for (double d_over_r : {-0.3, -0.15, 0.15, 0.3}) {
        auto ctx = quiet_ctx(3);
        auto seq = ramsey_seq(tau_l);
        auto scan = freq_scan(tau_l, 13, 200);
        auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.07);
        // scan rate in Hz per wall-clock second, from the plan itself
        const double span = scan.values.back() - scan.values.front();
        const double rate = span / plan.total_duration * (13.0 / 12.0);
        ctx.field.drift_rate = d_over_r * rate / S;
        auto points = run_plan(plan, seq, scan, ctx);
        FringeDataset d;
        d.points = points;
        auto fit = fit_sinusoid(fringe_points(d, "test"));
        const double expected = (1.0 / tau_l) / (1.0 - d_over_r);
        CHECK(fit.value("period") == Catch::Approx(expected).epsilon(0.02));
    }
}

TEST_CASE("randomized scan order removes the drift bias on the period") {
    const double tau_l = 0.2;
    const double S = clock_sensitivity(HyperfineConstants{}, 1.78);
    std::vector<Measurement> periods;
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        auto ctx = quiet_ctx(seed);
        auto seq = ramsey_seq(tau_l);
        auto scan = freq_scan(tau_l, 13, 200);
        scan.randomize_order = true;
        auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.07, seed);
        const double span = scan.values.back() - scan.values.front();
        const double rate = span / plan.total_duration * (13.0 / 12.0);
        ctx.field.drift_rate = 0.1 * rate / S;
        auto points = run_plan(plan, seq, scan, ctx);
        FringeDataset d;
        d.points = points;
        auto fit = fit_sinusoid(fringe_points(d, "test"));
        periods.push_back({fit.value("period"), fit.stderr_of("period")});
    }
    auto c = combine_runs(periods);
    CHECK(c.value == Catch::Approx(5.0).epsilon(0.01));
}

TEST_CASE("control normalization cancels a static readout miscalibration") {
    // expectation-level datasets: counts = round(N * channel(P_up)), so the
    // check is about the estimator, not Monte Carlo noise
    const double tau_l = 0.2;
    auto make_dataset = [&](double e0, double e1) {
        FringeDataset d;
        const long N = 1000000;
        for (int i = 0; i < 13; ++i) {
            const double det = -5.0 + 10.0 * i / 12.0;
            const double p_up_test = 0.5 * (1.0 + std::cos(2 * M_PI * det * tau_l));
            const double obs_t = e0 + (e1 - e0) * p_up_test;
            const double obs_c = e0 + (e1 - e0) * 1.0;
            d.points.push_back({"control", det, N, long(std::lround(obs_c * N)), 0.0});
            d.points.push_back({"test", det, N, long(std::lround(obs_t * N)), 0.0});
        }
        return d;
    };
    auto r_ideal = amplitude_ratio(make_dataset(0.0, 1.0), false);
    auto r_skew = amplitude_ratio(make_dataset(0.08, 0.93), false);
    CHECK(std::fabs(r_skew.ratio - r_ideal.ratio) < 1e-3);
}

TEST_CASE("quasi-static Gaussian dephasing law") {
    // ou_tau -> infinity limit: field frozen within each shot, iid across the
    // ensemble. Drive execute_shot directly with per-shot marginal draws so the
    // Monte Carlo samples the static ensemble, then compare the fringe contrast
    // against exp(-(2 pi S sigma tau)^2 / 2).
    auto ctx = quiet_ctx(4);
    ctx.field.ou_sigma = 0.15e-3;
    ctx.field.ou_tau = 1e9;
    const double tau_l = 0.2;
    auto seq = ramsey_seq(tau_l);
    auto scan = freq_scan(tau_l, 13, 2000);
    auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.07);
    Philox marginal(1234, 0);
    std::map<int, std::pair<long, long>> counts;  // test role only
    for (const auto& rec : plan.shots) {
        const double x = ctx.field.ou_sigma * marginal.normal();
        const auto& s = rec.role == ShotRole::control ? scan.control_sequence : seq;
        auto o = execute_shot(s, scan.variable, rec, ctx, x);
        if (rec.role == ShotRole::test) {
            counts[rec.point_index].first += 1;
            counts[rec.point_index].second += o.observed_up;
        }
    }
    std::vector<FitPoint> pts;
    for (auto& [pt, su] : counts)
        pts.push_back({scan.values[pt], double(su.second) / su.first,
                       binomial_stderr(su.second, su.first)});
    auto fit = fit_sinusoid(pts);
    const double alpha = 2 * M_PI * clock_sensitivity(ctx.hfc, 1.78) * ctx.field.ou_sigma;
    const double expect = std::exp(-0.5 * std::pow(alpha * tau_l, 2));
    CHECK(fit.value("amplitude") == Catch::Approx(expect).epsilon(0.02));
}

TEST_CASE("finite-ou_tau dephasing matches the exact OU coherence integral") {
    // ou_tau well below the inter-shot gap: shots draw iid from the chain, and
    // the intra-shot integral gives contrast exp(-a^2 tc^2 (e - 1 + exp(-e))),
    // e = tau/tc. This exercises the joint (x, integral) sampling end to end.
    auto ctx = quiet_ctx(14);
    ctx.field.ou_sigma = 0.15e-3;
    ctx.field.ou_tau = 0.05;
    const double tau_l = 0.2;
    auto seq = ramsey_seq(tau_l);
    auto scan = freq_scan(tau_l, 13, 2000);
    auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.07);
    auto points = run_plan(plan, seq, scan, ctx, 4);
    FringeDataset d;
    d.points = points;
    auto ar = amplitude_ratio(d, false);
    const double alpha = 2 * M_PI * clock_sensitivity(ctx.hfc, 1.78) * ctx.field.ou_sigma;
    const double eps = tau_l / ctx.field.ou_tau;
    const double chi = alpha * alpha * ctx.field.ou_tau * ctx.field.ou_tau *
                       (eps - 1.0 + std::exp(-eps));
    CHECK(ar.ratio == Catch::Approx(std::exp(-chi)).epsilon(0.02));
}

TEST_CASE("spin echo cancels quasi-static noise; removing the pi pulse does not") {
    auto ctx = quiet_ctx(5);
    ctx.field.ou_sigma = 0.15e-3;
    ctx.field.ou_tau = 20.0;
    const double tau = 0.4;
    auto echo = parse_sequence(
        "prepare\npulse pi2 microwave\ndelay " + std::to_string(tau / 2) +
        "\npulse pi microwave\ndelay " + std::to_string(tau / 2) + "\npulse pi2 microwave\nmeasure\n");
    ScanSpec scan;
    scan.variable = ScanVariable::phase;
    for (int i = 0; i < 16; ++i) scan.values.push_back(2 * M_PI * i / 16.0);
    scan.shots_per_point = 400;
    scan.control_sequence = parse_sequence(
        "prepare\npulse pi2 microwave\ndelay 0.00015\npulse pi microwave\ndelay 0.00015\npulse pi2 "
        "microwave\nmeasure\n");
    auto plan = build_shot_plan(echo, scan, ctx.pulses, 0.07);
    auto points = run_plan(plan, echo, scan, ctx, 4);
    FringeDataset d;
    d.points = points;
    auto ar = amplitude_ratio(d, true);
    CHECK(ar.ratio >= 0.98);

    // calibrated heavy-tailed static noise: echo refocuses it exactly, the bare
    // Ramsey at the same delay decays as exp(-tau 2 pi S gamma)
    ctx.field.ou_sigma = 2e-5;
    ctx.field.ou_tau = 120.0;
    ctx.field.lorentz_gamma = 3e-5;
    auto ram = ramsey_seq(tau);
    ScanSpec scan2 = scan;
    scan2.control_sequence = ramsey_seq(0.0003);
    auto plan2 = build_shot_plan(ram, scan2, ctx.pulses, 0.07);
    auto points2 = run_plan(plan2, ram, scan2, ctx, 4);
    FringeDataset d2;
    d2.points = points2;
    auto ar2 = amplitude_ratio(d2, true);
    const double gamma_rate = 2 * M_PI * clock_sensitivity(ctx.hfc, 1.78) * ctx.field.lorentz_gamma;
    CHECK(ar2.ratio < 0.9);
    CHECK(ar2.ratio == Catch::Approx(std::exp(-gamma_rate * tau)).margin(0.06));

    auto plan3 = build_shot_plan(echo, scan, ctx.pulses, 0.07);
    auto points3 = run_plan(plan3, echo, scan, ctx, 4);
    FringeDataset d3;
    d3.points = points3;
    CHECK(amplitude_ratio(d3, true).ratio >= 0.98);
}

TEST_CASE("outcomes are bitwise independent of the thread count") {
    auto ctx = quiet_ctx(6);
    ctx.field.ou_sigma = 0.1e-3;
    ctx.field.lorentz_gamma = 3e-5;
    ctx.readout.p_detect_down = 0.95;
    ctx.readout.p_false_shelve_up = 0.002;
    const double tau_l = 0.05;
    auto seq = ramsey_seq(tau_l);
    auto scan = freq_scan(tau_l, 7, 100);
    auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.07);
    auto p1 = run_plan(plan, seq, scan, ctx, 1);
    auto p4 = run_plan(plan, seq, scan, ctx, 4);
    auto p3 = run_plan(plan, seq, scan, ctx, 3);
    REQUIRE(p1.size() == p4.size());
    for (size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].ups == p4[i].ups);
        CHECK(p1[i].ups == p3[i].ups);
        CHECK(p1[i].shots == p4[i].shots);
    }
}

TEST_CASE("prep exclusion removes shots; baseline policy keeps them bright") {
    auto ctx = quiet_ctx(7);
    ctx.readout.prep_success = 0.14;
    ctx.prep.state = PrepState::up;
    ctx.prep.policy = PrepPolicy::exclude;
    auto seq = ramsey_seq(0.01);
    ScanSpec scan;
    scan.variable = ScanVariable::phase;
    scan.values = {0.0};
    scan.shots_per_point = 2000;
    scan.interleave_control = false;
    auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.01);
    auto pts = run_plan(plan, seq, scan, ctx);
    REQUIRE(pts.size() == 1);
    CHECK(double(pts[0].shots) / 2000 == Catch::Approx(0.14).margin(0.03));

    ctx.prep.policy = PrepPolicy::baseline;
    auto pts2 = run_plan(plan, seq, scan, ctx);
    CHECK(pts2[0].shots == 2000);
    // wrong preps read bright (up): fraction ~ 0.86*1 + 0.14*P(up| phi=0 from up-prep = 0)
    CHECK(double(pts2[0].ups) / 2000 == Catch::Approx(0.86).margin(0.03));
}

TEST_CASE("baseline policy: F=3 -> F=4 leak drains the bright fraction with delay") {
    auto ctx = quiet_ctx(8);
    ctx.readout.prep_success = 0.14;
    ctx.prep.state = PrepState::up;
    ctx.prep.policy = PrepPolicy::baseline;
    ctx.prep.f3_leak_rate = 0.5;
    ScanSpec scan;
    scan.variable = ScanVariable::phase;
    scan.values = {0.0};
    scan.shots_per_point = 4000;
    scan.interleave_control = false;
    for (double tau : {0.2, 1.0}) {
        auto seq = ramsey_seq(tau);
        auto plan = build_shot_plan(seq, scan, ctx.pulses, 0.01);
        auto pts = run_plan(plan, seq, scan, ctx);
        const double bright = 0.86 * std::exp(-0.5 * tau);
        CHECK(double(pts[0].ups) / 4000 == Catch::Approx(bright).margin(0.03));
    }
}

TEST_CASE("physics truncation errors propagate out of execute_shot") {
    ExperimentContext ctx;
    PulseParams pi2;
    pi2.kind = PulseKind::carrier;
    pi2.duration = 1.8e-6;
    pi2.rabi_frequency = (M_PI / 2) / pi2.duration;
    PulseParams rsb;
    rsb.kind = PulseKind::red_sideband;
    rsb.duration = 20e-6;
    rsb.rabi_frequency = M_PI / (rsb.duration * rsb.lamb_dicke);
    ctx.pulses["pi2"] = pi2;
    ctx.pulses["pi_rsb"] = rsb;
    ctx.readout.prep_success = 1.0;
    ctx.prep.state = PrepState::down;
    ctx.prep.n_bar = 1.5;  // thermal prep reaches n_max - 1
    ctx.n_max = 2;
    ctx.seed = 99;
    auto seq = parse_sequence(
        "prepare\npulse pi2 raman_carrier\npulse pi_rsb raman_rsb\ndelay 0.0001\n"
        "pulse pi_rsb raman_rsb\npulse pi2 raman_carrier\nmeasure\n");
    bool threw = false;
    for (std::uint64_t k = 0; k < 200 && !threw; ++k) {
        ShotRecord rec{ShotRole::test, 0, 0.0, 0.0, k};
        try {
            execute_shot(seq, ScanVariable::delay_offset, rec, ctx, 0.0);
        } catch (const std::runtime_error&) {
            threw = true;
        }
    }
    CHECK(threw);
}
