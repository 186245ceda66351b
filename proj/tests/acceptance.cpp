// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Fast numeric criteria run in-process; the pipeline criteria shell out to the
// ionlab binary and read the bundle summaries it writes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionlab/execute.hpp"
#include "ionlab/experiments.hpp"
#include "ionlab/fit.hpp"
#include "ionlab/presets.hpp"

using namespace ionlab;
using nlohmann::json;

namespace {

int g_failures = 0;
const int kThreads = 4;

void report(const char* id, bool pass, const std::string& detail) {
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    if (!pass) ++g_failures;
}

double now_s() {
    using clk = std::chrono::steady_clock;
    static const auto t0 = clk::now();
    return std::chrono::duration<double>(clk::now() - t0).count();
}

int run_cmd(const std::string& cmd) { return WEXITSTATUS(std::system(cmd.c_str())); }

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing " + path);
    json j;
    in >> j;
    return j;
}

struct Row {
    double value = 0, err = 0;
    std::string status, note;
};

std::map<std::string, Row> summary_rows(const json& j) {
    std::map<std::string, Row> rows;
    for (const auto& r : j["rows"])
        rows[r["quantity"]] = {r["value"], r["err"], r["status"], r["note"]};
    return rows;
}

char buf[512];

// --------------------------------------------------------------------------

void c1_breit_rabi_anchor() {
    const double t0 = now_s();
    HyperfineConstants c;
    const double s = clock_sensitivity(c, 1.78) / 1000.0;  // Hz/mG
    const double dt = now_s() - t0;
    const bool pass = std::fabs(s / 4.33 - 1.0) < 0.01 && dt < 1.0;
    std::snprintf(buf, sizeof buf,
                  "clock sensitivity at 1.78 G = %.4f Hz/mG (target 4.33 within 1%%), %.3f s", s,
                  dt);
    report("C1", pass, buf);
}

void c2_splitting_round_trip() {
    HyperfineConstants c;
    const double f = clock_transition_frequency(c, 1.78);
    const double nu = extrapolate_zero_field_splitting(c, f, 1.78);
    const double err = nu - c.nu_hf;
    std::snprintf(buf, sizeof buf, "synthesize at 1.78 G, extrapolate back: error %.2e Hz (< 0.1)",
                  err);
    report("C2", std::fabs(err) < 0.1, buf);
}

void c3_ideal_ramsey() {
    auto cfg = fig_ramsey_config(0.2, 301);
    cfg.ctx.field.ou_sigma = 0;
    cfg.ctx.field.lorentz_gamma = 0;
    cfg.ctx.readout.p_detect_down = 1.0;
    cfg.ctx.readout.p_false_shelve_up = 0.0;
    auto data = run_hyperfine_ramsey(cfg, kThreads);
    auto fit = fit_sinusoid(fringe_points_irls(data, "test"));
    auto ar = amplitude_ratio(data, false);
    const double period = fit.value("period");
    const bool pass = std::fabs(period / 5.0 - 1.0) < 0.01 && std::fabs(ar.ratio - 1.0) < 0.02;
    std::snprintf(buf, sizeof buf,
                  "noiseless 200 ms scan: period %.4f Hz (5.00 within 1%%), ratio %.4f (1.00 "
                  "within 0.02) at 500 shots/point",
                  period, ar.ratio);
    report("C3", pass, buf);
}

void c4_drift_distortion() {
    const double tau_l = 0.2;
    const double S = clock_sensitivity(HyperfineConstants{}, 1.78);
    bool law_ok = true;
    std::string law_detail;
    for (double d_over_r : {-0.3, -0.15, 0.15, 0.3}) {
        auto cfg = fig_ramsey_config(tau_l, 401 + int(d_over_r * 100));
        cfg.ctx.field.ou_sigma = 0;
        cfg.ctx.field.lorentz_gamma = 0;
        auto plan = build_shot_plan(cfg.sequence, cfg.scan, cfg.ctx.pulses, cfg.overhead);
        const double rate = (2.0 / tau_l) / plan.total_duration * (13.0 / 12.0);
        cfg.ctx.field.drift_rate = d_over_r * rate / S;
        auto data = run_hyperfine_ramsey(cfg, kThreads);
        auto fit = fit_sinusoid(fringe_points_irls(data, "test"));
        const double expect = (1.0 / tau_l) / (1.0 - d_over_r);
        const double rel = fit.value("period") / expect - 1.0;
        if (std::fabs(rel) > 0.02) law_ok = false;
        char piece[64];
        std::snprintf(piece, sizeof piece, " d/r=%+.2f: %+.2f%%", d_over_r, 100 * rel);
        law_detail += piece;
    }

    // randomized order at d/r = 0.3: pool counts per scan value across runs;
    // the drift becomes a common amplitude factor and the period bias vanishes
    std::map<int, std::pair<long, long>> pooled;
    std::vector<double> values;
    for (int r = 0; r < 16; ++r) {
        auto cfg = fig_ramsey_config(tau_l, 480 + r);
        cfg.ctx.field.ou_sigma = 0;
        cfg.ctx.field.lorentz_gamma = 0;
        cfg.scan.randomize_order = true;
        auto plan = build_shot_plan(cfg.sequence, cfg.scan, cfg.ctx.pulses, cfg.overhead,
                                    cfg.ctx.seed);
        const double rate = (2.0 / tau_l) / plan.total_duration * (13.0 / 12.0);
        cfg.ctx.field.drift_rate = 0.3 * rate / S;
        auto data = run_hyperfine_ramsey(cfg, kThreads);
        values.resize(cfg.scan.values.size());
        int idx = 0;
        for (const auto& p : data.points) {
            if (p.role != "test") continue;
            // points arrive ordered by point index
            pooled[idx].first += p.shots;
            pooled[idx].second += p.ups;
            values[idx] = p.scan_value;
            ++idx;
        }
    }
    std::vector<FitPoint> pts;
    for (auto& [idx, su] : pooled)
        pts.push_back({values[idx], double(su.second) / su.first,
                       binomial_stderr(su.second, su.first)});
    auto rand_fit = fit_sinusoid(pts);
    const double rand_period = rand_fit.value("period");
    const bool rand_ok = std::fabs(rand_period / 5.0 - 1.0) < 0.01;

    // qualitative anchor: -1.3 mG/hr over a 37-min downward 13-point scan
    auto cfg_q = fig_ramsey_config(tau_l, 499);
    cfg_q.ctx.field.ou_sigma = 0;
    cfg_q.ctx.field.lorentz_gamma = 0;
    cfg_q.ctx.field.drift_rate = -1.3e-3 / 3600.0;
    std::reverse(cfg_q.scan.values.begin(), cfg_q.scan.values.end());  // scan downward
    auto data_q = run_hyperfine_ramsey(cfg_q, kThreads);
    auto fit_q = fit_sinusoid(fringe_points_irls(data_q, "test"));
    const double period_q = fit_q.value("period");
    const bool qual_ok = period_q > 5.5 && period_q < 12.0;

    const bool pass = law_ok && rand_ok && qual_ok;
    std::snprintf(buf, sizeof buf,
                  "law vs (1/tau)/(1-d/r) within 2%%:%s; randomized restores %.3f Hz (1%%); "
                  "-1.3 mG/hr down-scan gives %.2f Hz (>5, order of 6.1)",
                  law_detail.c_str(), rand_period, period_q);
    report("C4", pass, buf);
}

void c5_t2_pipeline(const std::string& bin, const std::string& outdir) {
    const double t0 = now_s();
    const std::string dir = outdir + "/fig2";
    const int rc = run_cmd(bin + " reproduce fig2 --seed 11 --replicates 20 --threads " +
                           std::to_string(kThreads) + " --outdir " + dir + " > /dev/null");
    const double dt = now_s() - t0;
    if (rc != 0) {
        report("C5", false, "reproduce fig2 exited with code " + std::to_string(rc));
        return;
    }
    auto rows = summary_rows(load_json(dir + "/summary.json"));
    const double frac = rows["window_fraction"].value;
    const double c200 = rows["contrast_200ms"].value;
    const bool pass = frac >= 0.9 && c200 >= 0.75 && c200 <= 0.95 && dt < 300.0;
    std::snprintf(buf, sizeof buf,
                  "T2 in [0.9,1.5] s and intercept in [0.94,1.02] for %.0f%% of 20 replicates "
                  "(>= 90%%); 200 ms contrast %.3f in 0.85(10); %.0f s (< 300)",
                  100 * frac, c200, dt);
    report("C5", pass, buf);
}

void c6_spin_echo(const std::string& bin, const std::string& outdir) {
    const std::string dir = outdir + "/fig3";
    const int rc = run_cmd(bin + " reproduce fig3 --seed 1 --threads " + std::to_string(kThreads) +
                           " --outdir " + dir + " > /dev/null");
    if (rc != 0) {
        report("C6", false, "reproduce fig3 exited with code " + std::to_string(rc));
        return;
    }
    auto rows = summary_rows(load_json(dir + "/summary.json"));
    const double lower = rows["echo_ratio_1sigma_lower"].value;
    const double bound = coherence_lower_bound_to_t2(0.98, 1.0);
    const double nopi = rows["ramsey_1s_no_pi"].value;
    const bool pass = lower >= 0.98 && std::fabs(bound - 49.4983) < 1e-3 && bound >= 45.0 &&
                      nopi < 0.5;
    std::snprintf(buf, sizeof buf,
                  "echo ratio (1 sigma lower) %.4f >= 0.98 at 1 s; bound -1/ln(0.98) = %.4f s "
                  ">= 45; no-pi contrast %.3f < 0.5",
                  lower, bound, nopi);
    report("C6", pass, buf);
}

void c7_heating(const std::map<std::string, Row>& fig4_rows) {
    const double t0 = now_s();
    const double rate = 3.0;
    const int n = 100000, n_max = 60;
    double sum_n = 0;
    for (int k = 0; k < n; ++k) {
        Philox rng(0x77, k);
        sum_n += heating_jumps(IonState::basis(n_max, kQubitDown, 0), 1.0, rate, rng).mean_n();
    }
    const double mean_n = sum_n / n;

    const double t2p = fig4_rows.at("t2p_810_ms").value;
    const double dt = now_s() - t0;
    const bool mean_ok = std::fabs(mean_n - 3.0) <= 0.1;
    const bool decay_ok = std::fabs(t2p / 166.7 - 1.0) <= 0.10;
    std::snprintf(buf, sizeof buf,
                  "<n>(1 s) = %.3f (3.0 within 0.1, 1e5 trajectories); fitted fringe decay %.1f "
                  "ms vs no-jump 1/(2G) = 166.7 ms within 10%%: %s; %.0f s (< 120)",
                  mean_n, t2p, decay_ok ? "yes" : "NO", dt);
    report("C7", mean_ok && decay_ok && dt < 120.0, buf);
    if (!decay_ok) {
        std::printf(
            "       note: under the specified jump model (and the exact Lindblad channel, "
            "203-217 ms) two-jump up-down paths revive the fringe, so the decay constant "
            "sits ~20%% above the no-jump value; it does lie inside the reference 182(36) ms "
            "band. See the fig4 bundle and the unit test pinning exp(-2 Gamma t) no-jump "
            "survival.\n");
    }
}

void c8_motional_fringes(const std::map<std::string, Row>& fig4_rows) {
    const double period = fig4_rows.at("fringe_period_us").value;
    const double contrast = fig4_rows.at("contrast_tau0").value;
    const bool pass = std::fabs(period / 93.458 - 1.0) < 0.01 && std::fabs(contrast - 1.0) <= 0.03;
    std::snprintf(buf, sizeof buf,
                  "10.7 kHz fringes: period %.3f us (93.458 within 1%%), corrected contrast at "
                  "tau_M=0 %.3f (1.00 within 0.03)",
                  period, contrast);
    report("C8", pass, buf);
}

void c9_490_regime(const std::map<std::string, Row>& fig4_rows) {
    const double ratio = fig4_rows.at("t2p_490_vs_closed_form").value;
    const double t2p = fig4_rows.at("t2p_490_ms").value;
    const bool pass = ratio >= 0.9 && ratio <= 1.1;
    std::snprintf(buf, sizeof buf,
                  "sqrt(V) model at 490 kHz (v0=500 V, vsig=3 mV): simulated/closed-form decay "
                  "= %.3f (within 10%%); simulated %.0f ms reported beside 56(18) ms as the "
                  "documented open discrepancy",
                  ratio, t2p);
    report("C9", pass, buf);
}

void c10_determinism_and_statistics() {
    // byte-identical outputs at any thread count
    auto cfg = fig_ramsey_config(0.05, 1001);
    auto d1 = run_hyperfine_ramsey(cfg, 1);
    auto d4 = run_hyperfine_ramsey(cfg, 4);
    auto d3 = run_hyperfine_ramsey(cfg, 3);
    const bool det = to_csv(d1) == to_csv(d4) && to_csv(d1) == to_csv(d3);

    // binomial coverage
    Philox rng(2024, 0);
    const double p_true = 0.3;
    const long n = 500;
    int covered = 0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
        long ups = 0;
        for (long k = 0; k < n; ++k) ups += rng.uniform() < p_true;
        const double err = binomial_stderr(ups, n);
        const double hat = double(ups) / n;
        covered += hat - err <= p_true && p_true <= hat + err;
    }
    const double cov = double(covered) / reps;
    const bool cov_ok = cov >= 0.66 && cov <= 0.70;

    // exact-model recovery to 1e-6 relative
    std::vector<FitPoint> sp;
    for (int i = 0; i < 13; ++i) {
        const double x = -5.0 + 10.0 * i / 12.0;
        sp.push_back({x, 0.5 + 0.5 * 0.85 * std::cos(2 * M_PI * x / 5.0 + 0.7), 0.02});
    }
    auto sf = fit_sinusoid(sp);
    std::vector<FitPoint> ep;
    for (double t : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3})
        ep.push_back({t, 0.98 * std::exp(-t / 1.2), 0.02});
    auto ef = fit_exponential_decay(ep);
    const double rec = std::max({std::fabs(sf.value("period") / 5.0 - 1.0),
                                 std::fabs(sf.value("amplitude") / 0.85 - 1.0),
                                 std::fabs(ef.value("decay_constant") / 1.2 - 1.0),
                                 std::fabs(ef.value("intercept") / 0.98 - 1.0)});
    const bool rec_ok = rec < 1e-6;

    std::snprintf(buf, sizeof buf,
                  "thread-count invariance: %s; binomial coverage %.3f in 0.68 +- 0.02; "
                  "exact-model recovery %.1e (< 1e-6)",
                  det ? "byte-identical" : "MISMATCH", cov, rec);
    report("C10", det && cov_ok && rec_ok, buf);
}

}  // namespace

int main() {
    const std::string bin = IONLAB_BIN;
    const std::string outdir = "acceptance_out";

    c1_breit_rabi_anchor();
    c2_splitting_round_trip();
    c3_ideal_ramsey();
    c4_drift_distortion();
    c5_t2_pipeline(bin, outdir);
    c6_spin_echo(bin, outdir);

    const double t_fig4 = now_s();
    const int rc4 = run_cmd(bin + " reproduce fig4 --seed 1 --threads " + std::to_string(kThreads) +
                            " --outdir " + outdir + "/fig4 > /dev/null");
    if (rc4 != 0) {
        report("C7", false, "reproduce fig4 exited with code " + std::to_string(rc4));
        report("C8", false, "reproduce fig4 failed");
        report("C9", false, "reproduce fig4 failed");
    } else {
        auto rows = summary_rows(load_json(outdir + "/fig4/summary.json"));
        std::printf("       (fig4 bundle in %.1f s)\n", now_s() - t_fig4);
        c7_heating(rows);
        c8_motional_fringes(rows);
        c9_490_regime(rows);
    }
    c10_determinism_and_statistics();

    // splitting reproduction doubles as a digest/report smoke check
    run_cmd(bin + " reproduce splitting --seed 1 --threads 2 --outdir " + outdir +
            "/splitting > /dev/null");

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
