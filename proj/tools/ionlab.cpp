// ionlab: run simulated single-ion coherence experiments, analyze fringe
// datasets, and reproduce the bundled reference targets.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "ionlab/config.hpp"
#include "ionlab/experiments.hpp"
#include "ionlab/presets.hpp"
#include "ionlab/version.hpp"

using namespace ionlab;

namespace {

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    if (const char* env = std::getenv("IONLAB_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 1;
}

int cmd_run(const std::string& config_path, long long seed_override, std::string out_path,
            int threads) {
    RunConfig cfg;
    try {
        cfg = load_run_config(config_path);
        if (seed_override >= 0) cfg.ctx.seed = static_cast<std::uint64_t>(seed_override);
        if (out_path.empty()) out_path = cfg.out_csv;
        if (out_path.empty()) out_path = config_path + ".csv";
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        FringeDataset data;
        if (cfg.experiment == "field_calibration") {
            auto cal = run_field_calibration(cfg, threads);
            data = std::move(cal.dataset);
            data.meta.extra["field_calibration_g"] = cal.b;
            data.meta.extra["field_calibration_err_g"] = cal.stderr_;
            std::cout << "field calibration: B = " << cal.b << " G +- " << cal.stderr_ << " G\n";
        } else {
            data = run_experiment(cfg, threads);
        }
        write_csv(data, out_path);
        write_sidecar(data, out_path);
        std::cout << "wrote " << out_path << " (" << data.points.size() << " points, seed "
                  << cfg.ctx.seed << ", digest " << cfg.digest << ")\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

std::vector<FitPoint> read_amplitude_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(0, "cannot open: " + path);
    std::vector<FitPoint> pts;
    std::string line;
    int row = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line.rfind("tau_s,amplitude,sigma", 0) != 0)
                throw CsvError(row, "expected header tau_s,amplitude,sigma");
            header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string f;
        FitPoint p{};
        double* slots[3] = {&p.x, &p.y, &p.sigma};
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(ls, f, ',')) throw CsvError(row, "expected 3 fields");
            char* end = nullptr;
            *slots[i] = std::strtod(f.c_str(), &end);
            if (end == f.c_str()) throw CsvError(row, "bad number '" + f + "'");
        }
        pts.push_back(p);
    }
    if (!header) throw CsvError(row, "missing header");
    return pts;
}

// digest consistency between the CSV and its sidecar, when both carry one
void check_digest(const std::string& csv_path, const std::string& csv_digest, bool force) {
    const std::string sidecar = csv_path + ".meta.json";
    std::ifstream in(sidecar);
    if (!in) return;
    nlohmann::json j;
    try {
        in >> j;
    } catch (...) {
        return;
    }
    if (!j.contains("config_digest") || csv_digest.empty()) return;
    if (j["config_digest"] != csv_digest) {
        if (force) {
            std::cerr << "warning: digest mismatch between CSV and sidecar (forced)\n";
            return;
        }
        throw ConfigError("digest mismatch between " + csv_path + " and its sidecar (use --force)");
    }
}

int cmd_analyze(const std::string& in_path, const std::string& model, std::string out_path,
                const std::string& scan_kind, bool force, bool correct_readout, double p_down,
                double p_false_up) {
    if (out_path.empty()) out_path = in_path + ".fit.json";
    try {
        if (model == "expdecay") {
            auto pts = read_amplitude_table(in_path);
            auto fit = fit_exponential_decay(pts);
            detail::atomic_write(out_path,
                                 fit_report_json("expdecay", fit, "amplitude-table").dump(2) + "\n");
            std::cout << "expdecay: T2 = " << fit.value("decay_constant") << " +- "
                      << fit.stderr_of("decay_constant")
                      << " s, intercept = " << fit.value("intercept") << " +- "
                      << fit.stderr_of("intercept") << ", chi2_nu = " << fit.reduced_chi_sq << "\n";
            return 0;
        }
        if (model != "sinusoid") throw ConfigError("unknown model '" + model + "'");

        auto data = read_csv(in_path);
        check_digest(in_path, data.meta.config_digest, force);
        ReadoutParams rp;
        rp.p_detect_down = p_down;
        rp.p_false_shelve_up = p_false_up;
        auto test_pts = correct_readout ? readout_corrected_points(data, "test", rp)
                                        : fringe_points(data, "test");
        if (test_pts.empty()) throw CsvError(0, "no test points in dataset");

        bool has_control = false;
        std::set<double> ctrl_values;
        long ctrl_shots = 0, ctrl_ups = 0;
        for (const auto& p : data.points)
            if (p.role == "control" && p.shots > 0) {
                has_control = true;
                ctrl_values.insert(p.scan_value);
                ctrl_shots += p.shots;
                ctrl_ups += p.ups;
            }
        bool fringed = scan_kind == "phase";
        if (scan_kind == "auto") {
            std::string var = data.meta.scan_variable;
            if (var.empty()) {
                std::ifstream side(in_path + ".meta.json");
                if (side) {
                    nlohmann::json sj;
                    try {
                        side >> sj;
                        if (sj.contains("scan_variable")) var = sj["scan_variable"];
                    } catch (...) {
                    }
                }
            }
            if (var == "frequency") {
                fringed = false;
            } else if (var == "phase" || var == "delay_offset") {
                fringed = true;
            } else if (ctrl_values.size() > 4) {
                // no metadata: call the control fringed only when its fitted
                // amplitude is significant
                auto cf = fit_sinusoid(fringe_points(data, "control"));
                fringed = !cf.flat;
            }
        }

        auto fit = fit_sinusoid(test_pts);
        auto report = fit_report_json("sinusoid", fit, data.meta.config_digest);
        if (has_control) {
            AmplitudeRatio ar =
                fringed ? amplitude_ratio_fringed(test_pts, fringe_points(data, "control"))
                        : amplitude_ratio_flat(test_pts, double(ctrl_ups) / ctrl_shots,
                                               binomial_stderr(ctrl_ups, ctrl_shots));
            report["amplitude_ratio"] = {{"value", ar.ratio},
                                         {"stderr", ar.stderr_},
                                         {"control", fringed ? "fringed" : "flat"}};
            std::cout << "sinusoid: period = " << fit.value("period") << " +- "
                      << fit.stderr_of("period") << ", amplitude ratio = " << ar.ratio << " +- "
                      << ar.stderr_ << "\n";
        } else {
            std::cout << "sinusoid: period = " << fit.value("period") << " +- "
                      << fit.stderr_of("period") << ", amplitude = " << fit.value("amplitude")
                      << " +- " << fit.stderr_of("amplitude") << "\n";
        }
        detail::atomic_write(out_path, report.dump(2) + "\n");
        return 0;
    } catch (const FitError& e) {
        nlohmann::json diag{{"error", e.what()}, {"model", model}, {"input", in_path}};
        try {
            detail::atomic_write(out_path, diag.dump(2) + "\n");
        } catch (...) {
        }
        std::cerr << "fit error: " << e.what() << " (diagnostics in " << out_path << ")\n";
        return 4;
    } catch (const CsvError& e) {
        std::cerr << "csv error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

int cmd_reproduce(const std::string& target, std::uint64_t seed, std::string outdir, int threads,
                  int replicates) {
    if (outdir.empty()) outdir = "reproduce_" + target;
    try {
        auto result = reproduce(target, seed, outdir, threads, replicates);
        const std::string text = summary_text(result);
        detail::atomic_write(outdir + "/summary.txt", text);
        detail::atomic_write(outdir + "/summary.json", summary_json(result).dump(2) + "\n");
        std::cout << text;
        std::cout << "bundle written to " << outdir << "/\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ionlab: single trapped-ion coherence experiment simulator"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    int threads = 0;

    auto* run = app.add_subcommand("run", "run a configured experiment, write CSV + sidecar");
    std::string run_config, run_out;
    long long run_seed = -1;
    run->add_option("--config", run_config, "run configuration file")->required();
    run->add_option("--seed", run_seed, "override the config seed");
    run->add_option("--out", run_out, "output CSV path");
    run->add_option("--threads", threads, "shot-level worker threads (env IONLAB_THREADS)");

    auto* analyze = app.add_subcommand("analyze", "fit a dataset and write a JSON report");
    std::string an_in, an_out, an_model, an_scan = "auto";
    bool an_force = false, an_correct = false;
    double an_pdown = 0.95, an_pfalse = 0.002;
    analyze->add_option("--in", an_in, "input CSV")->required();
    analyze->add_option("--model", an_model, "sinusoid | expdecay")->required();
    analyze->add_option("--out", an_out, "output JSON path");
    analyze->add_option("--scan", an_scan, "control handling: auto | frequency | phase");
    analyze->add_flag("--force", an_force, "proceed past digest mismatches");
    analyze->add_flag("--correct-readout", an_correct, "invert the readout channel before fitting");
    analyze->add_option("--p-detect-down", an_pdown, "readout: P(detect down | down)");
    analyze->add_option("--p-false-shelve-up", an_pfalse, "readout: P(shelve | up)");

    auto* rep = app.add_subcommand("reproduce", "run a bundled reference target");
    std::string rep_target, rep_outdir;
    std::uint64_t rep_seed = 1;
    int rep_replicates = 1;
    rep->add_option("target", rep_target, "fig2 | fig3 | fig4 | splitting")->required();
    rep->add_option("--seed", rep_seed, "base seed");
    rep->add_option("--outdir", rep_outdir, "output directory");
    rep->add_option("--replicates", rep_replicates, "independent replicates (fig2)");
    rep->add_option("--threads", threads, "shot-level worker threads (env IONLAB_THREADS)");

    CLI11_PARSE(app, argc, argv);
    const int nthreads = resolve_threads(threads);

    if (run->parsed()) return cmd_run(run_config, run_seed, run_out, nthreads);
    if (analyze->parsed())
        return cmd_analyze(an_in, an_model, an_out, an_scan, an_force, an_correct, an_pdown,
                           an_pfalse);
    if (rep->parsed())
        return cmd_reproduce(rep_target, rep_seed, rep_outdir, nthreads, rep_replicates);
    return 1;
}
