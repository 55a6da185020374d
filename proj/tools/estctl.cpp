// Copyright 2026 The estkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "estkit/config.hpp"
#include "estkit/dynamics.hpp"
#include "estkit/errormodel.hpp"
#include "estkit/experiment.hpp"
#include "estkit/grape.hpp"
#include "estkit/io.hpp"
#include "estkit/metrics.hpp"
#include "estkit/version.hpp"

namespace fs = std::filesystem;
using namespace estkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBudget = 2;

struct RunContext {
    std::string command;
    fs::path config_path;
    fs::path out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_overridden = false;
    int threads = 1;
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// Every run records its provenance before any result is produced.
void write_manifest(const RunContext &ctx) {
    nlohmann::json m;
    m["command"] = ctx.command;
    m["config"] = ctx.config_path.string();
    m["seed"] = ctx.seed;
    m["code_version"] = ESTKIT_VERSION;
    m["out_dir"] = ctx.out_dir.string();
    m["threads"] = ctx.threads;
    m["started_at"] = utc_timestamp();
    atomic_write(ctx.out_dir / "manifest.json", m.dump(2) + "\n");
}

GateTarget build_target(const std::string &name, PulseMode mode, const CodeSubspace &code,
                        const OperatorSet &ops, const HilbertConfig &cfg) {
    if (name == "X" || name == "H" || name == "T") {
        return gate_target(code, ops.a.mat, name[0], mode);
    }
    if (name == "AQEC") {
        return aqec_target(code, ops);
    }
    if (name == "encode") {
        return encode_target(code, cfg);
    }
    if (name == "decode") {
        return decode_target(code, cfg);
    }
    if (name == "decode_error") {
        return error_decode_target(code, ops.a.mat, cfg);
    }
    throw ConfigError("config: unknown target '" + name + "'");
}

std::string format_report(const OptimizationReport &r, const OptimizeConfig &cfg) {
    std::ostringstream os;
    os << "# optimization report\n";
    os << "target: " << cfg.target_name << "\n";
    os << "mode: " << to_string(cfg.mode) << "\n";
    os << "seed: " << r.seed << "\n";
    os << "iterations: " << r.iterations << "\n";
    os << "converged: " << (r.converged ? "yes" : "no") << "\n";
    os << "c1: " << format_double(r.final_costs.c1) << "\n";
    if (cfg.mode == PulseMode::kEst) {
        os << "c2: " << format_double(r.final_costs.c2) << "\n";
    }
    os << "c3: " << format_double(r.final_costs.c3) << "\n";
    os << "c_tot: " << format_double(r.c_tot) << "\n";
    os << "code_fidelity: " << format_double(r.code_fidelity) << "\n";
    os << "error_fidelity: " << format_double(r.error_fidelity) << "\n";
    os << "et_fidelity_avg: " << format_double(r.et_fidelity_avg) << "\n";
    os << "et_stride: " << r.et_stride << "\n";
    os << "et_singular_steps: " << r.et_singular_steps << "\n";
    if (r.max_active_level) {
        os << "max_active_level: " << *r.max_active_level << "\n";
    } else {
        os << "max_active_level: none\n";
    }
    os << "wall_seconds: " << format_double(r.wall_seconds) << "\n";
    return os.str();
}

std::string format_cost_trace(const std::vector<double> &trace) {
    std::ostringstream os;
    os << "# iteration,c_tot\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        os << i << "," << format_double(trace[i]) << "\n";
    }
    return os.str();
}

int cmd_optimize(const RunContext &ctx) {
    OptimizeConfig cfg = load_optimize_config(ctx.config_path);
    if (ctx.seed_overridden) {
        cfg.schedule.seed = ctx.seed;
    }
    cfg.schedule.threads = ctx.threads;

    RunContext manifest_ctx = ctx;
    manifest_ctx.seed = cfg.schedule.seed;
    write_manifest(manifest_ctx);

    const DriveSystem sys = make_drive_system(cfg.system.params, cfg.system.hilbert);
    const OperatorSet ops = fock_operators(cfg.system.hilbert);
    const CodeSubspace code = kitten_code(cfg.system.hilbert);
    const GateTarget target = build_target(cfg.target_name, cfg.mode, code, ops, cfg.system.hilbert);

    try {
        auto [pulse, report] = optimize(sys, target, cfg.schedule);
        const std::string stem = cfg.target_name + "_" + to_string(cfg.mode);
        write_pulse(ctx.out_dir / (stem + ".pulse"), pulse);
        atomic_write(ctx.out_dir / "report.txt", format_report(report, cfg));
        atomic_write(ctx.out_dir / "cost_trace.csv", format_cost_trace(report.cost_trace));
        std::cout << "wrote " << (ctx.out_dir / (stem + ".pulse")).string() << " (code fidelity "
                  << report.code_fidelity << ")\n";
        return report.converged ? kExitOk : kExitBudget;
    } catch (const OptimizeAbort &abort) {
        atomic_write(ctx.out_dir / "report.txt", std::string("# aborted\n") + abort.what() + "\n");
        atomic_write(ctx.out_dir / "cost_trace.csv", format_cost_trace(abort.partial.cost_trace));
        std::cerr << "error: " << abort.what() << "\n";
        return kExitInputError;
    }
}

int cmd_metrics(const RunContext &ctx) {
    const MetricsConfig cfg = load_metrics_config(ctx.config_path);
    write_manifest(ctx);

    const PulseEnvelope pulse = read_pulse(cfg.pulse_path);
    const DriveSystem sys = make_drive_system(cfg.system.params, cfg.system.hilbert);
    const OperatorSet ops = fock_operators(cfg.system.hilbert);
    const CodeSubspace code = kitten_code(cfg.system.hilbert);

    static StepUnitaryCache cache;
    const auto us = cache.get(sys.h0, sys.a, sys.q, pulse, ctx.threads);
    const State start = logical_state(code, cfg.mismatch_theta, cfg.mismatch_phi);
    const MetricSeries series = compute_metric_series(code, ops, *us, start, pulse.dt_ns);
    const EtFidelityResult et = et_fidelity_avg(code, ops.a.mat, *us, pulse.dt_ns, cfg.et_stride);

    std::optional<int> level;
    for (const State &psi : cardinal_states(code)) {
        const auto lvl = max_active_level(propagate_with(*us, psi, pulse.dt_ns), cfg.system.hilbert);
        if (lvl && (!level || *lvl > *level)) {
            level = lvl;
        }
    }

    atomic_write(ctx.out_dir / "metrics.csv", format_metric_series(series));
    std::ostringstream os;
    os << "# metric summary\n";
    os << "pulse: " << cfg.pulse_path.string() << "\n";
    os << "et_fidelity_avg: " << format_double(et.value) << "\n";
    os << "et_singular_steps: " << et.singular_steps << "\n";
    os << "mean_delta_qec: " << format_double(time_average(series.delta_qec)) << "\n";
    os << "mean_leakage: " << format_double(time_average(series.leakage)) << "\n";
    os << "mean_mismatch: " << format_double(time_average(series.traj_mismatch)) << "\n";
    os << "max_active_level: " << (level ? std::to_string(*level) : "none") << "\n";
    atomic_write(ctx.out_dir / "summary.txt", os.str());
    std::cout << "wrote " << (ctx.out_dir / "metrics.csv").string() << "\n";
    return kExitOk;
}

int cmd_jump_sweep(const RunContext &ctx) {
    const JumpSweepConfig cfg = load_jump_sweep_config(ctx.config_path);
    write_manifest(ctx);

    const PulseEnvelope pulse = read_pulse(cfg.pulse_path);
    const DriveSystem sys = make_drive_system(cfg.system.params, cfg.system.hilbert);
    const OperatorSet ops = fock_operators(cfg.system.hilbert);
    const CodeSubspace code = kitten_code(cfg.system.hilbert);
    const GateTarget target = gate_target(code, ops.a.mat, cfg.kind, PulseMode::kEst);

    const StepSpectra spec = compute_step_spectra(sys.h0, sys.a, sys.q, pulse, ctx.threads);
    const double duration = pulse.duration_ns();

    std::ostringstream os;
    os << "# t_jump_ns,error_infidelity\n";
    double mean = 0.0;
    std::vector<double> infidelities(cfg.n_times, 0.0);
    parallel_for(static_cast<std::size_t>(cfg.n_times), ctx.threads, [&](std::size_t i) {
        const double t_jump = duration * static_cast<double>(i) / (cfg.n_times - 1);
        double infid = 0.0;
        for (std::size_t s = 0; s < target.code_pairs.size(); ++s) {
            const State final_state =
                jump_conditioned_propagate(spec, target.code_pairs[s].first, t_jump, ops.a.mat);
            infid += (1.0 - std::norm(target.error_pairs[s].second.dot(final_state))) /
                     target.code_pairs.size();
        }
        infidelities[i] = infid;
    });
    for (int i = 0; i < cfg.n_times; ++i) {
        const double t_jump = duration * static_cast<double>(i) / (cfg.n_times - 1);
        os << format_double(t_jump) << "," << format_double(infidelities[i]) << "\n";
        mean += infidelities[i] / cfg.n_times;
    }
    os << "# mean," << format_double(mean) << "\n";
    atomic_write(ctx.out_dir / "jump_sweep.csv", os.str());
    std::cout << "wrote " << (ctx.out_dir / "jump_sweep.csv").string() << " (mean " << mean << ")\n";
    return kExitOk;
}

int cmd_experiment(const RunContext &ctx) {
    const ExperimentConfig cfg = load_experiment_config(ctx.config_path);
    write_manifest(ctx);

    const DriveSystem sys = make_drive_system(cfg.system.params, cfg.system.hilbert);
    const CodeSubspace code = kitten_code(cfg.system.hilbert);
    const auto collapse = collapse_operators(cfg.system.params, cfg.system.hilbert);

    ExperimentSpec spec;
    for (const auto &[path, kind] : cfg.gates) {
        GateStep step;
        step.pulse = read_pulse(path);
        step.logical = detail::logical_gate_matrix(kind);
        spec.sequence.push_back(std::move(step));
    }
    spec.n_values = cfg.n_values;
    spec.lossy = cfg.lossy;
    spec.recovery = cfg.recovery;
    if (cfg.aqec_pulse_path) {
        spec.aqec_pulse = read_pulse(*cfg.aqec_pulse_path);
    }
    spec.reset_duration_ns = cfg.reset_duration_ns;
    spec.substeps = cfg.substeps;
    spec.threads = ctx.threads;

    const ExperimentResult res = run_gate_experiment(sys, cfg.system.hilbert, code, collapse, spec);

    std::ostringstream os;
    if (res.f_error.empty()) {
        os << "# N,f_code\n";
        for (std::size_t i = 0; i < res.n.size(); ++i) {
            os << res.n[i] << "," << format_double(res.f_code[i]) << "\n";
        }
    } else {
        os << "# N,f_code,f_error\n";
        for (std::size_t i = 0; i < res.n.size(); ++i) {
            os << res.n[i] << "," << format_double(res.f_code[i]) << "," << format_double(res.f_error[i])
               << "\n";
        }
    }
    atomic_write(ctx.out_dir / "experiment.csv", os.str());
    std::cout << "wrote " << (ctx.out_dir / "experiment.csv").string() << "\n";
    return kExitOk;
}

int cmd_fit(const RunContext &ctx) {
    const FitConfig cfg = load_fit_config(ctx.config_path);
    write_manifest(ctx);

    const FidelityCurve curve = read_fidelity_csv(cfg.data_path);
    const FitResult fit = fit_decay_model(curve, cfg.which, cfg.fixed, cfg.options);

    std::ostringstream os;
    os << "# decay model fit\n";
    os << "data: " << cfg.data_path.string() << "\n";
    os << "which: " << (cfg.which == FitWhich::kCode ? "code" : "error") << "\n";
    os << "converged: " << (fit.converged ? "yes" : "no (best iterate)") << "\n";
    os << "iterations: " << fit.iterations << "\n";
    os << "residual_norm: " << format_double(fit.residual_norm) << "\n";
    if (cfg.which == FitWhich::kCode) {
        os << "gamma_C: " << format_double(fit.params.gamma_c) << "\n";
        os << "A: " << format_double(fit.params.a_scale) << "\n";
        os << "B: " << format_double(fit.params.b_floor) << "\n";
    } else {
        os << "gamma_E: " << format_double(fit.params.gamma_e) << "\n";
        os << "F_err_jump: " << format_double(fit.params.f_err_jump) << "\n";
        os << "gamma_C (fixed): " << format_double(fit.params.gamma_c) << "\n";
        os << "D: " << format_double(fit.params.d_scale) << "\n";
        os << "G: " << format_double(fit.params.g_floor) << "\n";
    }
    os << "# model curve\n";
    os << "# N,fidelity\n";
    for (std::size_t i = 0; i < curve.gate_counts.size(); ++i) {
        os << curve.gate_counts[i] << "," << format_double(fit.model_values[i]) << "\n";
    }
    atomic_write(ctx.out_dir / "fit_report.txt", os.str());
    std::cout << "wrote " << (ctx.out_dir / "fit_report.txt").string() << "\n";
    return fit.converged ? kExitOk : kExitBudget;
}

int cmd_wigner(const RunContext &ctx) {
    const WignerConfig cfg = load_wigner_config(ctx.config_path);
    write_manifest(ctx);

    const HilbertConfig hilbert = cfg.system.hilbert;
    const CodeSubspace code = kitten_code(hilbert);
    State psi;
    if (cfg.initial == "0L") {
        psi = code.word0;
    } else if (cfg.initial == "1L") {
        psi = code.word1;
    } else if (cfg.initial == "+X") {
        psi = cardinal_states(code)[2];
    } else if (cfg.initial == "-X") {
        psi = cardinal_states(code)[3];
    } else if (cfg.initial == "+Y") {
        psi = cardinal_states(code)[4];
    } else if (cfg.initial == "-Y") {
        psi = cardinal_states(code)[5];
    } else if (cfg.initial == "vacuum") {
        psi = State::Zero(hilbert.dim());
        psi(0) = 1.0;
    } else if (cfg.initial.rfind("fock:", 0) == 0) {
        const int n = std::stoi(cfg.initial.substr(5));
        if (n < 0 || n >= hilbert.cavity_dim) {
            throw ConfigError("config: fock index out of range");
        }
        psi = State::Zero(hilbert.dim());
        psi(n * hilbert.qubit_dim) = 1.0;
    } else {
        throw ConfigError("config: unknown initial state '" + cfg.initial + "'");
    }

    if (cfg.pulse_path) {
        const PulseEnvelope pulse = read_pulse(*cfg.pulse_path);
        const DriveSystem sys = make_drive_system(cfg.system.params, hilbert);
        psi = propagate(sys.h0, sys.a, sys.q, pulse, psi, ctx.threads).states.back();
    }

    const Matrix rho_cav = reduce_to_cavity(Matrix(psi * psi.adjoint()), hilbert);
    std::vector<Complex> alphas;
    const int half = static_cast<int>(std::llround(cfg.radius / cfg.step));
    for (int iy = -half; iy <= half; ++iy) {
        for (int ix = -half; ix <= half; ++ix) {
            alphas.emplace_back(ix * cfg.step, iy * cfg.step);
        }
    }
    const std::vector<double> values = wigner(rho_cav, alphas);
    atomic_write(ctx.out_dir / "wigner.csv", format_wigner_grid(alphas, values));
    std::cout << "wrote " << (ctx.out_dir / "wigner.csv").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"control-pulse synthesis and analysis for a bosonic kitten-code qubit"};
    app.set_version_flag("--version", ESTKIT_VERSION);
    app.require_subcommand(1);

    RunContext ctx;
    std::string config;
    std::string out_dir = ".";

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", config, "configuration file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", ctx.seed, "seed override")->each([&](const std::string &) {
            ctx.seed_overridden = true;
        });
        sub->add_option("--threads", ctx.threads, "worker threads (1 = bitwise deterministic)");
    };

    CLI::App *optimize = app.add_subcommand("optimize", "synthesize a pulse for a gate target");
    CLI::App *metrics = app.add_subcommand("metrics", "error-transparency diagnostics of a pulse");
    CLI::App *jump = app.add_subcommand("jump-sweep", "conditional infidelity vs photon-loss time");
    CLI::App *experiment = app.add_subcommand("experiment", "repeated-gate process fidelity vs depth");
    CLI::App *fit = app.add_subcommand("fit", "fit the fidelity decay model to CSV data");
    CLI::App *wigner_cmd = app.add_subcommand("wigner", "Wigner-function grid of a state");
    for (CLI::App *sub : {optimize, metrics, jump, experiment, fit, wigner_cmd}) {
        add_common(sub);
    }

    CLI11_PARSE(app, argc, argv);

    ctx.config_path = config;
    ctx.out_dir = out_dir;
    if (ctx.threads < 1) {
        std::cerr << "error: --threads must be >= 1\n";
        return kExitInputError;
    }

    try {
        if (optimize->parsed()) {
            ctx.command = "optimize";
            return cmd_optimize(ctx);
        }
        if (metrics->parsed()) {
            ctx.command = "metrics";
            return cmd_metrics(ctx);
        }
        if (jump->parsed()) {
            ctx.command = "jump-sweep";
            return cmd_jump_sweep(ctx);
        }
        if (experiment->parsed()) {
            ctx.command = "experiment";
            return cmd_experiment(ctx);
        }
        if (fit->parsed()) {
            ctx.command = "fit";
            return cmd_fit(ctx);
        }
        if (wigner_cmd->parsed()) {
            ctx.command = "wigner";
            return cmd_wigner(ctx);
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
