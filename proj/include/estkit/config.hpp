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

#ifndef ESTKIT_CONFIG_HPP
#define ESTKIT_CONFIG_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "estkit/errormodel.hpp"
#include "estkit/experiment.hpp"
#include "estkit/grape.hpp"
#include "estkit/hilbert.hpp"

namespace estkit {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline nlohmann::json load_json(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
}

template <typename T>
T require_key(const nlohmann::json &j, const std::string &key) {
    if (!j.contains(key)) {
        throw ConfigError("config: missing key '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

template <typename T>
T key_or(const nlohmann::json &j, const std::string &key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

// Resolve a path mentioned in a config relative to the config's directory.
inline std::filesystem::path resolve_relative(const std::filesystem::path &base,
                                              const std::string &mentioned) {
    std::filesystem::path p(mentioned);
    if (p.is_absolute() || base.parent_path().empty()) {
        return p;
    }
    return base.parent_path() / p;
}

}  // namespace detail

struct SystemConfig {
    SystemParams params;
    HilbertConfig hilbert;
};

// Keys: chi_MHz, chi_prime_MHz, kerr_MHz, kerr_prime_MHz, anharm_MHz,
// t1_cav_us, t2_cav_us, t1_qb_us, t2_qb_us, cavity_dim, qubit_dim.
inline SystemConfig load_system_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    SystemConfig cfg;
    cfg.params.chi_mhz = detail::key_or(j, "chi_MHz", cfg.params.chi_mhz);
    cfg.params.chi_prime_mhz = detail::key_or(j, "chi_prime_MHz", cfg.params.chi_prime_mhz);
    cfg.params.kerr_mhz = detail::key_or(j, "kerr_MHz", cfg.params.kerr_mhz);
    cfg.params.kerr_prime_mhz = detail::key_or(j, "kerr_prime_MHz", cfg.params.kerr_prime_mhz);
    cfg.params.anharm_mhz = detail::key_or(j, "anharm_MHz", cfg.params.anharm_mhz);
    cfg.params.t1_cav_us = detail::key_or(j, "t1_cav_us", cfg.params.t1_cav_us);
    cfg.params.t2_cav_us = detail::key_or(j, "t2_cav_us", cfg.params.t2_cav_us);
    cfg.params.t1_qb_us = detail::key_or(j, "t1_qb_us", cfg.params.t1_qb_us);
    cfg.params.t2_qb_us = detail::key_or(j, "t2_qb_us", cfg.params.t2_qb_us);
    cfg.hilbert.cavity_dim = detail::key_or(j, "cavity_dim", cfg.hilbert.cavity_dim);
    cfg.hilbert.qubit_dim = detail::key_or(j, "qubit_dim", cfg.hilbert.qubit_dim);
    cfg.params.validate();
    cfg.hilbert.validate();
    return cfg;
}

// System-params reference: the config's own `system_params` key, else the
// ESTCTL_DEFAULT_PARAMS environment variable, else Table-A1-style defaults.
inline SystemConfig resolve_system_config(const nlohmann::json &j, const std::filesystem::path &config_path) {
    if (j.contains("system_params")) {
        return load_system_config(
            detail::resolve_relative(config_path, detail::require_key<std::string>(j, "system_params")));
    }
    if (const char *env = std::getenv("ESTCTL_DEFAULT_PARAMS")) {
        return load_system_config(env);
    }
    SystemConfig cfg;
    cfg.hilbert.cavity_dim = detail::key_or(j, "cavity_dim", cfg.hilbert.cavity_dim);
    cfg.hilbert.qubit_dim = detail::key_or(j, "qubit_dim", cfg.hilbert.qubit_dim);
    return cfg;
}

struct OptimizeConfig {
    std::string target_name;  // X, H, T, AQEC, encode, decode, decode_error
    PulseMode mode = PulseMode::kOrd;
    OptimizerSchedule schedule;
    SystemConfig system;
};

inline OptimizeConfig load_optimize_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    OptimizeConfig cfg;
    cfg.target_name = detail::require_key<std::string>(j, "target");
    cfg.mode = pulse_mode_from_string(detail::key_or<std::string>(j, "mode", "ORD"));
    cfg.system = resolve_system_config(j, path);

    OptimizerSchedule &s = cfg.schedule;
    s.duration_ns = detail::key_or(j, "duration_ns", 0.0);
    s.dt_ns = detail::key_or(j, "dt_ns", 1.0);
    s.stage1_iters = detail::key_or(j, "iters_stage1", s.stage1_iters);
    s.stage2_iters = detail::key_or(j, "iters_stage2", s.stage2_iters);
    s.learning_rate = detail::key_or(j, "learning_rate", s.learning_rate);
    s.seed = detail::key_or<std::uint64_t>(j, "seed", s.seed);
    s.et_stride = detail::key_or(j, "et_stride", s.et_stride);
    s.stop_infidelity = detail::key_or(j, "stop_infidelity", s.stop_infidelity);
    s.init_amp_mhz = detail::key_or(j, "init_amp_MHz", s.init_amp_mhz);
    if (j.contains("weights_stage1")) {
        const auto w = detail::require_key<std::vector<double>>(j, "weights_stage1");
        if (w.size() != 3) throw ConfigError("config: key 'weights_stage1' must have 3 entries");
        s.stage1 = {w[0], w[1], w[2]};
    }
    if (j.contains("weights_stage2")) {
        const auto w = detail::require_key<std::vector<double>>(j, "weights_stage2");
        if (w.size() != 3) throw ConfigError("config: key 'weights_stage2' must have 3 entries");
        s.stage2 = {w[0], w[1], w[2]};
    }
    s.extra.w_dnbar = detail::key_or(j, "w_dnbar", 0.0);
    s.extra.w_leakage = detail::key_or(j, "w_leakage", 0.0);
    if (j.contains("constraints")) {
        const nlohmann::json c = j.at("constraints");
        s.bandwidth_mhz = detail::key_or(c, "bandwidth_MHz", s.bandwidth_mhz);
        s.max_amp_mhz = detail::key_or(c, "max_amp_MHz", s.max_amp_mhz);
        s.ramp_ns = detail::key_or(c, "ramp_ns", s.ramp_ns);
    }
    return cfg;
}

struct MetricsConfig {
    std::filesystem::path pulse_path;
    SystemConfig system;
    double mismatch_theta = 0.0;  // |0_L> start by default
    double mismatch_phi = 0.0;
    int et_stride = 1;
};

inline MetricsConfig load_metrics_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    MetricsConfig cfg;
    cfg.pulse_path = detail::resolve_relative(path, detail::require_key<std::string>(j, "pulse"));
    cfg.system = resolve_system_config(j, path);
    cfg.mismatch_theta = detail::key_or(j, "mismatch_theta", 0.0);
    cfg.mismatch_phi = detail::key_or(j, "mismatch_phi", 0.0);
    cfg.et_stride = detail::key_or(j, "et_stride", 1);
    return cfg;
}

struct JumpSweepConfig {
    std::filesystem::path pulse_path;
    SystemConfig system;
    int n_times = 21;
    char kind = 'X';  // logical action the pulse implements
};

inline JumpSweepConfig load_jump_sweep_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    JumpSweepConfig cfg;
    cfg.pulse_path = detail::resolve_relative(path, detail::require_key<std::string>(j, "pulse"));
    cfg.system = resolve_system_config(j, path);
    cfg.n_times = detail::key_or(j, "n_times", 21);
    if (cfg.n_times < 2) {
        throw ConfigError("config: key 'n_times' must be >= 2");
    }
    const std::string kind = detail::key_or<std::string>(j, "kind", "X");
    if (kind.size() != 1 || (kind != "X" && kind != "H" && kind != "T" && kind != "I")) {
        throw ConfigError("config: key 'kind' must be one of X, H, T, I");
    }
    cfg.kind = kind[0];
    return cfg;
}

struct ExperimentConfig {
    std::vector<std::pair<std::filesystem::path, char>> gates;  // pulse path, logical kind
    std::vector<int> n_values;
    bool lossy = true;
    RecoveryMode recovery = RecoveryMode::kIdeal;
    std::optional<std::filesystem::path> aqec_pulse_path;
    double reset_duration_ns = 1200.0;
    int substeps = kDefaultLindbladSubsteps;
    SystemConfig system;
};

inline ExperimentConfig load_experiment_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    ExperimentConfig cfg;
    const auto gates = detail::require_key<std::vector<nlohmann::json>>(j, "gates");
    if (gates.empty()) {
        throw ConfigError("config: key 'gates' must list at least one gate");
    }
    for (const auto &g : gates) {
        const std::string pulse = detail::require_key<std::string>(g, "pulse");
        const std::string kind = detail::require_key<std::string>(g, "kind");
        if (kind.size() != 1 || (kind != "X" && kind != "H" && kind != "T" && kind != "I")) {
            throw ConfigError("config: gate 'kind' must be one of X, H, T, I");
        }
        cfg.gates.emplace_back(detail::resolve_relative(path, pulse), kind[0]);
    }
    cfg.n_values = detail::require_key<std::vector<int>>(j, "n_values");
    cfg.lossy = detail::key_or(j, "lossy", true);
    cfg.recovery = recovery_mode_from_string(detail::key_or<std::string>(j, "aqec", "ideal"));
    if (j.contains("aqec_pulse")) {
        cfg.aqec_pulse_path = detail::resolve_relative(path, detail::require_key<std::string>(j, "aqec_pulse"));
    }
    cfg.reset_duration_ns = detail::key_or(j, "reset_duration_ns", 1200.0);
    cfg.substeps = detail::key_or(j, "substeps", kDefaultLindbladSubsteps);
    cfg.system = resolve_system_config(j, path);
    return cfg;
}

struct FitConfig {
    std::filesystem::path data_path;
    FitWhich which = FitWhich::kCode;
    DecayModelParams fixed;
    FitOptions options;
};

inline FitConfig load_fit_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    FitConfig cfg;
    cfg.data_path = detail::resolve_relative(path, detail::require_key<std::string>(j, "data"));
    const std::string which = detail::key_or<std::string>(j, "which", "code");
    if (which == "code") {
        cfg.which = FitWhich::kCode;
    } else if (which == "error") {
        cfg.which = FitWhich::kError;
    } else {
        throw ConfigError("config: key 'which' must be 'code' or 'error'");
    }
    cfg.fixed.eps_parity = detail::key_or(j, "eps_parity", cfg.fixed.eps_parity);
    cfg.fixed.a_scale = detail::key_or(j, "A", cfg.fixed.a_scale);
    cfg.fixed.b_floor = detail::key_or(j, "B", cfg.fixed.b_floor);
    cfg.fixed.d_scale = detail::key_or(j, "D", cfg.fixed.d_scale);
    cfg.fixed.g_floor = detail::key_or(j, "G", cfg.fixed.g_floor);
    cfg.fixed.f_alias = detail::key_or(j, "F_alias", cfg.fixed.f_alias);
    cfg.fixed.gamma_c = detail::key_or(j, "gamma_C", cfg.fixed.gamma_c);
    cfg.options.with_parity_selection = detail::key_or(j, "with_parity_selection", false);
    cfg.options.per_gate_jump_prob = detail::key_or(j, "per_gate_jump_prob", 0.0);
    cfg.options.p_prep_odd = detail::key_or(j, "p_prep_odd", 0.0);
    cfg.options.max_iterations = detail::key_or(j, "max_iterations", cfg.options.max_iterations);
    return cfg;
}

struct WignerConfig {
    // Either a named logical state or a pulse applied to one.
    std::string initial = "0L";  // 0L, 1L, +X, -X, +Y, -Y, vacuum, fock:<n>
    std::optional<std::filesystem::path> pulse_path;
    double radius = 4.0;
    double step = 0.1;
    SystemConfig system;
};

inline WignerConfig load_wigner_config(const std::filesystem::path &path) {
    const nlohmann::json j = detail::load_json(path);
    WignerConfig cfg;
    cfg.initial = detail::key_or<std::string>(j, "initial", "0L");
    if (j.contains("pulse")) {
        cfg.pulse_path = detail::resolve_relative(path, detail::require_key<std::string>(j, "pulse"));
    }
    cfg.radius = detail::key_or(j, "radius", 4.0);
    cfg.step = detail::key_or(j, "step", 0.1);
    if (cfg.radius <= 0 || cfg.step <= 0) {
        throw ConfigError("config: keys 'radius' and 'step' must be positive");
    }
    cfg.system = resolve_system_config(j, path);
    return cfg;
}

}  // namespace estkit

#endif
