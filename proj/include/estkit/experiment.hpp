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

#ifndef ESTKIT_EXPERIMENT_HPP
#define ESTKIT_EXPERIMENT_HPP

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "estkit/codespace.hpp"
#include "estkit/dynamics.hpp"
#include "estkit/grape.hpp"
#include "estkit/hilbert.hpp"
#include "estkit/metrics.hpp"

namespace estkit {

// Instantaneous recovery: normalized error-space components move back to code
// space, code space is untouched, everything else is left alone. Kraus set
// {P_C, sum_i |i_L><i_E|, 1 - P_C - P_E} so the map is trace preserving.
inline Matrix ideal_recovery(const Matrix &rho, const CodeSubspace &code, const CodeSubspace &err) {
    const Matrix p_c = code.projector.mat;
    const Matrix p_e = err.projector.mat;
    const Matrix transfer = code.word0 * err.word0.adjoint() + code.word1 * err.word1.adjoint();
    const Matrix rest = Matrix::Identity(rho.rows(), rho.cols()) - p_c - p_e;
    return p_c * rho * p_c + transfer * rho * transfer.adjoint() + rest * rho * rest;
}

// Perfect conditional reset of the ancilla to |g>, cavity untouched.
inline Matrix reset_qubit(const Matrix &rho, const HilbertConfig &cfg) {
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (int j = 0; j < cfg.qubit_dim; ++j) {
        Matrix k = Matrix::Zero(rho.rows(), rho.cols());
        for (int n = 0; n < cfg.cavity_dim; ++n) {
            k(n * cfg.qubit_dim + 0, n * cfg.qubit_dim + j) = 1.0;
        }
        out += k * rho * k.adjoint();
    }
    return out;
}

enum class RecoveryMode { kNone, kIdeal, kPulse };

inline RecoveryMode recovery_mode_from_string(const std::string &s) {
    if (s == "none") return RecoveryMode::kNone;
    if (s == "ideal") return RecoveryMode::kIdeal;
    if (s == "pulse") return RecoveryMode::kPulse;
    throw std::invalid_argument("unknown aqec mode '" + s + "' (expected none, ideal or pulse)");
}

struct GateStep {
    PulseEnvelope pulse;
    Eigen::Matrix2cd logical;  // ideal action on the code words
};

struct ExperimentSpec {
    std::vector<GateStep> sequence;  // one repetition = the whole sequence
    std::vector<int> n_values;
    bool lossy = true;
    RecoveryMode recovery = RecoveryMode::kIdeal;
    std::optional<PulseEnvelope> aqec_pulse;
    double reset_duration_ns = 1200.0;
    int substeps = kDefaultLindbladSubsteps;
    int threads = 1;
};

struct ExperimentResult {
    std::vector<int> n;
    std::vector<double> f_code;
    std::vector<double> f_error;  // filled only when recovery == kNone
    std::vector<double> mean_code_weight;
};

namespace detail {

inline Matrix evolve_density(const DriveSystem &sys, const PulseEnvelope &pulse,
                             const std::vector<Operator> &collapse, const Matrix &rho, int substeps) {
    if (pulse.steps() == 0) {
        return rho;
    }
    return lindblad_propagate(sys.h0, sys.a, sys.q, pulse, collapse, rho, substeps).rhos.back();
}

}  // namespace detail

// Repeated gate sequence, optional single recovery step at depth N, process
// tomography per requested N. Gates run under the master equation when lossy.
inline ExperimentResult run_gate_experiment(const DriveSystem &sys, const HilbertConfig &cfg,
                                            const CodeSubspace &code, const std::vector<Operator> &collapse,
                                            const ExperimentSpec &spec) {
    if (spec.sequence.empty()) {
        throw std::invalid_argument("run_gate_experiment: empty gate sequence");
    }
    if (spec.n_values.empty()) {
        throw std::invalid_argument("run_gate_experiment: no N values requested");
    }
    if (spec.recovery == RecoveryMode::kPulse && !spec.aqec_pulse) {
        throw std::invalid_argument("run_gate_experiment: pulse recovery requested without an AQEC pulse");
    }
    const CodeSubspace err = error_subspace(code, {sys.a, "a"});
    const std::vector<Operator> no_collapse;
    const std::vector<Operator> &ops = spec.lossy ? collapse : no_collapse;

    Eigen::Matrix2cd seq_logical = Eigen::Matrix2cd::Identity();
    for (const GateStep &g : spec.sequence) {
        seq_logical = g.logical * seq_logical;
    }

    int n_max = 0;
    for (int n : spec.n_values) {
        if (n < 1) {
            throw std::invalid_argument("run_gate_experiment: N values must be >= 1");
        }
        n_max = std::max(n_max, n);
    }

    // Evolve each tomography input once up to n_max repetitions, keeping the
    // states at the requested depths; recovery is applied to a copy.
    const std::array<State, 4> inputs = {
        code.word0,
        code.word1,
        ((code.word0 + code.word1) / std::numbers::sqrt2).eval(),
        ((code.word0 + kI * code.word1) / std::numbers::sqrt2).eval(),
    };
    // stored[j][idx]: state of input j after n_values[idx] repetitions.
    std::vector<std::vector<Matrix>> stored(4, std::vector<Matrix>(spec.n_values.size()));
    parallel_for(4, spec.threads, [&](std::size_t j) {
        Matrix rho = inputs[j] * inputs[j].adjoint();
        int depth = 0;
        for (int n = 1; n <= n_max; ++n) {
            for (const GateStep &g : spec.sequence) {
                rho = detail::evolve_density(sys, g.pulse, ops, rho, spec.substeps);
            }
            depth = n;
            for (std::size_t idx = 0; idx < spec.n_values.size(); ++idx) {
                if (spec.n_values[idx] == depth) {
                    stored[j][idx] = rho;
                }
            }
        }
    });

    ExperimentResult res;
    for (std::size_t idx = 0; idx < spec.n_values.size(); ++idx) {
        const int n = spec.n_values[idx];
        Eigen::Matrix2cd target = Eigen::Matrix2cd::Identity();
        for (int r = 0; r < n; ++r) {
            target = seq_logical * target;
        }

        auto channel = [&](const State &psi) -> Matrix {
            for (int j = 0; j < 4; ++j) {
                if ((psi - inputs[j]).norm() < 1e-12) {
                    Matrix rho = stored[j][idx];
                    if (spec.recovery == RecoveryMode::kIdeal) {
                        rho = ideal_recovery(rho, code, err);
                    } else if (spec.recovery == RecoveryMode::kPulse) {
                        rho = detail::evolve_density(sys, *spec.aqec_pulse, ops, rho, spec.substeps);
                        if (spec.reset_duration_ns > 0) {
                            PulseEnvelope idle = zero_pulse(
                                static_cast<int>(std::llround(spec.reset_duration_ns)), 1.0);
                            rho = detail::evolve_density(sys, idle, ops, rho, spec.substeps);
                        }
                        rho = reset_qubit(rho, cfg);
                    }
                    return rho;
                }
            }
            throw std::logic_error("run_gate_experiment: unexpected tomography input");
        };

        const TomographyResult code_tomo = process_tomography(channel, code, code, target);
        res.n.push_back(n);
        res.f_code.push_back(code_tomo.process_fidelity);
        res.mean_code_weight.push_back(code_tomo.mean_logical_weight);
        if (spec.recovery == RecoveryMode::kNone) {
            const TomographyResult err_tomo = process_tomography(channel, code, err, target);
            res.f_error.push_back(err_tomo.process_fidelity);
        }
    }
    return res;
}

}  // namespace estkit

#endif
