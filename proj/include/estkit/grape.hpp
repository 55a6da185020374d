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

#ifndef ESTKIT_GRAPE_HPP
#define ESTKIT_GRAPE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "estkit/codespace.hpp"
#include "estkit/dynamics.hpp"
#include "estkit/hilbert.hpp"
#include "estkit/metrics.hpp"
#include "estkit/threading.hpp"

namespace estkit {

enum class PulseMode { kOrd, kLe, kEst };

inline std::string to_string(PulseMode mode) {
    switch (mode) {
        case PulseMode::kOrd: return "ORD";
        case PulseMode::kLe: return "LE";
        case PulseMode::kEst: return "EST";
    }
    return "?";
}

inline PulseMode pulse_mode_from_string(const std::string &s) {
    if (s == "ORD" || s == "ord" || s == "Ord") return PulseMode::kOrd;
    if (s == "LE" || s == "le") return PulseMode::kLe;
    if (s == "EST" || s == "est" || s == "EsT") return PulseMode::kEst;
    throw std::invalid_argument("unknown pulse mode '" + s + "' (expected ORD, LE or EST)");
}

struct CostWeights {
    double w_fid = 1.0;
    double w_et = 0.0;
    double w_vel = 0.0;

    void validate() const {
        if (w_fid < 0 || w_et < 0 || w_vel < 0) {
            throw std::invalid_argument("CostWeights: weights must be nonnegative");
        }
        if (w_fid == 0 && w_et == 0 && w_vel == 0) {
            throw std::invalid_argument("CostWeights: at least one weight must be positive");
        }
    }
};

// Mean-photon-imbalance and instantaneous-leakage objectives; available but
// left at zero by the shipped configurations.
struct ExtraCostWeights {
    double w_dnbar = 0.0;
    double w_leakage = 0.0;
};

// Input -> target state pairs defining a gate. code_pairs are ordered like
// cardinal_states(); error_pairs, when present, are their normalized a-images
// in the same order (the ET cost and the extra objectives rely on that).
struct GateTarget {
    std::string name;
    PulseMode mode = PulseMode::kOrd;
    std::vector<std::pair<State, State>> code_pairs;
    std::vector<std::pair<State, State>> error_pairs;
    bool qubit_drive_only = false;
    double default_duration_ns = 1000.0;

    void validate() const {
        if (code_pairs.empty()) {
            throw std::invalid_argument("GateTarget: no target pairs");
        }
        if (mode != PulseMode::kOrd && error_pairs.empty()) {
            throw std::invalid_argument("GateTarget: LE/EST targets require error-space pairs");
        }
        for (const auto &pairs : {code_pairs, error_pairs}) {
            for (const auto &[in, out] : pairs) {
                if (std::abs(in.norm() - 1.0) > 1e-9 || std::abs(out.norm() - 1.0) > 1e-9) {
                    throw std::invalid_argument("GateTarget: states must be unit norm");
                }
            }
        }
    }
};

// Static Hamiltonian plus the two drive generators (a, q) of one device.
// cfg describes the tensor layout when the system came from a HilbertConfig;
// hand-built toy systems may leave it inconsistent and lose only the
// Fock-occupation reporting.
struct DriveSystem {
    Matrix h0;
    Matrix a;
    Matrix q;
    HilbertConfig cfg{};

    int dim() const {
        return static_cast<int>(h0.rows());
    }
};

inline DriveSystem make_drive_system(const SystemParams &params, const HilbertConfig &cfg) {
    auto [gen_cav, gen_qb] = build_drive_generators(cfg);
    return {build_static_hamiltonian(params, cfg).mat, std::move(gen_cav.mat), std::move(gen_qb.mat), cfg};
}

struct CostBreakdown {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double c_dnbar = 0.0;
    double c_leakage = 0.0;

    double total(const CostWeights &w, const ExtraCostWeights &extra = {}) const {
        return w.w_fid * c1 + w.w_et * c2 + w.w_vel * c3 + extra.w_dnbar * c_dnbar + extra.w_leakage * c_leakage;
    }
};

// Complex packing of the real gradient: re = dC/d(Re sample), im = dC/d(Im).
struct PulseGradient {
    Vector d_eps;
    Vector d_omega;
};

struct GrapeEval {
    CostBreakdown costs;
    double f_code = 0.0;
    double f_err = 0.0;
    double f_et = 0.0;
    int et_singular_steps = 0;
    PulseGradient grad;
};

namespace detail {

inline double canonical_uniform(std::uint64_t raw) {
    return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

struct VelocityTerm {
    double v = 0.0;
    double m = 0.0;  // clamped |<psi_j|psi_j+1>|
    Complex z;       // raw overlap
};

}  // namespace detail

// Cost and (optionally) exact gradient of the weighted objective for one
// pulse. The gradient is the chain rule through the piecewise-constant
// propagator product; per-step exponential derivatives come from the
// eigendecomposition of each step Hamiltonian.
inline GrapeEval grape_evaluate(const DriveSystem &sys, const GateTarget &target, const PulseEnvelope &pulse,
                                CostWeights weights, const ExtraCostWeights &extra = {}, int et_stride = 1,
                                bool want_gradient = false, int threads = 1) {
    target.validate();
    pulse.validate();
    if (et_stride < 1) {
        throw std::invalid_argument("grape_evaluate: et_stride must be >= 1");
    }
    if (target.mode != PulseMode::kEst) {
        weights.w_et = 0.0;  // only EST targets carry the ET objective
    }
    const bool use_error_pairs = target.mode != PulseMode::kOrd;
    const bool need_et = weights.w_et > 0.0;
    const bool need_extras = extra.w_dnbar > 0.0 || extra.w_leakage > 0.0;
    const int n_code = static_cast<int>(target.code_pairs.size());
    const int n_err = use_error_pairs ? static_cast<int>(target.error_pairs.size()) : 0;
    if (need_et && (n_err != n_code || n_code < 1)) {
        throw std::invalid_argument("grape_evaluate: ET cost requires paired code/error starts");
    }
    if (need_extras && (n_code < 2 || (extra.w_leakage > 0 && n_err < 2))) {
        throw std::invalid_argument("grape_evaluate: extra objectives require the cardinal layout");
    }
    const int n_states = n_code + n_err;
    const int n_steps = pulse.steps();
    const int dim = sys.dim();
    const double dt = pulse.dt_ns;

    const StepSpectra spec = compute_step_spectra(sys.h0, sys.a, sys.q, pulse, threads);
    std::vector<Matrix> us(n_steps);
    parallel_for(static_cast<std::size_t>(n_steps), threads, [&](std::size_t k) {
        us[k] = spec.unitary(static_cast<int>(k), dt);
    });

    // psi[k]: states at boundary k as columns (code pairs first).
    std::vector<Matrix> psi(n_steps + 1);
    psi[0].resize(dim, n_states);
    for (int i = 0; i < n_code; ++i) {
        psi[0].col(i) = target.code_pairs[i].first;
    }
    for (int i = 0; i < n_err; ++i) {
        psi[0].col(n_code + i) = target.error_pairs[i].first;
    }
    for (int k = 0; k < n_steps; ++k) {
        psi[k + 1].noalias() = us[k] * psi[k];
    }

    std::vector<Matrix> dsrc;
    if (want_gradient) {
        dsrc.assign(n_steps + 1, Matrix::Zero(dim, n_states));
    }

    GrapeEval out;
    const Matrix n_op = sys.a.adjoint() * sys.a;

    // C1: final-state infidelity; error pairs folded at equal weight.
    {
        double f_code = 0.0, f_err = 0.0;
        const double code_fac = use_error_pairs ? 0.5 : 1.0;
        for (int i = 0; i < n_code; ++i) {
            const Complex z = target.code_pairs[i].second.dot(psi[n_steps].col(i));
            f_code += std::norm(z) / n_code;
            if (want_gradient) {
                dsrc[n_steps].col(i) -=
                    (weights.w_fid * code_fac / n_code) * z * target.code_pairs[i].second;
            }
        }
        for (int i = 0; i < n_err; ++i) {
            const Complex z = target.error_pairs[i].second.dot(psi[n_steps].col(n_code + i));
            f_err += std::norm(z) / n_err;
            if (want_gradient) {
                dsrc[n_steps].col(n_code + i) -=
                    (weights.w_fid * 0.5 / n_err) * z * target.error_pairs[i].second;
            }
        }
        out.f_code = f_code;
        out.f_err = (n_err > 0) ? f_err : 0.0;
        out.costs.c1 = use_error_pairs ? 1.0 - 0.5 * (f_code + f_err) : 1.0 - f_code;
    }

    // C2: per-step normalized ET fidelity over paired starts.
    if (target.mode == PulseMode::kEst && n_err == n_code && n_steps > 0) {
        int count = 0;
        for (int j = 0; j < n_steps; j += et_stride) {
            ++count;
        }
        double f_sum = 0.0;
        for (int i = 0; i < n_code; ++i) {
            double f_pair = 0.0;
            for (int j = 0; j < n_steps; j += et_stride) {
                const State a_psi = sys.a * psi[j].col(i);
                const double nbar = a_psi.squaredNorm();
                if (nbar < 1e-6) {
                    ++out.et_singular_steps;
                    continue;
                }
                const State err = psi[j].col(n_code + i);
                const Complex z = err.dot(a_psi);
                f_pair += std::norm(z) / nbar;
                if (want_gradient && weights.w_et > 0) {
                    const double fac = -weights.w_et / (static_cast<double>(n_code) * count);
                    dsrc[j].col(n_code + i) += fac * (std::conj(z) / nbar) * a_psi;
                    dsrc[j].col(i) += fac * ((z / nbar) * (sys.a.adjoint() * err) -
                                             (std::norm(z) / (nbar * nbar)) * (n_op * psi[j].col(i)));
                }
            }
            f_sum += f_pair / count;
        }
        out.f_et = f_sum / std::max(1, n_code);
        out.costs.c2 = 1.0 - out.f_et;
    }

    // C3: variance of the Fubini-Study step velocity, averaged over starts.
    if (n_steps > 0) {
        double c3 = 0.0;
        std::vector<detail::VelocityTerm> terms(n_steps);
        for (int i = 0; i < n_code; ++i) {
            double vbar = 0.0;
            for (int j = 0; j < n_steps; ++j) {
                const Complex z = psi[j].col(i).dot(psi[j + 1].col(i));
                const double m = std::min(std::abs(z), 1.0 - 1e-12);
                terms[j] = {(2.0 / dt) * std::acos(m), m, z};
                vbar += terms[j].v;
            }
            vbar /= n_steps;
            double var = 0.0;
            for (int j = 0; j < n_steps; ++j) {
                var += (terms[j].v - vbar) * (terms[j].v - vbar);
            }
            var /= n_steps;
            c3 += var / n_code;
            if (want_gradient && weights.w_vel > 0) {
                for (int j = 0; j < n_steps; ++j) {
                    const auto &[v, m, z] = terms[j];
                    if (m < 1e-9 || m >= 1.0 - 1e-12) {
                        continue;  // clamped or undefined slope
                    }
                    const double dvar_dv = (2.0 / n_steps) * (v - vbar);
                    const double dv_dm = -(2.0 / dt) / std::sqrt(1.0 - m * m);
                    const double fac = weights.w_vel * dvar_dv * dv_dm / n_code;
                    dsrc[j].col(i) += fac * (std::conj(z) / (2.0 * m)) * psi[j + 1].col(i);
                    dsrc[j + 1].col(i) += fac * (z / (2.0 * m)) * psi[j].col(i);
                }
            }
        }
        out.costs.c3 = c3;
    }

    // Optional mean-photon-imbalance objective on the evolved words.
    if (extra.w_dnbar > 0.0) {
        double c = 0.0;
        for (int j = 0; j <= n_steps; ++j) {
            const State s0 = psi[j].col(0), s1 = psi[j].col(1);
            const State ns0 = n_op * s0, ns1 = n_op * s1;
            const double delta = s0.dot(ns0).real() - s1.dot(ns1).real();
            c += delta * delta / (n_steps + 1);
            if (want_gradient) {
                const double fac = extra.w_dnbar * 2.0 * delta / (n_steps + 1);
                dsrc[j].col(0) += fac * ns0;
                dsrc[j].col(1) -= fac * ns1;
            }
        }
        out.costs.c_dnbar = c;
    }

    // Optional leakage objective: weight of the evolved initial-error words
    // outside the instantaneous error space.
    if (extra.w_leakage > 0.0) {
        double c = 0.0;
        for (int j = 0; j <= n_steps; ++j) {
            const State s1 = psi[j].col(0), s2 = psi[j].col(1);
            Matrix b(dim, 2);
            b.col(0) = sys.a * s1;
            b.col(1) = sys.a * s2;
            const Eigen::Matrix2cd m = b.adjoint() * b;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(m);
            if (es.eigenvalues().minCoeff() < 1e-12) {
                throw std::invalid_argument("grape_evaluate: rank-deficient instantaneous error space");
            }
            const Eigen::Matrix2cd minv = m.inverse();
            double kept = 0.0;
            for (int e = 0; e < 2; ++e) {
                const State sm = psi[j].col(n_code + e);
                const Eigen::Vector2cd y = b.adjoint() * sm;
                const Eigen::Vector2cd r = minv * y;
                kept += 0.5 * (y.adjoint() * r)(0).real();
                if (want_gradient) {
                    const double fac = -0.5 * extra.w_leakage / (n_steps + 1);
                    dsrc[j].col(n_code + e) += fac * (b * r);
                    const State resid = sm - b * r;
                    const State a_resid = sys.a.adjoint() * resid;
                    dsrc[j].col(0) += fac * std::conj(r(0)) * a_resid;
                    dsrc[j].col(1) += fac * std::conj(r(1)) * a_resid;
                }
            }
            c += (1.0 - kept) / (n_steps + 1);
        }
        out.costs.c_leakage = c;
    }

    if (!want_gradient) {
        return out;
    }

    // Reverse sweep: lambda_k = U_k^+ lambda_{k+1} + dC/dpsi_k*, with the
    // per-step control derivative contracted in the step eigenbasis.
    out.grad.d_eps = Vector::Zero(n_steps);
    out.grad.d_omega = Vector::Zero(n_steps);
    const Matrix g_xr = sys.a + sys.a.adjoint();
    const Matrix g_xi = kI * (sys.a - sys.a.adjoint());
    const Matrix g_ur = sys.q + sys.q.adjoint();
    const Matrix g_ui = kI * (sys.q - sys.q.adjoint());

    Matrix lambda = dsrc[n_steps];
    Matrix phi(dim, dim), s_mat(dim, dim), k_mat(dim, dim), lt(dim, n_states), pt(dim, n_states);
    for (int k = n_steps - 1; k >= 0; --k) {
        const Matrix &v = spec.evecs[k];
        const Eigen::VectorXd &ev = spec.evals[k];
        lt.noalias() = v.adjoint() * lambda;
        pt.noalias() = v.adjoint() * psi[k];
        s_mat.noalias() = lt.conjugate() * pt.transpose();
        for (int p = 0; p < dim; ++p) {
            for (int q = 0; q < dim; ++q) {
                const double mean = 0.5 * (ev(p) + ev(q)) * dt;
                const double half_delta = 0.5 * (ev(p) - ev(q)) * dt;
                const double sinc = (std::abs(half_delta) < 1e-8)
                                        ? 1.0 - half_delta * half_delta / 6.0
                                        : std::sin(half_delta) / half_delta;
                phi(p, q) = -kI * dt * std::exp(-kI * mean) * sinc * s_mat(p, q);
            }
        }
        k_mat.noalias() = v.conjugate() * phi * v.transpose();
        const double scale = 2.0 * kMhzToRadPerNs;
        const double gxr = scale * g_xr.cwiseProduct(k_mat).sum().real();
        const double gxi = scale * g_xi.cwiseProduct(k_mat).sum().real();
        const double gur = scale * g_ur.cwiseProduct(k_mat).sum().real();
        const double gui = scale * g_ui.cwiseProduct(k_mat).sum().real();
        out.grad.d_eps(k) = Complex(gxr, gxi);
        out.grad.d_omega(k) = Complex(gur, gui);

        lambda = (us[k].adjoint() * lambda).eval() + dsrc[k];
    }
    if (target.qubit_drive_only) {
        out.grad.d_eps.setZero();
    }
    return out;
}

inline double cost_fidelity(const DriveSystem &sys, const PulseEnvelope &pulse, const GateTarget &target,
                            int threads = 1) {
    return grape_evaluate(sys, target, pulse, {1, 0, 0}, {}, 1, false, threads).costs.c1;
}

inline double cost_et(const DriveSystem &sys, const PulseEnvelope &pulse, const GateTarget &target,
                      int et_stride = 1, int threads = 1) {
    if (target.mode != PulseMode::kEst) {
        throw std::invalid_argument("cost_et: ET cost is defined for EST-mode targets");
    }
    return grape_evaluate(sys, target, pulse, {0, 1, 0}, {}, et_stride, false, threads).costs.c2;
}

inline double cost_velocity_variance(const DriveSystem &sys, const PulseEnvelope &pulse, const GateTarget &target,
                                     int threads = 1) {
    CostWeights w{1, 0, 1};
    return grape_evaluate(sys, target, pulse, w, {}, 1, false, threads).costs.c3;
}

inline double total_cost(const DriveSystem &sys, const PulseEnvelope &pulse, const GateTarget &target,
                         CostWeights weights, const ExtraCostWeights &extra = {}, int et_stride = 1,
                         int threads = 1) {
    weights.validate();
    if (target.mode != PulseMode::kEst) {
        weights.w_et = 0.0;
    }
    const GrapeEval eval = grape_evaluate(sys, target, pulse, weights, extra, et_stride, false, threads);
    return eval.costs.total(weights, extra);
}

inline PulseGradient gradient(const DriveSystem &sys, const PulseEnvelope &pulse, const GateTarget &target,
                              CostWeights weights, const ExtraCostWeights &extra = {}, int et_stride = 1,
                              int threads = 1) {
    weights.validate();
    return grape_evaluate(sys, target, pulse, weights, extra, et_stride, true, threads).grad;
}

// ---------------------------------------------------------------------------
// Pulse-shape constraints: band limit, amplitude clip, Gaussian edge window.

inline Vector bandlimit(const Vector &samples, double dt_ns, double bandwidth_mhz) {
    const int n = static_cast<int>(samples.size());
    if (n == 0) {
        return samples;
    }
    std::vector<Complex> in(samples.data(), samples.data() + n), freq(n);
    Eigen::FFT<double> fft;
    fft.fwd(freq, in);
    const double df_mhz = 1000.0 / (n * dt_ns);
    for (int k = 0; k < n; ++k) {
        const double f = std::min(k, n - k) * df_mhz;
        if (f > bandwidth_mhz) {
            freq[k] = 0.0;
        }
    }
    std::vector<Complex> filtered(n);
    fft.inv(filtered, freq);
    return Eigen::Map<const Vector>(filtered.data(), n);
}

inline Vector clip_amplitude(const Vector &samples, double max_amp) {
    Vector out = samples;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double mag = std::abs(out(i));
        if (mag > max_amp) {
            out(i) *= max_amp / mag;
        }
    }
    return out;
}

// Gaussian rise/fall, exactly 1 on the interior plateau; endpoints < 1e-3.
inline Eigen::VectorXd ramp_window(int n, double dt_ns, double ramp_ns) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    if (ramp_ns <= 0) {
        return w;
    }
    const double sigma = ramp_ns / 4.0;
    const double total = n * dt_ns;
    for (int k = 0; k < n; ++k) {
        const double t = (k + 0.5) * dt_ns;
        if (t < ramp_ns) {
            w(k) = std::exp(-(t - ramp_ns) * (t - ramp_ns) / (2.0 * sigma * sigma));
        } else if (t > total - ramp_ns) {
            const double u = t - (total - ramp_ns);
            w(k) = std::exp(-u * u / (2.0 * sigma * sigma));
        }
    }
    return w;
}

// Projection order: filter -> clip -> window.
inline PulseEnvelope apply_constraints(const PulseEnvelope &pulse) {
    pulse.validate();
    if (pulse.duration_ns() < 2.0 * pulse.ramp_ns) {
        throw std::invalid_argument("apply_constraints: pulse shorter than twice the ramp duration");
    }
    PulseEnvelope out = pulse;
    const Eigen::VectorXd w = ramp_window(pulse.steps(), pulse.dt_ns, pulse.ramp_ns);
    for (Vector *ch : {&out.eps, &out.omega}) {
        *ch = bandlimit(*ch, out.dt_ns, out.bandwidth_mhz);
        *ch = clip_amplitude(*ch, out.max_amp_mhz);
        ch->array() *= w.array().cast<Complex>();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gate / recovery / transfer targets on a code

namespace detail {

inline Eigen::Matrix2cd logical_gate_matrix(char kind) {
    Eigen::Matrix2cd m;
    switch (kind) {
        case 'I':
            return Eigen::Matrix2cd::Identity();
        case 'X':
            m << 0, 1, 1, 0;
            return m;
        case 'H':
            m << 1, 1, 1, -1;
            return m / std::numbers::sqrt2;
        case 'T':
            m << 1, 0, 0, std::exp(kI * (std::numbers::pi / 4.0));
            return m;
        default:
            throw std::invalid_argument(std::string("unknown gate kind '") + kind + "' (expected X, H or T)");
    }
}

inline State apply_logical(const Eigen::Matrix2cd &m, const State &w0, const State &w1, const State &psi) {
    const Eigen::Vector2cd c{w0.dot(psi), w1.dot(psi)};
    const Eigen::Vector2cd t = m * c;
    State out = t(0) * w0 + t(1) * w1;
    return out / out.norm();
}

}  // namespace detail

// Six cardinal code pairs plus the induced error-space pairs (the same
// logical matrix applied on the error words).
inline GateTarget gate_target(const CodeSubspace &code, const Matrix &a_op, char kind, PulseMode mode) {
    const Eigen::Matrix2cd m = detail::logical_gate_matrix(kind);
    const CodeSubspace err = error_subspace(code, {a_op, "a"});

    GateTarget target;
    target.name = std::string(1, kind);
    target.mode = mode;
    target.qubit_drive_only = (kind == 'T');
    target.default_duration_ns = (kind == 'T') ? 600.0 : 1000.0;
    for (const State &psi : cardinal_states(code)) {
        target.code_pairs.emplace_back(psi, detail::apply_logical(m, code.word0, code.word1, psi));
        State err_in = a_op * psi;
        err_in /= err_in.norm();
        target.error_pairs.emplace_back(err_in, detail::apply_logical(m, err.word0, err.word1, err_in));
    }
    return target;
}

// Recovery unitary: code-space cardinal states are fixed points with the
// ancilla in g; error-space states transfer to code space with the ancilla
// excited. readout_phase pre-compensates the deterministic frame phase the
// excited branch acquires during readout, if the caller tracks one.
inline GateTarget aqec_target(const CodeSubspace &code, const OperatorSet &ops, double readout_phase = 0.0) {
    const CodeSubspace err = error_subspace(code, ops.a);
    GateTarget target;
    target.name = "AQEC";
    target.mode = PulseMode::kOrd;
    target.default_duration_ns = 1000.0;
    for (const State &psi : cardinal_states(code)) {
        target.code_pairs.emplace_back(psi, psi);
    }
    const Complex branch_phase = std::exp(kI * readout_phase);
    for (const State &psi_e : cardinal_states(err)) {
        const Eigen::Vector2cd c{err.word0.dot(psi_e), err.word1.dot(psi_e)};
        State recovered = c(0) * code.word0 + c(1) * code.word1;
        State excited = ops.q_dag.mat * recovered;
        target.code_pairs.emplace_back(psi_e, branch_phase * excited / excited.norm());
    }
    return target;
}

namespace detail {

inline CodeSubspace bare_qubit_space(const HilbertConfig &cfg) {
    State g = State::Zero(cfg.dim());
    State e = State::Zero(cfg.dim());
    g(0) = 1.0;  // vacuum (x) |g>
    e(1) = 1.0;  // vacuum (x) |e>
    return make_code_from_words(g, e);
}

inline GateTarget transfer_target(const std::string &name, const CodeSubspace &from, const CodeSubspace &to) {
    GateTarget target;
    target.name = name;
    target.mode = PulseMode::kOrd;
    target.default_duration_ns = 600.0;
    const auto ins = cardinal_states(from);
    const auto outs = cardinal_states(to);
    for (int i = 0; i < 6; ++i) {
        target.code_pairs.emplace_back(ins[i], outs[i]);
    }
    return target;
}

}  // namespace detail

// Qubit Bloch sphere -> logical Bloch sphere (cavity starts in vacuum, the
// ancilla ends in g), its inverse, and the error-space decode.
inline GateTarget encode_target(const CodeSubspace &code, const HilbertConfig &cfg) {
    return detail::transfer_target("encode", detail::bare_qubit_space(cfg), code);
}

inline GateTarget decode_target(const CodeSubspace &code, const HilbertConfig &cfg) {
    return detail::transfer_target("decode", code, detail::bare_qubit_space(cfg));
}

inline GateTarget error_decode_target(const CodeSubspace &code, const Matrix &a_op, const HilbertConfig &cfg) {
    return detail::transfer_target("decode_error", error_subspace(code, {a_op, "a"}),
                                   detail::bare_qubit_space(cfg));
}

// ---------------------------------------------------------------------------
// Two-stage optimizer

struct OptimizerSchedule {
    double duration_ns = 0.0;  // 0: take the target's default
    double dt_ns = 1.0;
    int stage1_iters = 2000;
    int stage2_iters = 1000;
    double learning_rate = 0.02;  // Adam step, MHz
    std::uint64_t seed = 1;
    CostWeights stage1{1.0, 0.7, 7.0};
    CostWeights stage2{1.0, 0.1, 0.0};
    ExtraCostWeights extra{};
    int et_stride = 1;
    double stop_infidelity = 5e-4;  // stage-2 early stop on C1
    double init_amp_mhz = 0.2;
    double ramp_ns = 48.0;
    double bandwidth_mhz = 50.0;
    double max_amp_mhz = 4.0;
    int threads = 1;
};

struct OptimizationReport {
    CostBreakdown final_costs;
    double c_tot = 0.0;  // under the stage-2 weights
    std::vector<double> cost_trace;
    double code_fidelity = 0.0;
    double error_fidelity = 0.0;
    double et_fidelity_avg = 0.0;
    int et_singular_steps = 0;
    std::optional<int> max_active_level;
    double wall_seconds = 0.0;
    bool converged = false;
    int iterations = 0;
    int et_stride = 1;
    std::uint64_t seed = 0;
};

struct OptimizeAbort : std::runtime_error {
    OptimizationReport partial;

    OptimizeAbort(const std::string &msg, OptimizationReport report)
        : std::runtime_error(msg), partial(std::move(report)) {}
};

inline PulseEnvelope random_pulse(int steps, double dt_ns, double amp_mhz, std::uint64_t seed,
                                  bool qubit_drive_only) {
    std::mt19937_64 rng(seed);
    auto draw = [&rng] {
        return detail::canonical_uniform(rng());
    };
    PulseEnvelope p;
    p.dt_ns = dt_ns;
    p.eps = Vector::Zero(steps);
    p.omega = Vector::Zero(steps);
    for (int k = 0; k < steps; ++k) {
        const double mag = amp_mhz * draw();
        const double phase = 2.0 * std::numbers::pi * draw();
        if (!qubit_drive_only) {
            p.eps(k) = mag * std::exp(kI * phase);
        }
    }
    for (int k = 0; k < steps; ++k) {
        const double mag = amp_mhz * draw();
        const double phase = 2.0 * std::numbers::pi * draw();
        p.omega(k) = mag * std::exp(kI * phase);
    }
    return p;
}

// Projected Adam over both drive channels; constraints re-applied after every
// update. Deterministic for a fixed seed (independent of thread count, since
// every parallel slot is index-addressed).
inline std::pair<PulseEnvelope, OptimizationReport> optimize(const DriveSystem &sys, const GateTarget &target,
                                                             const OptimizerSchedule &sched) {
    target.validate();
    sched.stage1.validate();
    sched.stage2.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const double duration = (sched.duration_ns > 0) ? sched.duration_ns : target.default_duration_ns;
    const int steps = static_cast<int>(std::llround(duration / sched.dt_ns));
    if (steps < 2) {
        throw std::invalid_argument("optimize: pulse must have at least 2 steps");
    }

    PulseEnvelope pulse = random_pulse(steps, sched.dt_ns, sched.init_amp_mhz, sched.seed,
                                       target.qubit_drive_only);
    pulse.ramp_ns = sched.ramp_ns;
    pulse.bandwidth_mhz = sched.bandwidth_mhz;
    pulse.max_amp_mhz = sched.max_amp_mhz;
    pulse = apply_constraints(pulse);

    OptimizationReport report;
    report.et_stride = sched.et_stride;
    report.seed = sched.seed;

    PulseEnvelope best_pulse = pulse;
    double best_cost = std::numeric_limits<double>::infinity();

    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    for (int stage = 1; stage <= 2; ++stage) {
        CostWeights weights = (stage == 1) ? sched.stage1 : sched.stage2;
        if (target.mode != PulseMode::kEst) {
            weights.w_et = 0.0;
        }
        const int iters = (stage == 1) ? sched.stage1_iters : sched.stage2_iters;
        Eigen::VectorXd m = Eigen::VectorXd::Zero(4 * steps);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(4 * steps);
        for (int it = 0; it < iters; ++it) {
            const GrapeEval eval = grape_evaluate(sys, target, pulse, weights, sched.extra, sched.et_stride,
                                                  true, sched.threads);
            const double cost = eval.costs.total(weights, sched.extra);
            report.cost_trace.push_back(cost);
            ++report.iterations;
            if (!std::isfinite(cost)) {
                report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
                throw OptimizeAbort("optimize: non-finite cost at iteration " + std::to_string(report.iterations),
                                    report);
            }
            if (stage == 2) {
                if (cost < best_cost) {
                    best_cost = cost;
                    best_pulse = pulse;
                }
                if (eval.costs.c1 <= sched.stop_infidelity) {
                    report.converged = true;
                    break;
                }
            }

            const double t = it + 1;
            const double corr1 = 1.0 - std::pow(beta1, t);
            const double corr2 = 1.0 - std::pow(beta2, t);
            auto update = [&](int offset, Vector &channel, const Vector &grad) {
                for (int k = 0; k < steps; ++k) {
                    for (int part = 0; part < 2; ++part) {
                        const int idx = offset + 2 * k + part;
                        const double g = (part == 0) ? grad(k).real() : grad(k).imag();
                        m(idx) = beta1 * m(idx) + (1 - beta1) * g;
                        v(idx) = beta2 * v(idx) + (1 - beta2) * g * g;
                        const double step = sched.learning_rate * (m(idx) / corr1) /
                                            (std::sqrt(v(idx) / corr2) + adam_eps);
                        if (part == 0) {
                            channel(k) -= step;
                        } else {
                            channel(k) -= Complex(0, step);
                        }
                    }
                }
            };
            if (!target.qubit_drive_only) {
                update(0, pulse.eps, eval.grad.d_eps);
            }
            update(2 * steps, pulse.omega, eval.grad.d_omega);
            pulse = apply_constraints(pulse);
        }
    }

    {
        // Final candidate after the last update; keep whichever scores best
        // under the stage-2 objective.
        CostWeights weights = sched.stage2;
        if (target.mode != PulseMode::kEst) {
            weights.w_et = 0.0;
        }
        const GrapeEval eval = grape_evaluate(sys, target, pulse, weights, sched.extra, sched.et_stride, false,
                                              sched.threads);
        if (eval.costs.total(weights, sched.extra) < best_cost) {
            best_pulse = pulse;
        }

        const GrapeEval final_eval = grape_evaluate(sys, target, best_pulse, weights, sched.extra,
                                                    sched.et_stride, false, sched.threads);
        report.final_costs = final_eval.costs;
        report.c_tot = final_eval.costs.total(weights, sched.extra);
        report.et_singular_steps = final_eval.et_singular_steps;
        if (!report.converged && final_eval.costs.c1 <= sched.stop_infidelity) {
            report.converged = true;
        }

        // Lossless fidelities and the ET metric of the final pulse, measured
        // for every mode (the engine itself only propagates what the active
        // cost needs).
        const std::vector<Matrix> us = step_unitaries(sys.h0, sys.a, sys.q, best_pulse, sched.threads);
        std::optional<int> level;
        const bool layout_known = sys.cfg.dim() == sys.dim();
        double f_code = 0.0;
        std::vector<Trajectory> code_trajs;
        code_trajs.reserve(target.code_pairs.size());
        for (const auto &[in, want] : target.code_pairs) {
            code_trajs.push_back(propagate_with(us, in, best_pulse.dt_ns));
            f_code += std::norm(want.dot(code_trajs.back().states.back())) / target.code_pairs.size();
            if (layout_known) {
                auto lvl = max_active_level(code_trajs.back(), sys.cfg);
                if (lvl && (!level || *lvl > *level)) {
                    level = lvl;
                }
            }
        }
        report.code_fidelity = f_code;
        report.max_active_level = level;
        if (!target.error_pairs.empty() && target.error_pairs.size() == target.code_pairs.size()) {
            double f_err = 0.0;
            EtFidelityResult et;
            for (std::size_t i = 0; i < target.error_pairs.size(); ++i) {
                const auto &[in, want] = target.error_pairs[i];
                const Trajectory te = propagate_with(us, in, best_pulse.dt_ns);
                f_err += std::norm(want.dot(te.states.back())) / target.error_pairs.size();
                const EtFidelityResult one = et_fidelity(code_trajs[i], te, sys.a, sched.et_stride);
                et.value += one.value / target.error_pairs.size();
                et.singular_steps += one.singular_steps;
            }
            report.error_fidelity = f_err;
            report.et_fidelity_avg = et.value;
            report.et_singular_steps = et.singular_steps;
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {best_pulse, report};
}

}  // namespace estkit

#endif
