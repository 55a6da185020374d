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

#ifndef ESTKIT_METRICS_HPP
#define ESTKIT_METRICS_HPP

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "estkit/codespace.hpp"
#include "estkit/dynamics.hpp"
#include "estkit/hilbert.hpp"

namespace estkit {

// Time-indexed error-transparency diagnostics of one pulse. Mismatch entries
// are NaN where the projected error state has leaked below threshold.
struct MetricSeries {
    std::vector<double> times;
    std::vector<double> delta_qec;
    std::vector<double> leakage;
    std::vector<double> traj_mismatch;
};

namespace detail {

inline Eigen::Matrix2cd logical_block(const State &w0, const State &w1, const Matrix &op) {
    Eigen::Matrix2cd m;
    const State ow0 = op * w0;
    const State ow1 = op * w1;
    m << w0.dot(ow0), w0.dot(ow1), w1.dot(ow0), w1.dot(ow1);
    return m;
}

inline double traceless_frobenius(const Eigen::Matrix2cd &m) {
    const Eigen::Matrix2cd t = m - 0.5 * m.trace() * Eigen::Matrix2cd::Identity();
    return std::sqrt(t.cwiseAbs2().sum());
}

// Bloch vector of psi in the frame {w0, w1} after projecting onto the span;
// weight returns the retained probability.
inline Eigen::Vector3d bloch_in_frame(const State &w0, const State &w1, const State &psi, double *weight) {
    Complex alpha = w0.dot(psi);
    Complex beta = w1.dot(psi);
    const double w = std::norm(alpha) + std::norm(beta);
    if (weight != nullptr) {
        *weight = w;
    }
    if (w > 0) {
        alpha /= std::sqrt(w);
        beta /= std::sqrt(w);
    }
    const Complex cross = std::conj(alpha) * beta;
    return {2.0 * cross.real(), 2.0 * cross.imag(), std::norm(alpha) - std::norm(beta)};
}

// Orthonormal error words by Gram-Schmidt on {E w0, E w1}, inherited phases.
inline void error_frame(const Matrix &e, const State &w0, const State &w1, State &e0, State &e1) {
    e0 = e * w0;
    const double n0 = e0.norm();
    if (n0 < 1e-9) {
        throw std::invalid_argument("error frame: rank-deficient error space");
    }
    e0 /= n0;
    e1 = e * w1;
    e1 -= e0.dot(e1) * e0;
    const double n1 = e1.norm();
    if (n1 < 1e-9) {
        throw std::invalid_argument("error frame: rank-deficient error space");
    }
    e1 /= n1;
}

}  // namespace detail

// Scalar QEC-violation: sum over single error generators O of the Frobenius
// norm of the traceless part of P_C O P_C in the logical representation.
inline double qec_violation(const CodeSubspace &code, const std::vector<Matrix> &error_ops) {
    double total = 0.0;
    for (const Matrix &op : error_ops) {
        total += detail::traceless_frobenius(detail::logical_block(code.word0, code.word1, op));
    }
    return total;
}

// General pair form over products E_i^+ E_k.
inline double qec_violation_pairs(const CodeSubspace &code, const std::vector<Matrix> &errors) {
    double total = 0.0;
    for (const Matrix &ei : errors) {
        for (const Matrix &ek : errors) {
            const Matrix prod = ei.adjoint() * ek;
            total += detail::traceless_frobenius(detail::logical_block(code.word0, code.word1, prod));
        }
    }
    return total;
}

// Leakage of the maximally mixed initial-error-space state out of the
// instantaneous error space, per step boundary.
inline std::vector<double> instantaneous_leakage(const CodeSubspace &code0, const Matrix &e,
                                                 const std::vector<Matrix> &unitaries) {
    State cw0 = code0.word0, cw1 = code0.word1;
    State e0, e1;
    detail::error_frame(e, cw0, cw1, e0, e1);

    std::vector<double> out;
    out.reserve(unitaries.size() + 1);
    auto record = [&] {
        State f0, f1;
        detail::error_frame(e, cw0, cw1, f0, f1);
        const double kept = 0.5 * (std::norm(f0.dot(e0)) + std::norm(f1.dot(e0)) + std::norm(f0.dot(e1)) +
                                   std::norm(f1.dot(e1)));
        out.push_back(1.0 - kept);
    };
    record();
    for (const Matrix &u : unitaries) {
        cw0 = u * cw0;
        cw1 = u * cw1;
        e0 = u * e0;
        e1 = u * e1;
        record();
    }
    return out;
}

inline constexpr double kMismatchWeightFloor = 1e-6;  // on the projected norm

// Euclidean distance between the Bloch vectors of the code state and the
// projected error state in the instantaneous frames. NaN marks steps where
// the error state has fully leaked.
inline std::vector<double> trajectory_mismatch(const CodeSubspace &code0, const Matrix &e, const State &psi0,
                                               const std::vector<Matrix> &unitaries) {
    State cw0 = code0.word0, cw1 = code0.word1;
    State psi_c = psi0;
    State psi_e = e * psi0;
    const double n_e = psi_e.norm();
    if (n_e < 1e-9) {
        throw std::invalid_argument("trajectory_mismatch: error operator annihilates the initial state");
    }
    psi_e /= n_e;

    std::vector<double> out;
    out.reserve(unitaries.size() + 1);
    auto record = [&] {
        const Eigen::Vector3d r_c = detail::bloch_in_frame(cw0, cw1, psi_c, nullptr);
        State f0, f1;
        detail::error_frame(e, cw0, cw1, f0, f1);
        double weight = 0.0;
        const Eigen::Vector3d r_e = detail::bloch_in_frame(f0, f1, psi_e, &weight);
        if (std::sqrt(weight) < kMismatchWeightFloor) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            out.push_back((r_c - r_e).norm());
        }
    };
    record();
    for (const Matrix &u : unitaries) {
        cw0 = u * cw0;
        cw1 = u * cw1;
        psi_c = u * psi_c;
        psi_e = u * psi_e;
        record();
    }
    return out;
}

struct EtFidelityResult {
    double value = 0.0;
    int singular_steps = 0;  // steps with <n> below the normalization guard
};

// Per-step normalized overlap |<psi_E| a |psi_C>|^2 / <psi_C| a+a |psi_C>,
// averaged over steps 0..N-1.
inline EtFidelityResult et_fidelity(const Trajectory &traj_c, const Trajectory &traj_e, const Matrix &a_op,
                                    int stride = 1) {
    if (traj_c.states.size() != traj_e.states.size()) {
        throw std::invalid_argument("et_fidelity: trajectories must have equal length");
    }
    if (stride < 1) {
        throw std::invalid_argument("et_fidelity: stride must be >= 1");
    }
    EtFidelityResult res;
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i + 1 < static_cast<int>(traj_c.states.size()); i += stride) {
        const State a_psi = a_op * traj_c.states[i];
        const double nbar = a_psi.squaredNorm();
        ++count;
        if (nbar < 1e-6) {
            ++res.singular_steps;
            continue;
        }
        sum += std::norm(traj_e.states[i].dot(a_psi)) / nbar;
    }
    res.value = (count > 0) ? sum / count : 0.0;
    return res;
}

// Average over the six paired cardinal starts (code state, normalized a-image).
inline EtFidelityResult et_fidelity_avg(const CodeSubspace &code, const Matrix &a_op,
                                        const std::vector<Matrix> &unitaries, double dt_ns, int stride = 1) {
    EtFidelityResult res;
    const auto starts = cardinal_states(code);
    for (const State &psi : starts) {
        State err = a_op * psi;
        err /= err.norm();
        const Trajectory tc = propagate_with(unitaries, psi, dt_ns);
        const Trajectory te = propagate_with(unitaries, err, dt_ns);
        const EtFidelityResult one = et_fidelity(tc, te, a_op, stride);
        res.value += one.value / 6.0;
        res.singular_steps += one.singular_steps;
    }
    return res;
}

inline std::vector<double> mean_photon_imbalance(const Trajectory &traj0, const Trajectory &traj1,
                                                 const Matrix &n_op) {
    if (traj0.states.size() != traj1.states.size()) {
        throw std::invalid_argument("mean_photon_imbalance: trajectories must have equal length");
    }
    std::vector<double> out(traj0.states.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double n0 = traj0.states[i].dot(n_op * traj0.states[i]).real();
        const double n1 = traj1.states[i].dot(n_op * traj1.states[i]).real();
        out[i] = n0 - n1;
    }
    return out;
}

inline double average_gate_fidelity(const std::vector<State> &finals, const std::vector<State> &targets) {
    if (finals.size() != targets.size() || finals.empty()) {
        throw std::invalid_argument("average_gate_fidelity: outputs and targets must pair up");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < finals.size(); ++i) {
        sum += std::norm(targets[i].dot(finals[i]));
    }
    return sum / static_cast<double>(finals.size());
}

// All three diagnostics for one pulse, evaluated per step boundary. Delta_QEC
// uses the static generators {a, n} projected by the instantaneous code words.
inline MetricSeries compute_metric_series(const CodeSubspace &code, const OperatorSet &ops,
                                          const std::vector<Matrix> &unitaries, const State &mismatch_start,
                                          double dt_ns) {
    MetricSeries series;
    const std::vector<Matrix> qec_ops = {ops.a.mat, ops.n_cav.mat};

    State cw0 = code.word0, cw1 = code.word1;
    series.times.reserve(unitaries.size() + 1);
    series.delta_qec.reserve(unitaries.size() + 1);
    for (std::size_t i = 0; i <= unitaries.size(); ++i) {
        series.times.push_back(dt_ns * static_cast<double>(i));
        double total = 0.0;
        for (const Matrix &op : qec_ops) {
            total += detail::traceless_frobenius(detail::logical_block(cw0, cw1, op));
        }
        series.delta_qec.push_back(total);
        if (i < unitaries.size()) {
            cw0 = unitaries[i] * cw0;
            cw1 = unitaries[i] * cw1;
        }
    }
    series.leakage = instantaneous_leakage(code, ops.a.mat, unitaries);
    series.traj_mismatch = trajectory_mismatch(code, ops.a.mat, mismatch_start, unitaries);
    return series;
}

inline double time_average(const std::vector<double> &values) {
    double sum = 0.0;
    int count = 0;
    for (double v : values) {
        if (!std::isnan(v)) {
            sum += v;
            ++count;
        }
    }
    return (count > 0) ? sum / count : 0.0;
}

// ---------------------------------------------------------------------------
// Process tomography

using ChiMatrix = Eigen::Matrix4cd;

struct TomographyResult {
    ChiMatrix chi = ChiMatrix::Zero();
    double process_fidelity = 0.0;
    double chi_trace = 0.0;         // before normalization
    double min_logical_weight = 1.0;
    double mean_logical_weight = 1.0;
};

namespace detail {

inline std::array<Eigen::Matrix2cd, 4> pauli_basis() {
    std::array<Eigen::Matrix2cd, 4> s;
    s[0] = Eigen::Matrix2cd::Identity();
    s[1] << 0, 1, 1, 0;
    s[2] << 0, -kI, kI, 0;
    s[3] << 1, 0, 0, -1;
    return s;
}

inline Eigen::Matrix4cd kron2(const Eigen::Matrix2cd &a, const Eigen::Matrix2cd &b) {
    Eigen::Matrix4cd out;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace detail

// chi matrix of a 2x2 unitary in the {I, X, Y, Z} basis, trace normalized.
inline ChiMatrix chi_of_unitary(const Eigen::Matrix2cd &u) {
    const auto sigma = detail::pauli_basis();
    Eigen::Vector4cd c;
    for (int m = 0; m < 4; ++m) {
        c(m) = 0.5 * (sigma[m].adjoint() * u).trace();
    }
    ChiMatrix chi = c * c.adjoint();
    chi /= chi.trace();
    return chi;
}

// Linear-inversion process tomography of a channel between the logical spans
// of `prep` (input preparation) and `meas` (readout). The channel receives a
// full-space pure state and returns the final full-space density matrix;
// outputs are projected onto the readout span and renormalized, with the
// retained weights recorded.
inline TomographyResult process_tomography(const std::function<Matrix(const State &)> &channel,
                                           const CodeSubspace &prep, const CodeSubspace &meas,
                                           const Eigen::Matrix2cd &target_logical) {
    const std::array<State, 4> inputs = {
        prep.word0,
        prep.word1,
        ((prep.word0 + prep.word1) / std::numbers::sqrt2).eval(),
        ((prep.word0 + kI * prep.word1) / std::numbers::sqrt2).eval(),
    };
    const State &w0 = meas.word0;
    const State &w1 = meas.word1;

    TomographyResult res;
    std::array<Eigen::Matrix2cd, 4> outs;
    double weight_sum = 0.0;
    for (int j = 0; j < 4; ++j) {
        const Matrix rho = channel(inputs[j]);
        Eigen::Matrix2cd m;
        m << w0.dot(rho * w0), w0.dot(rho * w1), w1.dot(rho * w0), w1.dot(rho * w1);
        const double weight = m.trace().real();
        if (weight < 1e-6) {
            throw std::invalid_argument("process_tomography: channel output has negligible logical weight");
        }
        outs[j] = m / weight;
        res.min_logical_weight = std::min(res.min_logical_weight, weight);
        weight_sum += weight;
    }
    res.mean_logical_weight = weight_sum / 4.0;

    // Reassemble the action on the operator basis |k><l|.
    const Complex half_1p1i(0.5, 0.5);
    const Complex half_1m1i(0.5, -0.5);
    std::array<std::array<Eigen::Matrix2cd, 2>, 2> e;
    e[0][0] = outs[0];
    e[1][1] = outs[1];
    e[0][1] = outs[2] + kI * outs[3] - half_1p1i * (outs[0] + outs[1]);
    e[1][0] = outs[2] - kI * outs[3] - half_1m1i * (outs[0] + outs[1]);

    Eigen::Matrix4cd superop;
    for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
            superop.col(k + 2 * l) = Eigen::Map<const Eigen::Vector4cd>(e[k][l].data());
        }
    }

    // Solve superop = sum_mn chi_mn (sigma_n^T (x) sigma_m) for chi.
    const auto sigma = detail::pauli_basis();
    Eigen::Matrix<Complex, 16, 16> basis;
    for (int m = 0; m < 4; ++m) {
        for (int n = 0; n < 4; ++n) {
            const Eigen::Matrix4cd bmat = detail::kron2(sigma[n].transpose(), sigma[m]);
            basis.col(m + 4 * n) = Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(bmat.data());
        }
    }
    const Eigen::Map<const Eigen::Matrix<Complex, 16, 1>> rhs(superop.data());
    const Eigen::Matrix<Complex, 16, 1> chi_vec = basis.colPivHouseholderQr().solve(rhs);

    ChiMatrix chi = Eigen::Map<const ChiMatrix>(chi_vec.data());
    chi = 0.5 * (chi + chi.adjoint()).eval();
    res.chi_trace = chi.trace().real();
    chi /= chi.trace();
    res.chi = chi;

    ChiMatrix chi_target = chi_of_unitary(target_logical);
    res.process_fidelity = (chi * chi_target).trace().real();
    return res;
}

inline TomographyResult process_tomography(const std::function<Matrix(const State &)> &channel,
                                           const CodeSubspace &space, const Eigen::Matrix2cd &target_logical) {
    return process_tomography(channel, space, space, target_logical);
}

// ---------------------------------------------------------------------------
// Wigner function

// rho of the cavity factor, qubit traced out.
inline Matrix reduce_to_cavity(const Matrix &rho_joint, const HilbertConfig &cfg) {
    if (rho_joint.rows() != cfg.dim()) {
        throw std::invalid_argument("reduce_to_cavity: dimension mismatch");
    }
    Matrix out = Matrix::Zero(cfg.cavity_dim, cfg.cavity_dim);
    for (int m = 0; m < cfg.cavity_dim; ++m) {
        for (int n = 0; n < cfg.cavity_dim; ++n) {
            for (int j = 0; j < cfg.qubit_dim; ++j) {
                out(m, n) += rho_joint(m * cfg.qubit_dim + j, n * cfg.qubit_dim + j);
            }
        }
    }
    return out;
}

namespace detail {

// exp(c a) v and exp(c a+) v by the terminating nilpotent series.
inline State apply_exp_lowering(Complex c, const State &v) {
    State out = v;
    State term = v;
    const int dim = static_cast<int>(v.size());
    for (int k = 1; k < dim; ++k) {
        State next = State::Zero(dim);
        for (int n = 1; n < dim; ++n) {
            next(n - 1) = std::sqrt(static_cast<double>(n)) * term(n);
        }
        term = (c / static_cast<double>(k)) * next;
        out += term;
        if (term.norm() < 1e-300) {
            break;
        }
    }
    return out;
}

inline State apply_exp_raising(Complex c, const State &v) {
    State out = v;
    State term = v;
    const int dim = static_cast<int>(v.size());
    for (int k = 1; k < dim; ++k) {
        State next = State::Zero(dim);
        for (int n = 0; n + 1 < dim; ++n) {
            next(n + 1) = std::sqrt(static_cast<double>(n + 1)) * term(n);
        }
        term = (c / static_cast<double>(k)) * next;
        out += term;
        if (term.norm() < 1e-300) {
            break;
        }
    }
    return out;
}

// D(alpha) v = e^{-|a|^2/2} e^{alpha a+} e^{-conj(alpha) a} v
inline State displace(Complex alpha, const State &v) {
    State out = apply_exp_lowering(-std::conj(alpha), v);
    out = apply_exp_raising(alpha, out);
    return std::exp(-0.5 * std::norm(alpha)) * out;
}

}  // namespace detail

// W(alpha) = (2/pi) Tr[D(alpha) P D+(alpha) rho], evaluated on a padded Fock
// space so large displacements are not clipped by the simulation truncation.
inline std::vector<double> wigner(const Matrix &rho_cavity, const std::vector<Complex> &alphas, int pad_dim = 0) {
    if (rho_cavity.rows() != rho_cavity.cols()) {
        throw std::invalid_argument("wigner: rho must be square");
    }
    double r_max = 0.0;
    for (Complex a : alphas) {
        r_max = std::max(r_max, std::abs(a));
    }
    const int base = static_cast<int>(rho_cavity.rows());
    const int needed = static_cast<int>(std::ceil(r_max * r_max + 6.0 * r_max + 10.0));
    const int dim = std::max({base, needed, pad_dim});

    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho_cavity + rho_cavity.adjoint()));
    std::vector<std::pair<double, State>> modes;
    for (int i = 0; i < base; ++i) {
        if (std::abs(es.eigenvalues()(i)) > 1e-14) {
            State padded = State::Zero(dim);
            padded.head(base) = es.eigenvectors().col(i);
            modes.emplace_back(es.eigenvalues()(i), std::move(padded));
        }
    }

    std::vector<double> out(alphas.size(), 0.0);
    for (std::size_t j = 0; j < alphas.size(); ++j) {
        double w = 0.0;
        for (const auto &[p, phi] : modes) {
            const State shifted = detail::displace(-alphas[j], phi);
            double parity = 0.0;
            for (int n = 0; n < dim; ++n) {
                parity += ((n % 2 == 0) ? 1.0 : -1.0) * std::norm(shifted(n));
            }
            w += p * parity;
        }
        out[j] = w * 2.0 / std::numbers::pi;
    }
    return out;
}

}  // namespace estkit

#endif
