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

#ifndef ESTKIT_HILBERT_HPP
#define ESTKIT_HILBERT_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace estkit {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using State = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

// All Hamiltonians are stored in rad/ns so that exp(-i H t_ns) propagates
// directly. External frequencies are linear MHz (value/2pi); this is the one
// conversion point.
inline constexpr double kMhzToRadPerNs = 2.0 * std::numbers::pi * 1e-3;

// Truncated joint cavity (x) transmon space. The kitten code needs Fock |4>
// plus headroom, hence the floor of 6.
struct HilbertConfig {
    int cavity_dim = 12;
    int qubit_dim = 2;

    int dim() const {
        return cavity_dim * qubit_dim;
    }
    void validate() const {
        if (cavity_dim < 6) {
            throw std::invalid_argument("HilbertConfig: cavity_dim must be >= 6, got " + std::to_string(cavity_dim));
        }
        if (qubit_dim != 2 && qubit_dim != 3) {
            throw std::invalid_argument("HilbertConfig: qubit_dim must be 2 or 3, got " + std::to_string(qubit_dim));
        }
    }
};

// Device parameters. Frequencies are linear MHz, coherence times us.
// Defaults are the measured values of the driven cavity-transmon package.
struct SystemParams {
    double chi_mhz = -3.66;
    double chi_prime_mhz = 0.039;
    double kerr_mhz = -0.022;
    double kerr_prime_mhz = 0.00059;
    double anharm_mhz = -180.0;
    double t1_cav_us = 180.0;
    double t2_cav_us = 290.0;
    double t1_qb_us = 70.0;
    double t2_qb_us = 30.0;

    void validate() const {
        auto check_pair = [](double t1, double t2, const std::string &mode) {
            if (t1 <= 0 || t2 <= 0) {
                throw std::invalid_argument("SystemParams: " + mode + " T1/T2 must be positive");
            }
            if (t2 > 2.0 * t1 + 1e-12) {
                throw std::invalid_argument("SystemParams: " + mode + " violates T2 <= 2*T1");
            }
        };
        check_pair(t1_cav_us, t2_cav_us, "cavity");
        check_pair(t1_qb_us, t2_qb_us, "qubit");
    }
};

struct Operator {
    Matrix mat;
    std::string label;

    int dim() const {
        return static_cast<int>(mat.rows());
    }
};

inline double hermiticity_residual(const Matrix &m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Matrix &m, double tol = 1e-12) {
    return hermiticity_residual(m) <= tol;
}

inline double unitarity_residual(const Matrix &u) {
    return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

namespace detail {

inline Matrix annihilation(int dim) {
    Matrix a = Matrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

inline Matrix kron(const Matrix &a, const Matrix &b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace detail

// a, q and friends embedded on the joint space, ordering cavity (x) qubit.
struct OperatorSet {
    Operator a;
    Operator a_dag;
    Operator n_cav;
    Operator q;
    Operator q_dag;
    Operator n_qb;
    Operator parity_cav;
    Operator identity;
};

inline OperatorSet fock_operators(const HilbertConfig &cfg) {
    cfg.validate();
    const Matrix a_c = detail::annihilation(cfg.cavity_dim);
    const Matrix q_q = detail::annihilation(cfg.qubit_dim);
    const Matrix id_c = Matrix::Identity(cfg.cavity_dim, cfg.cavity_dim);
    const Matrix id_q = Matrix::Identity(cfg.qubit_dim, cfg.qubit_dim);

    Matrix parity_c = Matrix::Zero(cfg.cavity_dim, cfg.cavity_dim);
    for (int n = 0; n < cfg.cavity_dim; ++n) {
        parity_c(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    }

    OperatorSet ops;
    ops.a = {detail::kron(a_c, id_q), "a"};
    ops.a_dag = {detail::kron(a_c.adjoint(), id_q), "a_dag"};
    ops.n_cav = {detail::kron((a_c.adjoint() * a_c).eval(), id_q), "n_cav"};
    ops.q = {detail::kron(id_c, q_q), "q"};
    ops.q_dag = {detail::kron(id_c, q_q.adjoint()), "q_dag"};
    ops.n_qb = {detail::kron(id_c, (q_q.adjoint() * q_q).eval()), "n_qb"};
    ops.parity_cav = {detail::kron(parity_c, id_q), "parity_cav"};
    ops.identity = {Matrix::Identity(cfg.dim(), cfg.dim()), "identity"};
    return ops;
}

// H0/hbar in the doubly rotating frame (linear omega terms removed):
//   2pi [ K/2 a+^2 a^2 + K'/6 a+^3 a^3 + Kq/2 q+^2 q^2
//         + chi a+a q+q + chi'/2 q+q a+^2 a^2 ]
inline Operator build_static_hamiltonian(const SystemParams &params, const HilbertConfig &cfg) {
    params.validate();
    const OperatorSet ops = fock_operators(cfg);
    const Matrix &a = ops.a.mat;
    const Matrix &q = ops.q.mat;
    const Matrix ad = ops.a_dag.mat;
    const Matrix qd = ops.q_dag.mat;
    const Matrix n_c = ops.n_cav.mat;
    const Matrix n_q = ops.n_qb.mat;

    const Matrix a2 = a * a;
    const Matrix a3 = a2 * a;
    const Matrix q2 = q * q;
    const Matrix kerr2 = ad * ad * a2;
    const Matrix kerr3 = ad * ad * ad * a3;
    const Matrix anharm = qd * qd * q2;

    Matrix h = 0.5 * params.kerr_mhz * kerr2;
    h += (params.kerr_prime_mhz / 6.0) * kerr3;
    h += 0.5 * params.anharm_mhz * anharm;
    h += params.chi_mhz * (n_c * n_q);
    h += 0.5 * params.chi_prime_mhz * (n_q * kerr2);
    h *= kMhzToRadPerNs;
    // The construction is manifestly Hermitian in exact arithmetic; symmetrize
    // to keep the 1e-12 contract independent of accumulation order.
    h = 0.5 * (h + h.adjoint()).eval();
    return {std::move(h), "H0"};
}

// Generators (a, q) for the drive 2pi (eps a + Omega q + h.c.); the Hermitian
// conjugate is applied at assembly time.
inline std::pair<Operator, Operator> build_drive_generators(const HilbertConfig &cfg) {
    OperatorSet ops = fock_operators(cfg);
    return {std::move(ops.a), std::move(ops.q)};
}

// One drive-Hamiltonian assembly for amplitudes in MHz; result in rad/ns.
inline Matrix assemble_drive(const Matrix &gen_cav, const Matrix &gen_qb, Complex eps_mhz, Complex omega_mhz) {
    Matrix h = eps_mhz * gen_cav + omega_mhz * gen_qb;
    h = (h + h.adjoint()).eval();
    return kMhzToRadPerNs * h;
}

inline Operator commutator(const Operator &a, const Operator &b) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("commutator: dimension mismatch " + std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()));
    }
    return {a.mat * b.mat - b.mat * a.mat, "[" + a.label + "," + b.label + "]"};
}

// Collapse set {sqrt(1/T1c) a, sqrt(1/T1q) q, sqrt(2 gphi_c) a+a,
// sqrt(2 gphi_q) q+q} with gphi = 1/T2 - 1/(2 T1); zero-rate entries omitted.
// Rates are per ns.
inline std::vector<Operator> collapse_operators(const SystemParams &params, const HilbertConfig &cfg) {
    params.validate();
    const OperatorSet ops = fock_operators(cfg);
    const double us = 1e3;  // ns per us

    std::vector<Operator> out;
    auto add = [&out](double rate_per_ns, const Matrix &m, const std::string &label) {
        if (rate_per_ns < -1e-9) {
            throw std::invalid_argument("collapse_operators: negative rate for " + label + " (inconsistent T1/T2)");
        }
        if (rate_per_ns > 0) {
            out.push_back({std::sqrt(rate_per_ns) * m, label});
        }
    };

    add(1.0 / (params.t1_cav_us * us), ops.a.mat, "loss_cav");
    add(1.0 / (params.t1_qb_us * us), ops.q.mat, "loss_qb");
    const double gphi_cav = (1.0 / params.t2_cav_us - 0.5 / params.t1_cav_us) / us;
    const double gphi_qb = (1.0 / params.t2_qb_us - 0.5 / params.t1_qb_us) / us;
    add(2.0 * gphi_cav, ops.n_cav.mat, "dephase_cav");
    add(2.0 * gphi_qb, ops.n_qb.mat, "dephase_qb");
    return out;
}

}  // namespace estkit

#endif
