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

#include "estkit/hilbert.hpp"

#include <random>

#include "gtest/gtest.h"

using namespace estkit;

namespace {

State fock_state(const HilbertConfig &cfg, int n_cav, int n_qb = 0) {
    State s = State::Zero(cfg.dim());
    s(n_cav * cfg.qubit_dim + n_qb) = 1.0;
    return s;
}

}  // namespace

TEST(hilbert, config_validation) {
    EXPECT_THROW(fock_operators({5, 2}), std::invalid_argument);
    EXPECT_THROW(fock_operators({12, 1}), std::invalid_argument);
    EXPECT_THROW(fock_operators({12, 4}), std::invalid_argument);
    EXPECT_NO_THROW(fock_operators({6, 3}));
}

TEST(hilbert, annihilation_acts_as_sqrt_n) {
    HilbertConfig cfg{12, 2};
    const OperatorSet ops = fock_operators(cfg);
    const State in = fock_state(cfg, 4);
    const State out = ops.a.mat * in;
    EXPECT_NEAR((out - 2.0 * fock_state(cfg, 3)).norm(), 0.0, 1e-14);
}

TEST(hilbert, number_operator_eigenvalues) {
    HilbertConfig cfg{9, 2};
    const OperatorSet ops = fock_operators(cfg);
    for (int n = 0; n < cfg.cavity_dim; ++n) {
        const State s = fock_state(cfg, n, 1);
        EXPECT_NEAR((ops.n_cav.mat * s - double(n) * s).norm(), 0.0, 1e-13);
    }
}

TEST(hilbert, cavity_parity) {
    HilbertConfig cfg{12, 2};
    const OperatorSet ops = fock_operators(cfg);
    EXPECT_NEAR((ops.parity_cav.mat * fock_state(cfg, 2) - fock_state(cfg, 2)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((ops.parity_cav.mat * fock_state(cfg, 3) + fock_state(cfg, 3)).norm(), 0.0, 1e-15);
}

TEST(hilbert, canonical_commutator_on_interior_block) {
    HilbertConfig cfg{12, 2};
    const OperatorSet ops = fock_operators(cfg);
    const Matrix comm = commutator(ops.a, ops.a_dag).mat;
    // Identity away from the top truncation row of the cavity factor.
    for (int n = 0; n + 1 < cfg.cavity_dim; ++n) {
        for (int j = 0; j < cfg.qubit_dim; ++j) {
            const int idx = n * cfg.qubit_dim + j;
            EXPECT_NEAR(std::abs(comm(idx, idx) - 1.0), 0.0, 1e-13);
        }
    }
}

TEST(hilbert, tensor_factors_commute) {
    HilbertConfig cfg{8, 3};
    const OperatorSet ops = fock_operators(cfg);
    const Matrix lhs = ops.a.mat * ops.q.mat;
    const Matrix rhs = ops.q.mat * ops.a.mat;
    EXPECT_NEAR((lhs - rhs).cwiseAbs().maxCoeff(), 0.0, 0.0);
}

TEST(hilbert, static_hamiltonian_zero_params) {
    SystemParams params;
    params.chi_mhz = params.chi_prime_mhz = params.kerr_mhz = params.kerr_prime_mhz = params.anharm_mhz = 0.0;
    const Operator h = build_static_hamiltonian(params, {12, 2});
    EXPECT_NEAR(h.mat.cwiseAbs().maxCoeff(), 0.0, 0.0);
}

// Hand-evaluated diagonal for Fock 2, qubit e with the measured parameters:
// 2 chi + chi' + K = -7.32 + 0.039 - 0.022 = -7.303 MHz.
TEST(hilbert, static_hamiltonian_fock2_excited_element) {
    HilbertConfig cfg{12, 2};
    const Operator h = build_static_hamiltonian(SystemParams{}, cfg);
    const State s = fock_state(cfg, 2, 1);
    const double value_mhz = s.dot(h.mat * s).real() / kMhzToRadPerNs;
    EXPECT_NEAR(value_mhz, -7.303, 1e-9);
}

TEST(hilbert, static_hamiltonian_hermitian) {
    const Operator h = build_static_hamiltonian(SystemParams{}, {12, 3});
    EXPECT_LT(hermiticity_residual(h.mat), 1e-12);
}

TEST(hilbert, qubit_anharmonicity_active_for_three_levels) {
    HilbertConfig cfg{6, 3};
    const Operator h = build_static_hamiltonian(SystemParams{}, cfg);
    const State f = fock_state(cfg, 0, 2);
    EXPECT_NEAR(f.dot(h.mat * f).real() / kMhzToRadPerNs, -180.0, 1e-9);
}

TEST(hilbert, drive_assembly) {
    HilbertConfig cfg{12, 2};
    auto [gen_cav, gen_qb] = build_drive_generators(cfg);

    EXPECT_NEAR(assemble_drive(gen_cav.mat, gen_qb.mat, 0.0, 0.0).cwiseAbs().maxCoeff(), 0.0, 0.0);

    // Imaginary eps keeps the assembled term Hermitian.
    const Matrix h = assemble_drive(gen_cav.mat, gen_qb.mat, Complex(0.0, 1.0), 0.0);
    EXPECT_LT(hermiticity_residual(h), 1e-14);

    // <1,g| H_drive |0,g> for eps = 1 MHz is 2pi * 1 MHz.
    const Matrix h1 = assemble_drive(gen_cav.mat, gen_qb.mat, 1.0, 0.0);
    const Complex elem = fock_state(cfg, 1).dot(h1 * fock_state(cfg, 0));
    EXPECT_NEAR(elem.real(), kMhzToRadPerNs, 1e-15);
    EXPECT_NEAR(elem.imag(), 0.0, 1e-15);
}

// The uncorrectable commutator: [K/2 a+a+aa + chi'/2 a+a+aa q+q, a]
// = -(K + chi' q+q) a+a^2 on the interior Fock block.
TEST(hilbert, kerr_dispersive_commutator_identity) {
    HilbertConfig cfg{12, 2};
    SystemParams params;
    const OperatorSet ops = fock_operators(cfg);
    const Matrix a = ops.a.mat;
    const Matrix kerr2 = ops.a_dag.mat * ops.a_dag.mat * a * a;

    Operator lhs_op{0.5 * params.kerr_mhz * kerr2 + 0.5 * params.chi_prime_mhz * (kerr2 * ops.n_qb.mat), "H_K"};
    const Matrix lhs = commutator(lhs_op, ops.a).mat;
    const Matrix rhs = -(params.kerr_mhz * Matrix::Identity(cfg.dim(), cfg.dim()) +
                         params.chi_prime_mhz * ops.n_qb.mat) *
                       ops.a_dag.mat * a * a;

    // Compare elementwise on the Fock block {0 .. cavity_dim - 3}.
    const int interior = (cfg.cavity_dim - 2) * cfg.qubit_dim;
    const Matrix diff = (lhs - rhs).topLeftCorner(interior, interior);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(hilbert, commutator_basics) {
    HilbertConfig cfg{8, 2};
    const OperatorSet ops = fock_operators(cfg);
    EXPECT_NEAR(commutator(ops.n_cav, ops.n_cav).mat.cwiseAbs().maxCoeff(), 0.0, 0.0);

    // [n, a] = -a away from the truncation boundary.
    const Matrix diff = commutator(ops.n_cav, ops.a).mat + ops.a.mat;
    const int interior = (cfg.cavity_dim - 2) * cfg.qubit_dim;
    EXPECT_LT(diff.topLeftCorner(interior, interior).cwiseAbs().maxCoeff(), 1e-12);

    Operator small{Matrix::Identity(4, 4), "I4"};
    EXPECT_THROW(commutator(ops.a, small), std::invalid_argument);
}

TEST(hilbert, collapse_operator_rates) {
    HilbertConfig cfg{12, 2};
    const auto ops = collapse_operators(SystemParams{}, cfg);
    ASSERT_EQ(ops.size(), 4u);

    // Photon loss carries sqrt(1/T1) with T1 = 180 us: check the |0><1| entry.
    const double coeff = std::abs(ops[0].mat(0 * cfg.qubit_dim, 1 * cfg.qubit_dim));
    EXPECT_NEAR(coeff * coeff, 1.0 / 180e3, 1e-12);

    // Qubit dephasing rate: gamma_phi = 1/30 - 1/140 per us.
    const double expected = 1.0 / 30e3 - 1.0 / 140e3;
    const State e = fock_state(cfg, 0, 1);
    const double val = std::norm(e.dot(ops[3].mat * e));
    EXPECT_NEAR(val, 2.0 * expected, 1e-12);
}

TEST(hilbert, collapse_omits_zero_rate_dephasing) {
    SystemParams params;
    params.t2_cav_us = 2.0 * params.t1_cav_us;
    const auto ops = collapse_operators(params, {12, 2});
    for (const auto &op : ops) {
        EXPECT_NE(op.label, "dephase_cav");
    }
    ASSERT_EQ(ops.size(), 3u);
}

TEST(hilbert, inconsistent_t1_t2_rejected) {
    SystemParams params;
    params.t2_qb_us = 150.0;  // > 2 T1
    EXPECT_THROW(params.validate(), std::invalid_argument);
    EXPECT_THROW(collapse_operators(params, {12, 2}), std::invalid_argument);
}

TEST(hilbert, hamiltonians_hermitian_property) {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        SystemParams p;
        p.chi_mhz = dist(rng);
        p.chi_prime_mhz = dist(rng);
        p.kerr_mhz = dist(rng);
        p.kerr_prime_mhz = dist(rng);
        p.anharm_mhz = dist(rng);
        const Operator h = build_static_hamiltonian(p, {10, 3});
        EXPECT_LT(hermiticity_residual(h.mat), 1e-12);
    }
}
