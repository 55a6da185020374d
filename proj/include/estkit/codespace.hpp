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

#ifndef ESTKIT_CODESPACE_HPP
#define ESTKIT_CODESPACE_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "estkit/hilbert.hpp"

namespace estkit {

// A two-dimensional code: orthonormal words, rank-2 projector and the logical
// Pauli triple on the span. Instantiated statically (kitten code) and
// instantaneously along a trajectory.
struct CodeSubspace {
    State word0;
    State word1;
    Operator projector;
    Operator pauli_x;
    Operator pauli_y;
    Operator pauli_z;
};

namespace detail {

// Leading nonzero amplitude made real-positive. Used for unitarily mapped
// code words; Gram-Schmidt error words keep their inherited phases so the
// error-frame Paulis stay tied to the E-image of the code frame.
inline State fix_global_phase(const State &v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-12) {
            Complex phase = v(i) / std::abs(v(i));
            return v / phase;
        }
    }
    return v;
}

inline void build_paulis(CodeSubspace &code) {
    const State &w0 = code.word0;
    const State &w1 = code.word1;
    Matrix p01 = w0 * w1.adjoint();
    Matrix p10 = w1 * w0.adjoint();
    Matrix p00 = w0 * w0.adjoint();
    Matrix p11 = w1 * w1.adjoint();
    code.projector = {p00 + p11, "P_C"};
    code.pauli_x = {p01 + p10, "X_C"};
    code.pauli_y = {kI * p10 - kI * p01, "Y_C"};
    code.pauli_z = {p00 - p11, "Z_C"};
}

}  // namespace detail

inline CodeSubspace make_code_from_words(const State &word0, const State &word1) {
    if (std::abs(word0.norm() - 1.0) > 1e-10 || std::abs(word1.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("make_code_from_words: words must be unit norm");
    }
    if (std::abs(word0.dot(word1)) > 1e-10) {
        throw std::invalid_argument("make_code_from_words: words must be orthogonal");
    }
    CodeSubspace code;
    code.word0 = word0;
    code.word1 = word1;
    detail::build_paulis(code);
    return code;
}

// Binomial kitten code on the cavity factor, ancilla in |g>:
// |0_L> = (|0> + |4>)/sqrt(2), |1_L> = |2>.
inline CodeSubspace kitten_code(const HilbertConfig &cfg) {
    cfg.validate();
    const int qd = cfg.qubit_dim;
    auto fock = [&](int n_cav) {
        State s = State::Zero(cfg.dim());
        s(n_cav * qd + 0) = 1.0;
        return s;
    };
    const State w0 = (fock(0) + fock(4)) / std::numbers::sqrt2;
    const State w1 = fock(2);
    return make_code_from_words(w0, w1);
}

// cos(theta/2)|0_L> + e^{i phi} sin(theta/2)|1_L>.
inline State logical_state(const CodeSubspace &code, double theta, double phi) {
    State s = std::cos(0.5 * theta) * code.word0 +
              std::exp(kI * phi) * std::sin(0.5 * theta) * code.word1;
    return s / s.norm();
}

// Order: +Z, -Z, +X, -X, +Y, -Y.
inline std::array<State, 6> cardinal_states(const CodeSubspace &code) {
    const double pi = std::numbers::pi;
    return {
        logical_state(code, 0.0, 0.0),       logical_state(code, pi, 0.0),
        logical_state(code, 0.5 * pi, 0.0),  logical_state(code, 0.5 * pi, pi),
        logical_state(code, 0.5 * pi, 0.5 * pi), logical_state(code, 0.5 * pi, -0.5 * pi),
    };
}

// Image of the code under a partial-gate unitary: words mapped through U,
// Paulis conjugated.
inline CodeSubspace instantaneous_subspace(const CodeSubspace &code, const Operator &u) {
    if (unitarity_residual(u.mat) > 1e-8) {
        throw std::invalid_argument("instantaneous_subspace: operator is not unitary");
    }
    CodeSubspace out;
    out.word0 = detail::fix_global_phase(u.mat * code.word0);
    out.word1 = detail::fix_global_phase(u.mat * code.word1);
    out.projector = {u.mat * code.projector.mat * u.mat.adjoint(), code.projector.label};
    out.pauli_x = {u.mat * code.pauli_x.mat * u.mat.adjoint(), code.pauli_x.label};
    out.pauli_y = {u.mat * code.pauli_y.mat * u.mat.adjoint(), code.pauli_y.label};
    out.pauli_z = {u.mat * code.pauli_z.mat * u.mat.adjoint(), code.pauli_z.label};
    return out;
}

// Span of {E word0, E word1}, Gram-Schmidt anchored on E word0. Projector and
// Paulis are rebuilt on the new span.
inline CodeSubspace error_subspace(const CodeSubspace &code, const Operator &e) {
    State e0 = e.mat * code.word0;
    const double n0 = e0.norm();
    if (n0 < 1e-9) {
        throw std::invalid_argument("error_subspace: error operator annihilates word0");
    }
    e0 /= n0;
    State e1 = e.mat * code.word1;
    e1 -= e0.dot(e1) * e0;
    const double n1 = e1.norm();
    if (n1 < 1e-9) {
        throw std::invalid_argument("error_subspace: rank-deficient error space (word1 image collinear or null)");
    }
    e1 /= n1;

    CodeSubspace out;
    out.word0 = e0;
    out.word1 = e1;
    detail::build_paulis(out);
    return out;
}

// Bloch vector of a density matrix read out with the subspace's Paulis.
inline Eigen::Vector3d bloch_vector(const CodeSubspace &code, const Matrix &rho) {
    return {
        (code.pauli_x.mat * rho).trace().real(),
        (code.pauli_y.mat * rho).trace().real(),
        (code.pauli_z.mat * rho).trace().real(),
    };
}

inline Eigen::Vector3d bloch_vector(const CodeSubspace &code, const State &psi) {
    return bloch_vector(code, Matrix(psi * psi.adjoint()));
}

// Plot-ready rows: index, re, im.
inline std::string format_state_table(const State &s) {
    std::ostringstream os;
    os.precision(17);
    os << "# index,re,im\n";
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        os << i << "," << s(i).real() << "," << s(i).imag() << "\n";
    }
    return os.str();
}

}  // namespace estkit

#endif
