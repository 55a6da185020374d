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

#ifndef ESTKIT_DYNAMICS_HPP
#define ESTKIT_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "estkit/hilbert.hpp"
#include "estkit/threading.hpp"

namespace estkit {

// Piecewise-constant complex drive samples at a fixed step, plus the
// constraint metadata the pulse was (or will be) shaped with. Amplitudes are
// linear MHz.
struct PulseEnvelope {
    double dt_ns = 1.0;
    Vector eps;
    Vector omega;
    double ramp_ns = 48.0;
    double bandwidth_mhz = 50.0;
    double max_amp_mhz = 4.0;

    int steps() const {
        return static_cast<int>(eps.size());
    }
    double duration_ns() const {
        return dt_ns * steps();
    }
    void validate() const {
        if (eps.size() != omega.size()) {
            throw std::invalid_argument("PulseEnvelope: eps and omega must have equal length");
        }
        if (dt_ns <= 0) {
            throw std::invalid_argument("PulseEnvelope: dt must be positive");
        }
    }
    PulseEnvelope slice(int first_step, int last_step) const {
        PulseEnvelope out = *this;
        out.eps = eps.segment(first_step, last_step - first_step);
        out.omega = omega.segment(first_step, last_step - first_step);
        return out;
    }
};

inline PulseEnvelope zero_pulse(int steps, double dt_ns = 1.0) {
    PulseEnvelope p;
    p.dt_ns = dt_ns;
    p.eps = Vector::Zero(steps);
    p.omega = Vector::Zero(steps);
    return p;
}

// Eigendecompositions of each step Hamiltonian. Exact unitaries (and their
// control derivatives, in the optimizer) come from these.
struct StepSpectra {
    double dt_ns = 1.0;
    std::vector<Eigen::VectorXd> evals;   // rad/ns
    std::vector<Matrix> evecs;

    int steps() const {
        return static_cast<int>(evals.size());
    }
    Matrix unitary(int k, double t_ns) const {
        const Vector phases = (-kI * t_ns * evals[k]).array().exp();
        return evecs[k] * phases.asDiagonal() * evecs[k].adjoint();
    }
};

inline StepSpectra compute_step_spectra(const Matrix &h0, const Matrix &gen_cav, const Matrix &gen_qb,
                                        const PulseEnvelope &pulse, int threads = 1) {
    pulse.validate();
    if (h0.rows() != gen_cav.rows() || h0.rows() != gen_qb.rows()) {
        throw std::invalid_argument("compute_step_spectra: dimension mismatch between H0 and drive generators");
    }
    const int n = pulse.steps();
    StepSpectra spec;
    spec.dt_ns = pulse.dt_ns;
    spec.evals.resize(n);
    spec.evecs.resize(n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t k) {
        Matrix h = h0 + assemble_drive(gen_cav, gen_qb, pulse.eps(static_cast<Eigen::Index>(k)),
                                       pulse.omega(static_cast<Eigen::Index>(k)));
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        spec.evals[k] = es.eigenvalues();
        spec.evecs[k] = es.eigenvectors();
    });
    return spec;
}

// U_k = exp(-i (H0 + H_drive(k)) dt) for every step.
inline std::vector<Matrix> step_unitaries(const Matrix &h0, const Matrix &gen_cav, const Matrix &gen_qb,
                                          const PulseEnvelope &pulse, int threads = 1) {
    const StepSpectra spec = compute_step_spectra(h0, gen_cav, gen_qb, pulse, threads);
    std::vector<Matrix> us(spec.steps());
    parallel_for(us.size(), threads, [&](std::size_t k) {
        us[k] = spec.unitary(static_cast<int>(k), spec.dt_ns);
    });
    return us;
}

struct Trajectory {
    double dt_ns = 1.0;
    std::vector<State> states;  // one per step boundary, size steps + 1

    int steps() const {
        return static_cast<int>(states.size()) - 1;
    }
    std::vector<double> times() const {
        std::vector<double> t(states.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = dt_ns * static_cast<double>(i);
        }
        return t;
    }
};

inline Trajectory propagate_with(const std::vector<Matrix> &unitaries, const State &psi0, double dt_ns) {
    Trajectory traj;
    traj.dt_ns = dt_ns;
    traj.states.reserve(unitaries.size() + 1);
    traj.states.push_back(psi0);
    for (const Matrix &u : unitaries) {
        traj.states.push_back(u * traj.states.back());
    }
    return traj;
}

inline Trajectory propagate(const Matrix &h0, const Matrix &gen_cav, const Matrix &gen_qb,
                            const PulseEnvelope &pulse, const State &psi0, int threads = 1) {
    if (psi0.size() != h0.rows()) {
        throw std::invalid_argument("propagate: state dimension does not match Hamiltonian");
    }
    if (std::abs(psi0.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("propagate: initial state must be unit norm");
    }
    return propagate_with(step_unitaries(h0, gen_cav, gen_qb, pulse, threads), psi0, pulse.dt_ns);
}

struct DensityTrajectory {
    double dt_ns = 1.0;
    std::vector<Matrix> rhos;  // one per step boundary
};

namespace detail {

inline Eigen::SparseMatrix<Complex> to_sparse(const Matrix &m) {
    Eigen::SparseMatrix<Complex> s(m.rows(), m.cols());
    std::vector<Eigen::Triplet<Complex>> trips;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > 0) {
                trips.emplace_back(i, j, m(i, j));
            }
        }
    }
    s.setFromTriplets(trips.begin(), trips.end());
    return s;
}

inline void validate_density(const Matrix &rho) {
    if (hermiticity_residual(rho) > 1e-9) {
        throw std::invalid_argument("lindblad_propagate: rho0 is not Hermitian");
    }
    if (std::abs(rho.trace().real() - 1.0) > 1e-9 || std::abs(rho.trace().imag()) > 1e-12) {
        throw std::invalid_argument("lindblad_propagate: rho0 must have unit trace");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()));
    if (es.eigenvalues().minCoeff() < -1e-9) {
        throw std::invalid_argument("lindblad_propagate: rho0 is not positive semidefinite");
    }
}

}  // namespace detail

inline constexpr int kDefaultLindbladSubsteps = 24;  // per step; see halving test

// Fixed-substep RK4 on drho/dt = -i(Heff rho - rho Heff+) + sum_l L rho L+
// with Heff = H - i/2 sum L+L. The drive is held constant within each step.
inline DensityTrajectory lindblad_propagate(const Matrix &h0, const Matrix &gen_cav, const Matrix &gen_qb,
                                            const PulseEnvelope &pulse, const std::vector<Operator> &collapse,
                                            const Matrix &rho0, int substeps = kDefaultLindbladSubsteps) {
    pulse.validate();
    detail::validate_density(rho0);
    if (substeps < 1) {
        throw std::invalid_argument("lindblad_propagate: substeps must be >= 1");
    }
    const Eigen::Index d = rho0.rows();

    std::vector<Eigen::SparseMatrix<Complex>> jump_left, jump_right;
    Matrix sum_ll = Matrix::Zero(d, d);
    for (const Operator &l : collapse) {
        jump_left.push_back(detail::to_sparse(l.mat));
        jump_right.push_back(detail::to_sparse(Matrix(l.mat.adjoint())));
        sum_ll += l.mat.adjoint() * l.mat;
    }

    Matrix heff(d, d), b(d, d), jump(d, d), k1(d, d), k2(d, d), k3(d, d), k4(d, d), work(d, d);
    auto rhs = [&](const Matrix &rho, Matrix &out) {
        b.noalias() = heff * rho;
        out = -kI * (b - b.adjoint());
        for (std::size_t l = 0; l < jump_left.size(); ++l) {
            work.noalias() = jump_left[l] * rho;
            out.noalias() += work * jump_right[l];
        }
    };

    DensityTrajectory traj;
    traj.dt_ns = pulse.dt_ns;
    traj.rhos.reserve(pulse.steps() + 1);
    traj.rhos.push_back(rho0);

    Matrix rho = rho0;
    const double h = pulse.dt_ns / substeps;
    for (int k = 0; k < pulse.steps(); ++k) {
        heff = h0 + assemble_drive(gen_cav, gen_qb, pulse.eps(k), pulse.omega(k)) - 0.5 * kI * sum_ll;
        for (int s = 0; s < substeps; ++s) {
            rhs(rho, k1);
            work = rho + (0.5 * h) * k1;
            rhs(work, k2);
            work = rho + (0.5 * h) * k2;
            rhs(work, k3);
            work = rho + h * k3;
            rhs(work, k4);
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        rho = 0.5 * (rho + rho.adjoint()).eval();
        traj.rhos.push_back(rho);
    }
    return traj;
}

// Evolve to t_jump with the Schrodinger equation, apply E, renormalize, evolve
// the remainder. Partial steps use the exact fractional-step unitary.
inline State jump_conditioned_propagate(const StepSpectra &spec, const State &psi0, double t_jump_ns,
                                        const Matrix &e) {
    const double duration = spec.dt_ns * spec.steps();
    if (t_jump_ns < -1e-12 || t_jump_ns > duration + 1e-12) {
        throw std::invalid_argument("jump_conditioned_propagate: t_jump outside the pulse duration");
    }
    t_jump_ns = std::clamp(t_jump_ns, 0.0, duration);
    const int whole_before = static_cast<int>(std::floor(t_jump_ns / spec.dt_ns + 1e-12));
    const double partial = t_jump_ns - whole_before * spec.dt_ns;

    State psi = psi0;
    for (int k = 0; k < whole_before; ++k) {
        psi = spec.unitary(k, spec.dt_ns) * psi;
    }
    if (partial > 1e-12 && whole_before < spec.steps()) {
        psi = spec.unitary(whole_before, partial) * psi;
    }

    psi = e * psi;
    const double nrm = psi.norm();
    if (nrm < 1e-12) {
        throw std::invalid_argument("jump_conditioned_propagate: error operator annihilates the state at t_jump");
    }
    psi /= nrm;

    if (partial > 1e-12 && whole_before < spec.steps()) {
        psi = spec.unitary(whole_before, spec.dt_ns - partial) * psi;
        for (int k = whole_before + 1; k < spec.steps(); ++k) {
            psi = spec.unitary(k, spec.dt_ns) * psi;
        }
    } else {
        for (int k = whole_before; k < spec.steps(); ++k) {
            psi = spec.unitary(k, spec.dt_ns) * psi;
        }
    }
    return psi;
}

inline State jump_conditioned_propagate(const Matrix &h0, const Matrix &gen_cav, const Matrix &gen_qb,
                                        const PulseEnvelope &pulse, const State &psi0, double t_jump_ns,
                                        const Matrix &e, int threads = 1) {
    return jump_conditioned_propagate(compute_step_spectra(h0, gen_cav, gen_qb, pulse, threads), psi0, t_jump_ns, e);
}

// Per-step cavity Fock populations (qubit traced out). Rows follow the
// trajectory, columns the Fock index.
inline std::vector<std::vector<double>> fock_occupation(const Trajectory &traj, const HilbertConfig &cfg) {
    std::vector<std::vector<double>> out;
    out.reserve(traj.states.size());
    for (const State &psi : traj.states) {
        if (psi.size() != cfg.dim()) {
            throw std::invalid_argument("fock_occupation: state dimension does not match config");
        }
        std::vector<double> pops(cfg.cavity_dim, 0.0);
        for (int n = 0; n < cfg.cavity_dim; ++n) {
            for (int j = 0; j < cfg.qubit_dim; ++j) {
                pops[n] += std::norm(psi(n * cfg.qubit_dim + j));
            }
        }
        out.push_back(std::move(pops));
    }
    return out;
}

// Largest Fock index whose transient population exceeds the threshold at any
// step; empty when nothing does.
inline std::optional<int> max_active_level(const std::vector<std::vector<double>> &occupation,
                                           double threshold = 0.01) {
    std::optional<int> level;
    for (const auto &pops : occupation) {
        for (int n = static_cast<int>(pops.size()) - 1; n >= 0; --n) {
            if (pops[n] > threshold) {
                if (!level || n > *level) {
                    level = n;
                }
                break;
            }
        }
    }
    return level;
}

inline std::optional<int> max_active_level(const Trajectory &traj, const HilbertConfig &cfg,
                                           double threshold = 0.01) {
    return max_active_level(fock_occupation(traj, cfg), threshold);
}

// Memoized step unitaries for repeated evaluation of the same samples. Purely
// an optimization; keys are FNV-1a hashes of the raw sample bytes.
class StepUnitaryCache {
  public:
    std::shared_ptr<const std::vector<Matrix>> get(const Matrix &h0, const Matrix &gen_cav, const Matrix &gen_qb,
                                                   const PulseEnvelope &pulse, int threads = 1) {
        const std::uint64_t key = hash_pulse(pulse);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) {
                return it->second;
            }
        }
        auto us = std::make_shared<const std::vector<Matrix>>(step_unitaries(h0, gen_cav, gen_qb, pulse, threads));
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.try_emplace(key, std::move(us)).first->second;
    }

  private:
    static std::uint64_t hash_pulse(const PulseEnvelope &pulse) {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const void *data, std::size_t bytes) {
            const auto *p = static_cast<const unsigned char *>(data);
            for (std::size_t i = 0; i < bytes; ++i) {
                h ^= p[i];
                h *= 1099511628211ull;
            }
        };
        mix(&pulse.dt_ns, sizeof(double));
        mix(pulse.eps.data(), sizeof(Complex) * pulse.eps.size());
        mix(pulse.omega.data(), sizeof(Complex) * pulse.omega.size());
        return h;
    }

    std::mutex mutex_;
    std::unordered_map<std::uint64_t, std::shared_ptr<const std::vector<Matrix>>> cache_;
};

}  // namespace estkit

#endif
