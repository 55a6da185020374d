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

#ifndef ESTKIT_ERRORMODEL_HPP
#define ESTKIT_ERRORMODEL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace estkit {

// Parity-selection and fidelity-decay model parameters. The floors B, G and
// F_alias sit at 0.25, the fully incoherent process fidelity.
struct DecayModelParams {
    double eps_parity = 0.05;
    double a_scale = 0.66;   // code curve amplitude, pinned by F(0)
    double b_floor = 0.25;
    double gamma_c = 0.0;    // per-gate rate, code space
    double gamma_e = 0.0;    // per-gate rate, error space
    double d_scale = 0.6;
    double f_err_jump = 0.0;
    double g_floor = 0.25;
    double f_alias = 0.25;

    void validate() const {
        auto prob = [](double p, const std::string &name) {
            if (p < 0.0 || p > 1.0) {
                throw std::invalid_argument("DecayModelParams: " + name + " must be in [0,1]");
            }
        };
        prob(eps_parity, "eps_parity");
        prob(f_err_jump, "f_err_jump");
        prob(f_alias, "f_alias");
        if (b_floor < 0.25 || b_floor > 1.0 || g_floor < 0.25 || g_floor > 1.0) {
            throw std::invalid_argument("DecayModelParams: B and G must be in [0.25, 1]");
        }
        if (gamma_c < 0.0 || gamma_e < 0.0) {
            throw std::invalid_argument("DecayModelParams: rates must be nonnegative");
        }
    }
};

struct FidelityCurve {
    std::vector<int> gate_counts;
    std::vector<double> fidelities;
    std::vector<double> stderrs;  // optional, may be empty

    void validate() const {
        if (gate_counts.size() != fidelities.size()) {
            throw std::invalid_argument("FidelityCurve: gate_counts and fidelities must pair up");
        }
        if (!stderrs.empty() && stderrs.size() != fidelities.size()) {
            throw std::invalid_argument("FidelityCurve: stderr column length mismatch");
        }
        for (std::size_t i = 1; i < gate_counts.size(); ++i) {
            if (gate_counts[i] <= gate_counts[i - 1]) {
                throw std::invalid_argument("FidelityCurve: gate counts must be strictly increasing");
            }
        }
        for (double f : fidelities) {
            if (f < 0.0 || f > 1.0) {
                throw std::invalid_argument("FidelityCurve: fidelities must be in [0,1]");
            }
        }
    }
};

// P(O|M_O): probability a state measured odd is actually odd.
inline double parity_posterior_odd(double p_odd, double eps_parity) {
    if (p_odd < 0 || p_odd > 1 || eps_parity < 0 || eps_parity > 1) {
        throw std::invalid_argument("parity_posterior_odd: inputs must be probabilities");
    }
    const double num = (1.0 - eps_parity) * p_odd;
    const double den = num + eps_parity * (1.0 - p_odd);
    if (den == 0.0) {
        throw std::invalid_argument("parity_posterior_odd: posterior undefined (no odd-measurement weight)");
    }
    return num / den;
}

inline double parity_posterior_even(double p_odd, double eps_parity) {
    return parity_posterior_odd(1.0 - p_odd, eps_parity);
}

inline double measured_fidelity(double posterior, double f_true, double f_alias = 0.25) {
    if (posterior < 0 || posterior > 1 || f_true < 0 || f_true > 1 || f_alias < 0 || f_alias > 1) {
        throw std::invalid_argument("measured_fidelity: inputs must be in [0,1]");
    }
    return posterior * f_true + (1.0 - posterior) * f_alias;
}

// F_code(N) = A exp(-gamma_C N) + B
inline double code_fidelity_curve(int n, const DecayModelParams &p) {
    if (n < 0) {
        throw std::invalid_argument("code_fidelity_curve: N must be >= 0");
    }
    return p.a_scale * std::exp(-p.gamma_c * n) + p.b_floor;
}

inline constexpr double kDegenerateRateSwitch = 1e-9;  // on |F_C - F_E|

// F_error(N): summed geometric series over the gate index of the photon loss,
// switching to the degenerate limit when F_C and F_E coincide.
inline double error_fidelity_curve(int n, const DecayModelParams &p) {
    if (n < 1) {
        throw std::invalid_argument("error_fidelity_curve: N must be >= 1");
    }
    const double f_c = std::exp(-p.gamma_c);
    const double f_e = std::exp(-p.gamma_e);
    if (std::abs(f_c - f_e) < kDegenerateRateSwitch) {
        return p.d_scale * p.f_err_jump * std::pow(f_c, n - 1) + p.g_floor;
    }
    const double series = (std::pow(f_c, n) - std::pow(f_e, n)) / (f_c - f_e);
    return (p.d_scale * p.f_err_jump / n) * series + p.g_floor;
}

struct POddResult {
    double p_odd = 0.0;
    double w_gate = 0.0;  // normalized odd-branch weights
    double w_prep = 0.0;
};

// Single-jump bookkeeping: odd weight after N gates from independent
// per-gate loss and preparation error; double losses ignored.
inline POddResult p_odd_vs_gates(int n, double per_gate_jump_prob, double p_prep_odd) {
    if (n < 0 || per_gate_jump_prob < 0 || per_gate_jump_prob > 1 || p_prep_odd < 0 || p_prep_odd > 1) {
        throw std::invalid_argument("p_odd_vs_gates: invalid inputs");
    }
    POddResult res;
    const double survive = (1.0 - p_prep_odd) * std::pow(1.0 - per_gate_jump_prob, n);
    res.p_odd = 1.0 - survive;
    if (res.p_odd > 0.0) {
        res.w_prep = p_prep_odd / res.p_odd;
        res.w_gate = 1.0 - res.w_prep;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Least-squares fitting

enum class FitWhich { kCode, kError };

struct FitOptions {
    int max_iterations = 200;
    double gradient_tol = 1e-12;
    double step_tol = 1e-14;
    // Optional parity-selection composition on top of the error curve:
    // F_meas = P(O|M_O) F_error + (1 - P(O|M_O)) F_alias.
    bool with_parity_selection = false;
    double per_gate_jump_prob = 0.0;
    double p_prep_odd = 0.0;
};

struct FitResult {
    DecayModelParams params;
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> residuals;
    std::vector<double> model_values;
};

namespace detail {

inline double eval_decay_model(FitWhich which, int n, const DecayModelParams &p, const FitOptions &opt) {
    double f = (which == FitWhich::kCode) ? code_fidelity_curve(n, p) : error_fidelity_curve(n, p);
    if (which == FitWhich::kError && opt.with_parity_selection) {
        const POddResult odd = p_odd_vs_gates(n, opt.per_gate_jump_prob, opt.p_prep_odd);
        const double posterior = parity_posterior_odd(odd.p_odd, p.eps_parity);
        f = measured_fidelity(posterior, f, p.f_alias);
    }
    return f;
}

// Plain Levenberg-Marquardt with a forward-difference Jacobian; the free
// parameter count here is at most two.
inline FitResult levenberg_marquardt(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &residual_fn,
                                     Eigen::VectorXd &x, const FitOptions &opt) {
    FitResult out;
    Eigen::VectorXd r = residual_fn(x);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    const int n_params = static_cast<int>(x.size());

    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it + 1;
        Eigen::MatrixXd jac(r.size(), n_params);
        for (int j = 0; j < n_params; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
            Eigen::VectorXd xp = x;
            xp(j) += h;
            jac.col(j) = (residual_fn(xp) - r) / h;
        }
        const Eigen::VectorXd grad = jac.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() < opt.gradient_tol) {
            out.converged = true;
            break;
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        bool stepped = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd delta = damped.ldlt().solve(-grad);
            const Eigen::VectorXd x_new = x + delta;
            const Eigen::VectorXd r_new = residual_fn(x_new);
            const double cost_new = r_new.squaredNorm();
            if (cost_new < cost) {
                if (delta.lpNorm<Eigen::Infinity>() < opt.step_tol) {
                    out.converged = true;
                }
                x = x_new;
                r = r_new;
                cost = cost_new;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped || out.converged) {
            out.converged = out.converged || !stepped;
            break;
        }
    }
    out.residual_norm = std::sqrt(cost);
    out.residuals.assign(r.data(), r.data() + r.size());
    return out;
}

}  // namespace detail

// Nonlinear least squares over the free parameters: gamma_C for the code
// curve; gamma_E and F_err|jump for the error curve. Constants (B, G, D,
// F_alias, eps_parity, A) come in through `fixed`.
inline FitResult fit_decay_model(const FidelityCurve &curve, FitWhich which, const DecayModelParams &fixed,
                                 const FitOptions &opt = {}) {
    curve.validate();
    if (curve.gate_counts.size() < 3) {
        throw std::invalid_argument("fit_decay_model: need at least 3 data points");
    }

    const int n_params = (which == FitWhich::kCode) ? 1 : 2;
    auto unpack = [&](const Eigen::VectorXd &x) {
        DecayModelParams p = fixed;
        if (which == FitWhich::kCode) {
            p.gamma_c = std::abs(x(0));
        } else {
            p.gamma_e = std::abs(x(0));
            p.f_err_jump = std::clamp(x(1), 0.0, 1.0);
        }
        return p;
    };
    auto residual_fn = [&](const Eigen::VectorXd &x) {
        const DecayModelParams p = unpack(x);
        Eigen::VectorXd r(curve.gate_counts.size());
        for (std::size_t i = 0; i < curve.gate_counts.size(); ++i) {
            const double w = curve.stderrs.empty() ? 1.0 : 1.0 / std::max(curve.stderrs[i], 1e-9);
            r(i) = w * (detail::eval_decay_model(which, curve.gate_counts[i], p, opt) - curve.fidelities[i]);
        }
        return r;
    };

    Eigen::VectorXd x(n_params);
    if (which == FitWhich::kCode) {
        x << 0.05;
    } else {
        x << 0.05, 0.5;
    }
    FitResult res = detail::levenberg_marquardt(residual_fn, x, opt);
    res.params = unpack(x);
    for (int n : curve.gate_counts) {
        res.model_values.push_back(detail::eval_decay_model(which, n, res.params, opt));
    }
    return res;
}

}  // namespace estkit

#endif
