// Copyright 2026 The selfstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// Grid Bayesian filter for the unknown phase.
///
/// Every grid node phi_k carries the conditional state the qubit would be
/// in if phi_k were the true phase, together with a log-likelihood ratio
/// against the reference ("ostensible") record measure under which each
/// increment dy is Normal(0, dt/(4 eta)). Under hypothesis k the increment
/// is Normal(m_k dt/2, dt/(4 eta)) with m_k = tr((c + c^dag) rho_k), so
///
///     l_k += 2 eta (m_k dy - m_k^2 dt / 4),
///
/// and the node state takes one SME step driven by the innovation
/// dW_k = sqrt(4 eta) (dy - m_k dt / 2).
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "selfstab/errors.hpp"
#include "selfstab/qubit.hpp"
#include "selfstab/sme.hpp"

namespace selfstab {

struct PhaseGrid {
    double phi_min = 0.0;
    double phi_max = 1.0;
    int n_points = 512;

    void validate() const {
        if (!(phi_min < phi_max) || !std::isfinite(phi_min) || !std::isfinite(phi_max)) {
            throw ValidationError("phase grid needs phi_min < phi_max", "phi_min < phi_max");
        }
        if (n_points < 2) {
            throw ValidationError("phase grid needs at least 2 nodes", "n_points >= 2");
        }
    }

    double spacing() const { return (phi_max - phi_min) / (n_points - 1); }

    double node(int k) const {
        if (k == n_points - 1) {
            return phi_max;
        }
        return phi_min + k * spacing();
    }

    /// Trapezoid quadrature weight of node k.
    double weight(int k) const { return (k == 0 || k == n_points - 1) ? 0.5 * spacing() : spacing(); }

    bool contains(double phi) const { return phi >= phi_min && phi <= phi_max; }

    bool operator==(const PhaseGrid &) const = default;
};

struct PhaseEstimate {
    double phi_est = 0;
    double variance = 0;

    double stddev() const { return std::sqrt(variance); }
};

/// Posterior over the grid. `density` integrates to one under the
/// trapezoid rule; `mass` are the matching quadrature masses (sum to one).
struct Posterior {
    std::vector<double> phi;
    std::vector<double> density;
    std::vector<double> mass;
};

struct HypothesisBank {
    PhaseGrid grid;
    std::vector<QubitState> states;
    std::vector<double> log_like;
    std::vector<double> log_prior;

    // Per-node propagators, rebuilt when the plant parameters change.
    std::vector<FreeEvolution> propagators;
    PauliAxis cached_g;
    NoiseModel cached_noise;
    double cached_dt = -1;

    size_t size() const { return states.size(); }
};

/// Flat prior, every node in state rho0, zero log-likelihood.
inline HypothesisBank init_bank(const PhaseGrid &grid, const QubitState &rho0) {
    grid.validate();
    HypothesisBank bank;
    bank.grid = grid;
    bank.states.assign(grid.n_points, rho0);
    bank.log_like.assign(grid.n_points, 0.0);
    bank.log_prior.assign(grid.n_points, 0.0);
    return bank;
}

namespace detail {

inline void refresh_propagators(HypothesisBank &bank, const NoiseModel &noise, const PauliAxis &g, double dt) {
    if (bank.cached_dt == dt && bank.cached_g == g && bank.cached_noise == noise &&
        bank.propagators.size() == bank.size()) {
        return;
    }
    bank.propagators.clear();
    bank.propagators.reserve(bank.size());
    for (int k = 0; k < bank.grid.n_points; ++k) {
        bank.propagators.emplace_back(bank.grid.node(k), g, noise, dt);
    }
    bank.cached_g = g;
    bank.cached_noise = noise;
    bank.cached_dt = dt;
}

}  // namespace detail

/// Folds one record increment into every hypothesis.
inline void assimilate(HypothesisBank &bank, double dy, const MeasurementOp &meas, const NoiseModel &noise,
                       const PauliAxis &g_axis, double dt) {
    detail::refresh_propagators(bank, noise, g_axis, dt);
    const double eta = meas.eta;
    const double root4eta = std::sqrt(4 * eta);
    double best = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < bank.size(); ++k) {
        double m = meas.signal(bank.states[k].bloch());
        bank.log_like[k] += 2 * eta * (m * dy - m * m * dt / 4);
        double dW = root4eta * (dy - m * dt / 2);
        try {
            bank.states[k] = step(bank.states[k], meas, bank.propagators[k], dW).state;
        } catch (NonPhysicalDrift &e) {
            throw NonPhysicalDrift(std::string(e.what()) + " (node " + std::to_string(k) + ")", e.step,
                                   static_cast<long>(k), e.block);
        }
        best = std::max(best, bank.log_like[k]);
    }
    if (std::isfinite(best)) {
        for (double &l : bank.log_like) {
            l -= best;
        }
    }
}

inline Posterior posterior(const HypothesisBank &bank) {
    const auto &grid = bank.grid;
    size_t n = bank.size();
    std::vector<double> logw(n);
    double best = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < n; ++k) {
        logw[k] = bank.log_like[k] + bank.log_prior[k];
        if (logw[k] > best) {
            best = logw[k];
        }
    }
    if (!std::isfinite(best)) {
        throw AllZeroLikelihood("every posterior weight is zero or undefined");
    }
    Posterior post;
    post.phi.resize(n);
    post.density.resize(n);
    post.mass.resize(n);
    double z = 0;
    for (size_t k = 0; k < n; ++k) {
        double w = std::exp(logw[k] - best);
        if (std::isnan(w)) {
            throw AllZeroLikelihood("NaN log-likelihood at node " + std::to_string(k));
        }
        post.phi[k] = grid.node(static_cast<int>(k));
        post.density[k] = w;
        z += grid.weight(static_cast<int>(k)) * w;
    }
    if (!(z > 0) || !std::isfinite(z)) {
        throw AllZeroLikelihood("posterior normalization is " + std::to_string(z));
    }
    for (size_t k = 0; k < n; ++k) {
        post.density[k] /= z;
        post.mass[k] = grid.weight(static_cast<int>(k)) * post.density[k];
    }
    return post;
}

/// Posterior mean and variance.
inline PhaseEstimate estimate(const Posterior &post) {
    PhaseEstimate e;
    for (size_t k = 0; k < post.phi.size(); ++k) {
        e.phi_est += post.mass[k] * post.phi[k];
    }
    for (size_t k = 0; k < post.phi.size(); ++k) {
        double d = post.phi[k] - e.phi_est;
        e.variance += post.mass[k] * d * d;
    }
    return e;
}

inline PhaseEstimate estimate(const HypothesisBank &bank) { return estimate(posterior(bank)); }

/// Posterior-weighted mixture of the hypothesis states: the controller's
/// belief about the qubit.
inline QubitState belief_state(const HypothesisBank &bank, const Posterior &post) {
    Vec3 r = Vec3::Zero();
    for (size_t k = 0; k < bank.size(); ++k) {
        r += post.mass[k] * bank.states[k].bloch();
    }
    double n = r.norm();
    if (n > 1) {
        r /= n;
    }
    return QubitState::unchecked(r);
}

inline QubitState belief_state(const HypothesisBank &bank) { return belief_state(bank, posterior(bank)); }

}  // namespace selfstab
