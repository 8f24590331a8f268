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

/// Diffusive stochastic master equation for a monitored qubit.
///
///     drho = -i[phi G, rho] dt + (noise) rho dt + D[c] rho dt + sqrt(eta) H[c] rho dW
///     dy   = <c + c^dag>/2 dt + dW / sqrt(4 eta)
///
/// with c = sqrt(kappa/2) n.sigma. A step is split into a measurement part
/// and the unmonitored (Hamiltonian + noise) part. The unmonitored part is
/// linear in the Bloch vector and is applied through its exact affine
/// propagator. The measurement part is an Ito Euler-Maruyama step in which
/// the direction of r follows the Euler-Maruyama update of r while |r|^2
/// follows the Euler-Maruyama update of its own Ito equation, so the
/// purity is advanced by the exact purity SDE instead of picking up
/// dW^2 - dt noise.
#pragma once

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "selfstab/errors.hpp"
#include "selfstab/qubit.hpp"
#include "selfstab/rng.hpp"

namespace selfstab {

/// Eigenvalues in [-kClampWindow, 0) are clamped; anything lower is an error.
inline constexpr double kClampWindow = 1e-6;

/// Guard on dt * (largest rate).
inline constexpr double kStabilityGuard = 0.05;

/// Target of the default step size: dt * (sum of rates) <= 0.01.
inline constexpr double kDefaultStepBudget = 0.01;

struct MeasurementOp {
    PauliAxis axis = PauliAxis::z();
    double kappa = 1.0;
    double eta = 1.0;

    /// c = sqrt(kappa/2) n.sigma
    Mat2 op() const { return std::sqrt(kappa / 2) * axis.op(); }

    /// tr((c + c^dag) rho) = sqrt(2 kappa) n.r
    double signal(const Vec3 &r) const { return std::sqrt(2 * kappa) * axis.vector().dot(r); }

    void validate() const {
        if (!(kappa >= 0) || !std::isfinite(kappa)) {
            throw std::invalid_argument("measurement strength kappa must be >= 0");
        }
        if (!(eta > 0 && eta <= 1)) {
            throw std::invalid_argument("detector efficiency eta must lie in (0, 1]");
        }
    }
};

/// Everything a controller may know about the plant: no true phase, no seed.
struct PlantModel {
    PauliAxis g_axis = PauliAxis::x();
    NoiseModel noise;
    double dt = 1e-3;
    int steps_per_block = 2000;
};

struct SimConfig {
    double phi_true = 0.0;
    PauliAxis g_axis = PauliAxis::x();
    NoiseModel noise;
    double dt = 1e-3;
    int steps_per_block = 2000;
    uint64_t rng_seed = 0;

    PlantModel plant() const { return {g_axis, noise, dt, steps_per_block}; }

    /// Throws ValidationError naming the violated invariant.
    void validate(double kappa) const {
        if (!(dt > 0) || !std::isfinite(dt)) {
            throw ValidationError("dt must be positive", "dt > 0");
        }
        if (steps_per_block < 1) {
            throw ValidationError("steps_per_block must be >= 1", "steps_per_block >= 1");
        }
        noise.validate();
        double rate = std::max({kappa, noise.max_rate(), std::abs(phi_true)});
        if (dt * rate > kStabilityGuard) {
            throw ValidationError("dt * max(kappa, gamma(1+nbar), |phi_true|) = " + std::to_string(dt * rate) +
                                      " exceeds the stability guard " + std::to_string(kStabilityGuard),
                                  "stability guard: dt * max rate <= 0.05");
        }
    }
};

/// Step size satisfying dt * (kappa + total noise rate + |phi|) <= 0.01,
/// capped at 1e-3.
inline double default_dt(double kappa, const NoiseModel &noise, double phi) {
    double sum = kappa + noise.total_rate() + std::abs(phi);
    if (sum <= 0) {
        return 1e-3;
    }
    return std::min(1e-3, kDefaultStepBudget / sum);
}

/// Exact propagator r -> P r + q of the unmonitored Bloch equation over dt.
class FreeEvolution {
  public:
    FreeEvolution() : P_(Eigen::Matrix3d::Identity()), q_(Vec3::Zero()) {}

    FreeEvolution(double phi, const PauliAxis &g, const NoiseModel &noise, double dt) : dt_(dt) {
        Eigen::Matrix4d gen = Eigen::Matrix4d::Zero();
        gen.topLeftCorner<3, 3>() = generator(phi, g, noise);
        gen.topRightCorner<3, 1>() = offset(noise);
        Eigen::Matrix4d prop = (gen * dt).exp();
        P_ = prop.topLeftCorner<3, 3>();
        q_ = prop.topRightCorner<3, 1>();
    }

    /// Linear part A of dr/dt = A r + b.
    static Eigen::Matrix3d generator(double phi, const PauliAxis &g, const NoiseModel &noise) {
        const Vec3 &n = g.vector();
        Eigen::Matrix3d cross;
        cross << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
        Eigen::Matrix3d a = 2 * phi * cross;
        if (noise.kind == NoiseModel::Kind::Thermal) {
            double total = noise.gamma * (2 * noise.nbar + 1);
            a.diagonal() -= Vec3(total / 2, total / 2, total);
        } else {
            const auto &gj = noise.gamma_xyz;
            a.diagonal() -= Vec3(gj[1] + gj[2], gj[0] + gj[2], gj[0] + gj[1]);
        }
        return a;
    }

    /// Affine part b of dr/dt = A r + b.
    static Vec3 offset(const NoiseModel &noise) {
        if (noise.kind == NoiseModel::Kind::Thermal) {
            return {0, 0, -noise.gamma};
        }
        return Vec3::Zero();
    }

    Vec3 apply(const Vec3 &r) const { return P_ * r + q_; }
    double dt() const { return dt_; }

  private:
    Eigen::Matrix3d P_;
    Vec3 q_;
    double dt_ = 0;
};

namespace detail {

/// Shared post-step physicality policy. `norm2` is |r|^2 before clamping.
inline void check_drift(double norm2) {
    double limit = (1 + 2 * kClampWindow) * (1 + 2 * kClampWindow);
    if (!(norm2 <= limit)) {
        throw NonPhysicalDrift("step produced eigenvalue " + std::to_string(0.5 * (1 - std::sqrt(norm2))) +
                               " below -1e-6; reduce dt");
    }
}

}  // namespace detail

/// Conditioning part of one step: back-action D[c] and innovation
/// sqrt(eta) H[c] dW, in Bloch form
///
///     dr = -kappa (r - (n.r) n) dt + sqrt(2 eta kappa) (n - (n.r) r) dW.
inline Vec3 measurement_update(const Vec3 &r, const MeasurementOp &meas, double dt, double dW) {
    if (meas.kappa == 0) {
        return r;
    }
    const Vec3 &n = meas.axis.vector();
    double p = n.dot(r);
    double s = r.squaredNorm();
    double diff = std::sqrt(2 * meas.eta * meas.kappa);

    Vec3 r_em = r - meas.kappa * dt * (r - p * n) + diff * dW * (n - p * r);

    double drift = -2 * meas.kappa * (s - p * p) + 2 * meas.eta * meas.kappa * (1 - 2 * p * p + p * p * s);
    double s_new = s + drift * dt + 2 * diff * p * (1 - s) * dW;
    detail::check_drift(s_new);
    s_new = std::clamp(s_new, 0.0, 1.0);

    double norm = r_em.norm();
    if (norm < 1e-300) {
        return Vec3::Zero();
    }
    return r_em * (std::sqrt(s_new) / norm);
}

/// Ensemble-averaged conditioning: exact dephasing transverse to n at rate kappa.
inline Vec3 mean_measurement_update(const Vec3 &r, const MeasurementOp &meas, double dt) {
    const Vec3 &n = meas.axis.vector();
    Vec3 along = n.dot(r) * n;
    return along + std::exp(-meas.kappa * dt) * (r - along);
}

struct StepResult {
    QubitState state;
    double dy = 0;
};

/// One Ito step. dW must have mean 0 and variance dt.
inline StepResult step(const QubitState &rho, const MeasurementOp &meas, const FreeEvolution &free, double dW) {
    double dt = free.dt();
    const Vec3 &r = rho.bloch();
    double dy = 0.5 * meas.signal(r) * dt + dW / std::sqrt(4 * meas.eta);
    Vec3 next = free.apply(measurement_update(r, meas, dt, dW));
    double n2 = next.squaredNorm();
    detail::check_drift(n2);
    if (n2 > 1) {
        next /= std::sqrt(n2);
    }
    return {QubitState::unchecked(next), dy};
}

inline StepResult step(const QubitState &rho, const MeasurementOp &meas, const SimConfig &cfg, double dW) {
    return step(rho, meas, FreeEvolution(cfg.phi_true, cfg.g_axis, cfg.noise, cfg.dt), dW);
}

/// One deterministic step of the unconditioned master equation.
inline QubitState mean_step(const QubitState &rho, const MeasurementOp &meas, const FreeEvolution &free) {
    return QubitState::unchecked(free.apply(mean_measurement_update(rho.bloch(), meas, free.dt())));
}

/// Measurement record of a block: one entry per step.
struct TrajectoryRecord {
    double dt = 0;
    std::vector<double> times;  // start of each increment
    std::vector<double> dy;
    std::vector<Vec3> axes;
    std::vector<Vec3> states;  // optional post-step Bloch vectors

    size_t size() const { return dy.size(); }
    bool empty() const { return dy.empty(); }

    void push(double t, double increment, const Vec3 &axis) {
        times.push_back(t);
        dy.push_back(increment);
        axes.push_back(axis);
    }

    bool operator==(const TrajectoryRecord &) const = default;
};

struct BlockOutcome {
    QubitState final_state;
    TrajectoryRecord record;
};

namespace detail {

template <typename Fn>
decltype(auto) at_step(long index, Fn &&fn) {
    try {
        return fn();
    } catch (NonPhysicalDrift &e) {
        throw NonPhysicalDrift(std::string(e.what()) + " (step " + std::to_string(index) + ")", index, e.node,
                               e.block);
    }
}

}  // namespace detail

/// Runs a block of steps under a precomputed schedule. dW is drawn from
/// `rng` with variance cfg.dt; the run is a pure function of (inputs, rng state).
inline BlockOutcome simulate_block(const QubitState &rho0, std::span<const MeasurementOp> schedule,
                                   const SimConfig &cfg, Rng &rng, double t0 = 0.0, bool keep_states = false) {
    BlockOutcome out{rho0, {}};
    out.record.dt = cfg.dt;
    if (schedule.empty()) {
        return out;
    }
    FreeEvolution free(cfg.phi_true, cfg.g_axis, cfg.noise, cfg.dt);
    WienerSource wiener(rng, cfg.dt);
    QubitState rho = rho0;
    for (size_t i = 0; i < schedule.size(); ++i) {
        double dW = wiener();
        auto res = detail::at_step(static_cast<long>(i), [&] { return step(rho, schedule[i], free, dW); });
        out.record.push(t0 + static_cast<double>(i) * cfg.dt, res.dy, schedule[i].axis.vector());
        rho = res.state;
        if (keep_states) {
            out.record.states.push_back(rho.bloch());
        }
    }
    out.final_state = rho;
    return out;
}

/// Closed-loop variant: `policy.next()` yields the MeasurementOp for the
/// coming step and `policy.observe(dy, op)` receives its record increment.
template <typename Policy>
BlockOutcome simulate_closed_loop(const QubitState &rho0, Policy &policy, int steps, const SimConfig &cfg, Rng &rng,
                                  double t0 = 0.0, bool keep_states = false) {
    BlockOutcome out{rho0, {}};
    out.record.dt = cfg.dt;
    FreeEvolution free(cfg.phi_true, cfg.g_axis, cfg.noise, cfg.dt);
    WienerSource wiener(rng, cfg.dt);
    QubitState rho = rho0;
    for (int i = 0; i < steps; ++i) {
        MeasurementOp op = policy.next();
        double dW = wiener();
        auto res = detail::at_step(i, [&] { return step(rho, op, free, dW); });
        policy.observe(res.dy, op);
        out.record.push(t0 + static_cast<double>(i) * cfg.dt, res.dy, op.axis.vector());
        rho = res.state;
        if (keep_states) {
            out.record.states.push_back(rho.bloch());
        }
    }
    out.final_state = rho;
    return out;
}

/// Ensemble-average path under `schedule` with phase `phi`. Element 0 is
/// rho0; element i is the state after i steps.
inline std::vector<QubitState> mean_evolution(const QubitState &rho0, std::span<const MeasurementOp> schedule,
                                              double phi, const PlantModel &plant) {
    FreeEvolution free(phi, plant.g_axis, plant.noise, plant.dt);
    std::vector<QubitState> path;
    path.reserve(schedule.size() + 1);
    path.push_back(rho0);
    for (const auto &op : schedule) {
        path.push_back(mean_step(path.back(), op, free));
    }
    return path;
}

}  // namespace selfstab
