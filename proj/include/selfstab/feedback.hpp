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

/// Rapid-purification axis planning.
///
/// Measurement axes are chosen perpendicular to both the generator G and
/// the Bloch vector: n = (g x r)/|g x r|. Block 0 uses the static z axis.
#pragma once

#include <cmath>
#include <vector>

#include "selfstab/qubit.hpp"
#include "selfstab/sme.hpp"

namespace selfstab {

/// Below this |g x r| the axis falls back to z.
inline constexpr double kDegenerateCross = 1e-6;

struct AxisChoice {
    PauliAxis axis;
    bool degenerate = false;
};

inline AxisChoice purification_axis(const Vec3 &r, const PauliAxis &g) {
    Vec3 cross = g.vector().cross(r);
    if (cross.norm() < kDegenerateCross) {
        return {PauliAxis::z(), true};
    }
    return {PauliAxis::from_vector(cross), false};
}

struct MeasurementSchedule {
    std::vector<PauliAxis> axes;
    std::vector<bool> degenerate;  // per step: fallback axis used
    double kappa = 1.0;
    double eta = 1.0;

    size_t size() const { return axes.size(); }

    bool any_degenerate() const {
        for (bool d : degenerate) {
            if (d) return true;
        }
        return false;
    }

    MeasurementOp op(size_t i) const { return {axes[i], kappa, eta}; }

    std::vector<MeasurementOp> ops() const {
        std::vector<MeasurementOp> out;
        out.reserve(axes.size());
        for (size_t i = 0; i < axes.size(); ++i) {
            out.push_back(op(i));
        }
        return out;
    }
};

/// Open-loop schedule for one block.
///
/// Block 0 measures z throughout. Later blocks walk the mean trajectory
/// from rho_est under phi_est, choosing each axis from the current mean
/// state and then advancing the mean state under that axis.
inline MeasurementSchedule plan_block(int block_index, double phi_est, const QubitState &rho_est,
                                      const PlantModel &plant, double kappa, double eta) {
    MeasurementSchedule sched;
    sched.kappa = kappa;
    sched.eta = eta;
    auto m = static_cast<size_t>(plant.steps_per_block);
    sched.axes.reserve(m);
    sched.degenerate.reserve(m);
    if (block_index == 0) {
        sched.axes.assign(m, PauliAxis::z());
        sched.degenerate.assign(m, false);
        return sched;
    }
    FreeEvolution free(phi_est, plant.g_axis, plant.noise, plant.dt);
    QubitState mean = rho_est;
    for (size_t i = 0; i < m; ++i) {
        AxisChoice choice = purification_axis(mean.bloch(), plant.g_axis);
        sched.axes.push_back(choice.axis);
        sched.degenerate.push_back(choice.degenerate);
        mean = mean_step(mean, {choice.axis, kappa, eta}, free);
    }
    return sched;
}

/// Keeps `axis` for the first `latency` steps of `sched` (feedback delay).
inline void apply_latency(MeasurementSchedule &sched, const PauliAxis &axis, int latency) {
    for (size_t i = 0; i < sched.size() && static_cast<int>(i) < latency; ++i) {
        sched.axes[i] = axis;
        sched.degenerate[i] = false;
    }
}

/// Closed-loop policy: tracks the conditional state implied by the record
/// under an assumed phase and measures perpendicular to it at every step.
/// Only the record enters; the true phase never does.
class TrackingController {
  public:
    TrackingController(const QubitState &belief, double phi_assumed, const PlantModel &plant, double kappa,
                       double eta)
        : belief_(belief),
          free_(phi_assumed, plant.g_axis, plant.noise, plant.dt),
          g_(plant.g_axis),
          kappa_(kappa),
          eta_(eta) {}

    MeasurementOp next() {
        AxisChoice choice = purification_axis(belief_.bloch(), g_);
        if (choice.degenerate) {
            ++degenerate_steps_;
        }
        return {choice.axis, kappa_, eta_};
    }

    void observe(double dy, const MeasurementOp &op) {
        double m = op.signal(belief_.bloch());
        double dW = std::sqrt(4 * eta_) * (dy - m * free_.dt() / 2);
        belief_ = step(belief_, op, free_, dW).state;
    }

    const QubitState &belief() const { return belief_; }
    long degenerate_steps() const { return degenerate_steps_; }

  private:
    QubitState belief_;
    FreeEvolution free_;
    PauliAxis g_;
    double kappa_;
    double eta_;
    long degenerate_steps_ = 0;
};

}  // namespace selfstab
