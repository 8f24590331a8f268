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

/// Noise-free rapid purification with the phase known: the controller
/// tracks the conditional state from the record and measures along
/// g x r at every step. For eta = 1 the linear entropy then obeys
/// dS_L = -2 kappa tr[X rho X rho] dt with no stochastic part.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "selfstab/feedback.hpp"
#include "selfstab/qubit.hpp"
#include "selfstab/rng.hpp"
#include "selfstab/sme.hpp"

namespace selfstab {

struct PurificationTrace {
    std::vector<double> t;               // start of each step, plus the final time
    std::vector<double> linear_entropy;  // S_L at t
    std::vector<double> rate;            // -2 kappa tr[X rho X rho] at t (size steps)
    std::vector<double> noise_coupling;  // |r . dr2| / |r|, dr2 the dW coefficient of dr (size steps)
};

struct PurificationSetup {
    Vec3 r0{0, 0, 0.5};
    double kappa = 1.0;
    double phi = 0.3;
    PauliAxis g = PauliAxis::x();
    double dt = 1e-3;
    int steps = 3000;
};

inline PurificationTrace rapid_purification(const PurificationSetup &setup, uint64_t seed) {
    SimConfig sim;
    sim.phi_true = setup.phi;
    sim.g_axis = setup.g;
    sim.noise = NoiseModel::none();
    sim.dt = setup.dt;
    sim.steps_per_block = setup.steps;
    sim.rng_seed = seed;
    sim.validate(setup.kappa);

    QubitState rho0 = bloch_to_state(setup.r0);
    TrackingController controller(rho0, setup.phi, sim.plant(), setup.kappa, 1.0);
    Rng rng(seed);
    BlockOutcome out = simulate_closed_loop(rho0, controller, setup.steps, sim, rng, 0.0, true);

    PurificationTrace tr;
    tr.t.reserve(setup.steps + 1);
    Vec3 r = setup.r0;
    for (int i = 0; i <= setup.steps; ++i) {
        QubitState rho = QubitState::unchecked(r);
        tr.t.push_back(i * setup.dt);
        tr.linear_entropy.push_back(linear_entropy(rho));
        if (i == setup.steps) {
            break;
        }
        const Vec3 &n = out.record.axes[i];
        Mat2 x = pauli::dot(n);
        Mat2 m = rho.matrix();
        tr.rate.push_back(-2 * setup.kappa * (x * m * x * m).trace().real());
        Vec3 dr2 = std::sqrt(2 * setup.kappa) * (n - n.dot(r) * r);
        double norm = r.norm();
        tr.noise_coupling.push_back(norm > 0 ? std::abs(r.dot(dr2)) / norm : 0.0);
        r = out.record.states[i];
    }
    return tr;
}

}  // namespace selfstab
