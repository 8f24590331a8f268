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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "selfstab/bayes.hpp"
#include "selfstab/rng.hpp"
#include "selfstab/sme.hpp"

using namespace selfstab;

namespace {

// Unnormalized linear filter under the reference measure, coded directly on
// 2x2 matrices with a plain Euler step:
//   d rho~ = L rho~ dt + sqrt(eta) (c rho~ + rho~ c^dag) sqrt(4 eta) dy
// Its trace is the likelihood ratio of the record under that hypothesis.
struct LinearFilter {
    Mat2 rho;
    double phi;
};

Mat2 lindblad(const Mat2 &rho, double phi, const Mat2 &g, const NoiseModel &noise, const Mat2 &c) {
    const Complex i(0, 1);
    Mat2 h = phi * g;
    Mat2 out = -i * (h * rho - rho * h);
    out += noise.gamma * noise.nbar * dissipator(pauli::plus(), rho);
    out += noise.gamma * (1 + noise.nbar) * dissipator(pauli::minus(), rho);
    out += dissipator(c, rho);
    return out;
}

void linear_step(LinearFilter &f, double dy, const Mat2 &c, double eta, const Mat2 &g, const NoiseModel &noise,
                 double dt) {
    Mat2 drift = lindblad(f.rho, f.phi, g, noise, c);
    Mat2 kick = std::sqrt(eta) * (c * f.rho + f.rho * c.adjoint()) * std::sqrt(4 * eta) * dy;
    f.rho = f.rho + drift * dt + kick;
}

std::vector<double> normalized(std::vector<double> v) {
    double s = 0;
    for (double x : v) s += x;
    for (double &x : v) x /= s;
    return v;
}

}  // namespace

TEST(PhaseGrid, NodesAndWeights) {
    PhaseGrid g{0.0, 1.0, 5};
    EXPECT_DOUBLE_EQ(g.node(0), 0.0);
    EXPECT_DOUBLE_EQ(g.node(2), 0.5);
    EXPECT_DOUBLE_EQ(g.node(4), 1.0);
    double total = 0;
    for (int k = 0; k < 5; ++k) total += g.weight(k);
    EXPECT_DOUBLE_EQ(total, 1.0);
    EXPECT_THROW((PhaseGrid{1.0, 0.0, 5}.validate()), ValidationError);
    EXPECT_THROW((PhaseGrid{0.0, 1.0, 1}.validate()), ValidationError);
}

TEST(InitBank, TwoNodes) {
    QubitState rho0 = bloch_to_state({0, 0, 1});
    HypothesisBank bank = init_bank({0.0, 1.0, 2}, rho0);
    ASSERT_EQ(bank.size(), 2u);
    EXPECT_EQ(bank.states[0].bloch(), bank.states[1].bloch());
    Posterior post = posterior(bank);
    EXPECT_DOUBLE_EQ(post.mass[0], 0.5);
    EXPECT_DOUBLE_EQ(post.mass[1], 0.5);
}

TEST(Posterior, FreshBankIsFlat) {
    HypothesisBank bank = init_bank({-1.0, 3.0, 33}, QubitState());
    Posterior post = posterior(bank);
    for (double d : post.density) EXPECT_NEAR(d, 0.25, 1e-15);
}

TEST(Estimate, FreshBankGivesUniformMoments) {
    HypothesisBank bank = init_bank({0.0, 1.0, 512}, QubitState());
    PhaseEstimate e = estimate(bank);
    EXPECT_NEAR(e.phi_est, 0.5, 1e-6);
    EXPECT_NEAR(e.variance, 1.0 / 12, 1e-4);

    HypothesisBank wide = init_bank({-2.0, 4.0, 1001}, QubitState());
    PhaseEstimate w = estimate(wide);
    EXPECT_NEAR(w.phi_est, 1.0, 1e-9);
    EXPECT_NEAR(w.variance, 36.0 / 12, 1e-4);
}

TEST(Posterior, NormalizesLogLikelihoods) {
    HypothesisBank bank = init_bank({0.0, 1.0, 2}, QubitState());
    bank.log_like = {0.0, std::log(3.0)};
    Posterior post = posterior(bank);
    EXPECT_NEAR(post.mass[0], 0.25, 1e-15);
    EXPECT_NEAR(post.mass[1], 0.75, 1e-15);
}

TEST(Posterior, ShiftInvariant) {
    HypothesisBank bank = init_bank({0.0, 1.0, 7}, QubitState());
    bank.log_like = {0.1, -3, 2.5, 0, 1, -0.5, 0.7};
    Posterior a = posterior(bank);
    for (double &l : bank.log_like) l += 812.25;
    Posterior b = posterior(bank);
    for (size_t k = 0; k < a.mass.size(); ++k) EXPECT_NEAR(a.mass[k], b.mass[k], 1e-14);
}

TEST(Posterior, AllZeroLikelihoodIsAnError) {
    HypothesisBank bank = init_bank({0.0, 1.0, 3}, QubitState());
    const double inf = std::numeric_limits<double>::infinity();
    bank.log_like = {-inf, -inf, -inf};
    EXPECT_THROW(posterior(bank), AllZeroLikelihood);
    bank.log_like = {0, std::nan(""), 0};
    EXPECT_THROW(posterior(bank), AllZeroLikelihood);
}

TEST(Estimate, DeltaAndTwoSpikes) {
    const double inf = std::numeric_limits<double>::infinity();
    HypothesisBank bank = init_bank({0.0, 1.0, 11}, QubitState());
    bank.log_like.assign(11, -inf);
    bank.log_like[3] = 0;
    PhaseEstimate d = estimate(bank);
    EXPECT_NEAR(d.phi_est, 0.3, 1e-15);
    EXPECT_NEAR(d.variance, 0, 1e-30);

    bank.log_like.assign(11, -inf);
    bank.log_like[2] = 0;
    bank.log_like[8] = 0;
    PhaseEstimate two = estimate(bank);
    EXPECT_NEAR(two.phi_est, 0.5, 1e-15);
    EXPECT_NEAR(two.variance, 0.3 * 0.3, 1e-15);
}

TEST(Assimilate, UninformativeRecordLeavesPosteriorUnchanged) {
    // Maximally mixed nodes and a z probe: every m_k is zero.
    HypothesisBank bank = init_bank({0.0, 1.0, 9}, QubitState());
    Posterior before = posterior(bank);
    MeasurementOp op{PauliAxis::z(), 1.0, 1.0};
    assimilate(bank, 0.037, op, NoiseModel::none(), PauliAxis::x(), 1e-3);
    for (double l : bank.log_like) EXPECT_EQ(l, 0.0);
    Posterior after = posterior(bank);
    EXPECT_EQ(before.mass, after.mass);
}

TEST(Assimilate, EqualSignalsGiveEqualIncrements) {
    HypothesisBank bank = init_bank({0.0, 1.0, 2}, bloch_to_state({0, 0, 1}));
    MeasurementOp op{PauliAxis::z(), 1.0, 1.0};
    assimilate(bank, 0.02, op, NoiseModel::none(), PauliAxis::x(), 1e-3);
    EXPECT_EQ(bank.log_like[0], bank.log_like[1]);
    Posterior post = posterior(bank);
    EXPECT_DOUBLE_EQ(post.mass[0], 0.5);
}

TEST(Assimilate, MatchesLinearFilterOracle) {
    // A record with dy^2 = dt / (4 eta) exactly makes the Euler linear
    // filter and the log-likelihood recursion agree to O(dt^(3/2)) per step.
    const double dt = 1e-5, eta = 1.0, kappa = 1.0;
    const NoiseModel noise = NoiseModel::thermal(0.01, 0.1);
    const PauliAxis g = PauliAxis::x();
    const std::vector<double> signs = {1, -1, -1, 1, 1};
    const std::vector<PauliAxis> axes = {PauliAxis::z(), PauliAxis::from_vector({0, -1, 0}), PauliAxis::z(),
                                         PauliAxis::from_vector({1, 1, 0}), PauliAxis::y()};
    PhaseGrid grid{0.0, 1.0, 3};
    QubitState rho0 = bloch_to_state({0.2, 0.1, 0.9});
    HypothesisBank bank = init_bank(grid, rho0);
    std::vector<LinearFilter> oracle;
    for (int k = 0; k < 3; ++k) oracle.push_back({rho0.matrix(), grid.node(k)});

    for (size_t i = 0; i < signs.size(); ++i) {
        double dy = signs[i] * std::sqrt(dt / (4 * eta));
        MeasurementOp op{axes[i], kappa, eta};
        assimilate(bank, dy, op, noise, g, dt);
        for (auto &f : oracle) linear_step(f, dy, op.op(), eta, g.op(), noise, dt);
    }
    std::vector<double> ours, theirs;
    for (int k = 0; k < 3; ++k) {
        ours.push_back(std::exp(bank.log_like[k]));
        theirs.push_back(oracle[k].rho.trace().real());
    }
    ours = normalized(ours);
    theirs = normalized(theirs);
    for (int k = 0; k < 3; ++k) {
        EXPECT_LT(std::abs(ours[k] - theirs[k]) / theirs[k], 1e-6) << "node " << k;
    }
    // Node states agree with the normalized linear filter.
    for (int k = 0; k < 3; ++k) {
        Mat2 m = oracle[k].rho / oracle[k].rho.trace();
        Vec3 r((m * pauli::x()).trace().real(), (m * pauli::y()).trace().real(), (m * pauli::z()).trace().real());
        EXPECT_LT((bank.states[k].bloch() - r).norm(), 1e-6) << "node " << k;
    }
}

TEST(Assimilate, ConcentratesOnTruePhase) {
    // One z-measured block from the excited state: the posterior should
    // cover the true phase at its nominal rate.
    const double phi_true = 0.3;
    SimConfig cfg;
    cfg.phi_true = phi_true;
    cfg.noise = NoiseModel::thermal(0.01, 0.1);
    cfg.dt = 1e-3;
    std::vector<MeasurementOp> sched(2000, MeasurementOp{PauliAxis::z(), 1.0, 1.0});
    QubitState rho0 = bloch_to_state({0, 0, 1});
    const int seeds = 40;
    int covered = 0;
    double mean_std = 0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(derive_seed(2024, static_cast<uint64_t>(s)));
        auto out = simulate_block(rho0, sched, cfg, rng);
        HypothesisBank bank = init_bank({0.0, 1.0, 128}, rho0);
        for (size_t i = 0; i < out.record.size(); ++i) {
            assimilate(bank, out.record.dy[i], sched[i], cfg.noise, cfg.g_axis, cfg.dt);
        }
        PhaseEstimate e = estimate(bank);
        mean_std += e.stddev() / seeds;
        if (std::abs(e.phi_est - phi_true) <= 3 * e.stddev()) ++covered;
    }
    EXPECT_GE(covered, 36);
    EXPECT_LT(mean_std, 1.0 / std::sqrt(12.0));
}

TEST(Assimilate, GridRefinementChangesLittle) {
    SimConfig cfg;
    cfg.phi_true = 0.4;
    cfg.noise = NoiseModel::thermal(0.01, 0.1);
    std::vector<MeasurementOp> sched(1500, MeasurementOp{PauliAxis::y(), 1.0, 1.0});
    QubitState rho0 = bloch_to_state({0, 0, 1});
    Rng rng(31);
    auto out = simulate_block(rho0, sched, cfg, rng);
    auto run_grid = [&](int n) {
        HypothesisBank bank = init_bank({0.0, 1.0, n}, rho0);
        for (size_t i = 0; i < out.record.size(); ++i) {
            assimilate(bank, out.record.dy[i], sched[i], cfg.noise, cfg.g_axis, cfg.dt);
        }
        return estimate(bank);
    };
    PhaseEstimate coarse = run_grid(129), fine = run_grid(513);
    EXPECT_LT(std::abs(coarse.phi_est - fine.phi_est), 0.02 * fine.stddev() + 1e-6);
    EXPECT_LT(std::abs(coarse.stddev() - fine.stddev()), 0.02 * fine.stddev() + 1e-6);
}
