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

#include "selfstab/protocol.hpp"

using namespace selfstab;

namespace {

ProtocolConfig good_control(int max_blocks = 3) {
    ProtocolConfig c;
    c.sim.phi_true = 0.3;
    c.sim.noise = NoiseModel::thermal(0.01, 0.1);
    c.sim.dt = 1e-3;
    c.sim.steps_per_block = 2000;
    c.grid = {0.0, 1.0, 256};
    c.epsilon = 1e-6;
    c.max_blocks = max_blocks;
    return c;
}

void expect_same(const ProtocolResult &a, const ProtocolResult &b) {
    ASSERT_EQ(a.block_count(), b.block_count());
    EXPECT_EQ(a.termination, b.termination);
    for (int i = 0; i < a.block_count(); ++i) {
        EXPECT_EQ(a.blocks[i].estimate.phi_est, b.blocks[i].estimate.phi_est);
        EXPECT_EQ(a.blocks[i].estimate.variance, b.blocks[i].estimate.variance);
        EXPECT_TRUE(a.blocks[i].record == b.blocks[i].record);
        EXPECT_EQ(a.blocks[i].purity_trace, b.blocks[i].purity_trace);
    }
}

}  // namespace

TEST(Run, SingleBlockMeasuresZ) {
    ProtocolConfig c = good_control(1);
    ProtocolResult r = run(c, 5);
    ASSERT_EQ(r.block_count(), 1);
    EXPECT_EQ(r.termination, Termination::MaxBlocks);
    for (const auto &a : r.blocks[0].schedule.axes) EXPECT_EQ(a, PauliAxis::z());
    EXPECT_EQ(r.blocks[0].record.size(), 2000u);
}

TEST(Run, InfiniteToleranceStopsAfterFirstBlock) {
    ProtocolConfig c = good_control(5);
    c.epsilon = std::numeric_limits<double>::infinity();
    ProtocolResult r = run(c, 5);
    EXPECT_EQ(r.block_count(), 1);
    EXPECT_EQ(r.termination, Termination::ToleranceReached);
}

TEST(Run, StopsOnceToleranceIsMet) {
    ProtocolConfig c = good_control(6);
    c.epsilon = 0.25;
    ProtocolResult r = run(c, 11);
    ASSERT_GE(r.block_count(), 1);
    if (r.termination == Termination::ToleranceReached) {
        EXPECT_LT(r.final_estimate.stddev(), c.epsilon);
        for (int i = 0; i + 1 < r.block_count(); ++i) EXPECT_GE(r.blocks[i].estimate.stddev(), c.epsilon);
    } else {
        EXPECT_EQ(r.block_count(), c.max_blocks);
    }
}

TEST(Run, DeterministicPerSeed) {
    ProtocolConfig c = good_control();
    expect_same(run(c, 21), run(c, 21));
    EXPECT_NE(run(c, 21).final_estimate.phi_est, run(c, 22).final_estimate.phi_est);
}

TEST(Run, BlockTimesAreContiguous) {
    ProtocolResult r = run(good_control(), 2);
    double expect = 0;
    for (const auto &b : r.blocks) {
        EXPECT_NEAR(b.record.times.front(), expect, 1e-12);
        expect = b.record.times.back() + b.record.dt;
    }
}

TEST(Run, LaterBlocksMeasurePerpendicularToTheMeanState) {
    ProtocolResult r = run(good_control(), 8);
    const auto &sched = r.blocks[1].schedule;
    ASSERT_EQ(sched.size(), 2000u);
    for (const auto &a : sched.axes) EXPECT_LT(std::abs(a.vector().x()), 1e-12);
}

TEST(Run, PurityStaysPhysical) {
    for (auto mode : {FeedbackMode::MeanTrajectory, FeedbackMode::Tracking}) {
        ProtocolConfig c = good_control();
        c.feedback = mode;
        c.latency_steps = 5;
        ProtocolResult r = run(c, 3);
        for (const auto &b : r.blocks) {
            for (double p : b.purity_trace) {
                EXPECT_GE(p, 0.5 - 1e-12);
                EXPECT_LE(p, 1.0 + 1e-12);
            }
            EXPECT_GE(b.belief_purity_end, 0.5 - 1e-12);
        }
    }
}

TEST(Controller, NeverSeesTheTruePhase) {
    // Two configs that differ only in phi_true give the same controller
    // inputs, so one shared record must produce identical decisions.
    ProtocolConfig a = good_control(), b = good_control();
    b.sim.phi_true = 0.8;
    ProtocolResult ra = run(a, 17);
    QubitState rho0 = bloch_to_state(a.initial_bloch);
    Controller ca(a.controller_settings(), rho0), cb(b.controller_settings(), rho0);
    for (const auto &block : ra.blocks) {
        ca.begin_block(block.index);
        cb.begin_block(block.index);
        for (size_t i = 0; i < block.record.size(); ++i) {
            MeasurementOp oa = ca.next(), ob = cb.next();
            ASSERT_EQ(oa.axis, ob.axis);
            ASSERT_EQ(oa.axis.vector(), block.record.axes[i]);
            ca.observe(block.record.dy[i], oa);
            cb.observe(block.record.dy[i], ob);
        }
        ca.end_block();
        cb.end_block();
        EXPECT_EQ(ca.current_estimate().phi_est, cb.current_estimate().phi_est);
        EXPECT_EQ(ca.current_estimate().phi_est, block.estimate.phi_est);
    }
}

TEST(Ensemble, SingleTrajectoryEqualsRun) {
    ProtocolConfig c = good_control();
    EnsembleSummary s = run_ensemble(c, 1, 99, 1);
    ProtocolResult r = run(c, derive_seed(99, 0));
    ASSERT_EQ(s.blocks.size(), r.blocks.size());
    for (size_t b = 0; b < r.blocks.size(); ++b) {
        EXPECT_EQ(s.blocks[b].median_phi_est, r.blocks[b].estimate.phi_est);
        EXPECT_EQ(s.blocks[b].stddev.median, r.blocks[b].estimate.stddev());
        EXPECT_EQ(s.blocks[b].purity.median, r.blocks[b].purity_end);
    }
    EXPECT_EQ(s.trajectories[0].seed, derive_seed(99, 0));
}

TEST(Ensemble, DeterministicAndThreadCountIndependent) {
    ProtocolConfig c = good_control(2);
    c.grid.n_points = 64;
    EnsembleSummary a = run_ensemble(c, 6, 123, 1);
    EnsembleSummary b = run_ensemble(c, 6, 123, 3);
    ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
    for (size_t i = 0; i < a.trajectories.size(); ++i) {
        EXPECT_EQ(a.trajectories[i].phi_est, b.trajectories[i].phi_est);
        EXPECT_EQ(a.trajectories[i].stddev, b.trajectories[i].stddev);
    }
    EXPECT_EQ(a.blocks[1].stddev.median, b.blocks[1].stddev.median);
}

TEST(Ensemble, RejectsEmpty) { EXPECT_THROW(run_ensemble(good_control(), 0, 1), std::invalid_argument); }

TEST(Ensemble, GoodControlCoversTruth) {
    EnsembleSummary s = run_ensemble(good_control(), 24, 2026);
    EXPECT_EQ(s.failures, 0);
    ASSERT_EQ(s.blocks.size(), 3u);
    EXPECT_GE(s.blocks[2].coverage, 0.8);
    EXPECT_LT(s.blocks[2].stddev.median, s.blocks[0].stddev.median);
}

TEST(Aggregate, CountsFailuresAsNeverConverged) {
    TrajectorySummary ok;
    ok.blocks_to_tolerance = 2;
    ok.termination = Termination::ToleranceReached;
    ok.phi_est = {0.2, 0.31};
    ok.stddev = {0.1, 0.005};
    ok.purity_end = {0.9, 0.95};
    TrajectorySummary bad;
    bad.failed = true;
    EnsembleSummary s = aggregate({ok, bad, ok}, 0.3, 4);
    EXPECT_EQ(s.failures, 1);
    EXPECT_EQ(s.median_blocks_to_tolerance, 2);
    ASSERT_EQ(s.blocks.size(), 2u);
    EXPECT_EQ(s.blocks[1].count, 2);
    EXPECT_DOUBLE_EQ(s.blocks[1].coverage, 1.0);
    EXPECT_NEAR(s.blocks[1].abs_error.median, 0.01, 1e-12);
}

TEST(Quantile, LinearInterpolation) {
    EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2);
    EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
    EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.25), 2.5);
    EXPECT_TRUE(std::isnan(median({})));
}

TEST(ProtocolConfig, ValidationNamesTheInvariant) {
    ProtocolConfig c = good_control();
    c.eta = 1.5;
    EXPECT_THROW(c.validate(), ValidationError);
    c = good_control();
    c.max_blocks = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = good_control();
    c.initial_bloch = {0, 0, 1.5};
    EXPECT_THROW(c.validate(), ValidationError);
    c = good_control();
    c.epsilon = 0;
    EXPECT_THROW(c.validate(), ValidationError);
}
