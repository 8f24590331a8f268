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

/// The self-stabilizing measurement loop.
///
/// Each block: the controller fixes its measurement plan from the current
/// phase estimate, the plant evolves under the true phase while emitting a
/// record, the controller folds every record increment into its hypothesis
/// bank, and the block ends with a posterior mean/variance. The loop stops
/// once the posterior standard deviation drops below epsilon or after
/// max_blocks blocks.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "selfstab/bayes.hpp"
#include "selfstab/errors.hpp"
#include "selfstab/feedback.hpp"
#include "selfstab/qubit.hpp"
#include "selfstab/rng.hpp"
#include "selfstab/sme.hpp"

namespace selfstab {

enum class FeedbackMode {
    MeanTrajectory,  // open-loop schedule from the averaged evolution
    Tracking,        // closed loop on the controller's conditional state
};

inline const char *to_string(FeedbackMode m) { return m == FeedbackMode::Tracking ? "tracking" : "mean"; }

enum class Termination { ToleranceReached, MaxBlocks };

inline const char *to_string(Termination t) {
    return t == Termination::ToleranceReached ? "ToleranceReached" : "MaxBlocks";
}

/// What the controller is allowed to know.
struct ControllerSettings {
    PlantModel plant;
    PhaseGrid grid;
    double kappa = 1.0;
    double eta = 1.0;
    int latency_steps = 0;
    FeedbackMode mode = FeedbackMode::MeanTrajectory;
};

struct ProtocolConfig {
    SimConfig sim;
    PhaseGrid grid;
    double kappa = 1.0;
    double eta = 1.0;
    double epsilon = 0.01;
    int max_blocks = 3;
    int latency_steps = 0;
    FeedbackMode feedback = FeedbackMode::MeanTrajectory;
    Vec3 initial_bloch{0, 0, 1};

    ControllerSettings controller_settings() const {
        return {sim.plant(), grid, kappa, eta, latency_steps, feedback};
    }

    void validate() const {
        try {
            MeasurementOp{PauliAxis::z(), kappa, eta}.validate();
        } catch (const std::invalid_argument &e) {
            throw ValidationError(e.what(), kappa >= 0 ? "0 < eta <= 1" : "kappa >= 0");
        }
        try {
            sim.noise.validate();
        } catch (const std::invalid_argument &e) {
            throw ValidationError(e.what(), "noise rates >= 0, nbar >= 0");
        }
        sim.validate(kappa);
        grid.validate();
        if (!(epsilon > 0)) {
            throw ValidationError("epsilon must be positive", "epsilon > 0");
        }
        if (max_blocks < 1) {
            throw ValidationError("max_blocks must be >= 1", "max_blocks >= 1");
        }
        if (latency_steps < 0) {
            throw ValidationError("latency_steps must be >= 0", "latency_steps >= 0");
        }
        if (!std::isfinite(initial_bloch.norm()) || initial_bloch.norm() > 1 + kPhysicalTolerance) {
            throw ValidationError("initial Bloch vector lies outside the unit ball", "|initial_bloch| <= 1");
        }
    }
};

/// Feedback controller. Sees only the record and its own bookkeeping.
class Controller {
  public:
    Controller(const ControllerSettings &settings, const QubitState &rho0)
        : s_(settings), bank_(init_bank(settings.grid, rho0)), last_axis_(PauliAxis::z()) {
        current_ = estimate(bank_);
    }

    /// Fixes the measurement plan for block `index`.
    void begin_block(int index) {
        step_ = 0;
        tracker_.reset();
        QubitState belief = belief_state(bank_);
        if (index == 0 || s_.mode == FeedbackMode::MeanTrajectory) {
            schedule_ = plan_block(index, current_.phi_est, belief, s_.plant, s_.kappa, s_.eta);
            if (index > 0) {
                apply_latency(schedule_, last_axis_, s_.latency_steps);
            }
        } else {
            schedule_ = {};
            schedule_.kappa = s_.kappa;
            schedule_.eta = s_.eta;
            tracker_.emplace(belief, current_.phi_est, s_.plant, s_.kappa, s_.eta);
        }
    }

    MeasurementOp next() {
        MeasurementOp op;
        if (!tracker_) {
            op = schedule_.op(static_cast<size_t>(step_));
        } else if (step_ < s_.latency_steps) {
            op = {last_axis_, s_.kappa, s_.eta};
            schedule_.degenerate.push_back(false);
        } else {
            long before = tracker_->degenerate_steps();
            op = tracker_->next();
            schedule_.degenerate.push_back(tracker_->degenerate_steps() != before);
        }
        return op;
    }

    void observe(double dy, const MeasurementOp &op) {
        assimilate(bank_, dy, op, s_.plant.noise, s_.plant.g_axis, s_.plant.dt);
        if (tracker_) {
            tracker_->observe(dy, op);
            schedule_.axes.push_back(op.axis);
        }
        last_axis_ = op.axis;
        ++step_;
    }

    /// Closes the block; returns the posterior it ends with.
    Posterior end_block() {
        Posterior post = posterior(bank_);
        current_ = estimate(post);
        return post;
    }

    const PhaseEstimate &current_estimate() const { return current_; }
    const MeasurementSchedule &schedule() const { return schedule_; }
    const HypothesisBank &bank() const { return bank_; }

  private:
    ControllerSettings s_;
    HypothesisBank bank_;
    PhaseEstimate current_;
    MeasurementSchedule schedule_;
    std::optional<TrackingController> tracker_;
    PauliAxis last_axis_;
    int step_ = 0;
};

struct BlockResult {
    int index = 0;
    PhaseEstimate estimate;
    std::vector<double> purity_trace;  // tr(rho^2) of the true state after each step
    double purity_end = 0;             // true state
    double belief_purity_end = 0;      // controller's belief state
    MeasurementSchedule schedule;
    TrajectoryRecord record;
    Posterior posterior;
    bool degenerate_axes = false;
};

struct ProtocolResult {
    std::vector<BlockResult> blocks;
    Termination termination = Termination::MaxBlocks;
    PhaseEstimate final_estimate;

    int block_count() const { return static_cast<int>(blocks.size()); }
};

struct RunOptions {
    bool keep_records = true;
    bool keep_traces = true;
    bool keep_posteriors = true;
};

/// Runs the loop against a simulated plant with phase cfg.sim.phi_true.
/// Engine and filter errors are rethrown with their block attached.
inline ProtocolResult run(const ProtocolConfig &cfg, uint64_t master_seed, const RunOptions &opts = {}) {
    cfg.validate();
    Rng rng(master_seed);
    QubitState rho = bloch_to_state(cfg.initial_bloch);
    Controller controller(cfg.controller_settings(), rho);

    ProtocolResult result;
    const int m = cfg.sim.steps_per_block;
    for (int b = 0; b < cfg.max_blocks; ++b) {
        BlockResult block;
        block.index = b;
        try {
            controller.begin_block(b);
            double t0 = static_cast<double>(b) * m * cfg.sim.dt;
            BlockOutcome out = simulate_closed_loop(rho, controller, m, cfg.sim, rng, t0, true);
            rho = out.final_state;
            block.posterior = controller.end_block();
            block.estimate = controller.current_estimate();
            block.purity_trace.reserve(out.record.states.size());
            for (const Vec3 &r : out.record.states) {
                block.purity_trace.push_back(0.5 * (1 + r.squaredNorm()));
            }
            block.purity_end = rho.purity();
            block.belief_purity_end = belief_state(controller.bank(), block.posterior).purity();
            block.schedule = controller.schedule();
            block.degenerate_axes = block.schedule.any_degenerate();
            out.record.states.clear();
            if (opts.keep_records) {
                block.record = std::move(out.record);
            }
        } catch (NonPhysicalDrift &e) {
            throw NonPhysicalDrift(std::string(e.what()) + " (block " + std::to_string(b) + ")", e.step, e.node, b);
        } catch (AllZeroLikelihood &e) {
            throw AllZeroLikelihood(std::string(e.what()) + " (block " + std::to_string(b) + ")");
        }
        if (!opts.keep_traces) {
            block.purity_trace.clear();
            block.purity_trace.shrink_to_fit();
        }
        if (!opts.keep_posteriors) {
            block.posterior = {};
        }
        if (!opts.keep_records) {
            block.schedule.axes.clear();
            block.schedule.degenerate.clear();
        }
        result.final_estimate = block.estimate;
        result.blocks.push_back(std::move(block));
        if (result.final_estimate.stddev() < cfg.epsilon) {
            result.termination = Termination::ToleranceReached;
            return result;
        }
    }
    result.termination = Termination::MaxBlocks;
    return result;
}

// ---------------------------------------------------------------------------
// Ensembles

/// Linear-interpolation quantile of unsorted data (NaN for empty input).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<size_t>(std::floor(pos));
    size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

struct TrajectorySummary {
    int index = 0;
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    Termination termination = Termination::MaxBlocks;
    /// Blocks run before the tolerance was met; max_blocks + 1 when it never was.
    int blocks_to_tolerance = 0;
    std::vector<double> phi_est;
    std::vector<double> stddev;
    std::vector<double> purity_end;
    std::vector<double> belief_purity_end;
};

struct Quartiles {
    double q25 = 0, median = 0, q75 = 0;
};

inline Quartiles quartiles(const std::vector<double> &v) {
    return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

/// Statistics over the trajectories that completed a given block.
struct BlockStats {
    int block = 0;
    int count = 0;
    Quartiles abs_error;
    Quartiles stddev;
    Quartiles purity;
    double median_phi_est = 0;
    double mean_phi_est = 0;
    double sd_phi_est = 0;  // spread of the estimates across trajectories
    double mean_stddev = 0;  // mean reported posterior std
    double coverage = 0;     // fraction with |phi_est - phi_true| <= 3 std
};

struct EnsembleSummary {
    double phi_true = 0;
    int n_traj = 0;
    int failures = 0;
    int max_blocks = 0;
    double median_blocks_to_tolerance = 0;
    std::vector<BlockStats> blocks;
    std::vector<TrajectorySummary> trajectories;
};

inline TrajectorySummary summarize(const ProtocolResult &res, int max_blocks) {
    TrajectorySummary t;
    t.termination = res.termination;
    t.blocks_to_tolerance = res.termination == Termination::ToleranceReached ? res.block_count() : max_blocks + 1;
    for (const auto &b : res.blocks) {
        t.phi_est.push_back(b.estimate.phi_est);
        t.stddev.push_back(b.estimate.stddev());
        t.purity_end.push_back(b.purity_end);
        t.belief_purity_end.push_back(b.belief_purity_end);
    }
    return t;
}

/// Per-block statistics over already-summarized trajectories.
inline EnsembleSummary aggregate(std::vector<TrajectorySummary> trajs, double phi_true, int max_blocks) {
    EnsembleSummary s;
    s.phi_true = phi_true;
    s.n_traj = static_cast<int>(trajs.size());
    s.max_blocks = max_blocks;
    std::vector<double> btt;
    size_t depth = 0;
    for (const auto &t : trajs) {
        if (t.failed) {
            ++s.failures;
        }
        btt.push_back(t.failed ? max_blocks + 1 : t.blocks_to_tolerance);
        depth = std::max(depth, t.phi_est.size());
    }
    s.median_blocks_to_tolerance = median(btt);
    for (size_t b = 0; b < depth; ++b) {
        BlockStats st;
        st.block = static_cast<int>(b);
        std::vector<double> err, sd, pur, est;
        size_t covered = 0;
        for (const auto &t : trajs) {
            if (t.failed || t.phi_est.size() <= b) {
                continue;
            }
            double e = std::abs(t.phi_est[b] - phi_true);
            err.push_back(e);
            sd.push_back(t.stddev[b]);
            pur.push_back(t.purity_end[b]);
            est.push_back(t.phi_est[b]);
            if (e <= 3 * t.stddev[b]) {
                ++covered;
            }
        }
        st.count = static_cast<int>(est.size());
        st.abs_error = quartiles(err);
        st.stddev = quartiles(sd);
        st.purity = quartiles(pur);
        st.median_phi_est = median(est);
        double n = static_cast<double>(est.size());
        double mean = 0, mean_sd = 0;
        for (size_t i = 0; i < est.size(); ++i) {
            mean += est[i] / n;
            mean_sd += sd[i] / n;
        }
        double var = 0;
        for (double e : est) {
            var += (e - mean) * (e - mean);
        }
        st.mean_phi_est = mean;
        st.mean_stddev = mean_sd;
        st.sd_phi_est = est.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
        st.coverage = est.empty() ? 0.0 : static_cast<double>(covered) / n;
        s.blocks.push_back(st);
    }
    s.trajectories = std::move(trajs);
    return s;
}

/// Runs n_traj independent protocols; trajectory i uses derive_seed(master, i).
/// Failed trajectories are recorded, not rethrown. `threads` = 0 picks the
/// hardware concurrency. The summary does not depend on the thread count.
inline EnsembleSummary run_ensemble(const ProtocolConfig &cfg, int n_traj, uint64_t master_seed,
                                    unsigned threads = 0) {
    if (n_traj < 1) {
        throw std::invalid_argument("ensemble needs n_traj >= 1");
    }
    cfg.validate();
    std::vector<TrajectorySummary> trajs(static_cast<size_t>(n_traj));
    RunOptions opts{false, false, false};
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < n_traj; i = next++) {
            TrajectorySummary &t = trajs[static_cast<size_t>(i)];
            uint64_t seed = derive_seed(master_seed, static_cast<uint64_t>(i));
            try {
                t = summarize(run(cfg, seed, opts), cfg.max_blocks);
            } catch (const Error &e) {
                t = {};
                t.failed = true;
                t.error = std::string(e.kind()) + ": " + e.what();
                t.blocks_to_tolerance = cfg.max_blocks + 1;
            }
            t.index = i;
            t.seed = seed;
        }
    };
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min<unsigned>(threads, static_cast<unsigned>(n_traj));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) {
            pool.emplace_back(worker);
        }
        for (auto &th : pool) {
            th.join();
        }
    }
    return aggregate(std::move(trajs), cfg.sim.phi_true, cfg.max_blocks);
}

}  // namespace selfstab
