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

/// Result serialization: JSON documents and plot-ready CSV companions.
///
/// CSV schemas (header line first, columns in this order):
///     record.csv      t,dy,ax,ay,az
///     posterior.csv   block,phi,weight          (weight = posterior mass, sums to 1 per block)
///     summary.csv     block,phi_est,std,purity_median
///     purity.csv      block,t,purity            (true conditional state, after each step)
///     trajectories.csv  traj,seed,failed,termination,blocks_to_tolerance,phi_est,std,purity_end
#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "selfstab/config.hpp"
#include "selfstab/protocol.hpp"
#include "selfstab/record_io.hpp"

#ifndef SELFSTAB_VERSION
#define SELFSTAB_VERSION "0.0.0"
#endif

namespace selfstab {

using ojson = nlohmann::ordered_json;

inline ojson json_number(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

/// Written before any result file. Holds only relative output names so
/// the manifest does not depend on where the tree lives.
inline ojson make_manifest(const std::string &command, const LoadedConfig &lc, const std::vector<std::string> &outputs,
                           const ojson &extra = ojson::object()) {
    ojson m;
    m["manifest_version"] = 1;
    m["artifact"] = "selfstab";
    m["version"] = SELFSTAB_VERSION;
    m["command"] = command;
    m["master_seed"] = lc.seed;
    m["config"] = to_config_json(lc);
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        m[it.key()] = it.value();
    }
    m["outputs"] = outputs;
    return m;
}

inline ojson to_json(const PhaseEstimate &e) {
    return {{"phi_est", e.phi_est}, {"variance", e.variance}, {"std", e.stddev()}};
}

inline ojson to_json(const ProtocolResult &res) {
    ojson j;
    j["termination"] = to_string(res.termination);
    j["block_count"] = res.block_count();
    j["final"] = to_json(res.final_estimate);
    ojson blocks = ojson::array();
    for (const auto &b : res.blocks) {
        ojson bj;
        bj["block"] = b.index;
        bj["estimate"] = to_json(b.estimate);
        bj["purity_end"] = b.purity_end;
        bj["belief_purity_end"] = b.belief_purity_end;
        double mean = 0;
        for (double p : b.purity_trace) mean += p / static_cast<double>(b.purity_trace.size());
        bj["purity_mean"] = b.purity_trace.empty() ? ojson(nullptr) : ojson(mean);
        bj["degenerate_axes"] = b.degenerate_axes;
        bj["steps"] = b.record.size();
        blocks.push_back(bj);
    }
    j["blocks"] = blocks;
    return j;
}

inline void write_summary_csv(std::ostream &os, const ProtocolResult &res) {
    os << "block,phi_est,std,purity_median\n";
    for (const auto &b : res.blocks) {
        os << b.index << ',' << fmt_double(b.estimate.phi_est) << ',' << fmt_double(b.estimate.stddev()) << ','
           << fmt_double(b.purity_end) << '\n';
    }
}

inline void write_summary_csv(std::ostream &os, const EnsembleSummary &s) {
    os << "block,phi_est,std,purity_median\n";
    for (const auto &b : s.blocks) {
        os << b.block << ',' << fmt_double(b.median_phi_est) << ',' << fmt_double(b.stddev.median) << ','
           << fmt_double(b.purity.median) << '\n';
    }
}

inline void write_posterior_csv(std::ostream &os, const ProtocolResult &res) {
    os << "block,phi,weight\n";
    for (const auto &b : res.blocks) {
        for (size_t k = 0; k < b.posterior.phi.size(); ++k) {
            os << b.index << ',' << fmt_double(b.posterior.phi[k]) << ',' << fmt_double(b.posterior.mass[k]) << '\n';
        }
    }
}

inline void write_purity_csv(std::ostream &os, const ProtocolResult &res) {
    os << "block,t,purity\n";
    for (const auto &b : res.blocks) {
        for (size_t i = 0; i < b.purity_trace.size(); ++i) {
            double t = i < b.record.size() ? b.record.times[i] + b.record.dt : 0.0;
            os << b.index << ',' << fmt_double(t) << ',' << fmt_double(b.purity_trace[i]) << '\n';
        }
    }
}

/// All blocks' records joined into one.
inline TrajectoryRecord joined_record(const ProtocolResult &res) {
    TrajectoryRecord all;
    for (const auto &b : res.blocks) {
        all.dt = b.record.dt;
        all.times.insert(all.times.end(), b.record.times.begin(), b.record.times.end());
        all.dy.insert(all.dy.end(), b.record.dy.begin(), b.record.dy.end());
        all.axes.insert(all.axes.end(), b.record.axes.begin(), b.record.axes.end());
    }
    return all;
}

inline ojson to_json(const Quartiles &q) { return {{"q25", q.q25}, {"median", q.median}, {"q75", q.q75}}; }

inline ojson to_json(const EnsembleSummary &s) {
    ojson j;
    j["phi_true"] = s.phi_true;
    j["n_traj"] = s.n_traj;
    j["failures"] = s.failures;
    j["max_blocks"] = s.max_blocks;
    j["median_blocks_to_tolerance"] = s.median_blocks_to_tolerance;
    ojson blocks = ojson::array();
    for (const auto &b : s.blocks) {
        blocks.push_back({{"block", b.block},
                          {"count", b.count},
                          {"abs_error", to_json(b.abs_error)},
                          {"std", to_json(b.stddev)},
                          {"purity", to_json(b.purity)},
                          {"median_phi_est", json_number(b.median_phi_est)},
                          {"mean_phi_est", b.mean_phi_est},
                          {"sd_phi_est", b.sd_phi_est},
                          {"mean_std", b.mean_stddev},
                          {"coverage_3sigma", b.coverage}});
    }
    j["blocks"] = blocks;
    return j;
}

inline void write_trajectories_csv(std::ostream &os, const EnsembleSummary &s) {
    os << "traj,seed,failed,termination,blocks_to_tolerance,phi_est,std,purity_end\n";
    for (const auto &t : s.trajectories) {
        os << t.index << ',' << t.seed << ',' << (t.failed ? 1 : 0) << ','
           << (t.failed ? "Failed" : to_string(t.termination)) << ',' << t.blocks_to_tolerance << ',';
        if (t.phi_est.empty()) {
            os << ",,\n";
        } else {
            os << fmt_double(t.phi_est.back()) << ',' << fmt_double(t.stddev.back()) << ','
               << fmt_double(t.purity_end.back()) << '\n';
        }
    }
}

/// Writes `content` to dir/name, truncating.
inline void write_file(const std::filesystem::path &dir, const std::string &name, const std::string &content) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + (dir / name).string());
    }
    out << content;
}

}  // namespace selfstab
