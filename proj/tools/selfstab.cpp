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

// Command-line front end.
//
//   selfstab run         one protocol run
//   selfstab ensemble    Monte Carlo over --traj seeds
//   selfstab qfi         quantum Fisher information of a Bloch vector
//   selfstab purify-demo noise-free purification trace with the phase known
//   selfstab defaults    print the default config
//
// Exit codes: 0 ok, 2 usage or config error, 3 numerical failure,
// 1 anything else (I/O). Errors go to stderr as one JSON object.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "selfstab/config.hpp"
#include "selfstab/errors.hpp"
#include "selfstab/protocol.hpp"
#include "selfstab/purify.hpp"
#include "selfstab/qubit.hpp"
#include "selfstab/record_io.hpp"
#include "selfstab/report.hpp"

namespace fs = std::filesystem;
using namespace selfstab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void report_error(const std::string &kind, const std::string &message, int code, const ojson &extra = ojson::object()) {
    ojson j;
    j["error"] = kind;
    j["message"] = message;
    j["exit_code"] = code;
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        j[it.key()] = it.value();
    }
    std::cerr << j.dump() << std::endl;
}

struct Options {
    std::string config;
    std::optional<uint64_t> seed;
    std::string out_dir;
    std::string format = "csv";
    int traj = 100;
    unsigned threads = 0;
};

LoadedConfig load(const Options &o) {
    LoadedConfig lc = o.config.empty() ? parse_config_text("") : parse_config(o.config);
    if (o.seed) {
        lc.seed = *o.seed;
    }
    return lc;
}

/// Splits a CSV document (header + rows) into JSON objects; numeric cells
/// become numbers, empty cells null.
ojson csv_to_json(const std::string &csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> cols;
    {
        std::stringstream hs(line);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    ojson rows = ojson::array();
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string cell;
        ojson row;
        for (const auto &c : cols) {
            if (!std::getline(ls, cell, ',')) cell.clear();
            if (cell.empty()) {
                row[c] = nullptr;
                continue;
            }
            double v = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec == std::errc() && ptr == cell.data() + cell.size()) {
                row[c] = v;
            } else {
                row[c] = cell;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

/// Emits a table as name.csv or name.json depending on --format.
std::string table_name(const std::string &stem, const std::string &format) { return stem + "." + format; }

void write_table(const fs::path &dir, const std::string &stem, const std::string &format, const std::string &csv) {
    if (format == "json") {
        write_file(dir, table_name(stem, format), csv_to_json(csv).dump(2) + "\n");
    } else {
        write_file(dir, table_name(stem, format), csv);
    }
}

fs::path prepare_dir(const std::string &out_dir) {
    fs::path dir(out_dir);
    fs::create_directories(dir);
    return dir;
}

int cmd_run(const Options &o) {
    LoadedConfig lc = load(o);
    const std::string &f = o.format;
    std::vector<std::string> outputs = {"result.json",       table_name("summary", f),      table_name("posterior", f),
                                        table_name("purity", f), table_name("record", f), "record.bin"};
    std::optional<fs::path> dir;
    if (!o.out_dir.empty()) {
        dir = prepare_dir(o.out_dir);
        write_file(*dir, "manifest.json", make_manifest("run", lc, outputs).dump(2) + "\n");
    }
    ProtocolResult res = run(lc.cfg, lc.seed);
    ojson result = to_json(res);
    if (!dir) {
        std::cout << result.dump(2) << "\n";
        return kExitOk;
    }
    write_file(*dir, "result.json", result.dump(2) + "\n");
    std::ostringstream summary, post, purity, record, bin;
    write_summary_csv(summary, res);
    write_posterior_csv(post, res);
    write_purity_csv(purity, res);
    TrajectoryRecord all = joined_record(res);
    write_record_csv(record, all);
    write_record_binary(bin, all);
    write_table(*dir, "summary", f, summary.str());
    write_table(*dir, "posterior", f, post.str());
    write_table(*dir, "purity", f, purity.str());
    write_table(*dir, "record", f, record.str());
    write_file(*dir, "record.bin", bin.str());
    return kExitOk;
}

int cmd_ensemble(const Options &o) {
    if (o.traj < 1) {
        throw UsageError("--traj must be at least 1");
    }
    LoadedConfig lc = load(o);
    const std::string &f = o.format;
    std::vector<std::string> outputs = {"ensemble.json", table_name("summary", f), table_name("trajectories", f)};
    std::optional<fs::path> dir;
    if (!o.out_dir.empty()) {
        dir = prepare_dir(o.out_dir);
        write_file(*dir, "manifest.json", make_manifest("ensemble", lc, outputs, {{"traj", o.traj}}).dump(2) + "\n");
    }
    EnsembleSummary s = run_ensemble(lc.cfg, o.traj, lc.seed, o.threads);
    ojson doc = to_json(s);
    if (!dir) {
        std::cout << doc.dump(2) << "\n";
    } else {
        write_file(*dir, "ensemble.json", doc.dump(2) + "\n");
        std::ostringstream summary, trajs;
        write_summary_csv(summary, s);
        write_trajectories_csv(trajs, s);
        write_table(*dir, "summary", f, summary.str());
        write_table(*dir, "trajectories", f, trajs.str());
    }
    return s.failures == s.n_traj ? kExitNumerical : kExitOk;
}

PauliAxis parse_axis(const std::string &s) {
    if (s == "x") return PauliAxis::x();
    if (s == "y") return PauliAxis::y();
    if (s == "z") return PauliAxis::z();
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        v.push_back(std::stod(tok));
    }
    if (v.size() != 3) {
        throw UsageError("axis must be x, y, z or three comma-separated numbers");
    }
    return PauliAxis::from_vector({v[0], v[1], v[2]});
}

Vec3 parse_vec(const std::vector<double> &v, const char *what) {
    if (v.size() != 3) {
        throw UsageError(std::string(what) + " needs three components");
    }
    return {v[0], v[1], v[2]};
}

int cmd_qfi(const std::vector<double> &bloch, const std::string &g, std::optional<long> nu) {
    QubitState rho = QubitState::from_bloch(parse_vec(bloch, "--bloch"));
    double fq = qfi(rho, parse_axis(g));
    std::cout << fmt_double(fq) << "\n";
    if (nu) {
        std::cout << fmt_double(cramer_rao_bound(fq, *nu)) << "\n";
    }
    return kExitOk;
}

int cmd_purify(const Options &o, const PurificationSetup &setup, uint64_t seed) {
    PurificationTrace tr = rapid_purification(setup, seed);
    std::ostringstream os;
    os << "t,linear_entropy,rate,noise_coupling\n";
    for (size_t i = 0; i < tr.t.size(); ++i) {
        os << fmt_double(tr.t[i]) << ',' << fmt_double(tr.linear_entropy[i]) << ',';
        if (i < tr.rate.size()) {
            os << fmt_double(tr.rate[i]) << ',' << fmt_double(tr.noise_coupling[i]);
        } else {
            os << ',';
        }
        os << '\n';
    }
    if (o.out_dir.empty()) {
        std::cout << os.str();
        return kExitOk;
    }
    fs::path dir = prepare_dir(o.out_dir);
    ojson m;
    m["manifest_version"] = 1;
    m["artifact"] = "selfstab";
    m["version"] = SELFSTAB_VERSION;
    m["command"] = "purify-demo";
    m["master_seed"] = seed;
    m["setup"] = {{"bloch", {setup.r0.x(), setup.r0.y(), setup.r0.z()}},
                  {"kappa", setup.kappa},
                  {"phi", setup.phi},
                  {"g_axis", {setup.g.vector().x(), setup.g.vector().y(), setup.g.vector().z()}},
                  {"dt", setup.dt},
                  {"steps", setup.steps}};
    m["outputs"] = ojson::array({table_name("purify", o.format)});
    write_file(dir, "manifest.json", m.dump(2) + "\n");
    write_table(dir, "purify", o.format, os.str());
    return kExitOk;
}

void add_common(CLI::App *sub, Options &o, bool traj) {
    sub->add_option("--config", o.config, "config file (TOML subset or JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides the config)");
    sub->add_option("--out-dir", o.out_dir, "output directory; results go to stdout when omitted");
    sub->add_option("--format", o.format, "table format")->check(CLI::IsMember({"csv", "json"}));
    if (traj) {
        sub->add_option("--traj", o.traj, "number of trajectories");
        sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Self-stabilizing phase estimation with a continuously monitored qubit"};
    app.set_version_flag("--version", SELFSTAB_VERSION);
    app.require_subcommand(1);

    Options opts;
    CLI::App *run_cmd = app.add_subcommand("run", "run the protocol once");
    add_common(run_cmd, opts, false);
    CLI::App *ens_cmd = app.add_subcommand("ensemble", "run many seeded trajectories and summarize");
    add_common(ens_cmd, opts, true);

    CLI::App *qfi_cmd = app.add_subcommand("qfi", "quantum Fisher information for generator G");
    std::vector<double> bloch;
    std::string g = "x";
    std::optional<long> nu;
    qfi_cmd->add_option("--bloch", bloch, "Bloch vector a,b,c")->required()->delimiter(',')->expected(3);
    qfi_cmd->add_option("--g", g, "generator axis: x, y, z or a,b,c");
    qfi_cmd->add_option("--nu", nu, "repetitions; also prints the Cramer-Rao bound");

    CLI::App *pur_cmd = app.add_subcommand("purify-demo", "noise-free purification trace with the phase known");
    PurificationSetup setup;
    std::vector<double> pur_bloch = {setup.r0.x(), setup.r0.y(), setup.r0.z()};
    uint64_t pur_seed = 1;
    double duration = 3.0;
    std::string pur_g = "x";
    pur_cmd->add_option("--seed", pur_seed, "noise seed");
    pur_cmd->add_option("--out-dir", opts.out_dir, "output directory; trace goes to stdout when omitted");
    pur_cmd->add_option("--format", opts.format, "table format")->check(CLI::IsMember({"csv", "json"}));
    pur_cmd->add_option("--bloch", pur_bloch, "initial Bloch vector")->delimiter(',')->expected(3);
    pur_cmd->add_option("--kappa", setup.kappa, "measurement strength")->check(CLI::PositiveNumber);
    pur_cmd->add_option("--phi", setup.phi, "phase");
    pur_cmd->add_option("--g", pur_g, "generator axis");
    pur_cmd->add_option("--dt", setup.dt, "time step")->check(CLI::PositiveNumber);
    pur_cmd->add_option("--duration", duration, "total time")->check(CLI::NonNegativeNumber);

    CLI::App *def_cmd = app.add_subcommand("defaults", "print the default config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        report_error("UsageError", e.what(), kExitConfig);
        return kExitConfig;
    }

    auto start = std::chrono::steady_clock::now();
    int code = kExitOk;
    try {
        if (*run_cmd) {
            code = cmd_run(opts);
        } else if (*ens_cmd) {
            code = cmd_ensemble(opts);
        } else if (*qfi_cmd) {
            code = cmd_qfi(bloch, g, nu);
        } else if (*pur_cmd) {
            setup.r0 = parse_vec(pur_bloch, "--bloch");
            setup.g = parse_axis(pur_g);
            setup.steps = static_cast<int>(std::lround(duration / setup.dt));
            code = cmd_purify(opts, setup, pur_seed);
        } else if (*def_cmd) {
            std::cout << default_config_text();
        }
    } catch (const UsageError &e) {
        report_error("UsageError", e.what(), kExitConfig);
        return kExitConfig;
    } catch (const ParseError &e) {
        report_error(e.kind(), e.what(), kExitConfig, {{"line", e.line}, {"key", e.key}});
        return kExitConfig;
    } catch (const ValidationError &e) {
        report_error(e.kind(), e.what(), kExitConfig, {{"invariant", e.invariant}});
        return kExitConfig;
    } catch (const NonPhysical &e) {
        report_error(e.kind(), e.what(), kExitConfig);
        return kExitConfig;
    } catch (const NonPhysicalDrift &e) {
        report_error(e.kind(), e.what(), kExitNumerical, {{"step", e.step}, {"node", e.node}, {"block", e.block}});
        return kExitNumerical;
    } catch (const Error &e) {
        report_error(e.kind(), e.what(), kExitNumerical);
        return kExitNumerical;
    } catch (const std::invalid_argument &e) {
        report_error("UsageError", e.what(), kExitConfig);
        return kExitConfig;
    } catch (const std::exception &e) {
        report_error("Error", e.what(), kExitOther);
        return kExitOther;
    }
    if (*run_cmd || *ens_cmd) {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cerr << "elapsed " << secs << " s\n";
    }
    return code;
}
