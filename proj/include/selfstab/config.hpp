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

/// Run configuration files.
///
/// Two syntaxes are accepted. The native one is a flat, typed key-value
/// text (a TOML subset):
///
///     # comment
///     seed = 7
///     [sim]
///     phi_true = 0.3
///     g_axis = [1, 0, 0]      # or "x", "y", "z"
///
/// Keys may also be written dotted at top level (`sim.phi_true = 0.3`).
/// Values are numbers (including inf), "strings" or [number, ...] arrays.
/// The second syntax is JSON with the same sections as nested objects; a
/// run manifest (which embeds the config and seed) is accepted as well.
///
/// Unknown keys are rejected. Omitted keys take the defaults listed by
/// `default_config_text()`; when sim.dt is omitted it is chosen so that
/// dt * (kappa + total noise rate + |phi_true|) <= 0.01 (at most 1e-3).
#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "selfstab/errors.hpp"
#include "selfstab/protocol.hpp"
#include "selfstab/record_io.hpp"

namespace selfstab {

struct LoadedConfig {
    ProtocolConfig cfg;
    uint64_t seed = 1;

    bool operator==(const LoadedConfig &o) const {
        const auto &a = cfg, &b = o.cfg;
        return seed == o.seed && a.sim.phi_true == b.sim.phi_true && a.sim.g_axis == b.sim.g_axis &&
               a.sim.noise == b.sim.noise && a.sim.dt == b.sim.dt && a.sim.steps_per_block == b.sim.steps_per_block &&
               a.grid == b.grid && a.kappa == b.kappa && a.eta == b.eta && a.epsilon == b.epsilon &&
               a.max_blocks == b.max_blocks && a.latency_steps == b.latency_steps && a.feedback == b.feedback &&
               a.initial_bloch == b.initial_bloch;
    }
};

namespace config_detail {

using Value = std::variant<double, std::string, std::vector<double>>;

struct Entry {
    Value value;
    std::string raw;  // number text as written, for exact integer parsing
    int line = 0;
};

using FlatMap = std::map<std::string, Entry>;

inline std::string trim(const std::string &s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string &s) {
    bool quoted = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

inline bool parse_number(const std::string &tok, double &out) {
    std::string t = trim(tok);
    if (t.empty()) return false;
    if (t == "inf" || t == "+inf") {
        out = HUGE_VAL;
        return true;
    }
    if (t == "-inf") {
        out = -HUGE_VAL;
        return true;
    }
    const char *first = t.c_str() + (t[0] == '+' ? 1 : 0);
    auto res = std::from_chars(first, t.c_str() + t.size(), out);
    return res.ec == std::errc() && res.ptr == t.c_str() + t.size();
}

inline Entry parse_value(const std::string &text, int line, const std::string &key) {
    std::string v = trim(text);
    if (v.empty()) {
        throw ParseError("missing value for key '" + key + "' at line " + std::to_string(line), line, key);
    }
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') {
            throw ParseError("unterminated string for key '" + key + "' at line " + std::to_string(line), line, key);
        }
        std::string s;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) ++i;
            s += v[i];
        }
        return {s, v, line};
    }
    if (v.front() == '[') {
        if (v.back() != ']') {
            throw ParseError("unterminated array for key '" + key + "' at line " + std::to_string(line), line, key);
        }
        std::vector<double> arr;
        std::string body = v.substr(1, v.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (trim(item).empty()) continue;
            double d;
            if (!parse_number(item, d)) {
                throw ParseError("array element '" + trim(item) + "' of key '" + key + "' at line " +
                                     std::to_string(line) + " is not a number",
                                 line, key);
            }
            arr.push_back(d);
        }
        return {arr, v, line};
    }
    double d;
    if (!parse_number(v, d)) {
        throw ParseError("value '" + v + "' of key '" + key + "' at line " + std::to_string(line) +
                             " is not a number, \"string\" or [array]",
                         line, key);
    }
    return {d, v, line};
}

inline FlatMap parse_text(const std::string &text) {
    FlatMap map;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = trim(strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) {
                throw ParseError("malformed section header at line " + std::to_string(line), line, s);
            }
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected 'key = value' at line " + std::to_string(line), line, s);
        }
        std::string key = trim(s.substr(0, eq));
        if (key.empty()) {
            throw ParseError("empty key at line " + std::to_string(line), line, key);
        }
        std::string full = section.empty() ? key : section + "." + key;
        if (map.count(full)) {
            throw ParseError("duplicate key '" + full + "' at line " + std::to_string(line), line, full);
        }
        map[full] = parse_value(s.substr(eq + 1), line, full);
    }
    return map;
}

inline void flatten_json(const nlohmann::json &j, const std::string &prefix, FlatMap &map) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        const auto &v = it.value();
        if (v.is_object()) {
            flatten_json(v, key, map);
        } else if (v.is_number()) {
            map[key] = {v.get<double>(), v.dump(), 0};
        } else if (v.is_string()) {
            map[key] = {v.get<std::string>(), v.get<std::string>(), 0};
        } else if (v.is_array()) {
            std::vector<double> arr;
            for (const auto &e : v) {
                if (!e.is_number()) {
                    throw ParseError("array '" + key + "' must hold numbers", 0, key);
                }
                arr.push_back(e.get<double>());
            }
            map[key] = {arr, v.dump(), 0};
        } else {
            throw ParseError("unsupported JSON value for key '" + key + "'", 0, key);
        }
    }
}

inline FlatMap parse_json(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), 0, "");
    }
    if (!j.is_object()) {
        throw ParseError("JSON config must be an object", 0, "");
    }
    FlatMap map;
    if (j.contains("manifest_version")) {
        if (!j.contains("config") || !j["config"].is_object()) {
            throw ParseError("manifest has no config object", 0, "config");
        }
        flatten_json(j["config"], "", map);
        if (j.contains("master_seed")) {
            map["seed"] = {static_cast<double>(j["master_seed"].get<uint64_t>()),
                           std::to_string(j["master_seed"].get<uint64_t>()), 0};
        }
        return map;
    }
    flatten_json(j, "", map);
    return map;
}

/// Typed accessors; every read erases the key so leftovers are unknown.
class Reader {
  public:
    explicit Reader(FlatMap map) : map_(std::move(map)) {}

    bool has(const std::string &key) const { return map_.count(key) > 0; }

    double number(const std::string &key, double fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        Entry e = take(it);
        if (auto *d = std::get_if<double>(&e.value)) return *d;
        if (auto *s = std::get_if<std::string>(&e.value)) {
            double d;
            if (parse_number(*s, d)) return d;
        }
        throw ParseError(where(key, e) + " must be a number", e.line, key);
    }

    long integer(const std::string &key, long fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        Entry e = take(it);
        auto *d = std::get_if<double>(&e.value);
        if (!d || std::floor(*d) != *d || std::abs(*d) > 9e15) {
            throw ParseError(where(key, e) + " must be an integer", e.line, key);
        }
        return static_cast<long>(*d);
    }

    uint64_t unsigned64(const std::string &key, uint64_t fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        Entry e = take(it);
        uint64_t out = 0;
        const std::string &r = e.raw;
        auto res = std::from_chars(r.data(), r.data() + r.size(), out);
        if (res.ec != std::errc() || res.ptr != r.data() + r.size()) {
            throw ParseError(where(key, e) + " must be a non-negative integer", e.line, key);
        }
        return out;
    }

    std::string string(const std::string &key, const std::string &fallback, const std::set<std::string> &allowed) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        Entry e = take(it);
        auto *s = std::get_if<std::string>(&e.value);
        if (!s || !allowed.count(*s)) {
            std::string opts;
            for (const auto &a : allowed) opts += (opts.empty() ? "" : ", ") + a;
            throw ParseError(where(key, e) + " must be one of: " + opts, e.line, key);
        }
        return *s;
    }

    /// A 3-vector; for axis keys the strings "x", "y", "z" are accepted too.
    Vec3 vec3(const std::string &key, const Vec3 &fallback, bool axis_names = false) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        Entry e = take(it);
        if (auto *arr = std::get_if<std::vector<double>>(&e.value); arr && arr->size() == 3) {
            return {(*arr)[0], (*arr)[1], (*arr)[2]};
        }
        if (auto *s = std::get_if<std::string>(&e.value); s && axis_names) {
            if (*s == "x") return {1, 0, 0};
            if (*s == "y") return {0, 1, 0};
            if (*s == "z") return {0, 0, 1};
        }
        throw ParseError(where(key, e) + " must be a 3-element array" + (axis_names ? " or x/y/z" : ""), e.line,
                         key);
    }

    void reject_leftovers() const {
        if (map_.empty()) return;
        const auto &[key, e] = *map_.begin();
        throw ParseError("unknown key '" + key + "'" + (e.line ? " at line " + std::to_string(e.line) : ""), e.line,
                         key);
    }

  private:
    Entry take(FlatMap::iterator it) {
        Entry e = it->second;
        map_.erase(it);
        return e;
    }

    static std::string where(const std::string &key, const Entry &e) {
        return "key '" + key + "'" + (e.line ? " (line " + std::to_string(e.line) + ")" : "");
    }

    FlatMap map_;
};

inline LoadedConfig build(FlatMap map) {
    Reader rd(std::move(map));
    LoadedConfig out;
    ProtocolConfig &c = out.cfg;
    const ProtocolConfig defaults;

    out.seed = rd.unsigned64("seed", 1);

    c.sim.phi_true = rd.number("sim.phi_true", 0.3);
    Vec3 g = rd.vec3("sim.g_axis", {1, 0, 0}, true);
    if (!(g.norm() > 0)) {
        throw ValidationError("sim.g_axis must be a nonzero vector", "|g_axis| = 1");
    }
    c.sim.g_axis = PauliAxis::from_vector(g);
    bool dt_given = rd.has("sim.dt");
    double dt = rd.number("sim.dt", 0);
    c.sim.steps_per_block = static_cast<int>(rd.integer("sim.steps_per_block", 2000));
    c.initial_bloch = rd.vec3("sim.initial_bloch", defaults.initial_bloch);

    std::string model = rd.string("noise.model", "thermal", {"thermal", "pauli"});
    c.sim.noise.kind = model == "thermal" ? NoiseModel::Kind::Thermal : NoiseModel::Kind::Pauli;
    c.sim.noise.gamma = rd.number("noise.gamma", 0.01);
    c.sim.noise.nbar = rd.number("noise.nbar", 0.1);
    Vec3 gj = rd.vec3("noise.gamma_xyz", Vec3::Zero());
    c.sim.noise.gamma_xyz = {gj.x(), gj.y(), gj.z()};

    c.kappa = rd.number("measurement.kappa", 1.0);
    c.eta = rd.number("measurement.eta", 1.0);

    c.grid.phi_min = rd.number("grid.phi_min", 0.0);
    c.grid.phi_max = rd.number("grid.phi_max", 1.0);
    c.grid.n_points = static_cast<int>(rd.integer("grid.n_points", 512));

    c.epsilon = rd.number("protocol.epsilon", defaults.epsilon);
    c.max_blocks = static_cast<int>(rd.integer("protocol.max_blocks", defaults.max_blocks));
    c.latency_steps = static_cast<int>(rd.integer("protocol.latency_steps", 0));
    c.feedback = rd.string("protocol.feedback", "mean", {"mean", "tracking"}) == "tracking"
                     ? FeedbackMode::Tracking
                     : FeedbackMode::MeanTrajectory;

    rd.reject_leftovers();

    c.sim.dt = dt_given ? dt : default_dt(c.kappa, c.sim.noise, c.sim.phi_true);
    c.sim.rng_seed = out.seed;
    c.validate();
    return out;
}

inline std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt_double(v);
}

inline std::string vec(const Vec3 &v) { return "[" + num(v.x()) + ", " + num(v.y()) + ", " + num(v.z()) + "]"; }

}  // namespace config_detail

/// Parses config text; JSON when the first non-blank character is '{'.
inline LoadedConfig parse_config_text(const std::string &text) {
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        return config_detail::build(config_detail::parse_json(text));
    }
    return config_detail::build(config_detail::parse_text(text));
}

inline LoadedConfig parse_config(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open config file '" + path + "'", 0, "");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Every key with its value, in the native syntax.
inline std::string to_config_text(const LoadedConfig &lc) {
    using config_detail::num;
    using config_detail::vec;
    const ProtocolConfig &c = lc.cfg;
    std::ostringstream os;
    os << "seed = " << lc.seed << "\n\n";
    os << "[sim]\n";
    os << "phi_true = " << num(c.sim.phi_true) << "\n";
    os << "g_axis = " << vec(c.sim.g_axis.vector()) << "\n";
    os << "dt = " << num(c.sim.dt) << "\n";
    os << "steps_per_block = " << c.sim.steps_per_block << "\n";
    os << "initial_bloch = " << vec(c.initial_bloch) << "\n\n";
    os << "[noise]\n";
    os << "model = \"" << (c.sim.noise.kind == NoiseModel::Kind::Thermal ? "thermal" : "pauli") << "\"\n";
    os << "gamma = " << num(c.sim.noise.gamma) << "\n";
    os << "nbar = " << num(c.sim.noise.nbar) << "\n";
    const auto &gj = c.sim.noise.gamma_xyz;
    os << "gamma_xyz = " << vec({gj[0], gj[1], gj[2]}) << "\n\n";
    os << "[measurement]\n";
    os << "kappa = " << num(c.kappa) << "\n";
    os << "eta = " << num(c.eta) << "\n\n";
    os << "[grid]\n";
    os << "phi_min = " << num(c.grid.phi_min) << "\n";
    os << "phi_max = " << num(c.grid.phi_max) << "\n";
    os << "n_points = " << c.grid.n_points << "\n\n";
    os << "[protocol]\n";
    os << "epsilon = " << num(c.epsilon) << "\n";
    os << "max_blocks = " << c.max_blocks << "\n";
    os << "latency_steps = " << c.latency_steps << "\n";
    os << "feedback = \"" << to_string(c.feedback) << "\"\n";
    return os.str();
}

/// Same content as to_config_text, as a JSON object (seed included).
inline nlohmann::ordered_json to_config_json(const LoadedConfig &lc) {
    const ProtocolConfig &c = lc.cfg;
    auto v3 = [](const Vec3 &v) { return nlohmann::ordered_json::array({v.x(), v.y(), v.z()}); };
    auto numj = [](double v) -> nlohmann::ordered_json {
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };
    nlohmann::ordered_json j;
    j["seed"] = lc.seed;
    j["sim"] = {{"phi_true", c.sim.phi_true},
                {"g_axis", v3(c.sim.g_axis.vector())},
                {"dt", c.sim.dt},
                {"steps_per_block", c.sim.steps_per_block},
                {"initial_bloch", v3(c.initial_bloch)}};
    const auto &gj = c.sim.noise.gamma_xyz;
    j["noise"] = {{"model", c.sim.noise.kind == NoiseModel::Kind::Thermal ? "thermal" : "pauli"},
                  {"gamma", c.sim.noise.gamma},
                  {"nbar", c.sim.noise.nbar},
                  {"gamma_xyz", v3({gj[0], gj[1], gj[2]})}};
    j["measurement"] = {{"kappa", c.kappa}, {"eta", c.eta}};
    j["grid"] = {{"phi_min", c.grid.phi_min}, {"phi_max", c.grid.phi_max}, {"n_points", c.grid.n_points}};
    j["protocol"] = {{"epsilon", numj(c.epsilon)},
                     {"max_blocks", c.max_blocks},
                     {"latency_steps", c.latency_steps},
                     {"feedback", to_string(c.feedback)}};
    return j;
}

inline std::string default_config_text() { return to_config_text(parse_config_text("")); }

}  // namespace selfstab
