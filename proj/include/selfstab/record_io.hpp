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

/// Measurement-record serialization.
///
/// CSV: header `t,dy,ax,ay,az`, one row per step, every value printed in
/// its shortest round-trip form so a reload reproduces the doubles bit for bit.
///
/// Binary (little-endian):
///     char[8]  "SSRECv1\0"
///     f64      dt
///     u64      n
///     f64[n]   t
///     f64[n]   dy
///     f64[3n]  axes, row-major (ax, ay, az per step)
#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "selfstab/sme.hpp"

namespace selfstab {

static_assert(std::endian::native == std::endian::little, "binary record format assumes little-endian");

/// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_record_csv(std::ostream &os, const TrajectoryRecord &rec) {
    os << "t,dy,ax,ay,az\n";
    for (size_t i = 0; i < rec.size(); ++i) {
        const Vec3 &a = rec.axes[i];
        os << fmt_double(rec.times[i]) << ',' << fmt_double(rec.dy[i]) << ',' << fmt_double(a.x()) << ','
           << fmt_double(a.y()) << ',' << fmt_double(a.z()) << '\n';
    }
}

/// Inverse of write_record_csv. dt is recovered from the time column
/// (0 when fewer than two rows).
inline TrajectoryRecord read_record_csv(std::istream &is) {
    std::string line;
    if (!std::getline(is, line) || line != "t,dy,ax,ay,az") {
        throw std::runtime_error("record CSV: missing header t,dy,ax,ay,az");
    }
    TrajectoryRecord rec;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        double v[5];
        const char *p = line.c_str();
        for (int k = 0; k < 5; ++k) {
            char *end = nullptr;
            v[k] = std::strtod(p, &end);
            if (end == p || (k < 4 && *end != ',') || (k == 4 && *end != '\0')) {
                throw std::runtime_error("record CSV: malformed row at line " + std::to_string(lineno));
            }
            p = end + 1;
        }
        rec.push(v[0], v[1], Vec3(v[2], v[3], v[4]));
    }
    if (rec.size() >= 2) {
        rec.dt = rec.times[1] - rec.times[0];
    }
    return rec;
}

namespace detail {

inline constexpr char kRecordMagic[8] = {'S', 'S', 'R', 'E', 'C', 'v', '1', '\0'};

template <typename T>
void put(std::ostream &os, T v) {
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &is) {
    T v;
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(T))) {
        throw std::runtime_error("binary record: truncated input");
    }
    return v;
}

}  // namespace detail

inline void write_record_binary(std::ostream &os, const TrajectoryRecord &rec) {
    os.write(detail::kRecordMagic, sizeof(detail::kRecordMagic));
    detail::put<double>(os, rec.dt);
    detail::put<uint64_t>(os, rec.size());
    for (double t : rec.times) detail::put(os, t);
    for (double d : rec.dy) detail::put(os, d);
    for (const Vec3 &a : rec.axes) {
        detail::put(os, a.x());
        detail::put(os, a.y());
        detail::put(os, a.z());
    }
}

inline TrajectoryRecord read_record_binary(std::istream &is) {
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, detail::kRecordMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("binary record: bad magic");
    }
    TrajectoryRecord rec;
    rec.dt = detail::get<double>(is);
    auto n = detail::get<uint64_t>(is);
    rec.times.resize(n);
    rec.dy.resize(n);
    rec.axes.resize(n);
    for (auto &t : rec.times) t = detail::get<double>(is);
    for (auto &d : rec.dy) d = detail::get<double>(is);
    for (auto &a : rec.axes) {
        double x = detail::get<double>(is);
        double y = detail::get<double>(is);
        double z = detail::get<double>(is);
        a = Vec3(x, y, z);
    }
    return rec;
}

}  // namespace selfstab
