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

/// Two-level system algebra.
///
/// Basis convention used everywhere in the library: row/column 0 is the
/// excited state |e>, row/column 1 the ground state |g>. Hence
///
///     sigma_z = |e><e| - |g><g|,  sigma_+ = |e><g|,  sigma_- = |g><e|.
///
/// Density matrices are stored through their Bloch vector r, with
/// rho = (I + r.sigma)/2, which makes Hermiticity and unit trace exact.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include "selfstab/errors.hpp"

namespace selfstab {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec3 = Eigen::Vector3d;

/// Eigenvalues may dip this far below zero before a state is rejected.
inline constexpr double kPhysicalTolerance = 1e-8;

namespace pauli {

inline Mat2 identity() { return Mat2::Identity(); }

inline Mat2 x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}

inline Mat2 y() {
    Mat2 m;
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

inline Mat2 z() {
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}

/// |e><g|
inline Mat2 plus() {
    Mat2 m;
    m << 0, 1, 0, 0;
    return m;
}

/// |g><e|
inline Mat2 minus() {
    Mat2 m;
    m << 0, 0, 1, 0;
    return m;
}

/// v.sigma for a real 3-vector.
inline Mat2 dot(const Vec3 &v) { return v.x() * x() + v.y() * y() + v.z() * z(); }

}  // namespace pauli

inline std::string format_vec(const Vec3 &v) {
    std::ostringstream os;
    os.precision(17);
    os << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
    return os.str();
}

/// Unit vector n with operator view n.sigma.
class PauliAxis {
  public:
    PauliAxis() : n_(0, 0, 1) {}

    /// Normalizes v; throws if v is (numerically) zero.
    static PauliAxis from_vector(const Vec3 &v) {
        double norm = v.norm();
        if (!(norm > 1e-300) || !std::isfinite(norm)) {
            throw std::invalid_argument("PauliAxis needs a nonzero finite vector, got " + format_vec(v));
        }
        PauliAxis a;
        a.n_ = v / norm;
        return a;
    }

    static PauliAxis x() { return from_vector({1, 0, 0}); }
    static PauliAxis y() { return from_vector({0, 1, 0}); }
    static PauliAxis z() { return from_vector({0, 0, 1}); }

    const Vec3 &vector() const { return n_; }
    Mat2 op() const { return pauli::dot(n_); }

    bool operator==(const PauliAxis &other) const { return n_ == other.n_; }

  private:
    Vec3 n_;
};

/// Qubit density operator, held as its Bloch vector.
class QubitState {
  public:
    /// Maximally mixed state.
    QubitState() : r_(Vec3::Zero()) {}

    /// Throws NonPhysical if |r| > 1 + kPhysicalTolerance.
    static QubitState from_bloch(const Vec3 &r) {
        double norm = r.norm();
        if (!std::isfinite(norm) || norm > 1 + kPhysicalTolerance) {
            throw NonPhysical("Bloch vector " + format_vec(r) + " has norm " + std::to_string(norm) + " > 1");
        }
        QubitState s;
        s.r_ = r;
        return s;
    }

    /// Builds from an explicit matrix after checking Hermiticity (1e-12),
    /// unit trace (1e-9) and positivity (-1e-8).
    static QubitState from_matrix(const Mat2 &m) {
        if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
            throw NonPhysical("density matrix is not Hermitian");
        }
        if (std::abs(m.trace() - 1.0) > 1e-9) {
            throw NonPhysical("density matrix trace differs from 1");
        }
        Vec3 r((m * pauli::x()).trace().real(), (m * pauli::y()).trace().real(), (m * pauli::z()).trace().real());
        return from_bloch(r);
    }

    /// Skips validation; for callers that maintain |r| <= 1 themselves.
    static QubitState unchecked(const Vec3 &r) {
        QubitState s;
        s.r_ = r;
        return s;
    }

    const Vec3 &bloch() const { return r_; }

    Mat2 matrix() const { return 0.5 * (pauli::identity() + pauli::dot(r_)); }

    /// tr(rho^2) = (1 + |r|^2)/2
    double purity() const { return 0.5 * (1.0 + r_.squaredNorm()); }

    std::array<double, 2> eigenvalues() const {
        double n = r_.norm();
        return {0.5 * (1 - n), 0.5 * (1 + n)};
    }

    double expectation(const PauliAxis &axis) const { return axis.vector().dot(r_); }

  private:
    Vec3 r_;
};

inline QubitState bloch_to_state(const Vec3 &r) { return QubitState::from_bloch(r); }

/// Decoherence channels acting on the qubit.
///
/// Thermal: gamma*nbar*D[sigma_+] + gamma*(1+nbar)*D[sigma_-].
/// Pauli:   sum_j gamma_j/2 * D[sigma_j].
struct NoiseModel {
    enum class Kind { Thermal, Pauli };

    Kind kind = Kind::Thermal;
    double gamma = 0.0;
    double nbar = 0.0;
    std::array<double, 3> gamma_xyz{0.0, 0.0, 0.0};

    static NoiseModel none() { return {}; }

    static NoiseModel thermal(double gamma, double nbar) {
        NoiseModel m;
        m.kind = Kind::Thermal;
        m.gamma = gamma;
        m.nbar = nbar;
        m.validate();
        return m;
    }

    static NoiseModel pauli(double gx, double gy, double gz) {
        NoiseModel m;
        m.kind = Kind::Pauli;
        m.gamma_xyz = {gx, gy, gz};
        m.validate();
        return m;
    }

    void validate() const {
        auto bad = [](double v) { return !(v >= 0) || !std::isfinite(v); };
        if (kind == Kind::Thermal && (bad(gamma) || bad(nbar))) {
            throw std::invalid_argument("thermal noise needs gamma >= 0 and nbar >= 0");
        }
        if (kind == Kind::Pauli && (bad(gamma_xyz[0]) || bad(gamma_xyz[1]) || bad(gamma_xyz[2]))) {
            throw std::invalid_argument("Pauli noise rates must be >= 0");
        }
    }

    /// Largest single-channel rate, used by the step-size guard.
    double max_rate() const {
        if (kind == Kind::Thermal) {
            return gamma * (1 + nbar);
        }
        return std::max({gamma_xyz[0], gamma_xyz[1], gamma_xyz[2]});
    }

    /// Sum of all channel rates; sets the default step size.
    double total_rate() const {
        if (kind == Kind::Thermal) {
            return gamma * (2 * nbar + 1);
        }
        return gamma_xyz[0] + gamma_xyz[1] + gamma_xyz[2];
    }

    bool operator==(const NoiseModel &) const = default;
};

/// D[c]rho = c rho c^dag - (c^dag c rho + rho c^dag c)/2
inline Mat2 dissipator(const Mat2 &c, const Mat2 &rho) {
    Mat2 cdc = c.adjoint() * c;
    return c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
}

inline Mat2 dissipator(const Mat2 &c, const QubitState &rho) { return dissipator(c, rho.matrix()); }

/// H[c]rho = c rho + rho c^dag - <c + c^dag> rho.
/// The expectation is taken as tr((c + c^dag) rho), so for unit-trace rho
/// the result is traceless.
inline Mat2 innovation_term(const Mat2 &c, const Mat2 &rho) {
    Mat2 sum = c * rho + rho * c.adjoint();
    Complex mean = sum.trace();
    return sum - mean.real() * rho;
}

inline Mat2 innovation_term(const Mat2 &c, const QubitState &rho) { return innovation_term(c, rho.matrix()); }

/// S_L = 1 - tr(rho^2) = (1 - |r|^2)/2.
inline double linear_entropy(const QubitState &rho) { return 0.5 * (1.0 - rho.bloch().squaredNorm()); }

/// Quantum Fisher information of rho for the generator G = g.sigma:
///
///     F_Q = sum_{j,k} (l_j - l_k)^2 / (l_j + l_k) |<j|G|k>|^2
///
/// with the plain sum over ordered pairs (pure states with G orthogonal to r
/// give 2, not the 4*Var(G) of other conventions). Pairs with
/// l_j + l_k < 1e-12 are dropped.
inline double qfi(const QubitState &rho, const PauliAxis &g) {
    Eigen::SelfAdjointEigenSolver<Mat2> eig(rho.matrix());
    const auto &lambda = eig.eigenvalues();
    const Mat2 &vecs = eig.eigenvectors();
    Mat2 gk = vecs.adjoint() * g.op() * vecs;
    double fq = 0;
    for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 2; ++k) {
            double s = lambda(j) + lambda(k);
            if (s < 1e-12) {
                continue;
            }
            double d = lambda(j) - lambda(k);
            fq += d * d / s * std::norm(gk(j, k));
        }
    }
    return fq;
}

/// 1/(nu F_Q). Throws DegenerateBound for fq <= 0.
inline double cramer_rao_bound(double fq, long nu = 1) {
    if (!(fq > 0)) {
        throw DegenerateBound("Cramer-Rao bound needs positive Fisher information, got " + std::to_string(fq));
    }
    if (nu < 1) {
        throw std::invalid_argument("repetition count must be >= 1");
    }
    return 1.0 / (static_cast<double>(nu) * fq);
}

}  // namespace selfstab
