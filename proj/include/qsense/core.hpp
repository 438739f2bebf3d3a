// Copyright 2026 The qsense Authors
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

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qsense {

using cplx = std::complex<double>;

/// Dense operator on the sensor (x) ancilla Hilbert space.
///
/// Basis order is |00>, |01>, |10>, |11> with the sensor bit first, so a
/// sensor Pauli is sigma (x) I and an ancilla Pauli is I (x) sigma.
using Operator = Eigen::Matrix4cd;

enum class Axis { x, y, z };
enum class Qubit { sensor, ancilla };

inline constexpr double kConstructionHermiticityTol = 1e-12;
inline constexpr double kArithmeticHermiticityTol = 1e-10;

inline std::string_view to_string(Axis a) {
    switch (a) {
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "?";
}

inline Eigen::Matrix2cd pauli2(Axis axis) {
    Eigen::Matrix2cd m;
    switch (axis) {
        case Axis::x: m << 0, 1, 1, 0; break;
        case Axis::y: m << 0, cplx(0, -1), cplx(0, 1), 0; break;
        case Axis::z: m << 1, 0, 0, -1; break;
    }
    return m;
}

inline Operator kron(const Eigen::Matrix2cd &a, const Eigen::Matrix2cd &b) {
    Operator out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

inline Operator identity() { return Operator::Identity(); }

inline Operator pauli(Axis axis, Qubit qubit) {
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    return qubit == Qubit::sensor ? kron(pauli2(axis), id) : kron(id, pauli2(axis));
}

/// The Ising operator sigma_z^s sigma_z^a.
inline Operator ising_zz() { return pauli(Axis::z, Qubit::sensor) * pauli(Axis::z, Qubit::ancilla); }

inline Operator commutator(const Operator &a, const Operator &b) { return a * b - b * a; }

inline double hermiticity_deviation(const Operator &h) { return (h - h.adjoint()).cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Operator &h, double tol = kArithmeticHermiticityTol) {
    return hermiticity_deviation(h) <= tol;
}

inline double unitarity_deviation(const Operator &u) {
    return (u.adjoint() * u - Operator::Identity()).cwiseAbs().maxCoeff();
}

class NonHermitianError : public std::invalid_argument {
   public:
    explicit NonHermitianError(double deviation)
        : std::invalid_argument(describe(deviation)), deviation_(deviation) {}
    double deviation() const { return deviation_; }

   private:
    static std::string describe(double deviation) {
        std::ostringstream ss;
        ss << "generator is not Hermitian: max |H - H^dagger| = " << deviation;
        return ss.str();
    }
    double deviation_;
};

/// exp(-i H t) via the eigendecomposition of the Hermitian generator.
inline Operator matrix_exponential(const Operator &h, double t) {
    const double dev = hermiticity_deviation(h);
    if (dev > kArithmeticHermiticityTol) throw NonHermitianError(dev);
    // Symmetrize so the solver sees an exactly Hermitian matrix.
    const Operator herm = 0.5 * (h + h.adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> solver(herm);
    const Eigen::Vector4d w = solver.eigenvalues();
    const Operator &v = solver.eigenvectors();
    Eigen::Vector4cd phases;
    for (int i = 0; i < 4; ++i) phases(i) = std::polar(1.0, -w(i) * t);
    return v * phases.asDiagonal() * v.adjoint();
}

/// Piecewise-constant Hamiltonian: one operator per slice of duration tau.
struct HamiltonianSchedule {
    std::vector<Operator> slices;
    double tau = 0.0;

    void validate() const {
        if (slices.empty()) throw std::invalid_argument("HamiltonianSchedule needs at least one slice");
        if (!(tau > 0.0)) throw std::invalid_argument("HamiltonianSchedule needs tau > 0");
    }
};

/// rho(T) = U_N ... U_1 rho0 U_1^dagger ... U_N^dagger.
inline Operator propagate(const Operator &rho0, const HamiltonianSchedule &schedule) {
    schedule.validate();
    Operator u = Operator::Identity();
    for (const Operator &h : schedule.slices) u = matrix_exponential(h, schedule.tau) * u;
    return u * rho0 * u.adjoint();
}

/// Hermitian, unit trace, eigenvalues >= -tol.
inline bool is_density_matrix(const Operator &rho, double tol = 1e-10) {
    if (!is_hermitian(rho, tol)) return false;
    if (std::abs(rho.trace() - cplx(1.0, 0.0)) > tol) return false;
    const Operator herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Operator> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff() >= -tol;
}

}  // namespace qsense
