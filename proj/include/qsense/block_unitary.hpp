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

// Every Hamiltonian in this library has the form
//
//     H = h . sigma^s + J sigma_z^s sigma_z^a
//
// which commutes with sigma_z^a. In the ancilla-z eigenbasis H splits into
// two 2x2 sensor blocks (h + J z) . sigma and (h - J z) . sigma, so each
// slice propagator is a pair of SU(2) rotations with a closed form. The
// optimizer's inner loops run entirely on these blocks.

#include <cmath>

#include "qsense/core.hpp"

namespace qsense {

/// Generator h . sigma^s + J sigma_z^s sigma_z^a.
struct SensorIsingGenerator {
    Eigen::Vector3d field = Eigen::Vector3d::Zero();
    double coupling = 0.0;

    Operator to_operator() const {
        return field.x() * pauli(Axis::x, Qubit::sensor) + field.y() * pauli(Axis::y, Qubit::sensor) +
               field.z() * pauli(Axis::z, Qubit::sensor) + coupling * ising_zz();
    }

    /// Largest |eigenvalue|: max(|h + J z|, |h - J z|).
    double spectral_norm() const {
        Eigen::Vector3d up = field, down = field;
        up.z() += coupling;
        down.z() -= coupling;
        return std::max(up.norm(), down.norm());
    }
};

/// exp(-i (b . sigma) t) = cos(|b| t) I - i sin(|b| t) (b . sigma) / |b|.
inline Eigen::Matrix2cd su2_exponential(const Eigen::Vector3d &b, double t) {
    const double norm = b.norm();
    const double c = std::cos(norm * t);
    // sin(|b| t) / |b|, continuous at |b| = 0.
    const double s = norm > 0.0 ? std::sin(norm * t) / norm : t;
    Eigen::Matrix2cd u;
    u(0, 0) = cplx(c, -s * b.z());
    u(1, 1) = cplx(c, s * b.z());
    u(0, 1) = cplx(-s * b.y(), -s * b.x());
    u(1, 0) = cplx(s * b.y(), -s * b.x());
    return u;
}

/// Block-diagonal two-qubit unitary: `up` acts on the sensor when the
/// ancilla is |0>, `down` when it is |1>.
struct BlockUnitary {
    Eigen::Matrix2cd up = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd down = Eigen::Matrix2cd::Identity();

    static BlockUnitary identity() { return {}; }

    static BlockUnitary exponential(const SensorIsingGenerator &g, double t) {
        Eigen::Vector3d b_up = g.field, b_down = g.field;
        b_up.z() += g.coupling;
        b_down.z() -= g.coupling;
        return {su2_exponential(b_up, t), su2_exponential(b_down, t)};
    }

    friend BlockUnitary operator*(const BlockUnitary &a, const BlockUnitary &b) {
        return {a.up * b.up, a.down * b.down};
    }

    BlockUnitary adjoint() const { return {up.adjoint(), down.adjoint()}; }

    /// Embed in the |s a> basis: index = 2 s + a.
    Operator to_operator() const {
        Operator out = Operator::Zero();
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                out(2 * i, 2 * j) = up(i, j);
                out(2 * i + 1, 2 * j + 1) = down(i, j);
            }
        }
        return out;
    }
};

}  // namespace qsense
