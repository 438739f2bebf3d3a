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

// Test-only reference implementations. None of these share code paths with
// the library routines they check.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qsense/core.hpp"

namespace qsense::oracle {

/// exp(-i H t) by scaling and squaring a 60-term Taylor series.
inline Operator taylor_exponential(const Operator &h, double t, int terms = 60) {
    const Operator a = cplx(0.0, -t) * h;
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    while (norm / std::ldexp(1.0, squarings) > 0.5) ++squarings;
    const Operator scaled = a / std::ldexp(1.0, squarings);
    Operator sum = Operator::Identity();
    Operator term = Operator::Identity();
    for (int n = 1; n < terms; ++n) {
        term = term * scaled / static_cast<double>(n);
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

/// Random Hermitian matrix rescaled to the given max-abs-row-sum norm.
inline Operator random_hermitian(std::mt19937_64 &rng, double norm) {
    std::normal_distribution<double> g;
    Operator m;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = cplx(g(rng), g(rng));
    Operator h = 0.5 * (m + m.adjoint());
    const double current = h.cwiseAbs().rowwise().sum().maxCoeff();
    return h * (norm / current);
}

inline Operator random_density(std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    Operator m;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = cplx(g(rng), g(rng));
    Operator rho = m * m.adjoint();
    return rho / rho.trace().real();
}

inline double max_abs_diff(const Operator &a, const Operator &b) { return (a - b).cwiseAbs().maxCoeff(); }

/// Plain dense probabilities Tr[U rho U^dagger E_y] for a list of slice
/// Hamiltonians, propagated with the Taylor oracle.
inline std::vector<double> dense_probabilities(const Operator &rho0, const std::vector<Operator> &slices, double tau,
                                               const std::vector<Operator> &effects) {
    Operator u = Operator::Identity();
    for (const auto &h : slices) u = taylor_exponential(h, tau) * u;
    const Operator rho = u * rho0 * u.adjoint();
    std::vector<double> p;
    for (const auto &e : effects) p.push_back((rho * e).trace().real());
    return p;
}

}  // namespace qsense::oracle
