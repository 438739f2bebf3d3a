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

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qsense/block_unitary.hpp"
#include "qsense/core.hpp"

namespace qsense {

/// Target field families. Each carries an Ising coupling to the ancilla.
///
///   StaticVector  H0 = B n(theta, phi) . sigma^s + J zz            params (B, theta, phi)
///   CircularXZ    H0 = -B [cos wt sigma_x^s + sin wt sigma_z^s] + J zz   params (B, omega)
///   CircularXY    H0 = -B [cos wt sigma_x^s + sin wt sigma_y^s] + J zz   params (B, omega)
///   LinearX       H0 = B cos wt sigma_x^s + J zz                  params (B, omega)
enum class ScenarioKind { StaticVector, CircularXZ, CircularXY, LinearX };

inline std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::StaticVector: return "static_vector";
        case ScenarioKind::CircularXZ: return "circular_xz";
        case ScenarioKind::CircularXY: return "circular_xy";
        case ScenarioKind::LinearX: return "linear_x";
    }
    return "?";
}

inline ScenarioKind scenario_kind_from_string(std::string_view s) {
    for (auto k : {ScenarioKind::StaticVector, ScenarioKind::CircularXZ, ScenarioKind::CircularXY,
                   ScenarioKind::LinearX}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown scenario kind '" + std::string(s) + "'");
}

/// Estimated parameters in CFIM order.
inline std::vector<std::string> parameter_names(ScenarioKind k) {
    if (k == ScenarioKind::StaticVector) return {"B", "theta", "phi"};
    return {"B", "omega"};
}

inline std::size_t parameter_count(ScenarioKind k) { return k == ScenarioKind::StaticVector ? 3 : 2; }

/// Parameter values in CFIM order: (B, theta, phi) or (B, omega).
using FieldParameters = std::vector<double>;

struct Scenario {
    ScenarioKind kind = ScenarioKind::StaticVector;
    FieldParameters params;
    double coupling = 0.0;

    static Scenario static_vector(double b, double theta, double phi, double j = 0.0) {
        return Scenario{ScenarioKind::StaticVector, {b, theta, phi}, j}.validated();
    }
    static Scenario circular_xz(double b, double omega, double j = 0.0) {
        return Scenario{ScenarioKind::CircularXZ, {b, omega}, j}.validated();
    }
    static Scenario circular_xy(double b, double omega, double j = 0.0) {
        return Scenario{ScenarioKind::CircularXY, {b, omega}, j}.validated();
    }
    static Scenario linear_x(double b, double omega, double j = 0.0) {
        return Scenario{ScenarioKind::LinearX, {b, omega}, j}.validated();
    }

    Scenario with_coupling(double j) const {
        Scenario s = *this;
        s.coupling = j;
        return s.validated();
    }

    double amplitude() const { return params.at(0); }

    void validate() const {
        if (params.size() != parameter_count(kind))
            throw std::invalid_argument("scenario '" + std::string(to_string(kind)) + "' expects " +
                                        std::to_string(parameter_count(kind)) + " parameters, got " +
                                        std::to_string(params.size()));
        if (!(params[0] > 0.0)) throw std::invalid_argument("field amplitude B must be > 0");
        if (kind == ScenarioKind::StaticVector) {
            if (!(params[1] > 0.0 && params[1] < std::numbers::pi))
                throw std::invalid_argument("polar angle theta must lie in (0, pi)");
        } else if (!(params[1] > 0.0)) {
            throw std::invalid_argument("angular frequency omega must be > 0");
        }
        if (!(coupling >= 0.0)) throw std::invalid_argument("Ising coupling J must be >= 0");
    }

    Scenario validated() const {
        validate();
        return *this;
    }
};

/// Sensor-field vector of H0 at time t for an arbitrary parameter point.
/// Used directly by the CFIM, which perturbs `params` away from the nominal
/// scenario values.
inline Eigen::Vector3d sensor_field(ScenarioKind kind, std::span<const double> params, double t) {
    const double b = params[0];
    switch (kind) {
        case ScenarioKind::StaticVector: {
            const double theta = params[1], phi = params[2];
            return {b * std::sin(theta) * std::cos(phi), b * std::sin(theta) * std::sin(phi), b * std::cos(theta)};
        }
        case ScenarioKind::CircularXZ: {
            const double wt = params[1] * t;
            return {-b * std::cos(wt), 0.0, -b * std::sin(wt)};
        }
        case ScenarioKind::CircularXY: {
            const double wt = params[1] * t;
            return {-b * std::cos(wt), -b * std::sin(wt), 0.0};
        }
        case ScenarioKind::LinearX: return {b * std::cos(params[1] * t), 0.0, 0.0};
    }
    return Eigen::Vector3d::Zero();
}

inline SensorIsingGenerator target_generator(const Scenario &s, double t) {
    return {sensor_field(s.kind, s.params, t), s.coupling};
}

inline Operator target_hamiltonian(const Scenario &s, double t) { return target_generator(s, t).to_operator(); }

/// Closed-form control (Vx, Vy, Vz) that is optimal for the J = 0 family.
/// The Ising term is ignored; a sensor-only drive cannot cancel it.
inline Eigen::Vector3d analytic_control(const Scenario &s, double t) {
    const double b = s.params[0];
    switch (s.kind) {
        case ScenarioKind::StaticVector: return -sensor_field(s.kind, s.params, t);
        case ScenarioKind::CircularXZ: {
            const double w = s.params[1];
            // -H0 + i(w/4)[sigma_z, sigma_x] = -H0 - (w/2) sigma_y
            return {b * std::cos(w * t), -0.5 * w, b * std::sin(w * t)};
        }
        case ScenarioKind::CircularXY: {
            const double w = s.params[1];
            // -H0 + i(w/4)[sigma_y, sigma_x] = -H0 + (w/2) sigma_z
            return {b * std::cos(w * t), b * std::sin(w * t), 0.5 * w};
        }
        case ScenarioKind::LinearX: {
            const double w = s.params[1];
            return {-b * std::cos(w * t), 0.5 * w, 0.0};
        }
    }
    return Eigen::Vector3d::Zero();
}

/// J = 0 precision bound Tr[F^-1] at total time T; the scenario's J is ignored.
inline double precision_bound(const Scenario &s, double total_time) {
    if (!(total_time > 0.0)) throw std::invalid_argument("precision_bound needs T > 0");
    const double b = s.params.at(0);
    const double t2 = total_time * total_time;
    switch (s.kind) {
        case ScenarioKind::StaticVector: {
            const double sin_theta = std::sin(s.params.at(1));
            if (std::abs(sin_theta) < 1e-15)
                throw std::domain_error("static bound diverges at sin(theta) = 0: phi is unidentifiable");
            return (1.0 + 1.0 / (b * b) + 1.0 / (b * b * sin_theta * sin_theta)) / (4.0 * t2);
        }
        case ScenarioKind::CircularXZ:
        case ScenarioKind::CircularXY: return 1.0 / (4.0 * t2) + 1.0 / (b * b * t2 * t2);
        case ScenarioKind::LinearX: return 1.0 / t2 + 4.0 / (b * b * t2 * t2);
    }
    return 0.0;
}

/// Times n pi / (2J) <= t_max where the static analytic baseline peaks.
inline std::vector<double> peak_times(const Scenario &s, double t_max) {
    if (s.kind != ScenarioKind::StaticVector)
        throw std::invalid_argument("peak times are only predicted for the static field");
    if (!(s.coupling > 0.0)) throw std::invalid_argument("peak times need J > 0");
    std::vector<double> out;
    const double spacing = std::numbers::pi / (2.0 * s.coupling);
    for (int n = 1; n * spacing <= t_max; ++n) out.push_back(n * spacing);
    return out;
}

}  // namespace qsense
