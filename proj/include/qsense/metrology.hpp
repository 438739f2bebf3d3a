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
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsense/block_unitary.hpp"
#include "qsense/control_schedule.hpp"
#include "qsense/core.hpp"
#include "qsense/scenarios.hpp"

namespace qsense {

struct ProbeState {
    Operator rho = Operator::Zero();
};

/// |Phi+><Phi+| with |Phi+> = (|00> + |11>) / sqrt(2).
inline ProbeState bell_probe() {
    ProbeState p;
    p.rho(0, 0) = p.rho(0, 3) = p.rho(3, 0) = p.rho(3, 3) = 0.5;
    return p;
}

/// The four Bell vectors in the order Phi+, Phi-, Psi+, Psi-.
inline std::array<Eigen::Vector4cd, 4> bell_basis() {
    const double r = 1.0 / std::numbers::sqrt2;
    std::array<Eigen::Vector4cd, 4> b;
    b[0] << r, 0, 0, r;
    b[1] << r, 0, 0, -r;
    b[2] << 0, r, r, 0;
    b[3] << 0, r, -r, 0;
    return b;
}

/// Rotation axes for the measurement basis. `diagonal` is (1, 1, 1) / sqrt(3).
enum class PovmAxis { x, y, z, diagonal };
enum class RotationTarget { sensor, ancilla, both };

inline std::string_view to_string(PovmAxis a) {
    switch (a) {
        case PovmAxis::x: return "x";
        case PovmAxis::y: return "y";
        case PovmAxis::z: return "z";
        case PovmAxis::diagonal: return "xyz";
    }
    return "?";
}

inline std::string_view to_string(RotationTarget t) {
    switch (t) {
        case RotationTarget::sensor: return "sensor";
        case RotationTarget::ancilla: return "ancilla";
        case RotationTarget::both: return "both";
    }
    return "?";
}

inline PovmAxis povm_axis_from_string(std::string_view s) {
    for (auto a : {PovmAxis::x, PovmAxis::y, PovmAxis::z, PovmAxis::diagonal})
        if (to_string(a) == s) return a;
    throw std::invalid_argument("unknown POVM rotation axis '" + std::string(s) + "'");
}

inline RotationTarget rotation_target_from_string(std::string_view s) {
    for (auto t : {RotationTarget::sensor, RotationTarget::ancilla, RotationTarget::both})
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown POVM rotation target '" + std::string(s) + "'");
}

inline Eigen::Vector3d unit_vector(PovmAxis a) {
    switch (a) {
        case PovmAxis::x: return Eigen::Vector3d::UnitX();
        case PovmAxis::y: return Eigen::Vector3d::UnitY();
        case PovmAxis::z: return Eigen::Vector3d::UnitZ();
        case PovmAxis::diagonal: return Eigen::Vector3d::Ones().normalized();
    }
    return Eigen::Vector3d::Zero();
}

struct PovmRotation {
    PovmAxis axis = PovmAxis::diagonal;
    double angle = std::numbers::pi / 3.0;
    RotationTarget target = RotationTarget::sensor;
    /// Where the choice came from, e.g. "default" or "calibrated(...)".
    std::string provenance = "default";
};

struct Povm {
    std::array<Operator, 4> effects;
    PovmRotation rotation;
};

/// Effects R |b_i><b_i| R^dagger with R = exp(-i (angle / 2) n . sigma) on the
/// target qubit(s) and |b_i> the Bell basis.
inline Povm rotated_bell_povm(PovmAxis axis, double angle, RotationTarget target) {
    const Eigen::Vector3d n = unit_vector(axis);
    const Eigen::Matrix2cd r = su2_exponential(n, 0.5 * angle);
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Operator big;
    switch (target) {
        case RotationTarget::sensor: big = kron(r, id); break;
        case RotationTarget::ancilla: big = kron(id, r); break;
        case RotationTarget::both: big = kron(r, r); break;
    }
    Povm out;
    out.rotation = {axis, angle, target, "explicit"};
    const auto basis = bell_basis();
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector4cd v = big * basis[i];
        out.effects[i] = v * v.adjoint();
    }
    return out;
}

inline Povm rotated_bell_povm(const PovmRotation &rot) {
    Povm p = rotated_bell_povm(rot.axis, rot.angle, rot.target);
    p.rotation = rot;
    return p;
}

/// Bell basis rotated by pi/3 about (1, 1, 1)/sqrt(3) on the sensor. This is
/// the candidate the calibration scan selects at the static reference point.
inline Povm default_povm() {
    return rotated_bell_povm(PovmRotation{PovmAxis::diagonal, std::numbers::pi / 3.0, RotationTarget::sensor, "default"});
}

/// Central-difference steps: 1e-5 relative for B and omega, 1e-5 rad for angles.
inline std::vector<double> default_parameter_steps(const Scenario &s) {
    std::vector<double> steps;
    const auto names = parameter_names(s.kind);
    for (std::size_t a = 0; a < names.size(); ++a) {
        const bool angle = names[a] == "theta" || names[a] == "phi";
        steps.push_back(angle ? 1e-5 : 1e-5 * std::abs(s.params[a]));
    }
    return steps;
}

struct EstimationSetup {
    ProbeState probe = bell_probe();
    Povm povm = default_povm();
    /// Empty means default_parameter_steps() of the scenario being evaluated.
    std::vector<double> param_steps;
    double prob_floor = 1e-12;

    std::vector<double> steps_for(const Scenario &s) const {
        if (param_steps.empty()) return default_parameter_steps(s);
        if (param_steps.size() != parameter_count(s.kind))
            throw std::invalid_argument("param_steps size does not match the scenario's parameter count");
        for (double d : param_steps)
            if (!(d > 0.0)) throw std::invalid_argument("param_steps must be > 0");
        return param_steps;
    }

    void validate() const {
        if (!(prob_floor > 0.0 && prob_floor <= 1e-6)) throw std::invalid_argument("prob_floor must lie in (0, 1e-6]");
    }
};

using Probabilities = std::array<double, 4>;

inline Probabilities probabilities_after(const EstimationSetup &setup, const Operator &unitary) {
    const Operator rho = unitary * setup.probe.rho * unitary.adjoint();
    Probabilities p{};
    for (int y = 0; y < 4; ++y) p[y] = (rho * setup.povm.effects[y]).trace().real();
    return p;
}

inline Probabilities probabilities_after(const EstimationSetup &setup, const BlockUnitary &unitary) {
    return probabilities_after(setup, unitary.to_operator());
}

/// Slice generator: target field at the slice midpoint plus the control.
inline SensorIsingGenerator slice_generator(ScenarioKind kind, std::span<const double> params, double coupling,
                                            const ControlSchedule &schedule, std::size_t i) {
    return {sensor_field(kind, params, schedule.midpoint(i)) + schedule.amplitudes[i], coupling};
}

inline std::vector<BlockUnitary> slice_unitaries(ScenarioKind kind, std::span<const double> params, double coupling,
                                                 const ControlSchedule &schedule) {
    std::vector<BlockUnitary> out;
    out.reserve(schedule.slices());
    const double tau = schedule.tau();
    for (std::size_t i = 0; i < schedule.slices(); ++i)
        out.push_back(BlockUnitary::exponential(slice_generator(kind, params, coupling, schedule, i), tau));
    return out;
}

inline BlockUnitary total_unitary(ScenarioKind kind, std::span<const double> params, double coupling,
                                  const ControlSchedule &schedule) {
    BlockUnitary u;
    const double tau = schedule.tau();
    for (std::size_t i = 0; i < schedule.slices(); ++i)
        u = BlockUnitary::exponential(slice_generator(kind, params, coupling, schedule, i), tau) * u;
    return u;
}

inline Probabilities outcome_probabilities(const EstimationSetup &setup, const Scenario &s,
                                           const ControlSchedule &schedule) {
    schedule.validate();
    return probabilities_after(setup, total_unitary(s.kind, s.params, s.coupling, schedule));
}

/// Central-difference stencil over the field parameters. Point 0 is nominal;
/// points 2a+1 and 2a+2 are the +delta and -delta shifts of parameter a.
/// The control schedule is never part of the stencil.
struct ParameterStencil {
    std::vector<std::vector<double>> points;
    std::vector<double> steps;

    ParameterStencil(const Scenario &s, std::vector<double> step_sizes) : steps(std::move(step_sizes)) {
        points.push_back(s.params);
        for (std::size_t a = 0; a < steps.size(); ++a) {
            auto plus = s.params, minus = s.params;
            plus[a] += steps[a];
            minus[a] -= steps[a];
            points.push_back(std::move(plus));
            points.push_back(std::move(minus));
        }
    }

    std::size_t dimension() const { return steps.size(); }
};

struct Cfim {
    Eigen::MatrixXd matrix;

    std::size_t dimension() const { return static_cast<std::size_t>(matrix.rows()); }
};

/// F_ab = sum_y (d_a p_y)(d_b p_y) / max(p_y, floor), derivatives by central
/// differences over the stencil probabilities. Summation order is fixed.
inline Cfim cfim_from_stencil(const std::vector<Probabilities> &probs, std::span<const double> steps, double floor) {
    const std::size_t d = steps.size();
    std::vector<Probabilities> dp(d);
    for (std::size_t a = 0; a < d; ++a)
        for (int y = 0; y < 4; ++y) dp[a][y] = (probs[2 * a + 1][y] - probs[2 * a + 2][y]) / (2.0 * steps[a]);
    Cfim f{Eigen::MatrixXd::Zero(d, d)};
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            double acc = 0.0;
            for (int y = 0; y < 4; ++y) acc += dp[a][y] * dp[b][y] / std::max(probs[0][y], floor);
            f.matrix(a, b) = f.matrix(b, a) = acc;
        }
    }
    return f;
}

/// Classical Fisher information of the field parameters with the control
/// held fixed at its nominal design.
inline Cfim cfim(const EstimationSetup &setup, const Scenario &s, const ControlSchedule &schedule) {
    setup.validate();
    schedule.validate();
    const ParameterStencil stencil(s, setup.steps_for(s));
    std::vector<Probabilities> probs;
    probs.reserve(stencil.points.size());
    for (const auto &point : stencil.points)
        probs.push_back(probabilities_after(setup, total_unitary(s.kind, point, s.coupling, schedule)));
    return cfim_from_stencil(probs, stencil.steps, setup.prob_floor);
}

struct ObjectiveValue {
    double value = 0.0;
    /// Some diagonal entry is <= kDegenerateFisher.
    bool degenerate = false;
};

inline constexpr double kDegenerateFisher = 1e-12;

/// f0 = (sum_a 1 / F_aa)^-1; larger is better.
inline ObjectiveValue objective_f0(const Cfim &f) {
    ObjectiveValue out;
    double acc = 0.0;
    for (Eigen::Index a = 0; a < f.matrix.rows(); ++a) {
        const double faa = f.matrix(a, a);
        if (faa <= kDegenerateFisher) out.degenerate = true;
        if (!(faa > 0.0)) return {0.0, true};
        acc += 1.0 / faa;
    }
    out.value = 1.0 / acc;
    return out;
}

struct TraceInverse {
    double value = std::numeric_limits<double>::infinity();
    bool singular = true;
    double condition = std::numeric_limits<double>::infinity();
};

inline constexpr double kMaxCondition = 1e12;

/// Tr[F^-1] of the full matrix; +inf with `singular` set when cond(F) >= 1e12.
inline TraceInverse trace_inverse(const Cfim &f) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(f.matrix);
    const Eigen::VectorXd w = solver.eigenvalues();
    const double lo = w.minCoeff(), hi = w.maxCoeff();
    TraceInverse out;
    if (!(lo > 0.0)) return out;
    out.condition = hi / lo;
    if (out.condition >= kMaxCondition) return out;
    out.value = f.matrix.inverse().trace();
    out.singular = false;
    return out;
}

/// Sum of reciprocal diagonal entries, i.e. 1 / f0.
inline double reciprocal_diagonal_sum(const Cfim &f) {
    double acc = 0.0;
    for (Eigen::Index a = 0; a < f.matrix.rows(); ++a) acc += 1.0 / f.matrix(a, a);
    return acc;
}

}  // namespace qsense
