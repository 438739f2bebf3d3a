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
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsense {

/// Piecewise-constant sensor drive: row i holds (Vx, Vy, Vz) on slice i,
/// which spans [i tau, (i + 1) tau) with tau = T / N.
struct ControlSchedule {
    double total_time = 0.0;
    std::vector<Eigen::Vector3d> amplitudes;

    std::size_t slices() const { return amplitudes.size(); }
    double tau() const { return total_time / static_cast<double>(amplitudes.size()); }
    double midpoint(std::size_t i) const { return (static_cast<double>(i) + 0.5) * tau(); }

    double max_abs() const {
        double m = 0.0;
        for (const auto &v : amplitudes) m = std::max(m, v.cwiseAbs().maxCoeff());
        return m;
    }

    void validate(std::optional<double> v_max = std::nullopt) const {
        if (amplitudes.empty()) throw std::invalid_argument("control schedule needs N >= 1 slices");
        if (!(total_time > 0.0) || !std::isfinite(total_time))
            throw std::invalid_argument("control schedule needs T > 0");
        for (const auto &v : amplitudes) {
            if (!v.allFinite()) throw std::invalid_argument("control schedule has non-finite amplitudes");
        }
        if (v_max && max_abs() > *v_max + 1e-12)
            throw std::invalid_argument("control schedule exceeds amplitude bound " + std::to_string(*v_max));
    }

    static ControlSchedule zeros(double total_time, std::size_t n) {
        return {total_time, std::vector<Eigen::Vector3d>(n, Eigen::Vector3d::Zero())};
    }
};

/// Time-domain L2 distance between waveforms on the same grid:
/// sqrt(tau * sum_i |V_a(i) - V_b(i)|^2).
inline double l2_distance(const ControlSchedule &a, const ControlSchedule &b) {
    if (a.slices() != b.slices()) throw std::invalid_argument("l2_distance needs matching slice counts");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.slices(); ++i) acc += (a.amplitudes[i] - b.amplitudes[i]).squaredNorm();
    return std::sqrt(acc * a.tau());
}

}  // namespace qsense
