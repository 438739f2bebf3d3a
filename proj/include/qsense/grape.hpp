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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qsense/block_unitary.hpp"
#include "qsense/control_schedule.hpp"
#include "qsense/metrology.hpp"
#include "qsense/scenarios.hpp"

namespace qsense {

/// V[i] = analytic_control(s, (i + 1/2) tau).
inline ControlSchedule discretize_control(const Scenario &s, double total_time, std::size_t n) {
    if (n < 1) throw std::invalid_argument("discretize_control needs N >= 1");
    if (!(total_time > 0.0)) throw std::invalid_argument("discretize_control needs T > 0");
    ControlSchedule out = ControlSchedule::zeros(total_time, n);
    for (std::size_t i = 0; i < n; ++i) out.amplitudes[i] = analytic_control(s, out.midpoint(i));
    return out;
}

/// Smallest N >= floor with tau * max_t(|H0(t)| + |Hc(t)|) <= max_phase.
inline std::size_t default_slice_count(const Scenario &s, double total_time, std::size_t floor = 200,
                                       double max_phase = 0.1) {
    constexpr int kSamples = 4096;
    double peak = 0.0;
    for (int j = 0; j <= kSamples; ++j) {
        const double t = total_time * j / kSamples;
        peak = std::max(peak, target_generator(s, t).spectral_norm() + analytic_control(s, t).norm());
    }
    const auto needed = static_cast<std::size_t>(std::ceil(total_time * peak / max_phase));
    return std::max(floor, needed);
}

/// I.i.d. uniform amplitudes on [-scale, scale].
inline ControlSchedule random_schedule(double total_time, std::size_t n, double amplitude_scale,
                                       std::uint64_t seed) {
    if (!(amplitude_scale >= 0.0)) throw std::invalid_argument("amplitude_scale must be >= 0");
    ControlSchedule out = ControlSchedule::zeros(total_time, n);
    if (amplitude_scale == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude_scale, amplitude_scale);
    for (auto &v : out.amplitudes)
        for (int k = 0; k < 3; ++k) v(k) = dist(rng);
    return out;
}

struct SeedProvenance {
    enum class Kind { analytic, random, ladder, explicit_schedule };
    Kind kind = Kind::analytic;
    std::uint64_t seed = 0;
    double previous_coupling = 0.0;
    /// Provenance of the rung this one was seeded from, outermost first.
    std::vector<std::string> chain;

    static SeedProvenance analytic() { return {}; }
    static SeedProvenance random(std::uint64_t seed) { return {Kind::random, seed, 0.0, {}}; }
    static SeedProvenance explicit_schedule() { return {Kind::explicit_schedule, 0, 0.0, {}}; }
    static SeedProvenance ladder(double previous, const SeedProvenance &parent) {
        SeedProvenance p{Kind::ladder, 0, previous, {parent.describe()}};
        p.chain.insert(p.chain.end(), parent.chain.begin(), parent.chain.end());
        return p;
    }

    std::string describe() const {
        std::ostringstream ss;
        switch (kind) {
            case Kind::analytic: ss << "analytic"; break;
            case Kind::random: ss << "random(" << seed << ")"; break;
            case Kind::ladder: ss << "ladder(" << previous_coupling << ")"; break;
            case Kind::explicit_schedule: ss << "explicit"; break;
        }
        return ss.str();
    }

    /// e.g. "ladder(0.15) <- ladder(0.1) <- ladder(0.01) <- analytic".
    std::string full_chain() const {
        std::string out = describe();
        for (const auto &c : chain) out += " <- " + c;
        return out;
    }

    friend bool operator==(const SeedProvenance &, const SeedProvenance &) = default;
};

struct GrapeConfig {
    /// Control-gradient step; unset means 1e-6 * max(1, max|V|).
    std::optional<double> epsilon_fd;
    int max_iters = 2000;
    double rel_tol = 1e-6;
    int patience = 20;
    double step_init = 1.0;
    double backtrack_factor = 0.5;
    /// Each line search starts from max(step_init, growth * last accepted step).
    /// 1 keeps every search at step_init.
    double step_growth = 1.0;
    /// Armijo constant c: a step eta is accepted only if
    /// f(V + eta g) >= f(V) + c eta |g|^2. 0 accepts any increase.
    double sufficient_increase = 0.0;
    std::optional<double> v_max;
    std::uint64_t rng_seed = 0;
    /// Threads used inside gradient_fd.
    unsigned workers = 1;

    void validate() const {
        if (epsilon_fd && !(*epsilon_fd > 0.0)) throw std::invalid_argument("epsilon_fd must be > 0");
        if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
            throw std::invalid_argument("backtrack_factor must lie in (0, 1)");
        if (patience < 1) throw std::invalid_argument("patience must be >= 1");
        if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
        if (!(step_init > 0.0)) throw std::invalid_argument("step_init must be > 0");
        if (!(step_growth >= 1.0)) throw std::invalid_argument("step_growth must be >= 1");
        if (!(sufficient_increase >= 0.0 && sufficient_increase < 1.0))
            throw std::invalid_argument("sufficient_increase must lie in [0, 1)");
        if (v_max && !(*v_max > 0.0)) throw std::invalid_argument("v_max must be > 0");
    }

    double epsilon_for(const ControlSchedule &schedule) const {
        return epsilon_fd ? *epsilon_fd : 1e-6 * std::max(1.0, schedule.max_abs());
    }
};

struct GrapeResult {
    ControlSchedule schedule;
    std::vector<double> objective_trace;
    Cfim final_cfim;
    TraceInverse trace_inverse;
    SeedProvenance seed_provenance;
    int iterations = 0;
    bool converged = false;

    double final_objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

/// Objective, CFIM and control gradient for one (setup, scenario) pair. The
/// parameter stencil is fixed at construction; schedules vary per call.
class ObjectiveEvaluator {
   public:
    ObjectiveEvaluator(EstimationSetup setup, Scenario scenario)
        : setup_(std::move(setup)), scenario_(std::move(scenario)), stencil_(scenario_, setup_.steps_for(scenario_)) {
        setup_.validate();
        scenario_.validate();
    }

    const Scenario &scenario() const { return scenario_; }
    const EstimationSetup &setup() const { return setup_; }

    Cfim cfim(const ControlSchedule &schedule) const {
        schedule.validate();
        std::vector<Probabilities> probs;
        probs.reserve(stencil_.points.size());
        for (const auto &point : stencil_.points)
            probs.push_back(probabilities_after(setup_, total_unitary(scenario_.kind, point, scenario_.coupling, schedule)));
        return cfim_from_stencil(probs, stencil_.steps, setup_.prob_floor);
    }

    ObjectiveValue objective(const ControlSchedule &schedule) const { return objective_f0(cfim(schedule)); }

    /// Central difference of f0 in every amplitude:
    /// g(i, k) = [f0(V + eps e_ik) - f0(V - eps e_ik)] / (2 eps).
    ///
    /// A perturbation of slice i only changes U_i, so each perturbed
    /// propagator is suffix_i * U_i' * prefix_i with the products cached per
    /// stencil point. Values equal full re-propagation up to rounding.
    std::vector<Eigen::Vector3d> gradient(const ControlSchedule &schedule, double epsilon, unsigned workers = 1) const {
        schedule.validate();
        if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon_fd must be > 0");
        const std::size_t n = schedule.slices();
        const std::size_t points = stencil_.points.size();
        const double tau = schedule.tau();

        std::vector<std::vector<SensorIsingGenerator>> generators(points);
        std::vector<std::vector<BlockUnitary>> prefix(points), suffix(points);
        for (std::size_t p = 0; p < points; ++p) {
            auto &gen = generators[p];
            gen.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                gen.push_back(slice_generator(scenario_.kind, stencil_.points[p], scenario_.coupling, schedule, i));
            std::vector<BlockUnitary> u(n);
            for (std::size_t i = 0; i < n; ++i) u[i] = BlockUnitary::exponential(gen[i], tau);
            // prefix[i] = U_{i-1} ... U_0, suffix[i] = U_{n-1} ... U_{i+1}
            prefix[p].resize(n);
            suffix[p].resize(n);
            prefix[p][0] = BlockUnitary::identity();
            for (std::size_t i = 1; i < n; ++i) prefix[p][i] = u[i - 1] * prefix[p][i - 1];
            suffix[p][n - 1] = BlockUnitary::identity();
            for (std::size_t i = n - 1; i-- > 0;) suffix[p][i] = suffix[p][i + 1] * u[i + 1];
        }

        std::vector<Eigen::Vector3d> grad(n, Eigen::Vector3d::Zero());
        auto work = [&](std::size_t begin, std::size_t end) {
            std::vector<Probabilities> probs(points);
            for (std::size_t i = begin; i < end; ++i) {
                for (int k = 0; k < 3; ++k) {
                    double f[2];
                    for (int side = 0; side < 2; ++side) {
                        const double shift = side == 0 ? epsilon : -epsilon;
                        for (std::size_t p = 0; p < points; ++p) {
                            SensorIsingGenerator g = generators[p][i];
                            g.field(k) += shift;
                            const BlockUnitary w = suffix[p][i] * BlockUnitary::exponential(g, tau) * prefix[p][i];
                            probs[p] = probabilities_after(setup_, w);
                        }
                        f[side] = objective_f0(cfim_from_stencil(probs, stencil_.steps, setup_.prob_floor)).value;
                    }
                    grad[i](k) = (f[0] - f[1]) / (2.0 * epsilon);
                }
            }
        };

        const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, n / 16));
        if (threads == 1) {
            work(0, n);
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (n + threads - 1) / threads;
            for (std::size_t t = 0; t < threads; ++t) {
                const std::size_t b = t * chunk, e = std::min(n, b + chunk);
                if (b < e) pool.emplace_back(work, b, e);
            }
            for (auto &th : pool) th.join();
        }
        return grad;
    }

   private:
    EstimationSetup setup_;
    Scenario scenario_;
    ParameterStencil stencil_;
};

inline double objective_of_schedule(const EstimationSetup &setup, const Scenario &s, const ControlSchedule &schedule) {
    return objective_f0(cfim(setup, s, schedule)).value;
}

inline std::vector<Eigen::Vector3d> gradient_fd(const EstimationSetup &setup, const Scenario &s,
                                                const ControlSchedule &schedule, double epsilon_fd) {
    return ObjectiveEvaluator(setup, s).gradient(schedule, epsilon_fd);
}

inline GrapeResult finalize_result(const ObjectiveEvaluator &eval, GrapeResult r) {
    r.final_cfim = eval.cfim(r.schedule);
    r.trace_inverse = trace_inverse(r.final_cfim);
    return r;
}

/// Gradient ascent on f0 with backtracking line search. Only improving steps
/// are accepted, so objective_trace is non-decreasing.
inline GrapeResult grape_optimize(const EstimationSetup &setup, const Scenario &s, const ControlSchedule &initial,
                                  const GrapeConfig &cfg, SeedProvenance provenance = SeedProvenance::explicit_schedule()) {
    cfg.validate();
    initial.validate();
    const ObjectiveEvaluator eval(setup, s);

    GrapeResult r;
    r.schedule = initial;
    r.seed_provenance = std::move(provenance);
    if (cfg.v_max) {
        for (auto &v : r.schedule.amplitudes) v = v.cwiseMax(-*cfg.v_max).cwiseMin(*cfg.v_max);
    }
    double f = eval.objective(r.schedule).value;
    r.objective_trace.push_back(f);

    int stall = 0;
    double last_step = 0.0;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const auto grad = eval.gradient(r.schedule, cfg.epsilon_for(r.schedule), cfg.workers);
        double eta = std::max(cfg.step_init, cfg.step_growth * last_step);
        double slope = 0.0;
        for (const auto &gi : grad) slope += gi.squaredNorm();
        bool accepted = false;
        ControlSchedule trial = r.schedule;
        double f_trial = f;
        while (eta >= 1e-12) {
            for (std::size_t i = 0; i < trial.slices(); ++i) {
                trial.amplitudes[i] = r.schedule.amplitudes[i] + eta * grad[i];
                if (cfg.v_max) trial.amplitudes[i] = trial.amplitudes[i].cwiseMax(-*cfg.v_max).cwiseMin(*cfg.v_max);
            }
            f_trial = eval.objective(trial).value;
            if (f_trial > f && f_trial >= f + cfg.sufficient_increase * eta * slope) {
                accepted = true;
                break;
            }
            eta *= cfg.backtrack_factor;
        }
        if (!accepted) {
            // No ascent direction left at this resolution; iteration 0 means
            // nothing was gained at all.
            r.converged = it > 0;
            return finalize_result(eval, std::move(r));
        }
        const double rel = (f_trial - f) / std::max(std::abs(f), 1e-300);
        r.schedule = std::move(trial);
        f = f_trial;
        last_step = eta;
        r.objective_trace.push_back(f);
        r.iterations = it + 1;
        stall = rel < cfg.rel_tol ? stall + 1 : 0;
        if (stall >= cfg.patience) {
            r.converged = true;
            break;
        }
    }
    return finalize_result(eval, std::move(r));
}

/// Optional persistence hooks for recursive_ladder. `reuse` may return a
/// previously stored result for a coupling; converged ones are taken as-is,
/// others are optimized further.
struct LadderHooks {
    std::function<std::optional<GrapeResult>(double coupling)> reuse;
    std::function<void(double coupling, const GrapeResult &)> on_result;
};

/// Warm-start ladder over ascending couplings at fixed (T, N). The first rung
/// starts from `first_seed` (the discretized analytic control when unset);
/// every later rung starts from the previous rung's optimized schedule.
inline std::map<double, GrapeResult> recursive_ladder(const EstimationSetup &setup, const Scenario &family,
                                                      const std::vector<double> &ladder, double total_time,
                                                      std::size_t n, const GrapeConfig &cfg,
                                                      std::optional<std::pair<ControlSchedule, SeedProvenance>> first_seed = {},
                                                      const LadderHooks &hooks = {}) {
    if (ladder.empty()) throw std::invalid_argument("ladder must not be empty");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] >= 0.0)) throw std::invalid_argument("ladder couplings must be >= 0");
        if (i > 0 && !(ladder[i] > ladder[i - 1])) throw std::invalid_argument("ladder must be strictly ascending");
    }
    std::map<double, GrapeResult> out;
    ControlSchedule seed;
    SeedProvenance provenance;
    if (first_seed) {
        seed = first_seed->first;
        provenance = first_seed->second;
        if (seed.slices() != n || seed.total_time != total_time)
            throw std::invalid_argument("first-rung seed does not match (T, N)");
    } else {
        seed = discretize_control(family.with_coupling(0.0), total_time, n);
        provenance = SeedProvenance::analytic();
    }
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        const double j = ladder[i];
        const Scenario s = family.with_coupling(j);
        std::optional<GrapeResult> stored = hooks.reuse ? hooks.reuse(j) : std::nullopt;
        GrapeResult r;
        if (stored && stored->converged) {
            r = finalize_result(ObjectiveEvaluator(setup, s), std::move(*stored));
            r.iterations = 0;
        } else if (stored) {
            r = grape_optimize(setup, s, stored->schedule, cfg, stored->seed_provenance);
        } else {
            r = grape_optimize(setup, s, seed, cfg, provenance);
        }
        if (hooks.on_result) hooks.on_result(j, r);
        seed = r.schedule;
        provenance = SeedProvenance::ladder(j, r.seed_provenance);
        out.emplace(j, std::move(r));
    }
    return out;
}

}  // namespace qsense
