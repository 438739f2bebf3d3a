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

#ifndef QSENSE_RUNNER_HPP
#define QSENSE_RUNNER_HPP

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qsense/serialization.hpp"

namespace qsense {

/// How the first optimization of each run is seeded.
enum class InitialGuess { analytic, random };

struct RunConfig {
    /// Scenario family; its J is ignored in favour of `ladder`.
    Scenario scenario;
    std::vector<double> times;
    std::vector<double> ladder{0.0};
    std::optional<std::size_t> slices;
    GrapeConfig grape;
    /// Unset means run calibrate_povm() first.
    std::optional<PovmRotation> povm = PovmRotation{};
    InitialGuess initial = InitialGuess::analytic;
    /// Random initial amplitudes are uniform on [-scale, scale]; unset means 2 B.
    std::optional<double> random_scale;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "qsense_out";
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    /// Couplings left out of the combined sweep CSV (still run in the ladder).
    std::vector<double> sweep_omit;

    void validate() const {
        scenario.validate();
        if (times.empty()) throw FormatError("config.T: grid must not be empty");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!(times[i] > 0.0)) throw FormatError("config.T: times must be > 0");
            if (i > 0 && !(times[i] > times[i - 1])) throw FormatError("config.T: grid must be strictly ascending");
        }
        if (ladder.empty()) throw FormatError("config.ladder: must not be empty");
        for (std::size_t i = 0; i < ladder.size(); ++i) {
            if (!(ladder[i] >= 0.0)) throw FormatError("config.ladder: couplings must be >= 0");
            if (i > 0 && !(ladder[i] > ladder[i - 1])) throw FormatError("config.ladder: must be strictly ascending");
        }
        if (slices && *slices == 0) throw FormatError("config.N: must be >= 1");
        if (random_scale && !(*random_scale >= 0.0)) throw FormatError("config.random_scale: must be >= 0");
        if (workers == 0) throw FormatError("config.workers: must be >= 1");
    }

    double amplitude_scale() const { return random_scale ? *random_scale : 2.0 * scenario.params[0]; }

    /// One N per T, shared by every rung, resolved at the largest coupling.
    std::size_t slices_for(double total_time) const {
        return slices ? *slices : default_slice_count(scenario.with_coupling(ladder.back()), total_time);
    }
};

namespace detail {

inline std::vector<double> number_list(const json &j, const std::string &where) {
    std::vector<double> out;
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw FormatError(where + ": expected a number or a list of numbers");
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw FormatError(where + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(j[i].get<double>());
    }
    return out;
}

/// {"start": a, "stop": b, "step": h} -> a, a + h, ..., b (inclusive within
/// h/1000). Points are rounded to 12 decimals so 0.2 * 3 reads back as 0.6.
inline std::vector<double> time_grid(const json &j, const std::string &where) {
    if (!j.is_object()) return number_list(j, where);
    const double a = require_number(j, "start", where), b = require_number(j, "stop", where),
                 h = require_number(j, "step", where);
    if (!(h > 0.0) || !(b >= a)) throw FormatError(where + ": need step > 0 and stop >= start");
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::floor((b - a) / h + 1e-3));
    for (std::size_t i = 0; i <= count; ++i)
        out.push_back(std::round((a + static_cast<double>(i) * h) * 1e12) / 1e12);
    return out;
}

}  // namespace detail

inline RunConfig run_config_from_json(const json &j) {
    if (!j.is_object()) throw FormatError("config: expected an object at top level");
    static const std::set<std::string> known{"scenario", "T",    "ladder", "N",       "grape",      "povm",
                                             "initial",  "random_scale", "seed", "output_dir", "workers",
                                             "sweep_omit"};
    for (const auto &[key, _] : j.items())
        if (!known.count(key)) throw FormatError("config." + key + ": unknown field");

    RunConfig c;
    c.scenario = scenario_from_json(detail::require(j, "scenario", "config"), "config.scenario");
    c.times = detail::time_grid(detail::require(j, "T", "config"), "config.T");
    if (j.contains("ladder")) c.ladder = detail::number_list(j["ladder"], "config.ladder");
    else c.ladder = {c.scenario.coupling};
    if (j.contains("N") && !j["N"].is_null()) {
        if (!j["N"].is_number_integer() || j["N"].get<std::int64_t>() < 1)
            throw FormatError("config.N: expected a positive integer");
        c.slices = j["N"].get<std::size_t>();
    }
    if (j.contains("grape")) c.grape = grape_config_from_json(j["grape"], {}, "config.grape");
    if (j.contains("povm")) {
        const json &p = j["povm"];
        if (p == "calibrate") c.povm.reset();
        else if (p == "default") c.povm = PovmRotation{};
        else if (p.is_object()) c.povm = povm_rotation_from_json(p, "config.povm");
        else throw FormatError("config.povm: expected \"default\", \"calibrate\" or an object");
    }
    if (j.contains("initial")) {
        const json &v = j["initial"];
        if (v == "analytic") c.initial = InitialGuess::analytic;
        else if (v == "random") c.initial = InitialGuess::random;
        else throw FormatError("config.initial: expected \"analytic\" or \"random\"");
    }
    if (j.contains("random_scale")) c.random_scale = detail::require_number(j, "random_scale", "config");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer()) throw FormatError("config.seed: expected a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("output_dir")) c.output_dir = detail::require_string(j, "output_dir", "config");
    if (j.contains("workers")) {
        if (!j["workers"].is_number_integer() || j["workers"].get<std::int64_t>() < 1)
            throw FormatError("config.workers: expected a positive integer");
        c.workers = j["workers"].get<unsigned>();
    }
    if (j.contains("sweep_omit")) c.sweep_omit = detail::number_list(j["sweep_omit"], "config.sweep_omit");
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path &path) {
    return run_config_from_json(parse_json(read_file(path), path.string()));
}

inline json to_json(const RunConfig &c) {
    json j = {{"scenario", to_json(c.scenario)},
              {"T", c.times},
              {"ladder", c.ladder},
              {"grape", to_json(c.grape)},
              {"initial", c.initial == InitialGuess::analytic ? "analytic" : "random"},
              {"random_scale", c.amplitude_scale()},
              {"seed", c.seed},
              {"sweep_omit", c.sweep_omit}};
    j["N"] = c.slices ? json(*c.slices) : json(nullptr);
    j["povm"] = c.povm ? to_json(*c.povm) : json("calibrate");
    return j;
}

// ---- sweep records ---------------------------------------------------------------

struct SweepRecord {
    ScenarioKind kind{};
    double coupling = 0.0;
    double total_time = 0.0;
    std::size_t slices = 0;
    double trace_inverse_baseline = 0.0;
    /// Unset for baseline-only records.
    std::optional<double> trace_inverse_grape;
    std::optional<double> f0_grape;
    double bound_j0 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string seed_provenance;
};

inline std::string sweep_records_csv(const std::vector<SweepRecord> &records) {
    std::ostringstream out;
    out << "kind,J,T,N,trace_inverse_baseline,trace_inverse_grape,f0_grape,bound_J0,iterations,converged,"
           "seed_provenance\n";
    for (const auto &r : records) {
        out << to_string(r.kind) << ',' << format_number(r.coupling) << ',' << format_number(r.total_time) << ','
            << r.slices << ',' << format_number(r.trace_inverse_baseline) << ','
            << (r.trace_inverse_grape ? format_number(*r.trace_inverse_grape) : "") << ','
            << (r.f0_grape ? format_number(*r.f0_grape) : "") << ',' << format_number(r.bound_j0) << ','
            << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.seed_provenance << '\n';
    }
    return out.str();
}

// ---- POVM calibration --------------------------------------------------------

struct CalibrationCandidate {
    PovmRotation rotation;
    double f0 = 0.0;
    double trace_inverse = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationCandidate> candidates;
    /// Index into candidates.
    std::size_t winner = 0;
    bool ok = false;

    const CalibrationCandidate &best() const { return candidates.at(winner); }
};

inline constexpr double kCalibrationTolerance = 0.05;

/// Scores every rotated Bell measurement at the static J=0 reference
/// (B=1, theta=phi=pi/4, T=1, analytic control), where the optimum is
/// Tr F^-1 = 1. The f0 maximizer wins; ties keep the earlier candidate.
/// `unrotated` adds angle-0 rows for comparison; they never win.
inline CalibrationReport calibrate_povm(bool unrotated = false) {
    const Scenario ref = Scenario::static_vector(1.0, std::numbers::pi / 4, std::numbers::pi / 4, 0.0);
    const ControlSchedule sched = discretize_control(ref, 1.0, default_slice_count(ref, 1.0));
    CalibrationReport report;
    auto score = [&](const PovmRotation &rot) {
        EstimationSetup setup;
        setup.povm = rotated_bell_povm(rot);
        const Cfim f = cfim(setup, ref, sched);
        return CalibrationCandidate{rot, objective_f0(f).value, trace_inverse(f).value};
    };
    bool have = false;
    for (auto axis : {PovmAxis::x, PovmAxis::y, PovmAxis::z, PovmAxis::diagonal}) {
        for (auto target : {RotationTarget::sensor, RotationTarget::both}) {
            report.candidates.push_back(score({axis, std::numbers::pi / 3, target, "candidate"}));
            if (!have || report.candidates.back().f0 > report.candidates[report.winner].f0) {
                report.winner = report.candidates.size() - 1;
                have = true;
            }
        }
    }
    if (unrotated) {
        for (auto target : {RotationTarget::sensor, RotationTarget::both})
            report.candidates.push_back(score({PovmAxis::z, 0.0, target, "unrotated"}));
    }
    auto &w = report.candidates[report.winner];
    std::ostringstream prov;
    prov << "calibrated(" << to_string(w.rotation.axis) << "," << to_string(w.rotation.target) << ")";
    w.rotation.provenance = prov.str();
    report.ok = std::abs(w.trace_inverse - 1.0) <= kCalibrationTolerance;
    return report;
}

inline std::string calibration_report_text(const CalibrationReport &r) {
    std::ostringstream out;
    out << "axis,target,angle,f0,trace_inverse\n";
    for (const auto &c : r.candidates)
        out << to_string(c.rotation.axis) << ',' << to_string(c.rotation.target) << ','
            << format_number(c.rotation.angle) << ',' << format_number(c.f0) << ',' << format_number(c.trace_inverse)
            << '\n';
    return out.str();
}

// ---- execution context -----------------------------------------------------------

struct CalibrationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Resolved inputs shared by every command.
class Runner {
   public:
    explicit Runner(RunConfig cfg, std::ostream &log = std::cerr) : cfg_(std::move(cfg)), log_(&log) {
        cfg_.validate();
        if (!cfg_.povm) {
            const CalibrationReport report = calibrate_povm();
            if (!report.ok) throw CalibrationFailure(calibration_failure_message(report));
            cfg_.povm = report.best().rotation;
        }
        setup_.povm = rotated_bell_povm(*cfg_.povm);
    }

    const RunConfig &config() const { return cfg_; }
    const EstimationSetup &setup() const { return setup_; }
    /// Randomly seeded ladders get their own store so they never warm-start
    /// from analytic ones.
    std::filesystem::path schedule_dir() const {
        if (cfg_.initial == InitialGuess::random) return cfg_.output_dir / ("schedules_random" + std::to_string(cfg_.seed));
        return cfg_.output_dir / "schedules";
    }

    ScheduleDocument document(const Scenario &s, const GrapeResult &r) const {
        ScheduleDocument d = make_document(s, r, cfg_.grape, *cfg_.povm);
        d.run_config = to_json(cfg_);
        return d;
    }

    static std::string calibration_failure_message(const CalibrationReport &r) {
        std::ostringstream out;
        out << "POVM calibration failed: best candidate (" << to_string(r.best().rotation.axis) << ", "
            << to_string(r.best().rotation.target) << ") gives Tr F^-1 = " << r.best().trace_inverse
            << " at the reference point, outside 1 +/- " << kCalibrationTolerance;
        return out.str();
    }

    SweepRecord baseline_record(double j, double total_time) const {
        const Scenario s = cfg_.scenario.with_coupling(j);
        const std::size_t n = cfg_.slices_for(total_time);
        SweepRecord r;
        r.kind = s.kind;
        r.coupling = j;
        r.total_time = total_time;
        r.slices = n;
        r.trace_inverse_baseline = trace_inverse(cfim(setup_, s, discretize_control(s, total_time, n))).value;
        r.bound_j0 = precision_bound(s, total_time);
        r.seed_provenance = "analytic";
        return r;
    }

    /// Runs `fn(i)` for i in [0, count) on up to `workers` threads. Results
    /// are written by index, so the output order never depends on scheduling.
    void parallel_for(std::size_t count, const std::function<void(std::size_t)> &fn) const {
        const std::size_t threads = std::min<std::size_t>(cfg_.workers, count);
        if (threads <= 1) {
            for (std::size_t i = 0; i < count; ++i) fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto &th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    /// Loads a persisted rung; unreadable or mismatched files are reported and
    /// ignored so the rung is recomputed.
    std::optional<GrapeResult> load_persisted(const Scenario &s, double total_time, std::size_t n) const {
        const auto path = schedule_path(schedule_dir(), s, total_time, n);
        if (!std::filesystem::exists(path)) return std::nullopt;
        try {
            const ScheduleDocument d = read_schedule_file(path);
            if (scenario_hash(d.scenario) != scenario_hash(s) || d.scenario.coupling != s.coupling ||
                d.schedule.total_time != total_time || d.schedule.slices() != n)
                throw FormatError("stored scenario, T or N differs from the request");
            return to_result(d);
        } catch (const std::exception &e) {
            std::lock_guard lock(log_mutex_);
            *log_ << "warning: ignoring " << path.string() << ": " << e.what() << "\n";
            return std::nullopt;
        }
    }

    void persist(const Scenario &s, const GrapeResult &r) const {
        write_schedule_file(schedule_path(schedule_dir(), s, r.schedule.total_time, r.schedule.slices()),
                            document(s, r));
    }

    /// Full ladder at one T, with persisted rungs reused.
    std::map<double, GrapeResult> ladder_at(double total_time) const {
        const std::size_t n = cfg_.slices_for(total_time);
        LadderHooks hooks;
        hooks.reuse = [&](double j) { return load_persisted(cfg_.scenario.with_coupling(j), total_time, n); };
        hooks.on_result = [&](double j, const GrapeResult &r) { persist(cfg_.scenario.with_coupling(j), r); };
        std::optional<std::pair<ControlSchedule, SeedProvenance>> first;
        if (cfg_.initial == InitialGuess::random)
            first.emplace(random_schedule(total_time, n, cfg_.amplitude_scale(), cfg_.seed),
                          SeedProvenance::random(cfg_.seed));
        return recursive_ladder(setup_, cfg_.scenario, cfg_.ladder, total_time, n, cfg_.grape, first, hooks);
    }

    SweepRecord grape_record(double j, double total_time, const GrapeResult &g) const {
        SweepRecord r = baseline_record(j, total_time);
        r.trace_inverse_grape = g.trace_inverse.value;
        r.f0_grape = g.final_objective();
        r.iterations = g.iterations;
        r.converged = g.converged;
        r.seed_provenance = g.seed_provenance.describe();
        return r;
    }

   private:
    RunConfig cfg_;
    EstimationSetup setup_;
    std::ostream *log_;
    mutable std::mutex log_mutex_;
};

// ---- commands ------------------------------------------------------------------

/// Baseline columns for every (J, T), J-major.
inline std::vector<SweepRecord> cmd_baseline(const Runner &runner) {
    const auto &c = runner.config();
    std::vector<SweepRecord> out(c.ladder.size() * c.times.size());
    runner.parallel_for(out.size(), [&](std::size_t k) {
        out[k] = runner.baseline_record(c.ladder[k / c.times.size()], c.times[k % c.times.size()]);
    });
    write_file_atomic(c.output_dir / "baseline.csv", sweep_records_csv(out));
    return out;
}

/// Independent GRAPE runs for every (J, T) from the configured initial guess,
/// without ladder seeding.
inline std::vector<SweepRecord> cmd_optimize(const Runner &runner) {
    const auto &c = runner.config();
    std::vector<SweepRecord> out(c.ladder.size() * c.times.size());
    runner.parallel_for(out.size(), [&](std::size_t k) {
        const double j = c.ladder[k / c.times.size()], t = c.times[k % c.times.size()];
        const Scenario s = c.scenario.with_coupling(j);
        const std::size_t n = c.slices_for(t);
        GrapeResult r;
        if (c.initial == InitialGuess::random)
            r = grape_optimize(runner.setup(), s, random_schedule(t, n, c.amplitude_scale(), c.seed), c.grape,
                               SeedProvenance::random(c.seed));
        else
            r = grape_optimize(runner.setup(), s, discretize_control(s, t, n), c.grape, SeedProvenance::analytic());
        write_schedule_file(schedule_path(c.output_dir / "optimize", s, t, n),
                            runner.document(s, r));
        out[k] = runner.grape_record(j, t, r);
    });
    write_file_atomic(c.output_dir / "optimize.csv", sweep_records_csv(out));
    return out;
}

/// Recursive ladder per T with persisted warm starts; records are J-major.
inline std::vector<SweepRecord> cmd_ladder(const Runner &runner) {
    const auto &c = runner.config();
    std::vector<std::map<double, GrapeResult>> per_time(c.times.size());
    runner.parallel_for(c.times.size(), [&](std::size_t i) { per_time[i] = runner.ladder_at(c.times[i]); });
    std::vector<SweepRecord> out;
    for (double j : c.ladder)
        for (std::size_t i = 0; i < c.times.size(); ++i) out.push_back(runner.grape_record(j, c.times[i], per_time[i].at(j)));
    write_file_atomic(c.output_dir / "ladder.csv", sweep_records_csv(out));
    return out;
}

/// Wide table for plotting: T, then (baseline, grape, bound) per coupling.
inline std::string sweep_table_csv(const RunConfig &c, const std::vector<SweepRecord> &records) {
    std::vector<double> shown;
    for (double j : c.ladder)
        if (std::find(c.sweep_omit.begin(), c.sweep_omit.end(), j) == c.sweep_omit.end()) shown.push_back(j);
    std::ostringstream out;
    out << "T";
    for (double j : shown) {
        const std::string tag = format_number(j);
        out << ",baseline_J" << tag << ",grape_J" << tag << ",bound_J" << tag;
    }
    out << '\n';
    for (double t : c.times) {
        out << format_number(t);
        for (double j : shown) {
            const auto it = std::find_if(records.begin(), records.end(),
                                         [&](const SweepRecord &r) { return r.coupling == j && r.total_time == t; });
            if (it == records.end()) throw std::logic_error("sweep: missing record");
            out << ',' << format_number(it->trace_inverse_baseline) << ','
                << (it->trace_inverse_grape ? format_number(*it->trace_inverse_grape) : "") << ','
                << format_number(it->bound_j0);
        }
        out << '\n';
    }
    return out.str();
}

inline std::string cmd_sweep(const Runner &runner) {
    const auto records = cmd_ladder(runner);
    const std::string table = sweep_table_csv(runner.config(), records);
    write_file_atomic(runner.config().output_dir /
                          ("sweep_" + std::string(to_string(runner.config().scenario.kind)) + ".csv"),
                      table);
    return table;
}

struct WaveformSummary {
    double max_abs_a = 0.0;
    std::optional<double> max_abs_b;
    std::optional<double> l2_distance;
};

/// Per-slice waveform table; with a second schedule the two must share a
/// time grid.
inline std::string dump_controls_csv(const ControlSchedule &a, const ControlSchedule *b, WaveformSummary *summary = nullptr) {
    if (b && (b->slices() != a.slices() || b->total_time != a.total_time))
        throw std::invalid_argument("dump-controls: schedules have different T or N");
    std::ostringstream out;
    out << "t_midpoint,Vx_a,Vy_a,Vz_a";
    if (b) out << ",Vx_b,Vy_b,Vz_b";
    out << '\n';
    for (std::size_t i = 0; i < a.slices(); ++i) {
        out << format_number(a.midpoint(i));
        for (int k = 0; k < 3; ++k) out << ',' << format_number(a.amplitudes[i](k));
        if (b)
            for (int k = 0; k < 3; ++k) out << ',' << format_number(b->amplitudes[i](k));
        out << '\n';
    }
    if (summary) {
        summary->max_abs_a = a.max_abs();
        if (b) {
            summary->max_abs_b = b->max_abs();
            summary->l2_distance = l2_distance(a, *b);
        }
    }
    return out.str();
}

inline std::string cmd_dump_controls(const std::filesystem::path &a, const std::optional<std::filesystem::path> &b,
                                     WaveformSummary *summary = nullptr) {
    const ScheduleDocument da = read_schedule_file(a);
    std::optional<ScheduleDocument> db;
    if (b) db = read_schedule_file(*b);
    return dump_controls_csv(da.schedule, db ? &db->schedule : nullptr, summary);
}

inline std::string summary_text(const WaveformSummary &s) {
    std::ostringstream out;
    out << "max_abs_a=" << format_number(s.max_abs_a);
    if (s.max_abs_b) out << " max_abs_b=" << format_number(*s.max_abs_b);
    if (s.l2_distance) out << " l2_distance=" << format_number(*s.l2_distance);
    return out.str();
}

/// Writes the winning rotation to <out>/povm.json; throws CalibrationFailure
/// when no candidate reaches the reference value.
inline CalibrationReport cmd_calibrate_povm(const std::filesystem::path &output_dir, bool unrotated = false) {
    CalibrationReport report = calibrate_povm(unrotated);
    write_file_atomic(output_dir / "povm_calibration.csv", calibration_report_text(report));
    if (!report.ok) throw CalibrationFailure(Runner::calibration_failure_message(report));
    write_file_atomic(output_dir / "povm.json", to_json(report.best().rotation).dump(1) + "\n");
    return report;
}

}  // namespace qsense

#endif  // QSENSE_RUNNER_HPP
