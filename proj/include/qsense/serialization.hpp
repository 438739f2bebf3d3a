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

#ifndef QSENSE_SERIALIZATION_HPP
#define QSENSE_SERIALIZATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "qsense/grape.hpp"

namespace qsense {

using json = nlohmann::json;

inline constexpr int kScheduleFormatVersion = 1;
inline constexpr const char *kCodeVersion = "qsense 0.1.0";

/// Malformed document or configuration. The message names the offending field.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline const json &require(const json &j, const std::string &key, const std::string &where) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
    return j.at(key);
}

inline double require_number(const json &j, const std::string &key, const std::string &where) {
    const json &v = require(j, key, where);
    if (!v.is_number()) throw FormatError(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::string require_string(const json &j, const std::string &key, const std::string &where) {
    const json &v = require(j, key, where);
    if (!v.is_string()) throw FormatError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

}  // namespace detail

// ---- scenario -------------------------------------------------------------

inline json to_json(const Scenario &s) {
    json params = json::object();
    const auto names = parameter_names(s.kind);
    for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = s.params[i];
    return {{"kind", std::string(to_string(s.kind))}, {"params", params}, {"J", s.coupling}};
}

/// `J` is optional here (a ladder family has none); it defaults to 0.
inline Scenario scenario_from_json(const json &j, const std::string &where = "scenario") {
    Scenario s;
    try {
        s.kind = scenario_kind_from_string(detail::require_string(j, "kind", where));
    } catch (const std::invalid_argument &e) {
        throw FormatError(where + ".kind: " + e.what());
    }
    const json &params = detail::require(j, "params", where);
    if (!params.is_object()) throw FormatError(where + ".params: expected an object");
    const auto names = parameter_names(s.kind);
    for (const auto &[key, _] : params.items()) {
        if (std::find(names.begin(), names.end(), key) == names.end())
            throw FormatError(where + ".params: unknown parameter '" + key + "' for " + std::string(to_string(s.kind)));
    }
    for (const auto &name : names) s.params.push_back(detail::require_number(params, name, where + ".params"));
    s.coupling = j.contains("J") ? detail::require_number(j, "J", where) : 0.0;
    try {
        s.validate();
    } catch (const std::invalid_argument &e) {
        throw FormatError(where + ": " + e.what());
    }
    return s;
}

/// 64-bit FNV-1a over bytes.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stable identifier of a scenario family: the hash of its canonical
/// serialization with the coupling dropped, as 16 hex digits.
inline std::string scenario_hash(const Scenario &s) {
    json canonical = to_json(s);
    canonical.erase("J");
    std::ostringstream ss;
    ss << std::hex;
    ss.width(16);
    ss.fill('0');
    ss << fnv1a(canonical.dump());
    return ss.str();
}

// ---- small records ----------------------------------------------------------

inline json to_json(const PovmRotation &r) {
    return {{"axis", std::string(to_string(r.axis))},
            {"angle", r.angle},
            {"target", std::string(to_string(r.target))},
            {"provenance", r.provenance}};
}

inline PovmRotation povm_rotation_from_json(const json &j, const std::string &where = "povm") {
    PovmRotation r;
    try {
        r.axis = povm_axis_from_string(detail::require_string(j, "axis", where));
        r.target = rotation_target_from_string(detail::require_string(j, "target", where));
    } catch (const std::invalid_argument &e) {
        throw FormatError(where + ": " + e.what());
    }
    r.angle = detail::require_number(j, "angle", where);
    r.provenance = j.value("provenance", std::string("config"));
    return r;
}

inline json to_json(const GrapeConfig &c) {
    json j = {{"max_iters", c.max_iters},           {"rel_tol", c.rel_tol},
              {"patience", c.patience},             {"step_init", c.step_init},
              {"backtrack_factor", c.backtrack_factor}, {"step_growth", c.step_growth},
              {"sufficient_increase", c.sufficient_increase}, {"rng_seed", c.rng_seed}};
    j["epsilon_fd"] = c.epsilon_fd ? json(*c.epsilon_fd) : json(nullptr);
    j["v_max"] = c.v_max ? json(*c.v_max) : json(nullptr);
    return j;
}

/// Overlays the keys present in `j` on `base`; unknown keys are rejected.
inline GrapeConfig grape_config_from_json(const json &j, GrapeConfig base = {}, const std::string &where = "grape") {
    if (!j.is_object()) throw FormatError(where + ": expected an object");
    for (const auto &[key, value] : j.items()) {
        const std::string at = where + "." + key;
        auto number = [&]() {
            if (!value.is_number()) throw FormatError(at + ": expected a number");
            return value.get<double>();
        };
        auto integer = [&]() {
            if (!value.is_number_integer()) throw FormatError(at + ": expected an integer");
            return value.get<std::int64_t>();
        };
        if (key == "max_iters") base.max_iters = static_cast<int>(integer());
        else if (key == "rel_tol") base.rel_tol = number();
        else if (key == "patience") base.patience = static_cast<int>(integer());
        else if (key == "step_init") base.step_init = number();
        else if (key == "backtrack_factor") base.backtrack_factor = number();
        else if (key == "step_growth") base.step_growth = number();
        else if (key == "sufficient_increase") base.sufficient_increase = number();
        else if (key == "rng_seed") base.rng_seed = value.is_number_unsigned() ? value.get<std::uint64_t>() : static_cast<std::uint64_t>(integer());
        else if (key == "epsilon_fd") base.epsilon_fd = value.is_null() ? std::nullopt : std::optional(number());
        else if (key == "v_max") base.v_max = value.is_null() ? std::nullopt : std::optional(number());
        else if (key == "workers") base.workers = static_cast<unsigned>(integer());
        else throw FormatError(at + ": unknown field");
    }
    try {
        base.validate();
    } catch (const std::invalid_argument &e) {
        throw FormatError(where + ": " + e.what());
    }
    return base;
}

inline json to_json(const SeedProvenance &p) {
    static constexpr const char *kinds[] = {"analytic", "random", "ladder", "explicit"};
    return {{"kind", kinds[static_cast<int>(p.kind)]},
            {"seed", p.seed},
            {"previous_J", p.previous_coupling},
            {"chain", p.chain},
            {"describe", p.full_chain()}};
}

inline SeedProvenance seed_provenance_from_json(const json &j, const std::string &where = "seed_provenance") {
    SeedProvenance p;
    const std::string kind = detail::require_string(j, "kind", where);
    if (kind == "analytic") p.kind = SeedProvenance::Kind::analytic;
    else if (kind == "random") p.kind = SeedProvenance::Kind::random;
    else if (kind == "ladder") p.kind = SeedProvenance::Kind::ladder;
    else if (kind == "explicit") p.kind = SeedProvenance::Kind::explicit_schedule;
    else throw FormatError(where + ".kind: unknown value '" + kind + "'");
    p.seed = j.value("seed", std::uint64_t{0});
    p.previous_coupling = j.value("previous_J", 0.0);
    p.chain = j.value("chain", std::vector<std::string>{});
    return p;
}

// ---- schedule documents -------------------------------------------------------

/// One optimized (or analytic) control schedule with everything needed to
/// reproduce and audit it.
struct ScheduleDocument {
    Scenario scenario;
    ControlSchedule schedule;
    SeedProvenance seed_provenance;
    GrapeConfig config;
    PovmRotation povm;
    std::vector<double> objective_trace;
    double trace_inverse = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string code_version = kCodeVersion;
    /// Snapshot of the run that produced the schedule; null when made directly.
    json run_config;
};

inline ScheduleDocument make_document(const Scenario &s, const GrapeResult &r, const GrapeConfig &cfg,
                                      const PovmRotation &povm) {
    return {s, r.schedule, r.seed_provenance, cfg, povm, r.objective_trace, r.trace_inverse.value, r.iterations,
            r.converged};
}

/// Rebuilds a result; the CFIM is recomputed by the caller when needed.
inline GrapeResult to_result(const ScheduleDocument &d) {
    GrapeResult r;
    r.schedule = d.schedule;
    r.objective_trace = d.objective_trace;
    r.seed_provenance = d.seed_provenance;
    r.iterations = d.iterations;
    r.converged = d.converged;
    r.trace_inverse.value = d.trace_inverse;
    return r;
}

inline json to_json(const ScheduleDocument &d) {
    json amps = json::array();
    for (const auto &v : d.schedule.amplitudes) amps.push_back({v.x(), v.y(), v.z()});
    // +inf has no JSON literal.
    const json ti = std::isfinite(d.trace_inverse) ? json(d.trace_inverse) : json("inf");
    return {{"format_version", kScheduleFormatVersion},
            {"code_version", d.code_version},
            {"scenario", to_json(d.scenario)},
            {"scenario_hash", scenario_hash(d.scenario)},
            {"T", d.schedule.total_time},
            {"N", d.schedule.slices()},
            {"amplitudes", amps},
            {"seed_provenance", to_json(d.seed_provenance)},
            {"config", to_json(d.config)},
            {"povm", to_json(d.povm)},
            {"result",
             {{"objective_trace", d.objective_trace},
              {"trace_inverse", ti},
              {"iterations", d.iterations},
              {"converged", d.converged}}},
            {"run_config", d.run_config}};
}

inline ScheduleDocument schedule_document_from_json(const json &j) {
    const std::string where = "schedule";
    const json &version = detail::require(j, "format_version", where);
    if (!version.is_number_integer() || version.get<int>() != kScheduleFormatVersion)
        throw FormatError("schedule: format_version " + version.dump() + " is not supported (expected " +
                          std::to_string(kScheduleFormatVersion) + ")");
    ScheduleDocument d;
    d.code_version = j.value("code_version", std::string());
    d.scenario = scenario_from_json(detail::require(j, "scenario", where), "schedule.scenario");
    d.schedule.total_time = detail::require_number(j, "T", where);
    const json &amps = detail::require(j, "amplitudes", where);
    if (!amps.is_array()) throw FormatError("schedule.amplitudes: expected an array");
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const json &row = amps[i];
        if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() || !row[2].is_number())
            throw FormatError("schedule.amplitudes[" + std::to_string(i) + "]: expected three numbers");
        d.schedule.amplitudes.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
    }
    const json &n = detail::require(j, "N", where);
    if (!n.is_number_integer() || n.get<std::size_t>() != d.schedule.slices())
        throw FormatError("schedule.N: does not match the number of amplitude rows");
    try {
        d.schedule.validate();
    } catch (const std::invalid_argument &e) {
        throw FormatError(std::string("schedule: ") + e.what());
    }
    if (j.contains("scenario_hash") && j["scenario_hash"] != scenario_hash(d.scenario))
        throw FormatError("schedule.scenario_hash: does not match the embedded scenario");
    if (j.contains("seed_provenance")) d.seed_provenance = seed_provenance_from_json(j["seed_provenance"]);
    if (j.contains("config")) d.config = grape_config_from_json(j["config"], {}, "schedule.config");
    if (j.contains("povm")) d.povm = povm_rotation_from_json(j["povm"], "schedule.povm");
    if (j.contains("run_config")) d.run_config = j["run_config"];
    if (j.contains("result")) {
        const json &r = j["result"];
        d.objective_trace = r.value("objective_trace", std::vector<double>{});
        const json &ti = r.value("trace_inverse", json(0.0));
        d.trace_inverse = ti.is_string() ? std::numeric_limits<double>::infinity() : ti.get<double>();
        d.iterations = r.value("iterations", 0);
        d.converged = r.value("converged", false);
    }
    return d;
}

// ---- files ---------------------------------------------------------------------

/// Writes `text` to a sibling temporary and renames it over `path`, so a
/// concurrent reader sees either the old or the new file.
inline void write_file_atomic(const std::filesystem::path &path, const std::string &text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    thread_local std::mt19937_64 rng(std::random_device{}());
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(rng());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string &text, const std::string &where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw FormatError(where + ": " + e.what());
    }
}

inline void write_schedule_file(const std::filesystem::path &path, const ScheduleDocument &d) {
    write_file_atomic(path, to_json(d).dump(1) + "\n");
}

inline ScheduleDocument read_schedule_file(const std::filesystem::path &path) {
    return schedule_document_from_json(parse_json(read_file(path), path.string()));
}

/// Canonical decimal for file names and CSV cells: shortest round-trip form.
inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return json(v).dump();
}

/// <dir>/<hash>_J<J>_T<T>_N<N>.json
inline std::filesystem::path schedule_path(const std::filesystem::path &dir, const Scenario &s, double total_time,
                                           std::size_t n) {
    return dir / (scenario_hash(s) + "_J" + format_number(s.coupling) + "_T" + format_number(total_time) + "_N" +
                  std::to_string(n) + ".json");
}

}  // namespace qsense

#endif  // QSENSE_SERIALIZATION_HPP
