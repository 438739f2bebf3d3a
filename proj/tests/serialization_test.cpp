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

#include "qsense/serialization.hpp"

#include <numbers>

#include "gtest/gtest.h"
#include "temp_dir.hpp"

using namespace qsense;
using std::numbers::pi;

TEST(ScenarioJson, round_trip_every_kind) {
    for (const auto &s : {Scenario::static_vector(1.0, pi / 4, pi / 4, 0.2), Scenario::circular_xz(1.0, 1.0, 10.0),
                          Scenario::circular_xy(0.3, 2.0), Scenario::linear_x(1.0, 100.0, 20.0)}) {
        const Scenario back = scenario_from_json(json::parse(to_json(s).dump()));
        EXPECT_EQ(back.kind, s.kind);
        EXPECT_EQ(back.params, s.params);
        EXPECT_EQ(back.coupling, s.coupling);
    }
}

TEST(ScenarioJson, diagnostics_name_the_field) {
    auto message = [](const char *text) {
        try {
            scenario_from_json(json::parse(text));
        } catch (const FormatError &e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message(R"({"kind":"helix","params":{}})").find("scenario.kind"), std::string::npos);
    EXPECT_NE(message(R"({"kind":"linear_x","params":{"B":1}})").find("'omega'"), std::string::npos);
    EXPECT_NE(message(R"({"kind":"linear_x","params":{"B":1,"omega":2,"phi":0}})").find("'phi'"), std::string::npos);
    EXPECT_NE(message(R"({"kind":"linear_x","params":{"B":"1","omega":2}})").find("expected a number"),
              std::string::npos);
    EXPECT_NE(message(R"({"kind":"linear_x","params":{"B":1,"omega":2},"J":-1})").find("scenario"),
              std::string::npos);
}

TEST(ScenarioHash, stable_and_coupling_independent) {
    const auto s = Scenario::static_vector(1.0, pi / 4, pi / 4, 0.2);
    EXPECT_EQ(scenario_hash(s), scenario_hash(s.with_coupling(0.0)));
    EXPECT_EQ(scenario_hash(s).size(), 16u);
    EXPECT_NE(scenario_hash(s), scenario_hash(Scenario::static_vector(1.0, pi / 4, pi / 5)));
    EXPECT_NE(scenario_hash(Scenario::circular_xz(1.0, 1.0)), scenario_hash(Scenario::circular_xy(1.0, 1.0)));
    // FNV-1a reference values.
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(ScheduleDocument, bit_exact_round_trip) {
    const auto s = Scenario::circular_xz(1.0, 1.0, 5.0);
    GrapeResult r;
    r.schedule = random_schedule(3.0, 37, 2.0, 11);
    r.schedule.amplitudes[3] = {0.1, 1.0 / 3.0, -1e-300};
    r.objective_trace = {1.0, 2.0 / 3.0 + 1.0};
    r.trace_inverse.value = 0.123456789012345678;
    r.seed_provenance = SeedProvenance::ladder(1.0, SeedProvenance::random(9));
    r.iterations = 1;
    r.converged = true;
    GrapeConfig cfg;
    cfg.v_max = 3.5;
    cfg.epsilon_fd = 1e-7;
    const ScheduleDocument back = schedule_document_from_json(json::parse(to_json(make_document(s, r, cfg, {})).dump()));
    EXPECT_EQ(back.schedule.amplitudes, r.schedule.amplitudes);
    EXPECT_EQ(back.schedule.total_time, 3.0);
    EXPECT_EQ(back.objective_trace, r.objective_trace);
    EXPECT_EQ(back.trace_inverse, r.trace_inverse.value);
    EXPECT_EQ(back.seed_provenance, r.seed_provenance);
    EXPECT_EQ(back.config.v_max, cfg.v_max);
    EXPECT_EQ(back.config.epsilon_fd, cfg.epsilon_fd);
    EXPECT_EQ(back.povm.axis, PovmAxis::diagonal);
    EXPECT_TRUE(back.converged);
    EXPECT_EQ(back.code_version, kCodeVersion);
}

TEST(ScheduleDocument, infinite_trace_inverse_survives) {
    ScheduleDocument d;
    d.scenario = Scenario::static_vector(1.0, 1.0, 0.0);
    d.schedule = ControlSchedule::zeros(1.0, 2);
    d.trace_inverse = std::numeric_limits<double>::infinity();
    EXPECT_TRUE(std::isinf(schedule_document_from_json(to_json(d)).trace_inverse));
}

TEST(ScheduleDocument, rejects_version_and_shape_errors) {
    ScheduleDocument d;
    d.scenario = Scenario::static_vector(1.0, 1.0, 0.0);
    d.schedule = ControlSchedule::zeros(1.0, 2);
    json j = to_json(d);
    json bad = j;
    bad["format_version"] = kScheduleFormatVersion + 1;
    EXPECT_THROW(schedule_document_from_json(bad), FormatError);
    bad = j;
    bad["N"] = 3;
    EXPECT_THROW(schedule_document_from_json(bad), FormatError);
    bad = j;
    bad["amplitudes"][1] = {1.0, 2.0};
    EXPECT_THROW(schedule_document_from_json(bad), FormatError);
    bad = j;
    bad["scenario_hash"] = "0000000000000000";
    EXPECT_THROW(schedule_document_from_json(bad), FormatError);
}

TEST(GrapeConfigJson, overlay_and_reject_unknown) {
    const GrapeConfig c = grape_config_from_json(json::parse(R"({"max_iters": 7, "v_max": 2.5})"));
    EXPECT_EQ(c.max_iters, 7);
    EXPECT_EQ(c.v_max, 2.5);
    EXPECT_EQ(c.patience, GrapeConfig{}.patience);
    EXPECT_THROW(grape_config_from_json(json::parse(R"({"maxiter": 7})")), FormatError);
    EXPECT_THROW(grape_config_from_json(json::parse(R"({"backtrack_factor": 2})")), FormatError);
    EXPECT_THROW(grape_config_from_json(json::parse(R"({"max_iters": 1.5})")), FormatError);
}

TEST(Files, atomic_write_and_read_back) {
    const TempDir dir;
    const auto path = dir.path() / "nested" / "f.json";
    write_file_atomic(path, "one");
    write_file_atomic(path, "two");
    EXPECT_EQ(read_file(path), "two");
    std::size_t entries = 0;
    for (const auto &e : std::filesystem::directory_iterator(path.parent_path())) {
        (void)e;
        ++entries;
    }
    EXPECT_EQ(entries, 1u);
}

TEST(Files, schedule_path_layout) {
    const auto s = Scenario::static_vector(1.0, pi / 4, pi / 4, 0.15);
    const auto p = schedule_path("store", s, 8.0, 200);
    EXPECT_EQ(p.filename().string(), scenario_hash(s) + "_J0.15_T8.0_N200.json");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
}
