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

#include "qsense/runner.hpp"

#include <numbers>

#include "gtest/gtest.h"
#include "temp_dir.hpp"

using namespace qsense;
using std::numbers::pi;

namespace {

const char *kStaticConfig = R"({
  "scenario": {"kind": "static_vector",
               "params": {"B": 1.0, "theta": 0.7853981633974483, "phi": 0.7853981633974483}},
  "T": {"start": 1, "stop": 10, "step": 1},
  "ladder": [0.01, 0.1, 0.15, 0.2]
})";

RunConfig static_config(const TempDir &dir) {
    RunConfig c = run_config_from_json(json::parse(kStaticConfig));
    c.output_dir = dir.path();
    c.workers = 2;
    return c;
}

std::string config_error(const std::string &text) {
    try {
        run_config_from_json(parse_json(text, "cfg.json"));
    } catch (const FormatError &e) {
        return e.what();
    }
    return "no error";
}

std::size_t count(const std::string &s, char c) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), c)); }

}  // namespace

TEST(RunConfig, parses_reference_config) {
    const RunConfig c = run_config_from_json(json::parse(kStaticConfig));
    EXPECT_EQ(c.times, (std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    EXPECT_EQ(c.ladder, (std::vector<double>{0.01, 0.1, 0.15, 0.2}));
    EXPECT_EQ(c.scenario.kind, ScenarioKind::StaticVector);
    EXPECT_TRUE(c.povm.has_value());
    EXPECT_EQ(c.amplitude_scale(), 2.0);
    EXPECT_EQ(c.slices_for(8.0), 200u);
}

TEST(RunConfig, time_grid_points_are_clean_decimals) {
    const auto grid = detail::time_grid(json::parse(R"({"start": 0.2, "stop": 1.6, "step": 0.2})"), "T");
    ASSERT_EQ(grid.size(), 8u);
    EXPECT_EQ(grid[2], 0.6);
    EXPECT_EQ(grid[7], 1.6);
    EXPECT_EQ(format_number(grid[2]), "0.6");
}

TEST(RunConfig, ladder_defaults_to_scenario_coupling) {
    const RunConfig c = run_config_from_json(json::parse(
        R"({"scenario": {"kind": "linear_x", "params": {"B": 1, "omega": 100}, "J": 20}, "T": 1.6, "povm": "calibrate"})"));
    EXPECT_EQ(c.ladder, std::vector<double>{20.0});
    EXPECT_FALSE(c.povm.has_value());
}

TEST(RunConfig, diagnostics) {
    EXPECT_NE(config_error("{\n \"T\": [1,\n}").find("line 3"), std::string::npos);
    EXPECT_NE(config_error(R"({"T": [1]})").find("'scenario'"), std::string::npos);
    const std::string scenario = R"("scenario": {"kind": "circular_xz", "params": {"B": 1, "omega": 1}})";
    EXPECT_NE(config_error("{" + scenario + R"(, "T": [2, 1]})").find("config.T"), std::string::npos);
    EXPECT_NE(config_error("{" + scenario + R"(, "T": 1, "ladder": [1, 0.5]})").find("ladder"), std::string::npos);
    EXPECT_NE(config_error("{" + scenario + R"(, "T": 1, "grape": {"step": 1}})").find("config.grape.step"),
              std::string::npos);
    EXPECT_NE(config_error("{" + scenario + R"(, "T": 1, "typo": 1})").find("config.typo"), std::string::npos);
    EXPECT_NE(config_error("{" + scenario + R"(, "T": 1, "povm": {"axis": "w", "angle": 1, "target": "sensor"}})")
                  .find("config.povm"),
              std::string::npos);
}

TEST(CmdBaseline, static_reference_values) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.ladder = {0.0, 0.2};
    const Runner runner(c);
    const auto records = cmd_baseline(runner);
    ASSERT_EQ(records.size(), 20u);
    for (std::size_t i = 0; i < 10; ++i) {
        const double t = static_cast<double>(i + 1);
        EXPECT_EQ(records[i].coupling, 0.0);
        EXPECT_NEAR(records[i].trace_inverse_baseline, 1.0 / (t * t), 0.02 / (t * t));
        EXPECT_DOUBLE_EQ(records[i].bound_j0, 1.0 / (t * t));
        EXPECT_FALSE(records[i].trace_inverse_grape.has_value());
    }
    EXPECT_NEAR(records[17].trace_inverse_baseline, 35.2, 3.52);
    EXPECT_EQ(records[17].total_time, 8.0);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "baseline.csv"));
}

TEST(CmdBaseline, csv_is_byte_identical_across_runs_and_workers) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    const std::string a = sweep_records_csv(cmd_baseline(Runner(c)));
    c.workers = 1;
    const std::string b = sweep_records_csv(cmd_baseline(Runner(c)));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, read_file(dir.path() / "baseline.csv"));
    EXPECT_EQ(count(a, '\n'), 41u);
}

TEST(CmdLadder, zero_rung_matches_baseline_and_reuses_store) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.ladder = {0.0};
    c.times = {2.0, 4.0};
    c.grape.max_iters = 50;
    const Runner runner(c);
    const auto first = cmd_ladder(runner);
    ASSERT_EQ(first.size(), 2u);
    for (const auto &r : first) EXPECT_NEAR(*r.trace_inverse_grape, r.trace_inverse_baseline, 0.01 * r.trace_inverse_baseline);
    const auto again = cmd_ladder(runner);
    for (std::size_t i = 0; i < 2; ++i) {
        if (first[i].converged) EXPECT_EQ(again[i].iterations, 0);
        EXPECT_GE(*again[i].f0_grape, *first[i].f0_grape);
    }
}

TEST(CmdLadder, warm_start_never_degrades_and_survives_corruption) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.ladder = {0.05, 0.1};
    c.times = {3.0};
    c.grape.max_iters = 3;
    std::ostringstream log;
    const Runner runner(c, log);
    const auto first = cmd_ladder(runner);
    const auto second = cmd_ladder(runner);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_GE(*second[i].f0_grape, *first[i].f0_grape);
    EXPECT_TRUE(log.str().empty());

    const auto path = schedule_path(runner.schedule_dir(), c.scenario.with_coupling(0.05), 3.0, c.slices_for(3.0));
    ASSERT_TRUE(std::filesystem::exists(path));
    json doc = json::parse(read_file(path));
    doc["format_version"] = 99;
    write_file_atomic(path, doc.dump());
    const auto third = cmd_ladder(runner);
    EXPECT_NE(log.str().find("format_version"), std::string::npos);
    EXPECT_EQ(third[0].seed_provenance, "analytic");
    EXPECT_EQ(read_schedule_file(path).schedule.slices(), c.slices_for(3.0));
}

TEST(CmdLadder, persisted_files_embed_run_metadata) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.ladder = {0.1};
    c.times = {1.0};
    c.grape.max_iters = 2;
    const Runner runner(c);
    cmd_ladder(runner);
    const json doc = json::parse(read_file(schedule_path(runner.schedule_dir(), c.scenario.with_coupling(0.1), 1.0, 200)));
    EXPECT_EQ(doc["format_version"], kScheduleFormatVersion);
    EXPECT_EQ(doc["code_version"], kCodeVersion);
    EXPECT_EQ(doc["N"], 200);
    EXPECT_EQ(doc["config"]["max_iters"], 2);
    EXPECT_EQ(doc["povm"]["axis"], "xyz");
    EXPECT_EQ(doc["run_config"]["ladder"], json::array({0.1}));
    EXPECT_EQ(doc["seed_provenance"]["kind"], "analytic");
}

TEST(CmdSweep, table_shape_and_preset) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.grape.max_iters = 0;
    std::string table = sweep_table_csv(c, cmd_ladder(Runner(c)));
    EXPECT_EQ(count(table, '\n'), 11u);
    const std::string header = table.substr(0, table.find('\n'));
    EXPECT_EQ(count(header, ',') + 1, 13u);
    EXPECT_EQ(header.substr(0, 31), "T,baseline_J0.01,grape_J0.01,bo");

    c.sweep_omit = {0.15};
    table = cmd_sweep(Runner(c));
    EXPECT_EQ(count(table.substr(0, table.find('\n')), ',') + 1, 10u);
    EXPECT_EQ(table.find("J0.15"), std::string::npos);
    EXPECT_EQ(table, read_file(dir.path() / "sweep_static_vector.csv"));
}

TEST(CmdSweep, bound_columns_ignore_coupling) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.times = {2.0, 5.0};
    c.ladder = {0.0, 0.3};
    c.grape.max_iters = 0;
    for (const auto &line : {std::string("2.0,"), std::string("5.0,")}) {
        const std::string table = sweep_table_csv(c, cmd_ladder(Runner(c)));
        const auto row = table.substr(table.find(line));
        std::vector<std::string> cells;
        std::stringstream ss(row.substr(0, row.find('\n')));
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        ASSERT_EQ(cells.size(), 7u);
        EXPECT_EQ(cells[3], cells[6]);
    }
}

TEST(CmdOptimize, random_initial_guess_is_recorded) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.ladder = {0.1};
    c.times = {2.0};
    c.initial = InitialGuess::random;
    c.seed = 42;
    c.grape.max_iters = 3;
    const auto records = cmd_optimize(Runner(c));
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].seed_provenance, "random(42)");
    const auto doc = read_schedule_file(schedule_path(dir.path() / "optimize", c.scenario.with_coupling(0.1), 2.0, 200));
    EXPECT_EQ(doc.seed_provenance, SeedProvenance::random(42));
}

TEST(DumpControls, analytic_static_schedule) {
    const TempDir dir;
    ScheduleDocument d;
    d.scenario = Scenario::static_vector(1.0, pi / 4, pi / 4);
    d.schedule = discretize_control(d.scenario, 10.0, 200);
    const auto path = dir.path() / "a.json";
    write_schedule_file(path, d);
    WaveformSummary summary;
    const std::string csv = cmd_dump_controls(path, path, &summary);
    EXPECT_EQ(count(csv, '\n'), 201u);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t_midpoint,Vx_a,Vy_a,Vz_a,Vx_b,Vy_b,Vz_b");
    const std::size_t first = csv.find('\n') + 1;
    std::stringstream row(csv.substr(first, csv.find('\n', first) - first));
    std::vector<double> cells;
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(std::stod(cell));
    const std::vector<double> expected{0.025, -0.5, -0.5, -1.0 / std::numbers::sqrt2, -0.5, -0.5, -1.0 / std::numbers::sqrt2};
    ASSERT_EQ(cells.size(), expected.size());
    for (std::size_t k = 0; k < cells.size(); ++k) EXPECT_NEAR(cells[k], expected[k], 1e-15);
    EXPECT_EQ(*summary.l2_distance, 0.0);
    EXPECT_NEAR(summary.max_abs_a, 1.0 / std::numbers::sqrt2, 1e-15);
}

TEST(DumpControls, version_mismatch_is_an_error) {
    const TempDir dir;
    ScheduleDocument d;
    d.scenario = Scenario::static_vector(1.0, pi / 4, pi / 4);
    d.schedule = discretize_control(d.scenario, 1.0, 4);
    json j = to_json(d);
    j["format_version"] = 0;
    write_file_atomic(dir.path() / "old.json", j.dump());
    EXPECT_THROW(cmd_dump_controls(dir.path() / "old.json", std::nullopt), FormatError);
    const ControlSchedule other = ControlSchedule::zeros(1.0, 5);
    EXPECT_THROW(dump_controls_csv(d.schedule, &other), std::invalid_argument);
}

TEST(CalibratePovm, selects_candidate_reaching_reference) {
    const TempDir dir;
    const CalibrationReport report = cmd_calibrate_povm(dir.path(), true);
    ASSERT_TRUE(report.ok);
    EXPECT_NEAR(report.best().trace_inverse, 1.0, 0.05);
    EXPECT_EQ(report.candidates.size(), 10u);
    for (std::size_t i = 8; i < 10; ++i) EXPECT_LT(report.candidates[i].f0, report.best().f0);
    EXPECT_EQ(cmd_calibrate_povm(dir.path()).winner, report.winner);
    const PovmRotation stored = povm_rotation_from_json(json::parse(read_file(dir.path() / "povm.json")));
    EXPECT_EQ(stored.axis, report.best().rotation.axis);
    EXPECT_EQ(stored.target, report.best().rotation.target);
}

TEST(CalibratePovm, runner_calibrates_on_request) {
    const TempDir dir;
    RunConfig c = static_config(dir);
    c.povm.reset();
    const Runner runner(c);
    EXPECT_EQ(runner.config().povm->provenance.rfind("calibrated(", 0), 0u);
}
