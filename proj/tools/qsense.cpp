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

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "qsense/runner.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kCalibrationError = 3 };

struct Globals {
    std::string config;
    std::string out;
    unsigned workers = 0;
    std::optional<std::uint64_t> seed;
};

qsense::RunConfig resolve(const Globals &g) {
    if (g.config.empty()) throw qsense::FormatError("--config is required for this command");
    qsense::RunConfig c = qsense::load_run_config(g.config);
    if (!g.out.empty()) c.output_dir = g.out;
    if (g.workers > 0) c.workers = g.workers;
    if (g.seed) {
        c.seed = *g.seed;
        c.grape.rng_seed = *g.seed;
    }
    return c;
}

void print_records(const std::vector<qsense::SweepRecord> &records) {
    std::cout << qsense::sweep_records_csv(records);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"qsense: GRAPE control for multiparameter field sensing with an Ising-coupled ancilla"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Run configuration (JSON)");
    app.add_option("--out", g.out, "Output directory (overrides the config)");
    app.add_option("--workers", g.workers, "Concurrent sweep points (overrides the config)")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Seed for random initial guesses");

    auto *baseline = app.add_subcommand("baseline", "Analytic-control precision for every (J, T)");
    auto *optimize = app.add_subcommand("optimize", "Independent GRAPE run for every (J, T)");
    auto *ladder = app.add_subcommand("ladder", "Recursive J-ladder per T with persisted warm starts");
    auto *sweep = app.add_subcommand("sweep", "Ladder plus the wide per-T table for plotting");

    auto *dump = app.add_subcommand("dump-controls", "Per-slice waveform CSV of one or two schedule files");
    std::string dump_a, dump_b, dump_csv;
    dump->add_option("schedule", dump_a, "Schedule file")->required()->check(CLI::ExistingFile);
    dump->add_option("comparison", dump_b, "Second schedule file")->check(CLI::ExistingFile);
    dump->add_option("--csv", dump_csv, "Write the table here instead of stdout");

    auto *calibrate = app.add_subcommand("calibrate-povm", "Choose the rotated Bell measurement");
    bool unrotated = false;
    calibrate->add_flag("--unrotated", unrotated, "Also report angle-0 candidates");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*dump) {
            qsense::WaveformSummary summary;
            const std::string csv = qsense::cmd_dump_controls(
                dump_a, dump_b.empty() ? std::nullopt : std::optional<std::filesystem::path>(dump_b), &summary);
            if (dump_csv.empty()) std::cout << csv;
            else qsense::write_file_atomic(dump_csv, csv);
            std::cerr << qsense::summary_text(summary) << "\n";
            return kOk;
        }
        if (*calibrate) {
            const std::filesystem::path out = g.out.empty() ? "qsense_out" : g.out;
            const auto report = qsense::cmd_calibrate_povm(out, unrotated);
            std::cout << qsense::calibration_report_text(report);
            std::cerr << "selected " << report.best().rotation.provenance
                      << " Tr F^-1 = " << report.best().trace_inverse << "\n";
            return kOk;
        }
        const qsense::Runner runner(resolve(g));
        if (*baseline) print_records(qsense::cmd_baseline(runner));
        else if (*optimize) print_records(qsense::cmd_optimize(runner));
        else if (*ladder) print_records(qsense::cmd_ladder(runner));
        else if (*sweep) std::cout << qsense::cmd_sweep(runner);
        return kOk;
    } catch (const qsense::CalibrationFailure &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCalibrationError;
    } catch (const qsense::FormatError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
