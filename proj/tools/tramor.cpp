// Experiment runner for the transformed-modes model-reduction library.
//
// Subcommands: fom, offline, rom, sweep, steps, and repro <name> with the
// named experiments ade, ade-nonperiodic, wave, burgers. Exit codes:
// 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>

#include "tramor/experiment.hpp"

namespace {

using namespace tramor;

constexpr const char* kVersion = "0.1.0";

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    bool gnuplot = false;
    std::uint64_t seed = 0;
};

struct Manifest {
    json timings = json::object();
    std::vector<std::string> produced;
};

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.io.out_dir);
    return (std::filesystem::path(cfg.io.out_dir) / name).string();
}

void note(Manifest& manifest, const std::string& path) { manifest.produced.push_back(path); }

void write_manifest(const ExperimentConfig& cfg, const Manifest& manifest,
                    const std::string& subcommand) {
    // The hash identifies the experiment, not the output destination.
    json hashed = config_to_json(cfg);
    hashed.erase("io");
    hashed.erase("jobs");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a_hash(hashed.dump(2))));
    json m{{"tool", "tramor"},
           {"version", kVersion},
           {"subcommand", subcommand},
           {"config_hash", std::string(buf)},
           {"seed", cfg.seed},
           {"jobs", cfg.jobs},
           {"produced", manifest.produced},
           {"timings", manifest.timings},
           {"timestamp",
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count()}};
    std::ofstream os(out_path(cfg, "manifest.json"));
    os << m.dump(2) << "\n";
}

ExperimentConfig load_config(const CliOptions& cli, const ExperimentConfig& defaults) {
    ExperimentConfig cfg = defaults;
    if (!cli.config_path.empty()) {
        std::ifstream is(cli.config_path);
        if (!is) throw ConfigError("cannot open config file: " + cli.config_path);
        json j;
        try {
            j = json::parse(is);
        } catch (const std::exception& e) {
            throw ConfigError("config is not valid JSON: " + std::string(e.what()));
        }
        cfg = parse_config(j);
    }
    if (!cli.out_dir.empty()) cfg.io.out_dir = cli.out_dir;
    if (cli.gnuplot) cfg.io.gnuplot = true;
    cfg.jobs = cli.jobs;
    cfg.seed = cli.seed;
    return cfg;
}

std::string fmt(double v) { return io::format_double(v); }

void write_report_csv(const ExperimentConfig& cfg, Manifest& manifest, const std::string& name,
                      const VectorXd& times, const ErrorReport& rep) {
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < times.size(); ++k)
        rows.push_back({fmt(times[k]), fmt(rep.error_curve[k]), fmt(rep.bound_curve[k])});
    const std::string path = out_path(cfg, name);
    write_table_csv(path, {"t", "error", "bound"}, rows, cfg.io.gnuplot);
    note(manifest, path);
}

int cmd_fom(const ExperimentConfig& cfg, Manifest& manifest) {
    FomModel model = build_model(cfg.model);
    SnapshotSet snaps = run_fom_stage(cfg, model);
    const std::string bin = out_path(cfg, "snapshots.bin");
    save_snapshots(snaps, bin);
    note(manifest, bin);
    const std::string csv = out_path(cfg, "snapshots.csv");
    export_snapshots_csv(snaps, csv, cfg.io.gnuplot);
    note(manifest, csv);
    std::cout << "fom: " << snaps.m() << " snapshots of " << model.tag() << " written\n";
    return 0;
}

int cmd_offline(const ExperimentConfig& cfg, Manifest& manifest) {
    FomModel model = build_model(cfg.model);
    SnapshotSet snaps = run_fom_stage(cfg, model);
    Decomposition dec = build_offline(cfg, model, snaps);
    const std::string bin = out_path(cfg, "decomposition.bin");
    save_decomposition(dec, bin);
    note(manifest, bin);
    const std::string sv = out_path(cfg, "singular_values.csv");
    export_singular_values_csv(dec, sv, cfg.io.gnuplot);
    note(manifest, sv);
    std::cout << "offline: relative error " << dec.offline_error << "\n";
    return 0;
}

int cmd_rom(const ExperimentConfig& cfg, Manifest& manifest) {
    RomStageResult res = run_rom_stage(cfg);
    const std::string traj = out_path(cfg, "trajectory.csv");
    export_trajectory_csv(res.trajectory, traj, cfg.io.gnuplot);
    note(manifest, traj);

    FomModel model = build_model(cfg.model);
    RomSystem sys = build_rom_system(model, res.decomposition, build_rom_options(cfg.rom));
    SnapshotSet recon = reconstruct(sys, res.trajectory, res.truth.times);
    const std::string rbin = out_path(cfg, "reconstruction.bin");
    save_snapshots(recon, rbin);
    note(manifest, rbin);
    write_report_csv(cfg, manifest, "report.csv", res.truth.times, res.report);

    json rep{{"offline_error", res.report.offline_error},
             {"online_error", res.report.online_error},
             {"j_iv", res.report.j_iv},
             {"residual_sup", res.report.residual_sup},
             {"steps", res.trajectory.step_count}};
    std::ofstream os(out_path(cfg, "report.json"));
    os << rep.dump(2) << "\n";
    note(manifest, out_path(cfg, "report.json"));
    std::cout << "rom: offline " << res.report.offline_error << ", online "
              << res.report.online_error << "\n";
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, Manifest& manifest) {
    SweepStageResult res = run_sweep_stage(cfg);
    std::vector<std::vector<std::string>> rows;
    json timings = json::array();
    for (const SweepEntry& e : res.entries) {
        rows.push_back(
            {fmt(e.c), fmt(e.spod_error), fmt(e.pod_small_error), fmt(e.pod_large_error)});
        timings.push_back(json{{"c", e.c},
                               {"fom_seconds", e.fom_seconds},
                               {"spod_seconds", e.spod_seconds},
                               {"pod_small_seconds", e.pod_small_seconds},
                               {"pod_large_seconds", e.pod_large_seconds}});
    }
    const std::string path = out_path(cfg, "sweep.csv");
    write_table_csv(path, {"c", "spod_error", "pod_small_error", "pod_large_error"}, rows,
                    cfg.io.gnuplot);
    note(manifest, path);
    manifest.timings["sweep"] = timings;
    std::cout << "sweep: " << res.entries.size() << " transport velocities\n";
    return 0;
}

int cmd_steps(const ExperimentConfig& cfg, Manifest& manifest) {
    StepsStageResult res = run_steps_stage(cfg);
    std::vector<std::vector<std::string>> rows;
    for (const StepCountRow& r : res.rows) {
        rows.push_back({r.scheme, r.variant, std::to_string(r.accepted_steps),
                        fmt(r.ratio_to_fom)});
        std::cout << r.scheme << " " << r.variant << ": " << r.accepted_steps << " steps ("
                  << r.ratio_to_fom * 100.0 << "% of fom)\n";
    }
    const std::string path = out_path(cfg, "steps.csv");
    write_table_csv(path, {"scheme", "variant", "accepted_steps", "ratio_to_fom"}, rows,
                    cfg.io.gnuplot);
    note(manifest, path);
    return 0;
}

int cmd_repro(const std::string& name, const CliOptions& cli) {
    ExperimentConfig cfg;
    if (name == "ade") cfg = recipe_ade();
    else if (name == "wave") cfg = recipe_wave();
    else if (name == "burgers") cfg = recipe_burgers();
    else if (name == "ade-nonperiodic") cfg = recipe_ade_nonperiodic();
    else throw ConfigError("unknown recipe: " + name +
                           " (expected ade|ade-nonperiodic|wave|burgers)");
    if (!cli.out_dir.empty()) cfg.io.out_dir = cli.out_dir;
    if (cli.gnuplot) cfg.io.gnuplot = true;
    cfg.jobs = cli.jobs;
    cfg.seed = cli.seed;

    // Recipes override nothing silently: print the effective configuration.
    std::cout << "effective config for repro " << name << ":\n"
              << config_to_json(cfg).dump(2) << "\n";

    Manifest manifest;
    if (name == "ade") {
        AdeReproResult r = run_repro_ade(cfg);
        const std::string shared = out_path(cfg, "ade_shared_trajectory.csv");
        export_trajectory_csv(r.shared_trajectory, shared, cfg.io.gnuplot);
        note(manifest, shared);
        const std::string per_mode = out_path(cfg, "ade_per_mode_trajectory.csv");
        export_trajectory_csv(r.per_mode_trajectory, per_mode, cfg.io.gnuplot);
        note(manifest, per_mode);
        json rep{{"offline_error", r.offline_error},
                 {"shared_path_online_error", r.shared.online_error},
                 {"per_mode_path_online_error", r.per_mode.online_error},
                 {"j_iv", r.shared.j_iv},
                 {"residual_sup", r.shared.residual_sup}};
        std::ofstream os(out_path(cfg, "ade_report.json"));
        os << rep.dump(2) << "\n";
        note(manifest, out_path(cfg, "ade_report.json"));
        std::cout << "ade: offline " << r.offline_error << ", shared-path online "
                  << r.shared.online_error << ", per-mode-path online "
                  << r.per_mode.online_error << "\n";
    } else if (name == "wave") {
        WaveReproResult r = run_repro_wave(cfg);
        const std::string traj = out_path(cfg, "wave_trajectory.csv");
        export_trajectory_csv(r.trajectory, traj, cfg.io.gnuplot);
        note(manifest, traj);
        json rep{{"offline_error", r.offline_error}, {"online_error", r.online_error}};
        std::ofstream os(out_path(cfg, "wave_report.json"));
        os << rep.dump(2) << "\n";
        note(manifest, out_path(cfg, "wave_report.json"));
        std::cout << "wave: offline " << r.offline_error << ", online " << r.online_error
                  << "\n";
    } else if (name == "burgers") {
        BurgersReproResult r = run_repro_burgers(cfg);
        std::vector<std::vector<std::string>> rows = {
            {"spod_r7", fmt(r.spod_offline), fmt(r.spod_online)},
            {"pod_r7", fmt(r.pod7_offline), fmt(r.pod7_online)},
            {"pod_r32", fmt(r.pod32_offline), fmt(r.pod32_online)}};
        const std::string table = out_path(cfg, "burgers_table.csv");
        write_table_csv(table, {"model", "offline_error", "online_error"}, rows,
                        cfg.io.gnuplot);
        note(manifest, table);
        std::vector<std::vector<std::string>> path_rows;
        for (int k = 0; k < r.times.size(); ++k)
            path_rows.push_back({fmt(r.times[k]), fmt(r.estimated_path[k])});
        const std::string path_csv = out_path(cfg, "burgers_path.csv");
        write_table_csv(path_csv, {"t", "p"}, path_rows, cfg.io.gnuplot);
        note(manifest, path_csv);
        json rep{{"spod_online", r.spod_online},
                 {"pod7_online", r.pod7_online},
                 {"pod32_online", r.pod32_online},
                 {"path_nonlinear", r.path_nonlinear}};
        std::ofstream os(out_path(cfg, "burgers_report.json"));
        os << rep.dump(2) << "\n";
        note(manifest, out_path(cfg, "burgers_report.json"));
        std::cout << "burgers: spod r=7 online " << r.spod_online << ", pod r=7 online "
                  << r.pod7_online << ", pod r=32 online " << r.pod32_online << "\n";
    } else { // ade-nonperiodic
        const std::vector<double> widths = {5e-3, 2.5e-3, 1.25e-3, 6.25e-4};
        auto levels = run_repro_nonperiodic(cfg, widths);
        std::vector<std::vector<std::string>> rows;
        for (const auto& l : levels) {
            rows.push_back({fmt(l.dxi), fmt(l.offline_error), fmt(l.online_error)});
            std::cout << "dxi=" << l.dxi << ": offline " << l.offline_error << ", online "
                      << l.online_error << "\n";
        }
        const std::string table = out_path(cfg, "nonperiodic_table.csv");
        write_table_csv(table, {"dxi", "offline_error", "online_error"}, rows, cfg.io.gnuplot);
        note(manifest, table);
    }
    write_manifest(cfg, manifest, "repro " + name);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tramor: model reduction with time-dependent transformed modes"};
    app.set_version_flag("--version", kVersion);

    CliOptions cli;
    app.add_option("--config", cli.config_path, "experiment configuration (JSON)");
    app.add_option("--out", cli.out_dir, "output directory");
    app.add_option("--jobs", cli.jobs, "worker pool size for sweeps")->default_val(1);
    app.add_flag("--gnuplot", cli.gnuplot, "additionally emit whitespace-separated tables");
    app.add_option("--seed", cli.seed, "seed recorded in the manifest")->default_val(0);

    std::string repro_name;
    CLI::App* sub_fom = app.add_subcommand("fom", "simulate the full-order model");
    CLI::App* sub_offline = app.add_subcommand("offline", "identify dominant modes");
    CLI::App* sub_rom = app.add_subcommand("rom", "run the reduced model end to end");
    CLI::App* sub_sweep = app.add_subcommand("sweep", "transport-velocity parameter sweep");
    CLI::App* sub_steps = app.add_subcommand("steps", "adaptive step-count study");
    CLI::App* sub_repro = app.add_subcommand("repro", "reproduce a named experiment");
    sub_repro->add_option("name", repro_name, "ade | ade-nonperiodic | wave | burgers")
        ->required();
    app.require_subcommand(1);
    for (CLI::App* sub : {sub_fom, sub_offline, sub_rom, sub_sweep, sub_steps, sub_repro})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sub_repro->parsed()) return cmd_repro(repro_name, cli);
        ExperimentConfig cfg = load_config(cli, recipe_ade());
        Manifest manifest;
        int rc = 1;
        std::string name;
        if (sub_fom->parsed()) rc = cmd_fom(cfg, manifest), name = "fom";
        else if (sub_offline->parsed()) rc = cmd_offline(cfg, manifest), name = "offline";
        else if (sub_rom->parsed()) rc = cmd_rom(cfg, manifest), name = "rom";
        else if (sub_sweep->parsed()) rc = cmd_sweep(cfg, manifest), name = "sweep";
        else if (sub_steps->parsed()) rc = cmd_steps(cfg, manifest), name = "steps";
        write_manifest(cfg, manifest, name);
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
