#ifndef TRAMOR_EXPERIMENT_HPP
#define TRAMOR_EXPERIMENT_HPP

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "tramor/analysis.hpp"

namespace tramor {

using nlohmann::json;

inline int log_level() {
    static int level = [] {
        const char* env = std::getenv("TRAMOR_LOG");
        if (!env) return 0;
        const std::string v(env);
        if (v == "debug") return 2;
        if (v == "info" || v == "1") return 1;
        return 0;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[tramor] " << msg << "\n";
}

namespace cfg {

/// JSON access that reports the full field path on errors.
inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError("missing field: " + path + "." + key);
    return j.at(key);
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& path) {
    try {
        return require(j, key, path).get<T>();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("invalid value for field: " + path + "." + key);
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& path, const T& fallback) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key, path);
}

} // namespace cfg

struct IcConfig {
    double center = 0.5;
    double width = 0.1;
    double amplitude = 1.0;
    double exponent_sign = -1.0;
};

struct BoundaryConfig {
    double center = 0.2;
    double width = 0.03;
    double amplitude = 0.5;
};

struct ModelConfig {
    std::string kind = "advection_diffusion";
    double c = 1.0;
    double mu = 0.002;
    int n = 200;
    double xi0 = 0.0;
    double length = 1.0;
    std::string topology = "periodic";
    IcConfig ic;
    BoundaryConfig boundary;
};

struct IntegratorConfig {
    std::string scheme = "implicit_trapezoid";
    double tau = 5e-3;
    double rel_tol = 1e-3;
    double abs_tol = 1e-6;
    int newton_max_iter = 25;
    double newton_tol = 1e-10;
};

struct FrameConfig {
    std::string kind = "periodic_shift";
    double speed = 1.0;
    int rank = 1;
};

struct OfflineConfig {
    std::string method = "spod_single"; // pod | spod_single | spod_multi
    int rank = 2;
    std::string path_source = "analytic"; // analytic | estimated | file
    double path_speed = std::numeric_limits<double>::quiet_NaN(); // default: model c
    std::string path_file;
    std::vector<FrameConfig> frames;
    int sweeps = 10;
};

struct RomConfig {
    std::string phase = "residual";
    IntegratorConfig integrator;
    double regularization = 0.0;
    bool auto_regularization = false;
    bool per_mode_paths = false;
    bool use_shortcuts = true;
};

struct AnalysisConfig {
    double c_tilde = 1.0;
    double omega = 0.0;
    double sweep_from = -5.0;
    double sweep_to = 5.0;
    double sweep_step = 0.2;
    int sweep_spod_rank = 2;
    int sweep_pod_small_rank = 3;
    int sweep_pod_large_rank = 11;
    int steps_pod_rank = 24;
    double steps_rel_tol = 1e-3;
    double steps_abs_tol = 1e-6;
};

struct IoConfig {
    std::string out_dir = "out";
    bool gnuplot = false;
};

struct ExperimentConfig {
    ModelConfig model;
    IntegratorConfig fom_integrator;
    double t_end = 1.0;
    OfflineConfig offline;
    RomConfig rom;
    AnalysisConfig analysis;
    IoConfig io;
    std::uint64_t seed = 0;
    int jobs = 1;
};

namespace cfg {

inline IntegratorConfig parse_integrator(const json& j, const std::string& path) {
    IntegratorConfig c;
    c.scheme = get_or<std::string>(j, "scheme", path, c.scheme);
    if (c.scheme != "implicit_trapezoid" && c.scheme != "rk45" && c.scheme != "rk23")
        throw ConfigError("invalid enum value for field: " + path + ".scheme");
    c.tau = get_or<double>(j, "tau", path, c.tau);
    c.rel_tol = get_or<double>(j, "rel_tol", path, c.rel_tol);
    c.abs_tol = get_or<double>(j, "abs_tol", path, c.abs_tol);
    if (j.contains("newton")) {
        const json& nj = j.at("newton");
        c.newton_max_iter = get_or<int>(nj, "max_iter", path + ".newton", c.newton_max_iter);
        c.newton_tol = get_or<double>(nj, "tol", path + ".newton", c.newton_tol);
    }
    if (c.tau <= 0) throw ConfigError("field must be positive: " + path + ".tau");
    if (c.rel_tol <= 0 || c.abs_tol <= 0)
        throw ConfigError("tolerances must be positive: " + path);
    return c;
}

inline json integrator_to_json(const IntegratorConfig& c) {
    return json{{"scheme", c.scheme},
                {"tau", c.tau},
                {"rel_tol", c.rel_tol},
                {"abs_tol", c.abs_tol},
                {"newton", json{{"max_iter", c.newton_max_iter}, {"tol", c.newton_tol}}}};
}

} // namespace cfg

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("model")) {
        const json& mj = j.at("model");
        ModelConfig& m = cfg.model;
        m.kind = cfg::get_or<std::string>(mj, "kind", "model", m.kind);
        static const std::vector<std::string> kinds = {
            "advection", "advection_diffusion", "advection_diffusion_dn", "linear_wave",
            "burgers"};
        if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end())
            throw ConfigError("invalid enum value for field: model.kind");
        m.c = cfg::get_or<double>(mj, "c", "model", m.c);
        m.mu = cfg::get_or<double>(mj, "mu", "model", m.mu);
        if (m.mu < 0) throw ConfigError("field must be nonnegative: model.mu");
        if (mj.contains("grid")) {
            const json& gj = mj.at("grid");
            m.n = cfg::get_or<int>(gj, "n", "model.grid", m.n);
            m.xi0 = cfg::get_or<double>(gj, "xi0", "model.grid", m.xi0);
            m.length = cfg::get_or<double>(gj, "length", "model.grid", m.length);
            m.topology = cfg::get_or<std::string>(gj, "topology", "model.grid", m.topology);
            if (m.topology != "periodic" && m.topology != "bounded")
                throw ConfigError("invalid enum value for field: model.grid.topology");
            if (m.n < 8) throw ConfigError("field must be >= 8: model.grid.n");
        }
        if (mj.contains("initial_condition")) {
            const json& ij = mj.at("initial_condition");
            m.ic.center = cfg::get_or<double>(ij, "center", "model.initial_condition", 0.5);
            m.ic.width = cfg::get_or<double>(ij, "width", "model.initial_condition", 0.1);
            m.ic.amplitude =
                cfg::get_or<double>(ij, "amplitude", "model.initial_condition", 1.0);
            m.ic.exponent_sign =
                cfg::get_or<double>(ij, "exponent_sign", "model.initial_condition", -1.0);
            if (m.ic.width <= 0)
                throw ConfigError("field must be positive: model.initial_condition.width");
        }
        if (mj.contains("boundary")) {
            const json& bj = mj.at("boundary");
            m.boundary.center = cfg::get_or<double>(bj, "center", "model.boundary", 0.2);
            m.boundary.width = cfg::get_or<double>(bj, "width", "model.boundary", 0.03);
            m.boundary.amplitude = cfg::get_or<double>(bj, "amplitude", "model.boundary", 0.5);
        }
    }
    if (j.contains("fom")) {
        const json& fj = j.at("fom");
        if (fj.contains("integrator"))
            cfg.fom_integrator = cfg::parse_integrator(fj.at("integrator"), "fom.integrator");
        cfg.t_end = cfg::get_or<double>(fj, "t_end", "fom", cfg.t_end);
        if (cfg.t_end <= 0) throw ConfigError("field must be positive: fom.t_end");
    }
    if (j.contains("offline")) {
        const json& oj = j.at("offline");
        OfflineConfig& o = cfg.offline;
        o.method = cfg::get_or<std::string>(oj, "method", "offline", o.method);
        if (o.method != "pod" && o.method != "spod_single" && o.method != "spod_multi")
            throw ConfigError("invalid enum value for field: offline.method");
        o.rank = cfg::get_or<int>(oj, "rank", "offline", o.rank);
        if (o.rank < 1) throw ConfigError("field must be positive: offline.rank");
        o.path_source = cfg::get_or<std::string>(oj, "path_source", "offline", o.path_source);
        if (o.path_source != "analytic" && o.path_source != "estimated" &&
            o.path_source != "file")
            throw ConfigError("invalid enum value for field: offline.path_source");
        o.path_speed = cfg::get_or<double>(oj, "path_speed", "offline", o.path_speed);
        o.path_file = cfg::get_or<std::string>(oj, "path_file", "offline", o.path_file);
        if (o.path_source == "file" && !std::filesystem::exists(o.path_file))
            throw ConfigError("referenced file does not exist: offline.path_file");
        o.sweeps = cfg::get_or<int>(oj, "sweeps", "offline", o.sweeps);
        if (oj.contains("frames")) {
            for (std::size_t i = 0; i < oj.at("frames").size(); ++i) {
                const json& fj = oj.at("frames")[i];
                const std::string path = "offline.frames[" + std::to_string(i) + "]";
                FrameConfig fc;
                fc.kind = cfg::get_or<std::string>(fj, "kind", path, fc.kind);
                if (fc.kind != "periodic_shift" && fc.kind != "virtual_domain_shift" &&
                    fc.kind != "identity")
                    throw ConfigError("invalid enum value for field: " + path + ".kind");
                fc.speed = cfg::get_or<double>(fj, "speed", path, fc.speed);
                fc.rank = cfg::get_or<int>(fj, "rank", path, fc.rank);
                if (fc.rank < 1) throw ConfigError("field must be positive: " + path + ".rank");
                o.frames.push_back(fc);
            }
        }
    }
    if (j.contains("rom")) {
        const json& rj = j.at("rom");
        RomConfig& r = cfg.rom;
        r.phase = cfg::get_or<std::string>(rj, "phase", "rom", r.phase);
        if (r.phase != "residual" && r.phase != "freeze" && r.phase != "freeze_reduced")
            throw ConfigError("invalid enum value for field: rom.phase");
        if (rj.contains("integrator"))
            r.integrator = cfg::parse_integrator(rj.at("integrator"), "rom.integrator");
        if (rj.contains("regularization")) {
            if (rj.at("regularization").is_string()) {
                if (rj.at("regularization").get<std::string>() != "auto")
                    throw ConfigError("invalid value for field: rom.regularization");
                r.auto_regularization = true;
            } else {
                r.regularization = cfg::get<double>(rj, "regularization", "rom");
                if (r.regularization < 0)
                    throw ConfigError("field must be nonnegative: rom.regularization");
            }
        }
        r.per_mode_paths = cfg::get_or<bool>(rj, "per_mode_paths", "rom", r.per_mode_paths);
        r.use_shortcuts = cfg::get_or<bool>(rj, "use_shortcuts", "rom", r.use_shortcuts);
    }
    if (j.contains("analysis")) {
        const json& aj = j.at("analysis");
        AnalysisConfig& a = cfg.analysis;
        if (aj.contains("bound")) {
            a.c_tilde = cfg::get_or<double>(aj.at("bound"), "c_tilde", "analysis.bound", 1.0);
            a.omega = cfg::get_or<double>(aj.at("bound"), "omega", "analysis.bound", 0.0);
            if (a.c_tilde < 1.0)
                throw ConfigError("field must be >= 1: analysis.bound.c_tilde");
            if (a.omega < 0.0) throw ConfigError("field must be >= 0: analysis.bound.omega");
        }
        if (aj.contains("sweep")) {
            const json& sj = aj.at("sweep");
            a.sweep_from = cfg::get_or<double>(sj, "from", "analysis.sweep", a.sweep_from);
            a.sweep_to = cfg::get_or<double>(sj, "to", "analysis.sweep", a.sweep_to);
            a.sweep_step = cfg::get_or<double>(sj, "step", "analysis.sweep", a.sweep_step);
            if (a.sweep_step <= 0)
                throw ConfigError("field must be positive: analysis.sweep.step");
            a.sweep_spod_rank =
                cfg::get_or<int>(sj, "spod_rank", "analysis.sweep", a.sweep_spod_rank);
            if (sj.contains("pod_ranks")) {
                auto ranks = cfg::get<std::vector<int>>(sj, "pod_ranks", "analysis.sweep");
                if (ranks.size() != 2)
                    throw ConfigError("analysis.sweep.pod_ranks must hold two ranks");
                a.sweep_pod_small_rank = ranks[0];
                a.sweep_pod_large_rank = ranks[1];
            }
        }
        if (aj.contains("steps")) {
            const json& sj = aj.at("steps");
            a.steps_pod_rank = cfg::get_or<int>(sj, "pod_rank", "analysis.steps", a.steps_pod_rank);
            a.steps_rel_tol =
                cfg::get_or<double>(sj, "rel_tol", "analysis.steps", a.steps_rel_tol);
            a.steps_abs_tol =
                cfg::get_or<double>(sj, "abs_tol", "analysis.steps", a.steps_abs_tol);
        }
    }
    if (j.contains("io")) {
        cfg.io.out_dir = cfg::get_or<std::string>(j.at("io"), "out_dir", "io", cfg.io.out_dir);
        cfg.io.gnuplot = cfg::get_or<bool>(j.at("io"), "gnuplot", "io", cfg.io.gnuplot);
    }
    cfg.seed = cfg::get_or<std::uint64_t>(j, "seed", "", cfg.seed);
    cfg.jobs = cfg::get_or<int>(j, "jobs", "", cfg.jobs);
    return cfg;
}

inline json config_to_json(const ExperimentConfig& c) {
    json frames = json::array();
    for (const FrameConfig& f : c.offline.frames)
        frames.push_back(json{{"kind", f.kind}, {"speed", f.speed}, {"rank", f.rank}});
    return json{
        {"model",
         json{{"kind", c.model.kind},
              {"c", c.model.c},
              {"mu", c.model.mu},
              {"grid", json{{"n", c.model.n},
                            {"xi0", c.model.xi0},
                            {"length", c.model.length},
                            {"topology", c.model.topology}}},
              {"initial_condition", json{{"center", c.model.ic.center},
                                         {"width", c.model.ic.width},
                                         {"amplitude", c.model.ic.amplitude},
                                         {"exponent_sign", c.model.ic.exponent_sign}}},
              {"boundary", json{{"center", c.model.boundary.center},
                                {"width", c.model.boundary.width},
                                {"amplitude", c.model.boundary.amplitude}}}}},
        {"fom",
         json{{"integrator", cfg::integrator_to_json(c.fom_integrator)}, {"t_end", c.t_end}}},
        {"offline",
         [&] {
             json o{{"method", c.offline.method},
                    {"rank", c.offline.rank},
                    {"path_source", c.offline.path_source},
                    {"path_file", c.offline.path_file},
                    {"frames", frames},
                    {"sweeps", c.offline.sweeps}};
             if (!std::isnan(c.offline.path_speed)) o["path_speed"] = c.offline.path_speed;
             return o;
         }()},
        {"rom", json{{"phase", c.rom.phase},
                     {"integrator", cfg::integrator_to_json(c.rom.integrator)},
                     {"regularization",
                      c.rom.auto_regularization ? json("auto") : json(c.rom.regularization)},
                     {"per_mode_paths", c.rom.per_mode_paths},
                     {"use_shortcuts", c.rom.use_shortcuts}}},
        {"analysis",
         json{{"bound", json{{"c_tilde", c.analysis.c_tilde}, {"omega", c.analysis.omega}}},
              {"sweep", json{{"from", c.analysis.sweep_from},
                             {"to", c.analysis.sweep_to},
                             {"step", c.analysis.sweep_step},
                             {"spod_rank", c.analysis.sweep_spod_rank},
                             {"pod_ranks", std::vector<int>{c.analysis.sweep_pod_small_rank,
                                                            c.analysis.sweep_pod_large_rank}}}},
              {"steps", json{{"pod_rank", c.analysis.steps_pod_rank},
                             {"rel_tol", c.analysis.steps_rel_tol},
                             {"abs_tol", c.analysis.steps_abs_tol}}}}},
        {"io", json{{"out_dir", c.io.out_dir}, {"gnuplot", c.io.gnuplot}}},
        {"seed", c.seed},
        {"jobs", c.jobs}};
}

inline std::uint64_t fnv1a_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Builders from configuration
// ---------------------------------------------------------------------------

inline FomModel build_model(const ModelConfig& mc) {
    FomModel m;
    if (mc.kind == "advection") m.kind = FomKind::Advection;
    else if (mc.kind == "advection_diffusion") m.kind = FomKind::AdvectionDiffusionPeriodic;
    else if (mc.kind == "advection_diffusion_dn")
        m.kind = FomKind::AdvectionDiffusionDirichletNeumann;
    else if (mc.kind == "linear_wave") m.kind = FomKind::LinearWave;
    else if (mc.kind == "burgers") m.kind = FomKind::Burgers;
    m.c = mc.c;
    m.mu = mc.mu;
    const Topology topo = mc.topology == "periodic" ? Topology::Periodic : Topology::Bounded;
    m.grid = Grid(mc.n, mc.xi0, mc.length, topo);
    m.components = m.kind == FomKind::LinearWave ? 2 : 1;

    GridFunction scalar_ic =
        gaussian_field(m.grid, mc.ic.center, mc.ic.width, mc.ic.amplitude, mc.ic.exponent_sign);
    if (m.components == 2) {
        GridFunction ic(m.grid, 2);
        ic.values.row(0) = scalar_ic.values.row(0);
        m.initial_condition = ic;
    } else {
        m.initial_condition = scalar_ic;
    }
    if (m.kind == FomKind::AdvectionDiffusionDirichletNeumann) {
        const double c0 = mc.boundary.center, w = mc.boundary.width, a = mc.boundary.amplitude;
        m.dirichlet_left = BoundaryData{
            [c0, w, a](double t) {
                const double s = (t - c0) / w;
                return a * std::exp(-s * s);
            },
            [c0, w, a](double t) {
                const double s = (t - c0) / w;
                return a * std::exp(-s * s) * (-2.0 * s / w);
            }};
    }
    m.validate();
    return m;
}

inline IntegratorSpec build_integrator(const IntegratorConfig& ic) {
    IntegratorSpec spec;
    if (ic.scheme == "implicit_trapezoid") spec.scheme = Scheme::ImplicitTrapezoid;
    else if (ic.scheme == "rk45") spec.scheme = Scheme::AdaptiveRK45;
    else spec.scheme = Scheme::AdaptiveRK23;
    spec.tau = ic.tau;
    spec.rel_tol = ic.rel_tol;
    spec.abs_tol = ic.abs_tol;
    spec.newton.max_iter = ic.newton_max_iter;
    spec.newton.tol = ic.newton_tol;
    spec.validate();
    return spec;
}

inline VectorXd load_path_csv(const std::string& file, int expected_m) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot open path file: " + file);
    std::vector<double> vals;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find_last_of(", \t");
        vals.push_back(std::stod(comma == std::string::npos ? line : line.substr(comma + 1)));
    }
    if (static_cast<int>(vals.size()) != expected_m)
        throw ConfigError("path file holds " + std::to_string(vals.size()) +
                          " samples, expected " + std::to_string(expected_m));
    return Eigen::Map<VectorXd>(vals.data(), vals.size());
}

inline VectorXd resolve_path(const ExperimentConfig& cfg, const FomModel& model,
                             const SnapshotSet& snapshots, double speed) {
    const OfflineConfig& oc = cfg.offline;
    if (oc.path_source == "estimated") return estimate_path(snapshots).path;
    if (oc.path_source == "file") return load_path_csv(oc.path_file, snapshots.m());
    const double s = std::isnan(speed) ? model.c : speed;
    return (s * snapshots.times).eval();
}

inline Decomposition build_offline(const ExperimentConfig& cfg, const FomModel& model,
                                   const SnapshotSet& snapshots) {
    const OfflineConfig& oc = cfg.offline;
    if (oc.method == "pod") return compute_pod(snapshots, oc.rank);
    if (oc.method == "spod_single") {
        TransformFamily fam = TransformFamily::periodic_shift(model.grid, model.d1_order());
        VectorXd path = resolve_path(cfg, model, snapshots, oc.path_speed);
        return compute_spod_single_frame(snapshots, path, fam, oc.rank);
    }
    // spod_multi
    std::vector<FrameSpec> specs;
    if (oc.frames.empty())
        throw ConfigError("offline.frames must not be empty for method spod_multi");
    for (const FrameConfig& fc : oc.frames) {
        FrameSpec spec;
        VectorXd path = (fc.speed * snapshots.times).eval();
        if (fc.kind == "periodic_shift") {
            spec.family = TransformFamily::periodic_shift(model.grid, model.d1_order());
        } else if (fc.kind == "identity") {
            spec.family = TransformFamily::identity(model.grid);
            path.setZero();
        } else {
            // Headroom beyond the sampled path range: the online path is
            // free to overshoot slightly near t_end.
            const double lo = std::min(0.0, path.minCoeff());
            const double hi = std::max(0.0, path.maxCoeff());
            const double pad = std::max(0.05 * (hi - lo), 10.0 * model.grid.dxi());
            spec.family = TransformFamily::virtual_domain_shift(model.grid, lo - pad, hi + pad,
                                                                model.d1_order());
        }
        spec.path = path;
        spec.rank = fc.rank;
        specs.push_back(std::move(spec));
    }
    return compute_spod_multi_frame(snapshots, specs, oc.sweeps);
}

inline RomSystemOptions build_rom_options(const RomConfig& rc) {
    RomSystemOptions opt;
    if (rc.phase == "residual") opt.phase = PhaseCondition::Residual;
    else if (rc.phase == "freeze") opt.phase = PhaseCondition::Freeze;
    else opt.phase = PhaseCondition::FreezeReduced;
    opt.regularization = rc.regularization;
    opt.auto_regularization = rc.auto_regularization;
    opt.use_shortcuts = rc.use_shortcuts;
    opt.per_mode_paths = rc.per_mode_paths;
    return opt;
}

// ---------------------------------------------------------------------------
// Recipe configurations (the bundled experiments with parameters baked in)
// ---------------------------------------------------------------------------

inline ExperimentConfig recipe_ade() {
    ExperimentConfig c;
    c.model.kind = "advection_diffusion";
    c.model.c = 1.0;
    c.model.mu = 0.002;
    c.model.n = 200;
    c.offline.method = "spod_single";
    c.offline.rank = 2;
    c.offline.path_source = "analytic";
    c.rom.auto_regularization = true; // needed by the per-mode-path variant
    return c;
}

inline ExperimentConfig recipe_wave() {
    ExperimentConfig c;
    c.model.kind = "linear_wave";
    c.model.c = 1.0;
    c.model.mu = 0.0;
    c.model.n = 200;
    c.offline.method = "spod_multi";
    c.offline.frames = {{"periodic_shift", 1.0, 1}, {"periodic_shift", -1.0, 1}};
    c.offline.sweeps = 40;
    return c;
}

inline ExperimentConfig recipe_burgers() {
    ExperimentConfig c;
    c.model.kind = "burgers";
    c.model.mu = 2e-3;
    c.model.n = 200;
    c.offline.method = "spod_single";
    c.offline.rank = 7;
    c.offline.path_source = "estimated";
    return c;
}

inline ExperimentConfig recipe_ade_nonperiodic() {
    ExperimentConfig c;
    c.model.kind = "advection_diffusion_dn";
    c.model.c = 1.0;
    c.model.mu = 0.001;
    c.model.n = 801; // dxi = 1.25e-3 on [0, 1]
    c.model.topology = "bounded";
    c.model.ic = {0.5, 0.02, 0.5, -1.0};
    c.model.boundary = {0.2, 0.03, 0.5};
    c.fom_integrator.tau = 1.25e-3;
    c.offline.method = "spod_multi";
    c.offline.frames = {{"virtual_domain_shift", 1.0, 4}};
    c.offline.sweeps = 8;
    c.rom.integrator.tau = 1.25e-3;
    c.rom.use_shortcuts = false;
    return c;
}

// ---------------------------------------------------------------------------
// Pipeline stages and recipe runners
// ---------------------------------------------------------------------------

struct RomStageResult {
    Decomposition decomposition;
    RomTrajectory trajectory;
    ErrorReport report;
    SnapshotSet truth;
};

inline SnapshotSet run_fom_stage(const ExperimentConfig& cfg, const FomModel& model) {
    IntegratorSpec spec = build_integrator(cfg.fom_integrator);
    log_info("integrating full-order model " + model.tag());
    return integrate_fom(model, spec, cfg.t_end).snapshots;
}

inline RomStageResult run_rom_stage(const ExperimentConfig& cfg) {
    FomModel model = build_model(cfg.model);
    RomStageResult res;
    res.truth = run_fom_stage(cfg, model);
    res.decomposition = build_offline(cfg, model, res.truth);
    RomSystem sys = build_rom_system(model, res.decomposition, build_rom_options(cfg.rom));

    VectorXd p0(sys.q);
    int col = 0;
    for (std::size_t fi = 0; fi < res.decomposition.frames.size(); ++fi)
        if (res.decomposition.frames[fi].transform.kind != TransformKind::Identity) {
            const double head = res.decomposition.frames[fi].path[0];
            const int copies = cfg.rom.per_mode_paths
                                   ? res.decomposition.frames[fi].rank()
                                   : 1;
            for (int cc = 0; cc < copies; ++cc) p0[col++] = head;
        }

    GridFunction z0 = GridFunction::from_flat(model.grid, model.components, res.truth.data.col(0));
    InitialProjection proj = project_initial_condition(sys, z0, p0);
    IntegratorSpec spec = build_integrator(cfg.rom.integrator);
    log_info("integrating reduced model, r=" + std::to_string(sys.r) +
             ", q=" + std::to_string(sys.q));
    res.trajectory = integrate_rom(sys, proj.state, spec, cfg.t_end);
    res.report = make_error_report(res.truth, sys, res.trajectory,
                                   res.decomposition.offline_error, proj.j_iv,
                                   cfg.analysis.c_tilde, cfg.analysis.omega);
    return res;
}

struct AdeReproResult {
    double offline_error = 0.0;
    ErrorReport shared;
    ErrorReport per_mode;
    RomTrajectory shared_trajectory;
    RomTrajectory per_mode_trajectory;
};

/// Advection-diffusion reproduction: the same two-mode decomposition run
/// with one shared path versus one path per mode.
inline AdeReproResult run_repro_ade(const ExperimentConfig& cfg) {
    FomModel model = build_model(cfg.model);
    SnapshotSet truth = run_fom_stage(cfg, model);
    Decomposition dec = build_offline(cfg, model, truth);

    AdeReproResult out;
    out.offline_error = dec.offline_error;
    IntegratorSpec spec = build_integrator(cfg.rom.integrator);
    GridFunction z0 = model.initial_condition;

    {
        RomSystemOptions opt = build_rom_options(cfg.rom);
        opt.per_mode_paths = false;
        RomSystem sys = build_rom_system(model, dec, opt);
        InitialProjection proj =
            project_initial_condition(sys, z0, VectorXd::Constant(sys.q, dec.frames[0].path[0]));
        out.shared_trajectory = integrate_rom(sys, proj.state, spec, cfg.t_end);
        out.shared = make_error_report(truth, sys, out.shared_trajectory, dec.offline_error,
                                       proj.j_iv, cfg.analysis.c_tilde, cfg.analysis.omega);
    }
    {
        RomSystemOptions opt = build_rom_options(cfg.rom);
        opt.per_mode_paths = true;
        log_info("per-mode path layout requested; the grouped layout is the robust default");
        RomSystem sys = build_rom_system(model, dec, opt);
        InitialProjection proj =
            project_initial_condition(sys, z0, VectorXd::Constant(sys.q, dec.frames[0].path[0]));
        out.per_mode_trajectory = integrate_rom(sys, proj.state, spec, cfg.t_end);
        out.per_mode = make_error_report(truth, sys, out.per_mode_trajectory, dec.offline_error,
                                         proj.j_iv, cfg.analysis.c_tilde, cfg.analysis.omega);
    }
    return out;
}

struct WaveReproResult {
    double offline_error = 0.0;
    double online_error = 0.0;
    ErrorReport report;
    RomTrajectory trajectory;
};

/// Linear wave reproduction: analytic snapshots, two counter-propagating
/// frames with one stacked mode each, reduced model against the analytic
/// solution.
inline WaveReproResult run_repro_wave(const ExperimentConfig& cfg) {
    FomModel model = build_model(cfg.model);
    const int m = static_cast<int>(std::llround(cfg.t_end / cfg.fom_integrator.tau)) + 1;
    VectorXd times = VectorXd::LinSpaced(m, 0.0, cfg.t_end);
    GridFunction rho0(model.grid, model.initial_condition.values.row(0));
    SnapshotSet truth = analytic_wave_snapshots(rho0, model.grid, times);

    Decomposition dec = build_offline(cfg, model, truth);
    RomSystem sys = build_rom_system(model, dec, build_rom_options(cfg.rom));

    VectorXd p0(sys.q);
    for (int f = 0; f < sys.q; ++f) p0[f] = dec.frames[f].path[0];
    InitialProjection proj = project_initial_condition(sys, truth.at(0), p0);
    IntegratorSpec spec = build_integrator(cfg.rom.integrator);
    WaveReproResult out;
    out.trajectory = integrate_rom(sys, proj.state, spec, cfg.t_end);
    out.report = make_error_report(truth, sys, out.trajectory, dec.offline_error, proj.j_iv,
                                   cfg.analysis.c_tilde, cfg.analysis.omega);
    out.offline_error = dec.offline_error;
    out.online_error = out.report.online_error;
    return out;
}

struct BurgersReproResult {
    double spod_offline = 0.0, spod_online = 0.0;
    double pod7_offline = 0.0, pod7_online = 0.0;
    double pod32_offline = 0.0, pod32_online = 0.0;
    VectorXd estimated_path;
    VectorXd times;
    bool path_nonlinear = false;
};

inline BurgersReproResult run_repro_burgers(const ExperimentConfig& cfg) {
    FomModel model = build_model(cfg.model);
    SnapshotSet truth = run_fom_stage(cfg, model);
    IntegratorSpec spec = build_integrator(cfg.rom.integrator);

    BurgersReproResult out;
    out.times = truth.times;
    PathEstimate est = estimate_path(truth);
    out.estimated_path = est.path;
    const double p_end = est.path[truth.m() - 1];
    double dev = 0.0;
    for (int k = 0; k < truth.m(); ++k)
        dev = std::max(dev, std::abs(est.path[k] - truth.times[k] * p_end));
    out.path_nonlinear = dev > 0.01;

    auto run_system = [&](const Decomposition& dec, double& offline, double& online) {
        offline = dec.offline_error;
        RomSystem sys = build_rom_system(model, dec, build_rom_options(cfg.rom));
        VectorXd p0 = VectorXd::Constant(sys.q, sys.q ? dec.frames[0].path[0] : 0.0);
        InitialProjection proj = project_initial_condition(sys, model.initial_condition, p0);
        RomTrajectory tr = integrate_rom(sys, proj.state, spec, cfg.t_end);
        online = make_error_report(truth, sys, tr, offline, proj.j_iv).online_error;
    };

    TransformFamily fam = TransformFamily::periodic_shift(model.grid);
    run_system(compute_spod_single_frame(truth, est.path, fam, cfg.offline.rank),
               out.spod_offline, out.spod_online);
    run_system(compute_pod(truth, cfg.offline.rank), out.pod7_offline, out.pod7_online);
    run_system(compute_pod(truth, 32), out.pod32_offline, out.pod32_online);
    return out;
}

struct NonperiodicLevel {
    double dxi = 0.0;
    double offline_error = 0.0;
    double online_error = 0.0;
};

/// Non-periodic reproduction across refinement levels dxi = dt.
inline std::vector<NonperiodicLevel> run_repro_nonperiodic(const ExperimentConfig& base,
                                                           const std::vector<double>& widths) {
    std::vector<NonperiodicLevel> levels;
    for (double dxi : widths) {
        ExperimentConfig cfg = base;
        cfg.model.n = static_cast<int>(std::llround(cfg.model.length / dxi)) + 1;
        cfg.fom_integrator.tau = dxi;
        cfg.rom.integrator.tau = dxi;
        log_info("non-periodic level dxi=" + std::to_string(dxi));
        RomStageResult res = run_rom_stage(cfg);
        levels.push_back({dxi, res.decomposition.offline_error, res.report.online_error});
    }
    return levels;
}

struct SweepStageResult {
    std::vector<SweepEntry> entries;
    double construction_c = 1.0;
};

inline SweepStageResult run_sweep_stage(const ExperimentConfig& cfg) {
    FomModel model = build_model(cfg.model);
    SnapshotSet truth = run_fom_stage(cfg, model);

    TransformFamily fam = TransformFamily::periodic_shift(model.grid, model.d1_order());
    VectorXd path = resolve_path(cfg, model, truth, cfg.offline.path_speed);
    Decomposition spod_dec =
        compute_spod_single_frame(truth, path, fam, cfg.analysis.sweep_spod_rank);
    Decomposition pod_small = compute_pod(truth, cfg.analysis.sweep_pod_small_rank);
    Decomposition pod_large = compute_pod(truth, cfg.analysis.sweep_pod_large_rank);

    RomSystemOptions opt = build_rom_options(cfg.rom);
    RomSystem spod_sys = build_rom_system(model, spod_dec, opt);
    RomSystem pod_small_sys = build_rom_system(model, pod_small, opt);
    RomSystem pod_large_sys = build_rom_system(model, pod_large, opt);

    const int count = static_cast<int>(
        std::llround((cfg.analysis.sweep_to - cfg.analysis.sweep_from) / cfg.analysis.sweep_step)) +
        1;
    SweepConfig sc;
    sc.base_model = model;
    sc.spod = &spod_sys;
    sc.pod_small = &pod_small_sys;
    sc.pod_large = &pod_large_sys;
    sc.c_values = VectorXd::LinSpaced(count, cfg.analysis.sweep_from, cfg.analysis.sweep_to);
    sc.truth_integrator.scheme = Scheme::AdaptiveRK45;
    sc.truth_integrator.tau = cfg.fom_integrator.tau; // output sampling
    sc.truth_integrator.rel_tol = 1e-8;
    sc.truth_integrator.abs_tol = 1e-11;
    sc.rom_integrator.scheme = Scheme::AdaptiveRK45;
    sc.rom_integrator.tau = cfg.rom.integrator.tau;
    sc.rom_integrator.rel_tol = 1e-6;
    sc.rom_integrator.abs_tol = 1e-9;
    sc.t_end = cfg.t_end;
    sc.jobs = cfg.jobs;

    SweepStageResult out;
    out.entries = parameter_sweep(sc);
    out.construction_c = model.c;
    return out;
}

struct StepsStageResult {
    std::vector<StepCountRow> rows;
};

inline StepsStageResult run_steps_stage(const ExperimentConfig& cfg) {
    ExperimentConfig wave_cfg = recipe_wave();
    wave_cfg.analysis = cfg.analysis;
    FomModel model = build_model(wave_cfg.model);
    const int m = static_cast<int>(std::llround(wave_cfg.t_end / wave_cfg.fom_integrator.tau)) + 1;
    VectorXd times = VectorXd::LinSpaced(m, 0.0, wave_cfg.t_end);
    GridFunction rho0(model.grid, model.initial_condition.values.row(0));
    SnapshotSet truth = analytic_wave_snapshots(rho0, model.grid, times);

    Decomposition spod_dec = build_offline(wave_cfg, model, truth);
    Decomposition pod_dec = compute_pod(truth, cfg.analysis.steps_pod_rank);

    RomSystem spod_sys = build_rom_system(model, spod_dec, build_rom_options(wave_cfg.rom));
    RomSystem pod_sys = build_rom_system(model, pod_dec, build_rom_options(wave_cfg.rom));

    VectorXd p0(spod_sys.q);
    for (int f = 0; f < spod_sys.q; ++f) p0[f] = spod_dec.frames[f].path[0];
    InitialProjection spod_proj = project_initial_condition(spod_sys, truth.at(0), p0);
    InitialProjection pod_proj =
        project_initial_condition(pod_sys, truth.at(0), VectorXd::Zero(0));

    std::vector<RomSetup> setups;
    setups.push_back({"pod", &pod_sys, pod_proj.state});
    setups.push_back({"spod", &spod_sys, spod_proj.state});
    StepsStageResult out;
    out.rows = step_count_study(model, setups, cfg.analysis.steps_rel_tol,
                                cfg.analysis.steps_abs_tol, wave_cfg.t_end);
    return out;
}

} // namespace tramor

#endif
