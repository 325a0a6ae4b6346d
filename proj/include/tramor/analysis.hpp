#ifndef TRAMOR_ANALYSIS_HPP
#define TRAMOR_ANALYSIS_HPP

#include <atomic>
#include <chrono>
#include <thread>

#include "tramor/rom.hpp"

namespace tramor {

struct ErrorReport {
    double offline_error = 0.0;
    double online_error = 0.0;
    double j_iv = 0.0;
    double residual_sup = 0.0;
    VectorXd error_curve;  // ||e(t_k)|| at the truth samples
    VectorXd bound_curve;  // certified envelope at the same samples
    double c_tilde = 1.0;
    double omega = 0.0;
};

/// A-posteriori envelope C_tilde * exp(omega t) * (J_IV + t * sup_{tau<=t} ||R||),
/// evaluated with the running supremum of the recorded residual norms.
inline VectorXd error_bound(double j_iv, const VectorXd& residual_norms, const VectorXd& times,
                            double c_tilde, double omega) {
    if (c_tilde < 1.0) throw ConfigError("error_bound: c_tilde must be >= 1");
    if (omega < 0.0) throw ConfigError("error_bound: omega must be >= 0");
    if (residual_norms.size() != times.size())
        throw DimensionError("error_bound: residual samples do not match times");
    VectorXd bound(times.size());
    double sup = 0.0;
    for (Eigen::Index k = 0; k < times.size(); ++k) {
        sup = std::max(sup, residual_norms[k]);
        bound[k] = c_tilde * std::exp(omega * times[k]) * (j_iv + times[k] * sup);
    }
    return bound;
}

/// Residual norms interpolated onto arbitrary sample times (running sup
/// in the bound makes piecewise-linear interpolation conservative enough).
inline VectorXd interp_samples(const VectorXd& src_times, const VectorXd& src_values,
                               const VectorXd& times) {
    VectorXd out(times.size());
    const int m = static_cast<int>(src_times.size());
    for (Eigen::Index j = 0; j < times.size(); ++j) {
        const double t = times[j];
        int seg = static_cast<int>(std::upper_bound(src_times.data(), src_times.data() + m, t) -
                                   src_times.data()) -
                  1;
        seg = std::min(std::max(seg, 0), m - 2);
        const double w = (t - src_times[seg]) / (src_times[seg + 1] - src_times[seg]);
        out[j] = (1.0 - w) * src_values[seg] + w * src_values[seg + 1];
    }
    return out;
}

/// Full report for a reduced run against a truth trajectory.
inline ErrorReport make_error_report(const SnapshotSet& truth, const RomSystem& sys,
                                     const RomTrajectory& tr, double offline_error, double j_iv,
                                     double c_tilde = 1.0, double omega = 0.0) {
    ErrorReport rep;
    rep.offline_error = offline_error;
    rep.j_iv = j_iv;
    rep.c_tilde = c_tilde;
    rep.omega = omega;

    SnapshotSet recon = reconstruct(sys, tr, truth.times);
    rep.online_error = relative_error(truth, recon);

    rep.error_curve.resize(truth.m());
    for (int k = 0; k < truth.m(); ++k) {
        GridFunction e = GridFunction::from_flat(truth.grid, truth.components,
                                                 (truth.data.col(k) - recon.data.col(k)).eval());
        rep.error_curve[k] = norm(e);
    }
    rep.residual_sup = tr.residual_norms.size() ? tr.residual_norms.maxCoeff() : 0.0;
    VectorXd resid = interp_samples(tr.times, tr.residual_norms, truth.times);
    rep.bound_curve = error_bound(j_iv, resid, truth.times, c_tilde, omega);
    return rep;
}

struct StepCountRow {
    std::string scheme;  // "rk45" | "rk23"
    std::string variant; // "fom" | "pod" | "spod"
    std::size_t accepted_steps = 0;
    double ratio_to_fom = 1.0;
};

struct RomSetup {
    std::string name;
    const RomSystem* system = nullptr;
    RomState state0;
};

/// Accepted-step comparison of the full model against reduced variants
/// under identical adaptive settings.
inline std::vector<StepCountRow> step_count_study(const FomModel& model,
                                                  const std::vector<RomSetup>& roms,
                                                  double rel_tol, double abs_tol, double t_end) {
    std::vector<StepCountRow> rows;
    for (Scheme scheme : {Scheme::AdaptiveRK45, Scheme::AdaptiveRK23}) {
        IntegratorSpec spec;
        spec.scheme = scheme;
        spec.rel_tol = rel_tol;
        spec.abs_tol = abs_tol;
        const std::string tag = scheme == Scheme::AdaptiveRK45 ? "rk45" : "rk23";

        FomResult fom = integrate_fom(model, spec, t_end);
        rows.push_back({tag, "fom", fom.accepted_steps, 1.0});
        const double fom_steps = static_cast<double>(fom.accepted_steps);

        for (const RomSetup& setup : roms) {
            RomTrajectory tr = integrate_rom(*setup.system, setup.state0, spec, t_end);
            rows.push_back({tag, setup.name, tr.step_count,
                            static_cast<double>(tr.step_count) / fom_steps});
        }
    }
    return rows;
}

struct SweepEntry {
    double c = 0.0;
    double spod_error = 0.0;
    double pod_small_error = 0.0;
    double pod_large_error = 0.0;
    double fom_seconds = 0.0;
    double spod_seconds = 0.0;
    double pod_small_seconds = 0.0;
    double pod_large_seconds = 0.0;
};

struct SweepConfig {
    FomModel base_model;       // construction model (c is overridden per entry)
    const RomSystem* spod = nullptr;
    const RomSystem* pod_small = nullptr;
    const RomSystem* pod_large = nullptr;
    VectorXd c_values;
    // Fixed-step truth disperses badly at |c| ~ 5; both sides integrate
    // adaptively, the truth tight enough to sit under the reduction error.
    IntegratorSpec truth_integrator;
    IntegratorSpec rom_integrator;
    double t_end = 1.0;
    int jobs = 1;
};

namespace detail {

inline double run_rom_timed(const RomSystem& sys, const SnapshotSet& truth,
                            const IntegratorSpec& spec, double t_end, double& seconds) {
    const auto start = std::chrono::steady_clock::now();
    VectorXd p0 = VectorXd::Zero(sys.q);
    InitialProjection proj = project_initial_condition(sys, truth.at(0), p0);
    RomTrajectory tr = integrate_rom(sys, proj.state, spec, t_end);
    SnapshotSet recon = reconstruct(sys, tr, truth.times);
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return relative_error(truth, recon);
}

} // namespace detail

/// Error of the construction-time reduced models across transport
/// velocities; reduced operators are parameter-separable, so only the
/// scalar parameters change per entry. Entries run on a bounded pool.
inline std::vector<SweepEntry> parameter_sweep(const SweepConfig& cfg) {
    const int n_entries = static_cast<int>(cfg.c_values.size());
    std::vector<SweepEntry> entries(n_entries);

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= n_entries) return;
            const double c = cfg.c_values[idx];
            SweepEntry& e = entries[idx];
            e.c = c;

            FomModel model = cfg.base_model;
            model.c = c;
            const auto t0 = std::chrono::steady_clock::now();
            SnapshotSet truth = integrate_fom(model, cfg.truth_integrator, cfg.t_end).snapshots;
            e.fom_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            RomSystem spod = with_parameters(*cfg.spod, c, cfg.base_model.mu);
            RomSystem pod_s = with_parameters(*cfg.pod_small, c, cfg.base_model.mu);
            RomSystem pod_l = with_parameters(*cfg.pod_large, c, cfg.base_model.mu);
            e.spod_error = detail::run_rom_timed(spod, truth, cfg.rom_integrator, cfg.t_end,
                                                 e.spod_seconds);
            e.pod_small_error = detail::run_rom_timed(pod_s, truth, cfg.rom_integrator,
                                                      cfg.t_end, e.pod_small_seconds);
            e.pod_large_error = detail::run_rom_timed(pod_l, truth, cfg.rom_integrator,
                                                      cfg.t_end, e.pod_large_seconds);
        }
    };

    const int n_threads = std::max(1, std::min(cfg.jobs, n_entries));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return entries;
}

/// Generic CSV table writer; the gnuplot variant is whitespace separated
/// without a header.
inline void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows,
                            bool gnuplot = false) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    const char sep = gnuplot ? ' ' : ',';
    if (!gnuplot) {
        for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
        os << "\n";
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? std::string(1, sep) : "") << row[i];
        os << "\n";
    }
}

} // namespace tramor

#endif
