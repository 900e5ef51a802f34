// qdyn — workflow CLI for simulation, optimal control, and model reduction of
// driven quantum systems in energy representation.
//
// Stages communicate through archive directories under --out:
//   bound -> matrix -> abncd -> {control | optimal | balance -> truncate | h2model}
// mirroring the archives bound, tise, tdse/lvne, lvne_b, lvne_t, lvne_h.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "qdyn/workflow.hpp"

namespace fs = std::filesystem;
using namespace qdyn;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir{"."};
};

WorkflowConfig load_config(const CommonArgs& args) {
    return WorkflowConfig::load(args.config_path);
}

RunManifest make_run(const std::string& stage, const WorkflowConfig& cfg,
                     const std::vector<std::pair<std::string, fs::path>>& inputs) {
    RunManifest run;
    run.stage = stage;
    run.config_hash = hash_json(cfg.raw);
    for (const auto& [name, dir] : inputs) run.input_hashes.emplace_back(name, hash_archive(dir));
    return run;
}

StabilizeMethod stabilize_method_from(const json& section) {
    StabilizeMethod method;
    const std::string mode = section.value("A_stable", "ssu");
    if (mode == "ssu") {
        method.kind = StabilizeKind::SplitUnstable;
        method.m = section.value("A_split", 1);
    } else if (mode == "evs") {
        method.kind = StabilizeKind::Shift;
        method.alpha = section.value("A_shift", 1e-4);
    } else {
        throw ValidationError("config: A_stable must be ssu|evs");
    }
    return method;
}

GeneralizedOptions generalized_options_from(const json& section) {
    GeneralizedOptions opts;
    opts.method = section.value("method", "iter") == "bicg" ? GeneralizedMethod::Krylov
                                                            : GeneralizedMethod::Iterative;
    opts.tol = section.value("tol", 1e-10);
    opts.max_iter = section.value("max_iter", 400);
    return opts;
}

ControlField make_drive(const WorkflowConfig& cfg, const TimeGrid& grid, int substeps,
                        int channels) {
    if (auto file = cfg.field_file()) {
        ControlField field = field_from_csv(*file);
        if (field.channels() != channels) {
            throw ValidationError("field file channel count does not match the system");
        }
        return field;
    }
    auto specs = cfg.field_channels();
    if (specs.empty()) return zero_field(grid, substeps, channels);
    if (static_cast<int>(specs.size()) != channels) {
        throw ValidationError("field.channels count does not match the system");
    }
    return make_field(grid, substeps, specs, Eigen::VectorXd::Ones(channels));
}

int run_bound(const CommonArgs& args) {
    const auto cfg = load_config(args);
    BoundStateOptions opts;
    opts.check_convergence = cfg.convergence_check();
    const auto bound =
        solve_bound_states(cfg.grid(), cfg.potential(), cfg.v_min(), cfg.v_max(), opts);
    const auto run = make_run("bound", cfg, {});
    save_bound_states(bound, stage_dir(args.out_dir, "bound"), run);
    std::printf("bound: %d states in [%.6g, %.6g], threshold %.6g\n", bound.n_states(),
                bound.energies[0], bound.energies[bound.n_states() - 1], bound.threshold);
    return 0;
}

int run_matrix(const CommonArgs& args) {
    const auto cfg = load_config(args);
    require_stage(args.out_dir, "bound", "bound");
    const auto bound = load_bound_states(stage_dir(args.out_dir, "bound"));
    const auto sbc = cfg.sbc();
    const auto basis = make_energy_basis(bound, cfg.dipoles(), sbc ? &*sbc : nullptr,
                                         cfg.observables());
    const auto run = make_run("matrix", cfg, {{"bound", stage_dir(args.out_dir, "bound")}});
    const auto dir = stage_dir(args.out_dir, "tise");
    export_energy_basis(basis, dir);
    run.write_side_file(dir);
    std::printf("matrix: %d states, %zu dipole channel(s), %zu observable(s)\n",
                basis.n_states(), basis.dipole.size(), basis.observables.size());
    return 0;
}

int run_abncd(const CommonArgs& args, const std::string& kind_flag) {
    const auto cfg = load_config(args);
    require_stage(args.out_dir, "tise", "matrix");
    const auto basis = import_energy_basis(stage_dir(args.out_dir, "tise"));
    std::string kind = kind_flag;
    if (kind.empty() && cfg.raw.contains("build")) kind = cfg.raw["build"].value("kind", "");
    if (kind.empty()) kind = cfg.raw.contains("relax") ? "lvne" : "tdse";

    BilinearSystem sys;
    if (kind == "tdse") {
        sys = build_tdse(basis);
    } else if (kind == "lvne") {
        const auto rate_model = cfg.relax();
        Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(basis.n_states(), basis.n_states());
        if (rate_model) rates = relaxation_rates(basis, *rate_model);
        sys = build_lvne(basis, rates, cfg.dephase(), {}, cfg.lvne_ordering(),
                         cfg.lvne_temperature());
    } else {
        throw ValidationError("abncd: kind must be tdse|lvne");
    }
    sys.x0 = initial_state(cfg.initial(), sys);

    const auto run = make_run("abncd", cfg, {{"tise", stage_dir(args.out_dir, "tise")}});
    const auto dir = stage_dir(args.out_dir, kind);
    save_system(sys, dir, run);
    std::printf("abncd: %s system, dim %d, density(A) %.4g%%", kind.c_str(), sys.dim,
                100.0 * sparse_density(sys.A));
    for (const auto& nk : sys.N) std::printf(", density(N) %.4g%%", 100.0 * sparse_density(nk));
    std::printf(", ||A x_e|| = %.3g\n", equilibrium_residual(sys));

    if (sys.dim <= 2000) {
        const auto eig = spectrum(sys);
        Eigen::MatrixXd data(eig.size(), 2);
        data.col(0) = eig.real();
        data.col(1) = eig.imag();
        write_csv(stage_dir(args.out_dir, kind + "_spectrum.csv"), {"re", "im"}, data);
    }
    return 0;
}

BilinearSystem load_stage_system(const CommonArgs& args, const std::string& requested) {
    std::string name = requested;
    if (name.empty()) {
        name = fs::exists(stage_dir(args.out_dir, "lvne") / "manifest.json") ? "lvne" : "tdse";
    }
    if (fs::exists(fs::path(name) / "manifest.json")) return import_external_system(name);
    require_stage(args.out_dir, name, "abncd");
    return import_external_system(stage_dir(args.out_dir, name));
}

int run_control(const CommonArgs& args, const std::string& system_name) {
    const auto cfg = load_config(args);
    auto sys = load_stage_system(args, system_name);
    const TimeGrid grid = cfg.time_grid();
    const Eigen::VectorXcd x0 = initial_state(cfg.initial(), sys);
    const int substeps = cfg.substeps();
    const ControlField field = make_drive(cfg, grid, std::max(substeps, 50), sys.channels());

    Trajectory traj;
    if (cfg.scheme() == "adaptive") {
        AdaptiveOptions opts;
        opts.reltol = cfg.reltol();
        traj = propagate_adaptive(sys, as_function(field), x0, grid, opts);
    } else {
        traj = propagate_fixed(sys, as_function(field), x0, grid, substeps,
                               cfg.scheme() == "rk2" ? FixedScheme::RK2 : FixedScheme::RK4);
    }

    const auto run = make_run("control", cfg, {});
    save_trajectory(sys, traj, stage_dir(args.out_dir, "traj"), run);
    write_trajectory_csv(sys, traj, stage_dir(args.out_dir, "traj.csv"));
    write_field_csv(field, stage_dir(args.out_dir, "field.csv"));

    const int last = traj.n_steps() - 1;
    std::printf("control: %d main steps, trace/norm %.12g\n", grid.n_main(),
                sys.kind == SystemKind::Lvne ? trace_of(sys, traj.states[last])
                                             : (traj.states[last] + sys.x_e).norm());
    std::printf("control: final outputs:");
    for (int q = 0; q < sys.outputs_count(); ++q) {
        std::printf(" %s=%.6g", sys.outputs[q].label.c_str(), traj.outputs(last, q));
    }
    std::printf("\n");
    // crossover: first time output 0 exceeds every other output
    for (int j = 1; j <= last && sys.outputs_count() > 1; ++j) {
        const double lead = traj.outputs(j, 0) -
                            traj.outputs.row(j).tail(sys.outputs_count() - 1).maxCoeff();
        if (lead >= 0.0) {
            const double prev = traj.outputs(j - 1, 0) -
                                traj.outputs.row(j - 1).tail(sys.outputs_count() - 1).maxCoeff();
            double t_cross = traj.times[j];
            if (prev < 0.0 && lead > prev) {
                t_cross = traj.times[j - 1] + grid.delta * (-prev) / (lead - prev);
            }
            std::printf("control: output '%s' takes over at t = %.6g a.u. (%.6g fs)\n",
                        sys.outputs[0].label.c_str(), t_cross, t_cross / constants::time_fs);
            break;
        }
    }
    return 0;
}

int run_optimal(const CommonArgs& args, const std::string& system_name) {
    const auto cfg = load_config(args);
    auto sys = load_stage_system(args, system_name);
    const TimeGrid grid = cfg.time_grid();
    const OctConfig oct_cfg = cfg.oct(sys);

    auto specs = cfg.field_channels();
    if (specs.empty()) {
        throw ValidationError("optimal: field.channels must define the guess envelope");
    }
    if (cfg.raw.at("optimal").contains("guess_amplitude")) {
        const double amp = cfg.raw["optimal"]["guess_amplitude"].get<double>();
        for (auto& s : specs) s.amplitude = amp;
    }
    ControlField guess = make_field(grid, oct_cfg.substeps, specs, cfg.oct_alpha(sys.channels()));

    sys.x0 = initial_state(cfg.initial(), sys);
    const auto report = iterate(sys, guess, grid, oct_cfg);

    Eigen::MatrixXd jtable(report.j1.size(), 6);
    for (std::size_t n = 0; n < report.j1.size(); ++n) {
        jtable.row(n) << static_cast<double>(n), report.j1[n], report.j2[n], report.j3[n],
            report.j_total[n], report.y_target[n];
    }
    write_csv(stage_dir(args.out_dir, "oct_jtable.csv"),
              {"iter", "J1", "J2", "J3", "J", "y_target"}, jtable);
    write_field_csv(report.field, stage_dir(args.out_dir, "oct_field.csv"));
    const auto run = make_run("optimal", cfg, {});
    save_trajectory(sys, report.trajectory, stage_dir(args.out_dir, "oct_traj"), run);

    std::printf("optimal: %d iteration(s), %s, J = %.8g, target output = %.6g\n",
                report.iterations, report.converged ? "converged" : "max_iter reached",
                report.j_total.back(), report.y_target.back());
    return 0;
}

int run_balance(const CommonArgs& args) {
    const auto cfg = load_config(args);
    require_stage(args.out_dir, "lvne", "abncd");
    auto sys = import_external_system(stage_dir(args.out_dir, "lvne"));
    const json section = cfg.raw.contains("reduce") && cfg.raw["reduce"].contains("balance")
                             ? cfg.raw["reduce"]["balance"]
                             : json::object();
    auto stab = stabilize(sys, stabilize_method_from(section));
    auto scaled = scale_system(stab.system, section.value("BN_scale", 1.0));

    Eigen::MatrixXcd a = dense(scaled.A);
    std::vector<Eigen::MatrixXcd> n;
    for (const auto& nk : scaled.N) n.emplace_back(dense(nk));
    const auto solv = solvability_check(a, n);
    std::printf("balance: solvability margin %.4g (lambda %.4g, a %.4g)\n", solv.margin,
                solv.lambda, solv.a);
    if (solv.margin >= 1.0) {
        std::fprintf(stderr,
                     "balance: warning: solvability bound violated (margin %.3g >= 1); "
                     "consider a larger BN_scale\n",
                     solv.margin);
    }

    auto gram = compute_gramians(scaled, generalized_options_from(section));
    auto bal = balance_srbt(scaled, gram);

    const auto run = make_run("balance", cfg, {{"lvne", stage_dir(args.out_dir, "lvne")}});
    const auto dir = stage_dir(args.out_dir, "lvne_b");
    {
        ArchiveWriter w(dir);
        write_system_arrays(w, scaled);
        w.add_dense("balance_S", bal.S);
        w.add_dense("balance_T", bal.T);
        w.add_vector("hsv", bal.hsv);
        json meta = system_meta(scaled);
        meta["stage"] = "balance";
        meta["hsv_rank"] = bal.hsv.size();
        meta["balanced_error"] = bal.balanced_error;
        meta["gramian_residuals"] = {gram.residual_c, gram.residual_o};
        w.set_meta(meta);
        w.set_run_info(run.deterministic_json());
        w.finish();
        run.write_side_file(dir);
    }
    Eigen::MatrixXd hsv_data(bal.hsv.size(), 2);
    for (int i = 0; i < bal.hsv.size(); ++i) hsv_data.row(i) << double(i + 1), bal.hsv[i];
    write_csv(stage_dir(args.out_dir, "hsv.csv"), {"index", "sigma"}, hsv_data);
    std::printf("balance: rank %d, balanced deviation %.3g, Gramian residuals %.3g / %.3g\n",
                static_cast<int>(bal.hsv.size()), bal.balanced_error, gram.residual_c,
                gram.residual_o);
    return 0;
}

int run_truncate(const CommonArgs& args, int dim_flag, const std::string& mode_flag) {
    const auto cfg = load_config(args);
    require_stage(args.out_dir, "lvne_b", "balance");
    const auto dir_in = stage_dir(args.out_dir, "lvne_b");
    auto sys = import_external_system(dir_in);
    ArchiveReader r(dir_in);
    ReductionResult bal;
    bal.S = r.dense_c128("balance_S");
    bal.T = r.dense_c128("balance_T");
    bal.hsv = r.vector_f64("hsv");

    const json section = cfg.raw.contains("reduce") && cfg.raw["reduce"].contains("truncate")
                             ? cfg.raw["reduce"]["truncate"]
                             : json::object();
    const int d = dim_flag > 0 ? dim_flag : section.value("dim", 0);
    if (d <= 0) throw ValidationError("truncate: set --dim or reduce.truncate.dim");
    std::string mode = mode_flag.empty() ? section.value("mode", "simple") : mode_flag;
    const TruncateMode tmode =
        mode == "spt" ? TruncateMode::SingularPerturbation : TruncateMode::Simple;

    auto red = truncate(sys, bal, d, tmode);
    const auto run = make_run("truncate", cfg, {{"lvne_b", dir_in}});
    json meta;
    meta["stage"] = "truncate";
    meta["mode"] = mode;
    meta["order"] = d;
    save_system(red.reduced, stage_dir(args.out_dir, "lvne_t"), run, meta);
    std::printf("truncate: %s to order %d (sigma_d = %.4g, next sigma = %.4g)\n", mode.c_str(),
                d, bal.hsv[d - 1], d < bal.hsv.size() ? bal.hsv[d] : 0.0);
    return 0;
}

int run_h2model(const CommonArgs& args, int dim_flag) {
    const auto cfg = load_config(args);
    require_stage(args.out_dir, "lvne", "abncd");
    auto sys = import_external_system(stage_dir(args.out_dir, "lvne"));
    const json section = cfg.raw.contains("reduce") && cfg.raw["reduce"].contains("H2model")
                             ? cfg.raw["reduce"]["H2model"]
                             : json::object();
    auto stab = stabilize(sys, stabilize_method_from(section));
    auto scaled = scale_system(stab.system, section.value("BN_scale", 1.0));

    BirkaOptions opts;
    opts.max_iter = section.value("max_iter", 100);
    opts.conv_tol = section.value("conv_tol", 1e-6);
    if (!section.contains("seed")) {
        throw ValidationError("config: reduce.H2model.seed is required for reproducible runs");
    }
    opts.seed = section["seed"].get<std::uint64_t>();
    opts.gsylv = generalized_options_from(section);
    opts.gsylv.throw_on_fail = false;

    const int d = dim_flag > 0 ? dim_flag : section.value("dim", 0);
    if (d <= 0) throw ValidationError("h2model: set --dim or reduce.H2model.dim");
    auto res = birka(scaled, d, opts);

    const auto run = make_run("h2model", cfg, {{"lvne", stage_dir(args.out_dir, "lvne")}});
    json meta;
    meta["stage"] = "h2model";
    meta["order"] = d;
    meta["iterations"] = res.iterations;
    meta["converged"] = res.converged;
    save_system(res.reduced, stage_dir(args.out_dir, "lvne_h"), run, meta);
    std::printf("h2model: order %d, %d iteration(s), %s\n", d, res.iterations,
                res.converged ? "converged" : "not converged (last iterate kept)");
    return 0;
}

int run_h2error(const CommonArgs& args, const std::string& system_dir,
                const std::string& reduced_dir) {
    const auto cfg = load_config(args);
    auto sys = import_external_system(system_dir);
    auto red = import_external_system(reduced_dir);
    GeneralizedOptions opts;
    if (cfg.raw.contains("reduce") && cfg.raw["reduce"].contains("balance")) {
        opts = generalized_options_from(cfg.raw["reduce"]["balance"]);
    }
    const auto res = h2_error_full(sys, red, opts);
    std::printf("h2error: %.17g (dual route %.17g, solver residual %.3g)\n", res.value,
                res.value_dual, res.residual);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdyn — driven quantum dynamics, optimal control, and model reduction"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string kind_flag, system_name, mode_flag, system_dir, reduced_dir;
    int dim_flag = 0;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "run configuration (JSON)")->required();
        cmd->add_option("--out", args.out_dir, "stage directory (default .)");
    };

    auto* bound = app.add_subcommand("bound", "solve grid bound states");
    add_common(bound);
    auto* matrix = app.add_subcommand("matrix", "energy-basis matrix elements");
    add_common(matrix);
    auto* abncd = app.add_subcommand("abncd", "assemble the bilinear system");
    add_common(abncd);
    abncd->add_option("--kind", kind_flag, "tdse or lvne (default from config)");
    auto* control = app.add_subcommand("control", "propagate under a given field");
    add_common(control);
    control->add_option("--system", system_name, "system archive name or path");
    auto* optimal = app.add_subcommand("optimal", "optimal control iteration");
    add_common(optimal);
    optimal->add_option("--system", system_name, "system archive name or path");
    auto* balance = app.add_subcommand("balance", "Gramian balancing transformation");
    add_common(balance);
    auto* trunc = app.add_subcommand("truncate", "truncate the balanced system");
    add_common(trunc);
    trunc->add_option("--dim", dim_flag, "reduced order");
    trunc->add_option("--mode", mode_flag, "simple or spt");
    auto* h2model = app.add_subcommand("h2model", "H2-optimal reduction (BIRKA)");
    add_common(h2model);
    h2model->add_option("--dim", dim_flag, "reduced order");
    auto* h2error = app.add_subcommand("h2error", "H2 error between two systems");
    add_common(h2error);
    h2error->add_option("--system", system_dir, "full system archive")->required();
    h2error->add_option("--reduced", reduced_dir, "reduced system archive")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (bound->parsed()) return run_bound(args);
        if (matrix->parsed()) return run_matrix(args);
        if (abncd->parsed()) return run_abncd(args, kind_flag);
        if (control->parsed()) return run_control(args, system_name);
        if (optimal->parsed()) return run_optimal(args, system_name);
        if (balance->parsed()) return run_balance(args);
        if (trunc->parsed()) return run_truncate(args, dim_flag, mode_flag);
        if (h2model->parsed()) return run_h2model(args, dim_flag);
        if (h2error->parsed()) return run_h2error(args, system_dir, reduced_dir);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IndexError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 1;
    }
    return 0;
}
