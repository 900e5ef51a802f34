// workflow.hpp — stage functions tying the modules together: archive schemas
// for bound states and bilinear systems, stage runners matching the CLI
// subcommands, and run provenance records.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "qdyn/archive.hpp"
#include "qdyn/basis.hpp"
#include "qdyn/birka.hpp"
#include "qdyn/config.hpp"
#include "qdyn/csv.hpp"
#include "qdyn/h2.hpp"
#include "qdyn/oct.hpp"
#include "qdyn/propagate.hpp"
#include "qdyn/reduction.hpp"

namespace qdyn {

inline constexpr const char* tool_version = "0.1.0";

// ------------------------------------------------------------ run provenance

inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_file(const std::filesystem::path& path, std::uint64_t& acc) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        acc = fnv1a(buf, static_cast<std::size_t>(in.gcount()), acc);
        if (!in) break;
    }
    char out[32];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(acc));
    return out;
}

// digest over manifest.json and every blob of an archive directory
inline std::string hash_archive(const std::filesystem::path& dir) {
    std::uint64_t acc = 1469598103934665603ull;
    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().filename() == "run.json") continue;
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::string digest;
    for (const auto& f : files) digest = hash_file(f, acc);
    return digest.empty() ? "0" : digest;
}

inline std::string hash_json(const json& j) {
    const std::string s = j.dump();
    std::uint64_t acc = fnv1a(s.data(), s.size(), 1469598103934665603ull);
    char out[32];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(acc));
    return out;
}

struct RunManifest {
    std::string stage;
    std::vector<std::pair<std::string, std::string>> input_hashes;  // (archive, digest)
    std::string config_hash;
    std::string version{tool_version};

    // stage/inputs/config/version are deterministic and also mirrored into the
    // archive manifest; the wall-clock timestamp lives only in run.json so that
    // identical runs stay byte-identical
    json deterministic_json() const {
        json j;
        j["stage"] = stage;
        j["version"] = version;
        j["config_hash"] = config_hash;
        j["inputs"] = json::object();
        for (const auto& [name, digest] : input_hashes) j["inputs"][name] = digest;
        return j;
    }

    void write_side_file(const std::filesystem::path& dir) const {
        json j = deterministic_json();
        char buf[64];
        const std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        j["timestamp"] = buf;
        std::ofstream out(dir / "run.json");
        out << j.dump(2) << "\n";
    }
};

// ----------------------------------------------------- bound-state persistence

inline void save_bound_states(const BoundStates& bound, const std::filesystem::path& dir,
                              const RunManifest& run) {
    ArchiveWriter w(dir);
    w.add_vector("energies", bound.energies);
    w.add_dense("wavefunctions", bound.wavefunctions);
    json meta;
    meta["payload"] = "bound";
    meta["grid"] = {{"n_points", bound.grid.n_points},
                    {"x_min", bound.grid.x_min},
                    {"x_max", bound.grid.x_max},
                    {"mass", bound.grid.mass}};
    if (std::isfinite(bound.threshold)) {
        meta["threshold"] = bound.threshold;
    } else {
        meta["threshold"] = "inf";  // JSON cannot carry IEEE infinities
    }
    w.set_meta(meta);
    w.set_run_info(run.deterministic_json());
    w.finish();
    run.write_side_file(dir);
}

inline BoundStates load_bound_states(const std::filesystem::path& dir) {
    ArchiveReader r(dir);
    BoundStates bound;
    bound.energies = r.vector_f64("energies");
    bound.wavefunctions = r.dense_f64("wavefunctions");
    const json meta = r.meta();
    if (meta.value("payload", "") != "bound") {
        throw FormatError("archive at " + dir.string() + " is not a bound-state payload");
    }
    const json& g = meta.at("grid");
    bound.grid = GridSpec{g.at("n_points").get<int>(), g.at("x_min").get<double>(),
                          g.at("x_max").get<double>(), g.at("mass").get<double>()};
    if (meta.contains("threshold") && meta["threshold"].is_number()) {
        bound.threshold = meta["threshold"].get<double>();
    } else {
        bound.threshold = std::numeric_limits<double>::infinity();
    }
    return bound;
}

// --------------------------------------------------- bilinear-system archives

inline void write_system_arrays(ArchiveWriter& w, const BilinearSystem& sys) {
    w.add_sparse("A", sys.A);
    for (int k = 0; k < sys.channels(); ++k) {
        w.add_sparse("N_" + std::to_string(k), sys.N[k]);
        w.add_vector("b_" + std::to_string(k), sys.b[k]);
    }
    w.add_vector("x_e", sys.x_e);
    w.add_vector("x0", sys.x0);
    for (int q = 0; q < sys.outputs_count(); ++q) {
        const Output& o = sys.outputs[q];
        if (o.c.size() > 0) w.add_vector("c_" + std::to_string(q), o.c);
        if (o.D.size() > 0) w.add_dense("D_" + std::to_string(q), o.D);
    }
    if (sys.vec_index.size() > 0) {
        Eigen::VectorXd idx(sys.vec_index.size());
        for (int i = 0; i < sys.vec_index.size(); ++i) idx[i] = sys.vec_index[i];
        w.add_vector("vec_index", idx);
    }
    if (sys.level_energies.size() > 0) w.add_vector("level_energies", sys.level_energies);
}

inline json system_meta(const BilinearSystem& sys) {
    json outputs_meta = json::array();
    for (const Output& o : sys.outputs) {
        json om;
        om["label"] = o.label;
        om["form"] = o.form == OutputForm::Linear ? "linear" : "quadratic";
        om["offset"] = o.offset;
        om["from_overlap"] = o.from_overlap;
        outputs_meta.push_back(om);
    }
    json meta;
    meta["payload"] = "system";
    meta["kind"] = sys.kind == SystemKind::Tdse ? "tdse" : "lvne";
    meta["dim"] = sys.dim;
    meta["n_states"] = sys.n_states;
    meta["channels"] = sys.channels();
    meta["field_scale"] = sys.field_scale;
    meta["ordering"] = sys.ordering == Ordering::ColumnStack ? "cs" : "df";
    meta["bath_temperature"] = sys.bath_temperature;
    meta["outputs"] = outputs_meta;
    return meta;
}

inline void save_system(const BilinearSystem& sys, const std::filesystem::path& dir,
                        const RunManifest& run, json extra_meta = json::object()) {
    ArchiveWriter w(dir);
    write_system_arrays(w, sys);
    json meta = system_meta(sys);
    meta.update(extra_meta);
    w.set_meta(meta);
    w.set_run_info(run.deterministic_json());
    w.finish();
    run.write_side_file(dir);
}

// Loads a system archive; also accepts externally produced archives that
// provide only A and at least one N (x_e defaults to zero, outputs may be
// absent). Dimensional consistency is validated on load.
inline BilinearSystem import_external_system(const std::filesystem::path& dir) {
    ArchiveReader r(dir);
    const json meta = r.meta();
    BilinearSystem sys;
    if (!r.has("A")) throw FormatError("system archive lacks matrix A: " + dir.string());
    sys.A = r.sparse("A");
    if (sys.A.rows() != sys.A.cols()) throw FormatError("system archive: A must be square");
    sys.dim = static_cast<int>(sys.A.rows());
    sys.kind = meta.value("kind", "tdse") == "lvne" ? SystemKind::Lvne : SystemKind::Tdse;
    sys.n_states = meta.value("n_states", sys.dim);
    sys.field_scale = meta.value("field_scale", 1.0);
    sys.bath_temperature = meta.value("bath_temperature", 0.0);
    sys.ordering = meta.value("ordering", "cs") == "df" ? Ordering::DiagonalsFirst
                                                        : Ordering::ColumnStack;

    for (int k = 0;; ++k) {
        const std::string name = "N_" + std::to_string(k);
        if (!r.has(name)) break;
        SparseMatrixC nk = r.sparse(name);
        if (nk.rows() != sys.dim || nk.cols() != sys.dim) {
            throw FormatError("system archive: N_" + std::to_string(k) + " dimension mismatch");
        }
        sys.N.push_back(std::move(nk));
    }
    if (sys.N.empty()) {
        throw FormatError("system archive needs at least one control matrix N_0: " +
                          dir.string());
    }
    sys.x_e = r.has("x_e") ? r.vector_c128("x_e") : Eigen::VectorXcd::Zero(sys.dim);
    if (sys.x_e.size() != sys.dim) throw FormatError("system archive: x_e dimension mismatch");
    sys.x0 = r.has("x0") ? r.vector_c128("x0") : Eigen::VectorXcd::Zero(sys.dim);
    if (sys.x0.size() != sys.dim) throw FormatError("system archive: x0 dimension mismatch");
    for (int k = 0; k < sys.channels(); ++k) {
        const std::string name = "b_" + std::to_string(k);
        sys.b.push_back(r.has(name) ? r.vector_c128(name)
                                    : Eigen::VectorXcd(sys.N[k] * sys.x_e));
        if (sys.b.back().size() != sys.dim) {
            throw FormatError("system archive: b vector dimension mismatch");
        }
    }
    const json outputs_meta = meta.value("outputs", json::array());
    for (std::size_t q = 0; q < outputs_meta.size() || r.has("c_" + std::to_string(q)); ++q) {
        const std::string cname = "c_" + std::to_string(q);
        const std::string dname = "D_" + std::to_string(q);
        if (!r.has(cname) && !r.has(dname)) break;
        Output out;
        if (q < outputs_meta.size()) {
            out.label = outputs_meta[q].value("label", cname);
            out.form = outputs_meta[q].value("form", "linear") == "quadratic"
                           ? OutputForm::Quadratic
                           : OutputForm::Linear;
            out.offset = outputs_meta[q].value("offset", 0.0);
            out.from_overlap = outputs_meta[q].value("from_overlap", false);
        } else {
            out.label = cname;
            out.form = r.has(dname) ? OutputForm::Quadratic : OutputForm::Linear;
        }
        if (r.has(cname)) {
            out.c = r.vector_c128(cname);
            if (out.c.size() != sys.dim) throw FormatError("system archive: c dimension mismatch");
        }
        if (r.has(dname)) {
            out.D = r.dense_c128(dname);
            if (out.D.rows() != sys.dim) throw FormatError("system archive: D dimension mismatch");
        }
        sys.outputs.push_back(std::move(out));
    }
    if (r.has("vec_index")) {
        const Eigen::VectorXd idx = r.vector_f64("vec_index");
        sys.vec_index.resize(idx.size());
        for (int i = 0; i < idx.size(); ++i) sys.vec_index[i] = static_cast<int>(idx[i]);
    }
    if (r.has("level_energies")) sys.level_energies = r.vector_f64("level_energies");

    // invariant: the equilibrium state is annihilated by the field-free generator
    if (sys.x_e.norm() > 0.0) {
        const double residual = (sys.A * sys.x_e).norm();
        if (residual > 1e-8 * (1.0 + sys.x_e.norm())) {
            throw FormatError("system archive: A x_e != 0 (residual " +
                              std::to_string(residual) + ")");
        }
    }
    return sys;
}

inline BilinearSystem load_system(const std::filesystem::path& dir) {
    return import_external_system(dir);
}

// --------------------------------------------------------------- trajectories

inline void save_trajectory(const BilinearSystem& sys, const Trajectory& traj,
                            const std::filesystem::path& dir, const RunManifest& run) {
    ArchiveWriter w(dir);
    w.add_vector("times", traj.times);
    Eigen::MatrixXcd states(sys.dim, traj.n_steps());
    for (int j = 0; j < traj.n_steps(); ++j) states.col(j) = traj.states[j];
    w.add_dense("states", states);
    w.add_dense("outputs", traj.outputs);
    json meta;
    meta["payload"] = "trajectory";
    json labels = json::array();
    for (const auto& o : sys.outputs) labels.push_back(o.label);
    meta["labels"] = labels;
    w.set_meta(meta);
    w.set_run_info(run.deterministic_json());
    w.finish();
    run.write_side_file(dir);
}

inline void write_trajectory_csv(const BilinearSystem& sys, const Trajectory& traj,
                                 const std::filesystem::path& path) {
    std::vector<std::string> header{"t"};
    for (const auto& o : sys.outputs) header.push_back(o.label);
    Eigen::MatrixXd data(traj.n_steps(), 1 + sys.outputs_count());
    data.col(0) = traj.times;
    data.rightCols(sys.outputs_count()) = traj.outputs;
    write_csv(path, header, data);
}

inline void write_field_csv(const ControlField& field, const std::filesystem::path& path) {
    std::vector<std::string> header{"t"};
    for (int k = 0; k < field.channels(); ++k) header.push_back("u_" + std::to_string(k + 1));
    Eigen::MatrixXd data(field.n_samples(), 1 + field.channels());
    for (int s = 0; s < field.n_samples(); ++s) data(s, 0) = field.t0 + s * field.dt;
    data.rightCols(field.channels()) = field.u;
    write_csv(path, header, data);
}

// field samples from a CSV with columns t, u_1..u_m on a uniform grid
inline ControlField field_from_csv(const std::filesystem::path& path) {
    std::vector<std::string> header;
    const Eigen::MatrixXd data = read_csv(path, &header);
    if (data.cols() < 2 || data.rows() < 2) {
        throw FormatError("field csv needs columns t, u_1..: " + path.string());
    }
    ControlField field;
    field.t0 = data(0, 0);
    field.dt = data(1, 0) - data(0, 0);
    if (!(field.dt > 0.0)) throw FormatError("field csv: non-increasing time column");
    for (int s = 2; s < data.rows(); ++s) {
        const double step = data(s, 0) - data(s - 1, 0);
        if (std::abs(step - field.dt) > 1e-9 * std::max(1.0, std::abs(field.dt))) {
            throw FormatError("field csv: time column must be uniform");
        }
    }
    const int m = static_cast<int>(data.cols()) - 1;
    field.u = data.rightCols(m);
    field.s = Eigen::MatrixXd::Ones(data.rows(), m);
    field.alpha = Eigen::VectorXd::Ones(m);
    return field;
}

// ----------------------------------------------------------------- stage glue

inline std::filesystem::path stage_dir(const std::filesystem::path& out,
                                       const std::string& name) {
    return out / name;
}

// open an upstream archive with a diagnostic naming the producer stage
inline void require_stage(const std::filesystem::path& out, const std::string& archive,
                          const std::string& producer) {
    if (!std::filesystem::exists(stage_dir(out, archive) / "manifest.json")) {
        throw IoError("missing archive '" + archive + "' under " + out.string() +
                      " — run the '" + producer + "' stage first");
    }
}

}  // namespace qdyn
