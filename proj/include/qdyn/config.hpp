// config.hpp — run configuration: one structured JSON file per run with
// flattened keyword groups (model, observe, lvne, relax, dephase, time,
// solvers, field, initial, optimal, reduce). Unknown keys are rejected with
// their location.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdyn/bilinear.hpp"
#include "qdyn/constants.hpp"
#include "qdyn/field.hpp"
#include "qdyn/grid.hpp"
#include "qdyn/oct.hpp"
#include "qdyn/rates.hpp"

namespace qdyn {

namespace detail {

struct SchemaNode {
    std::set<std::string> keys;                  // allowed object keys ("*" = any)
    std::map<std::string, SchemaNode> children;  // nested objects / array elements ("[]")
};

inline void check_keys(const json& node, const SchemaNode& schema, const std::string& where) {
    if (node.is_object()) {
        for (const auto& [key, value] : node.items()) {
            if (!schema.keys.count(key) && !schema.keys.count("*")) {
                throw ValidationError("config: unknown key '" + where + key + "'");
            }
            auto it = schema.children.find(key);
            if (it != schema.children.end()) {
                check_keys(value, it->second, where + key + ".");
            }
        }
    } else if (node.is_array()) {
        auto it = schema.children.find("[]");
        if (it != schema.children.end()) {
            int idx = 0;
            for (const auto& value : node) {
                check_keys(value, it->second, where + std::to_string(idx++) + ".");
            }
        }
    }
}

inline const SchemaNode& config_schema() {
    static const SchemaNode schema = [] {
        SchemaNode model_fn;  // potential/dipole/sbc/amo entries
        model_fn.keys = {"kind", "d_e",   "r_e", "alpha",        "x0",   "coefficients",
                         "x",    "y",     "r_0", "q_0",          "r_0_angstrom",
                         "q_0_debye_per_angstrom", "center", "width", "value"};

        SchemaNode grid;
        grid.keys = {"n_points", "x_min", "x_max", "mass", "mass_amu"};

        SchemaNode dipole_list;
        dipole_list.children["[]"] = model_fn;

        SchemaNode model;
        model.keys = {"grid", "potential", "dipole", "sbc", "v_min", "v_max",
                      "convergence_check"};
        model.children["grid"] = grid;
        model.children["potential"] = model_fn;
        model.children["dipole"] = dipole_list;
        model.children["sbc"] = model_fn;

        SchemaNode observe_entry;
        observe_entry.keys = {"type", "states", "center", "width", "label"};
        SchemaNode observe;
        observe.children["[]"] = observe_entry;

        SchemaNode lvne;
        lvne.keys = {"temperature", "order"};

        SchemaNode relax;
        relax.keys = {"model", "rate", "rate_ps", "lower", "upper", "file"};

        SchemaNode dephase;
        dephase.keys = {"model", "kappa", "rate", "file"};

        SchemaNode time_grid;
        time_grid.keys = {"delta", "delta_fs", "start", "stop"};

        SchemaNode solvers;
        solvers.keys = {"reltol", "scheme", "substeps"};

        SchemaNode envelope;
        envelope.keys = {"kind", "duration", "duration_fs", "t0", "value"};
        SchemaNode channel;
        channel.keys = {"amplitude", "omega", "chirp", "phase", "envelope"};
        channel.children["envelope"] = envelope;
        SchemaNode field;
        field.keys = {"channels", "file"};
        field.children["channels"].children["[]"] = channel;

        SchemaNode initial;
        initial.keys = {"choice", "pure", "cat", "mixed", "temperature"};

        SchemaNode optimal;
        optimal.keys = {"terminal",  "functional", "max_iter", "tolerance", "alpha",
                        "eta",       "zeta",       "substeps", "j1c_eval",  "guess_amplitude"};

        SchemaNode balance;
        balance.keys = {"BN_scale", "method", "transform", "A_stable",
                        "A_split",  "A_shift", "tol",      "max_iter"};
        SchemaNode trunc;
        trunc.keys = {"dim", "mode"};
        SchemaNode h2model;
        h2model.keys = {"BN_scale", "method",  "max_iter", "conv_tol", "dim",
                        "seed",     "A_stable", "A_split",  "A_shift",  "tol"};
        SchemaNode reduce;
        reduce.keys = {"balance", "truncate", "H2model"};
        reduce.children["balance"] = balance;
        reduce.children["truncate"] = trunc;
        reduce.children["H2model"] = h2model;

        SchemaNode root;
        root.keys = {"model", "observe", "lvne",    "relax",   "dephase", "time",
                     "solvers", "field",   "initial", "optimal", "reduce",  "build"};
        root.children["model"] = model;
        root.children["observe"] = observe;
        root.children["lvne"] = lvne;
        root.children["relax"] = relax;
        root.children["dephase"] = dephase;
        root.children["time"] = time_grid;
        root.children["solvers"] = solvers;
        root.children["field"] = field;
        root.children["initial"] = initial;
        root.children["optimal"] = optimal;
        root.children["reduce"] = reduce;
        SchemaNode build;
        build.keys = {"kind"};
        root.children["build"] = build;
        return root;
    }();
    return schema;
}

template <typename T>
T require(const json& node, const std::string& key, const std::string& where) {
    if (!node.contains(key)) {
        throw ValidationError("config: missing key '" + where + key + "'");
    }
    try {
        return node.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: bad value type at '" + where + key + "'");
    }
}

inline void check_range(bool ok, const std::string& key, const std::string& legal) {
    if (!ok) throw ValidationError("config: field '" + key + "' outside legal range " + legal);
}

}  // namespace detail

struct WorkflowConfig {
    json raw;

    static WorkflowConfig parse(const json& j) {
        detail::check_keys(j, detail::config_schema(), "");
        WorkflowConfig cfg;
        cfg.raw = j;
        cfg.validate_ranges();
        return cfg;
    }

    static WorkflowConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("config: cannot open " + path.string());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ValidationError("config: parse error in " + path.string() + ": " + e.what());
        }
        return parse(j);
    }

    void validate_ranges() const {
        if (raw.contains("optimal")) {
            const json& opt = raw["optimal"];
            for (const char* key : {"eta", "zeta"}) {
                if (opt.contains(key)) {
                    const double v = opt[key].get<double>();
                    detail::check_range(v >= 0.0 && v <= 2.0, std::string("optimal.") + key,
                                        "[0, 2]");
                }
            }
            if (opt.contains("tolerance")) {
                detail::check_range(opt["tolerance"].get<double>() > 0.0, "optimal.tolerance",
                                    "(0, inf)");
            }
        }
        if (raw.contains("solvers") && raw["solvers"].contains("reltol")) {
            const double v = raw["solvers"]["reltol"].get<double>();
            detail::check_range(v > 1e-14 && v < 1e-2, "solvers.reltol", "(1e-14, 1e-2)");
        }
        if (raw.contains("lvne") && raw["lvne"].contains("order")) {
            const std::string v = raw["lvne"]["order"].get<std::string>();
            detail::check_range(v == "cs" || v == "df", "lvne.order", "{cs, df}");
        }
    }

    // ------------------------------------------------------------ typed views

    GridSpec grid() const {
        const json& g = raw.at("model").at("grid");
        GridSpec spec;
        spec.n_points = detail::require<int>(g, "n_points", "model.grid.");
        spec.x_min = detail::require<double>(g, "x_min", "model.grid.");
        spec.x_max = detail::require<double>(g, "x_max", "model.grid.");
        if (g.contains("mass_amu")) {
            spec.mass = g["mass_amu"].get<double>() * constants::mass_u;
        } else {
            spec.mass = detail::require<double>(g, "mass", "model.grid.");
        }
        spec.validate();
        return spec;
    }

    int v_min() const { return raw.at("model").value("v_min", 0); }
    int v_max() const { return detail::require<int>(raw.at("model"), "v_max", "model."); }
    bool convergence_check() const { return raw.at("model").value("convergence_check", false); }

    PotentialModel potential() const {
        const json& p = raw.at("model").at("potential");
        const std::string kind = detail::require<std::string>(p, "kind", "model.potential.");
        PotentialModel out;
        if (kind == "morse") {
            out.model = MorsePotential{detail::require<double>(p, "d_e", "model.potential."),
                                       detail::require<double>(p, "r_e", "model.potential."),
                                       detail::require<double>(p, "alpha", "model.potential.")};
        } else if (kind == "taylor") {
            out.model = parse_taylor(p, "model.potential.");
        } else if (kind == "tabulated") {
            out.model = parse_tabulated(p, "model.potential.");
        } else {
            throw ValidationError("config: model.potential.kind must be morse|taylor|tabulated");
        }
        out.validate();
        return out;
    }

    std::vector<DipoleModel> dipoles() const {
        std::vector<DipoleModel> out;
        if (!raw.at("model").contains("dipole")) return out;
        int idx = 0;
        for (const json& d : raw.at("model").at("dipole")) {
            const std::string where = "model.dipole." + std::to_string(idx++) + ".";
            const std::string kind = detail::require<std::string>(d, "kind", where);
            if (kind == "mecke") {
                MeckeDipole mecke;
                if (d.contains("r_0_angstrom")) {
                    mecke.r_0 = d["r_0_angstrom"].get<double>() * constants::length_angstrom;
                } else {
                    mecke.r_0 = detail::require<double>(d, "r_0", where);
                }
                if (d.contains("q_0_debye_per_angstrom")) {
                    mecke.q_0 = d["q_0_debye_per_angstrom"].get<double>() *
                                constants::dipole_debye / constants::length_angstrom;
                } else {
                    mecke.q_0 = detail::require<double>(d, "q_0", where);
                }
                out.push_back(DipoleModel{mecke});
            } else if (kind == "taylor") {
                out.push_back(DipoleModel{parse_taylor(d, where)});
            } else if (kind == "tabulated") {
                out.push_back(DipoleModel{parse_tabulated(d, where)});
            } else {
                throw ValidationError("config: " + where + "kind must be mecke|taylor|tabulated");
            }
        }
        return out;
    }

    std::optional<SbcModel> sbc() const {
        if (!raw.at("model").contains("sbc")) return std::nullopt;
        const json& s = raw.at("model").at("sbc");
        const std::string kind = detail::require<std::string>(s, "kind", "model.sbc.");
        if (kind == "taylor") return SbcModel{parse_taylor(s, "model.sbc.")};
        if (kind == "tabulated") return SbcModel{parse_tabulated(s, "model.sbc.")};
        throw ValidationError("config: model.sbc.kind must be taylor|tabulated");
    }

    std::vector<ObservableSpec> observables() const {
        std::vector<ObservableSpec> out;
        if (!raw.contains("observe")) return out;
        int idx = 0;
        for (const json& o : raw.at("observe")) {
            const std::string where = "observe." + std::to_string(idx++) + ".";
            const std::string type = detail::require<std::string>(o, "type", where);
            ObservableSpec spec;
            spec.label = o.value("label", type + std::to_string(idx - 1));
            if (type == "prj") {
                spec.spec = ProjectorObservable{
                    detail::require<std::vector<int>>(o, "states", where)};
            } else if (type == "ovl") {
                spec.spec =
                    OverlapObservable{detail::require<std::vector<int>>(o, "states", where)};
            } else if (type == "amo") {
                spec.spec = AmoObservable{
                    AmoModel{GaussianAmo{detail::require<double>(o, "center", where),
                                         detail::require<double>(o, "width", where)}}};
            } else {
                throw ValidationError("config: " + where + "type must be prj|ovl|amo");
            }
            out.push_back(std::move(spec));
        }
        return out;
    }

    double lvne_temperature() const {
        if (!raw.contains("lvne")) return 0.0;
        return raw.at("lvne").value("temperature", 0.0);
    }

    Ordering lvne_ordering() const {
        if (!raw.contains("lvne")) return Ordering::DiagonalsFirst;
        return raw.at("lvne").value("order", "df") == "cs" ? Ordering::ColumnStack
                                                           : Ordering::DiagonalsFirst;
    }

    std::optional<RateModel> relax() const {
        if (!raw.contains("relax")) return std::nullopt;
        const json& r = raw.at("relax");
        RateModel model;
        const std::string kind = r.value("model", "fermi");
        if (kind == "fermi") {
            model.kind = RateKind::Fermi;
        } else if (kind == "einstein") {
            model.kind = RateKind::Einstein;
        } else if (kind == "constant") {
            model.kind = RateKind::Constant;
        } else {
            throw ValidationError("config: relax.model must be fermi|einstein|constant");
        }
        if (r.contains("rate_ps")) {
            model.reference_rate = r["rate_ps"].get<double>() / constants::time_ps;
        } else {
            model.reference_rate = detail::require<double>(r, "rate", "relax.");
        }
        model.temperature = lvne_temperature();
        model.lower = r.value("lower", 0);
        model.upper = r.value("upper", 1);
        model.validate();
        return model;
    }

    DephasingModel dephase() const {
        DephasingModel model;
        model.kind = DephasingKind::Constant;
        model.rate = 0.0;
        if (!raw.contains("dephase")) return model;
        const json& d = raw.at("dephase");
        const std::string kind = d.value("model", "quadratic");
        if (kind == "quadratic") {
            model.kind = DephasingKind::Quadratic;
            model.kappa = d.value("kappa", 0.0);
        } else if (kind == "constant") {
            model.kind = DephasingKind::Constant;
            model.rate = d.value("rate", 0.0);
        } else {
            throw ValidationError("config: dephase.model must be quadratic|constant");
        }
        model.validate();
        return model;
    }

    TimeGrid time_grid() const {
        const json& t = raw.at("time");
        TimeGrid grid;
        if (t.contains("delta_fs")) {
            grid.delta = t["delta_fs"].get<double>() * constants::time_fs;
        } else {
            grid.delta = detail::require<double>(t, "delta", "time.");
        }
        grid.start = t.value("start", 0);
        grid.stop = detail::require<int>(t, "stop", "time.");
        grid.validate();
        return grid;
    }

    double reltol() const {
        if (!raw.contains("solvers")) return 1e-6;
        return raw.at("solvers").value("reltol", 1e-6);
    }

    int substeps() const {
        if (raw.contains("solvers") && raw.at("solvers").contains("substeps")) {
            return raw.at("solvers")["substeps"].get<int>();
        }
        return 10;
    }

    std::string scheme() const {
        if (!raw.contains("solvers")) return "adaptive";
        return raw.at("solvers").value("scheme", "adaptive");
    }

    std::vector<FieldSpec> field_channels() const {
        std::vector<FieldSpec> out;
        if (!raw.contains("field") || !raw.at("field").contains("channels")) return out;
        for (const json& ch : raw.at("field").at("channels")) {
            FieldSpec spec;
            spec.amplitude = ch.value("amplitude", 0.0);
            spec.omega = ch.value("omega", 0.0);
            spec.chirp = ch.value("chirp", 0.0);
            spec.phase = ch.value("phase", 0.0);
            if (ch.contains("envelope")) {
                const json& env = ch["envelope"];
                const std::string kind = env.value("kind", "sin2");
                if (kind == "sin2") {
                    Sin2Envelope s;
                    if (env.contains("duration_fs")) {
                        s.duration = env["duration_fs"].get<double>() * constants::time_fs;
                    } else {
                        s.duration = detail::require<double>(env, "duration", "field.envelope.");
                    }
                    s.t0 = env.value("t0", 0.0);
                    spec.envelope = Envelope{s};
                } else if (kind == "constant") {
                    spec.envelope = Envelope{ConstantEnvelope{env.value("value", 1.0)}};
                } else {
                    throw ValidationError("config: field envelope kind must be sin2|constant");
                }
            }
            out.push_back(spec);
        }
        return out;
    }

    std::optional<std::string> field_file() const {
        if (raw.contains("field") && raw.at("field").contains("file")) {
            return raw.at("field")["file"].get<std::string>();
        }
        return std::nullopt;
    }

    InitialStateSpec initial() const {
        InitialStateSpec spec{PureState{0}};
        if (!raw.contains("initial")) return spec;
        const json& i = raw.at("initial");
        const std::string choice = i.value("choice", "pure");
        if (choice == "pure") {
            spec.spec = PureState{i.value("pure", 0)};
        } else if (choice == "cat") {
            const auto v = detail::require<std::vector<int>>(i, "cat", "initial.");
            if (v.size() != 2) throw ValidationError("config: initial.cat needs two indices");
            spec.spec = CatState{v[0], v[1]};
        } else if (choice == "mixed") {
            const auto v = detail::require<std::vector<int>>(i, "mixed", "initial.");
            if (v.size() != 2) throw ValidationError("config: initial.mixed needs two indices");
            spec.spec = MixedState{v[0], v[1]};
        } else if (choice == "thermal") {
            spec.spec = ThermalState{i.value("temperature", lvne_temperature())};
        } else {
            throw ValidationError("config: initial.choice must be pure|cat|mixed|thermal");
        }
        return spec;
    }

    OctConfig oct(const BilinearSystem& sys) const {
        const json& o = raw.at("optimal");
        OctConfig cfg;
        cfg.target = o.value("terminal", 0);
        const std::string fn = o.value("functional", "j1a");
        if (fn == "j1a") {
            cfg.functional = Functional::J1a;
        } else if (fn == "j1b") {
            cfg.functional = Functional::J1b;
        } else if (fn == "j1c") {
            cfg.functional = Functional::J1c;
        } else {
            throw ValidationError("config: optimal.functional must be j1a|j1b|j1c");
        }
        cfg.eta = o.value("eta", 1.0);
        cfg.zeta = o.value("zeta", 1.0);
        cfg.max_iter = o.value("max_iter", 50);
        cfg.tolerance = o.value("tolerance", 1e-10);
        cfg.substeps = o.value("substeps", substeps());
        cfg.j1c_eval = o.value("j1c_eval", "boundary") == "every" ? OverlapEval::EveryT
                                                                  : OverlapEval::AtBoundary;
        cfg.validate(sys);
        return cfg;
    }

    Eigen::VectorXd oct_alpha(int channels) const {
        Eigen::VectorXd alpha = Eigen::VectorXd::Ones(channels);
        if (raw.contains("optimal") && raw.at("optimal").contains("alpha")) {
            const json& a = raw.at("optimal")["alpha"];
            if (a.is_number()) {
                alpha.setConstant(a.get<double>());
            } else {
                const auto v = a.get<std::vector<double>>();
                if (static_cast<int>(v.size()) != channels) {
                    throw ValidationError("config: optimal.alpha length must match channels");
                }
                for (int k = 0; k < channels; ++k) alpha[k] = v[k];
            }
        }
        if ((alpha.array() <= 0.0).any()) {
            throw ValidationError("config: field 'optimal.alpha' outside legal range (0, inf)");
        }
        return alpha;
    }

private:
    static TaylorModel parse_taylor(const json& node, const std::string& where) {
        TaylorModel model;
        model.x0 = node.value("x0", 0.0);
        model.coefficients = detail::require<std::vector<double>>(node, "coefficients", where);
        return model;
    }

    static TabulatedModel parse_tabulated(const json& node, const std::string& where) {
        return TabulatedModel(detail::require<std::vector<double>>(node, "x", where),
                              detail::require<std::vector<double>>(node, "y", where));
    }
};

}  // namespace qdyn
