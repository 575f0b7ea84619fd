#pragma once

// Configuration-driven experiment runner.
//
// Config schema (YAML mapping; every key optional except `model`):
//
//   model: wave_heat            # wave_heat | lshape | scalar_demo | custom
//   T: 2.0
//   Nt: 200
//   lambda: [1.0]               # scalar or list, each > 0
//   omega: [0.25]               # scalar or list, each >= 0; default [1/(2T)]
//   stop: {tol: 1e-10, max_iter: 500}
//   output: out
//   seed: 0
//   wave: {cells: 16, rho: 1.0, tension: 1.0, damping: 0.0, left_end: clamped}   # or external_force
//   heat: {nodes: 16}
//   lshape: {n: 4, rho: 1.0, tension: 1.0, damping: 0.0}
//   custom: {file: matrices.yaml}   # relative to the config file
//   initial: {kind: bump, amplitude: 1.0}       # zero | bump | random
//   input: {kind: zero, amplitude: 1.0, frequency: 1.0}   # zero | constant | sine
//
// Custom matrix file:
//
//   components:
//     - {H: [[1]], A: [[-1]], B_int: [[1]], C_int: [[1]]}   # rows; also B_ext, C_ext, D, m_ext, m_int
//   coupling: [[-1]]
//   x0: [1.0]

#include "prlm/models.hpp"
#include "prlm/reference_solver.hpp"
#include "prlm/splitting.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace prlm::experiment {

enum class ModelKind { WaveHeat, LShape, ScalarDemo, Custom };
enum class InitialKind { Zero, Bump, Random };
enum class InputKind { Zero, Constant, Sine };

struct WaveConfig {
    Index cells = 16;
    std::vector<double> rho{1.0};
    std::vector<double> tension{1.0};
    std::vector<double> damping{0.0};
    models::WaveLeftEnd left_end = models::WaveLeftEnd::Clamped;
    bool operator==(const WaveConfig&) const = default;
};

struct LShapeConfig {
    Index n = 4;
    double rho = 1.0;
    double tension = 1.0;
    double damping = 0.0;
    bool operator==(const LShapeConfig&) const = default;
};

struct ExperimentConfig {
    ModelKind model = ModelKind::WaveHeat;
    double T = 2.0;
    Index Nt = 200;
    std::vector<double> lambdas{kDefaultLambda};
    std::vector<double> omegas{0.25};
    double tol = 1e-10;
    Index max_iter = 500;
    std::string output = "out";
    std::uint64_t seed = 0;
    WaveConfig wave;
    Index heat_nodes = 16;
    LShapeConfig lshape;
    std::string custom_file;
    InitialKind initial = InitialKind::Bump;
    double initial_amplitude = 1.0;
    InputKind input = InputKind::Zero;
    double input_amplitude = 1.0;
    double input_frequency = 1.0;
    /// Directory that relative paths in the config are resolved against.
    std::string base_dir = ".";

    bool operator==(const ExperimentConfig&) const = default;
};

inline const char* to_string(ModelKind m) {
    switch (m) {
        case ModelKind::WaveHeat: return "wave_heat";
        case ModelKind::LShape: return "lshape";
        case ModelKind::ScalarDemo: return "scalar_demo";
        case ModelKind::Custom: return "custom";
    }
    return "?";
}

inline const char* to_string(InitialKind k) {
    switch (k) {
        case InitialKind::Zero: return "zero";
        case InitialKind::Bump: return "bump";
        case InitialKind::Random: return "random";
    }
    return "?";
}

inline const char* to_string(InputKind k) {
    switch (k) {
        case InputKind::Zero: return "zero";
        case InputKind::Constant: return "constant";
        case InputKind::Sine: return "sine";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::ValidationError, field + ": " + what);
}

inline void reject_unknown(const YAML::Node& map, const std::string& where, std::set<std::string> known) {
    for (const auto& kv : map) {
        const std::string key = kv.first.as<std::string>();
        if (!known.count(key)) invalid(where.empty() ? key : where + "." + key, "unknown key");
    }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) invalid(field, "expected a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        invalid(field, "cannot convert '" + node.Scalar() + "'");
    }
}

inline std::vector<double> number_list(const YAML::Node& node, const std::string& field) {
    std::vector<double> out;
    if (node.IsScalar()) {
        out.push_back(scalar<double>(node, field));
    } else if (node.IsSequence()) {
        for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<double>(node[i], field));
    } else {
        invalid(field, "expected a number or a list of numbers");
    }
    return out;
}

inline YAML::Node map_node(const YAML::Node& root, const char* key) {
    const YAML::Node n = root[key];
    if (n && !n.IsMap()) invalid(key, "expected a mapping");
    return n;
}

inline Matrix matrix(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence()) invalid(field, "expected a list of rows");
    const Index rows = static_cast<Index>(node.size());
    Index cols = -1;
    Matrix m;
    for (Index r = 0; r < rows; ++r) {
        const std::vector<double> row = number_list(node[static_cast<std::size_t>(r)], field);
        if (cols < 0) {
            cols = static_cast<Index>(row.size());
            m.resize(rows, cols);
        }
        if (static_cast<Index>(row.size()) != cols) invalid(field, "ragged matrix");
        for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    if (rows == 0) m.resize(0, 0);
    return m;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".") {
    using detail::invalid;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg,
                    static_cast<std::size_t>(e.mark.line + 1));
    }
    if (!root.IsMap()) throw Error(ErrorCode::ParseError, "top level must be a mapping", 1);
    detail::reject_unknown(root, "", {"model", "T", "Nt", "lambda", "omega", "stop", "output", "seed", "wave",
                                      "heat", "lshape", "custom", "initial", "input"});

    ExperimentConfig c;
    c.base_dir = base_dir;
    if (!root["model"]) invalid("model", "missing");
    {
        const auto m = detail::scalar<std::string>(root["model"], "model");
        if (m == "wave_heat") c.model = ModelKind::WaveHeat;
        else if (m == "lshape") c.model = ModelKind::LShape;
        else if (m == "scalar_demo") c.model = ModelKind::ScalarDemo;
        else if (m == "custom") c.model = ModelKind::Custom;
        else invalid("model", "unknown model '" + m + "'");
    }
    if (root["T"]) c.T = detail::scalar<double>(root["T"], "T");
    if (!(std::isfinite(c.T) && c.T > 0.0)) invalid("T", "must be > 0");
    if (root["Nt"]) c.Nt = detail::scalar<Index>(root["Nt"], "Nt");
    if (c.Nt < 1) invalid("Nt", "must be >= 1");

    if (root["lambda"]) c.lambdas = detail::number_list(root["lambda"], "lambda");
    if (c.lambdas.empty()) invalid("lambda", "must not be empty");
    for (double l : c.lambdas)
        if (!(std::isfinite(l) && l > 0.0)) invalid("lambda", "must be > 0");
    if (root["omega"]) {
        c.omegas = detail::number_list(root["omega"], "omega");
    } else {
        c.omegas = {default_omega(TimeGrid(c.T, c.Nt))};
    }
    if (c.omegas.empty()) invalid("omega", "must not be empty");
    for (double w : c.omegas) {
        if (!(std::isfinite(w) && w >= 0.0)) invalid("omega", "must be >= 0");
        if (w * c.T / static_cast<double>(c.Nt) >= 1.0) invalid("omega", "omega * T / Nt must be < 1");
    }

    if (const YAML::Node s = detail::map_node(root, "stop")) {
        detail::reject_unknown(s, "stop", {"tol", "max_iter"});
        if (s["tol"]) c.tol = detail::scalar<double>(s["tol"], "stop.tol");
        if (s["max_iter"]) c.max_iter = detail::scalar<Index>(s["max_iter"], "stop.max_iter");
    }
    if (!(std::isfinite(c.tol) && c.tol >= 0.0)) invalid("stop.tol", "must be >= 0");
    if (c.max_iter < 1) invalid("stop.max_iter", "must be >= 1");
    if (root["output"]) c.output = detail::scalar<std::string>(root["output"], "output");
    if (root["seed"]) c.seed = detail::scalar<std::uint64_t>(root["seed"], "seed");

    if (const YAML::Node w = detail::map_node(root, "wave")) {
        detail::reject_unknown(w, "wave", {"cells", "rho", "tension", "damping", "left_end"});
        if (w["cells"]) c.wave.cells = detail::scalar<Index>(w["cells"], "wave.cells");
        if (w["rho"]) c.wave.rho = detail::number_list(w["rho"], "wave.rho");
        if (w["tension"]) c.wave.tension = detail::number_list(w["tension"], "wave.tension");
        if (w["damping"]) c.wave.damping = detail::number_list(w["damping"], "wave.damping");
        if (w["left_end"]) {
            const auto e = detail::scalar<std::string>(w["left_end"], "wave.left_end");
            if (e == "clamped") c.wave.left_end = models::WaveLeftEnd::Clamped;
            else if (e == "external_force") c.wave.left_end = models::WaveLeftEnd::ExternalForce;
            else invalid("wave.left_end", "expected clamped or external_force");
        }
    }
    if (c.wave.cells < 2) invalid("wave.cells", "must be >= 2");
    if (const YAML::Node h = detail::map_node(root, "heat")) {
        detail::reject_unknown(h, "heat", {"nodes"});
        if (h["nodes"]) c.heat_nodes = detail::scalar<Index>(h["nodes"], "heat.nodes");
    }
    if (c.heat_nodes < 2) invalid("heat.nodes", "must be >= 2");
    if (const YAML::Node l = detail::map_node(root, "lshape")) {
        detail::reject_unknown(l, "lshape", {"n", "rho", "tension", "damping"});
        if (l["n"]) c.lshape.n = detail::scalar<Index>(l["n"], "lshape.n");
        if (l["rho"]) c.lshape.rho = detail::scalar<double>(l["rho"], "lshape.rho");
        if (l["tension"]) c.lshape.tension = detail::scalar<double>(l["tension"], "lshape.tension");
        if (l["damping"]) c.lshape.damping = detail::scalar<double>(l["damping"], "lshape.damping");
    }
    if (c.lshape.n < 2) invalid("lshape.n", "must be >= 2");
    if (!(c.lshape.rho > 0.0)) invalid("lshape.rho", "must be > 0");
    if (!(c.lshape.tension > 0.0)) invalid("lshape.tension", "must be > 0");
    if (!(c.lshape.damping >= 0.0)) invalid("lshape.damping", "must be >= 0");
    if (const YAML::Node cu = detail::map_node(root, "custom")) {
        detail::reject_unknown(cu, "custom", {"file"});
        if (cu["file"]) c.custom_file = detail::scalar<std::string>(cu["file"], "custom.file");
    }
    if (c.model == ModelKind::Custom && c.custom_file.empty()) invalid("custom.file", "required for model custom");

    if (const YAML::Node i = detail::map_node(root, "initial")) {
        detail::reject_unknown(i, "initial", {"kind", "amplitude"});
        if (i["kind"]) {
            const auto k = detail::scalar<std::string>(i["kind"], "initial.kind");
            if (k == "zero") c.initial = InitialKind::Zero;
            else if (k == "bump") c.initial = InitialKind::Bump;
            else if (k == "random") c.initial = InitialKind::Random;
            else invalid("initial.kind", "expected zero, bump or random");
        }
        if (i["amplitude"]) c.initial_amplitude = detail::scalar<double>(i["amplitude"], "initial.amplitude");
    }
    if (!std::isfinite(c.initial_amplitude)) invalid("initial.amplitude", "must be finite");
    if (const YAML::Node u = detail::map_node(root, "input")) {
        detail::reject_unknown(u, "input", {"kind", "amplitude", "frequency"});
        if (u["kind"]) {
            const auto k = detail::scalar<std::string>(u["kind"], "input.kind");
            if (k == "zero") c.input = InputKind::Zero;
            else if (k == "constant") c.input = InputKind::Constant;
            else if (k == "sine") c.input = InputKind::Sine;
            else invalid("input.kind", "expected zero, constant or sine");
        }
        if (u["amplitude"]) c.input_amplitude = detail::scalar<double>(u["amplitude"], "input.amplitude");
        if (u["frequency"]) c.input_frequency = detail::scalar<double>(u["frequency"], "input.frequency");
    }
    if (!std::isfinite(c.input_amplitude)) invalid("input.amplitude", "must be finite");
    if (!std::isfinite(c.input_frequency)) invalid("input.frequency", "must be finite");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    return parse_config(ss.str(), parent.empty() ? "." : parent.string());
}

/// YAML text that parse_config maps back to `c` (base_dir excepted).
inline std::string emit_config(const ExperimentConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    const auto list = [&](const std::vector<double>& v) {
        e << YAML::Flow << YAML::BeginSeq;
        for (double x : v) e << x;
        e << YAML::EndSeq;
    };
    e << YAML::BeginMap;
    e << YAML::Key << "model" << YAML::Value << to_string(c.model);
    e << YAML::Key << "T" << YAML::Value << c.T;
    e << YAML::Key << "Nt" << YAML::Value << c.Nt;
    e << YAML::Key << "lambda" << YAML::Value;
    list(c.lambdas);
    e << YAML::Key << "omega" << YAML::Value;
    list(c.omegas);
    e << YAML::Key << "stop" << YAML::Value << YAML::BeginMap << YAML::Key << "tol" << YAML::Value << c.tol
      << YAML::Key << "max_iter" << YAML::Value << c.max_iter << YAML::EndMap;
    e << YAML::Key << "output" << YAML::Value << c.output;
    e << YAML::Key << "seed" << YAML::Value << c.seed;
    e << YAML::Key << "wave" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "cells" << YAML::Value << c.wave.cells;
    e << YAML::Key << "rho" << YAML::Value;
    list(c.wave.rho);
    e << YAML::Key << "tension" << YAML::Value;
    list(c.wave.tension);
    e << YAML::Key << "damping" << YAML::Value;
    list(c.wave.damping);
    e << YAML::Key << "left_end" << YAML::Value
      << (c.wave.left_end == models::WaveLeftEnd::Clamped ? "clamped" : "external_force");
    e << YAML::EndMap;
    e << YAML::Key << "heat" << YAML::Value << YAML::BeginMap << YAML::Key << "nodes" << YAML::Value
      << c.heat_nodes << YAML::EndMap;
    e << YAML::Key << "lshape" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "n" << YAML::Value << c.lshape.n;
    e << YAML::Key << "rho" << YAML::Value << c.lshape.rho;
    e << YAML::Key << "tension" << YAML::Value << c.lshape.tension;
    e << YAML::Key << "damping" << YAML::Value << c.lshape.damping;
    e << YAML::EndMap;
    if (!c.custom_file.empty()) {
        e << YAML::Key << "custom" << YAML::Value << YAML::BeginMap << YAML::Key << "file" << YAML::Value
          << c.custom_file << YAML::EndMap;
    }
    e << YAML::Key << "initial" << YAML::Value << YAML::BeginMap << YAML::Key << "kind" << YAML::Value
      << to_string(c.initial) << YAML::Key << "amplitude" << YAML::Value << c.initial_amplitude << YAML::EndMap;
    e << YAML::Key << "input" << YAML::Value << YAML::BeginMap << YAML::Key << "kind" << YAML::Value
      << to_string(c.input) << YAML::Key << "amplitude" << YAML::Value << c.input_amplitude << YAML::Key
      << "frequency" << YAML::Value << c.input_frequency << YAML::EndMap;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Problem assembly

/// Components, coupling and data before the coupled problem certifies them.
struct ProblemParts {
    std::vector<std::string> names;
    std::vector<SystemNode> components;
    CouplingOperator coupling;
    TimeGrid grid;
    Vector x0;
    GridTrajectory u_ext;
};

namespace detail {

struct CustomData {
    std::vector<SystemNode> components;
    Matrix coupling;
    std::optional<Vector> x0;
};

inline CustomData load_custom(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw Error(ErrorCode::ParseError, "cannot open " + path);
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::ParseError, path + ": line " + std::to_string(e.mark.line + 1) + ": " + e.msg,
                    static_cast<std::size_t>(e.mark.line + 1));
    }
    if (!root.IsMap()) throw Error(ErrorCode::ParseError, path + ": top level must be a mapping", 1);
    reject_unknown(root, "custom", {"components", "coupling", "x0"});
    const YAML::Node comps = root["components"];
    if (!comps || !comps.IsSequence() || comps.size() == 0) invalid("custom.components", "expected a non-empty list");
    CustomData out;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const YAML::Node c = comps[i];
        const std::string f = "custom.components[" + std::to_string(i) + "]";
        if (!c.IsMap()) invalid(f, "expected a mapping");
        reject_unknown(c, f, {"H", "A", "B_ext", "B_int", "C_ext", "C_int", "D", "m_ext", "m_int"});
        if (!c["A"] || !c["H"]) invalid(f, "A and H are required");
        NodeBlocks b;
        b.A = matrix(c["A"], f + ".A");
        b.n = b.A.rows();
        const auto opt = [&](const char* key) { return c[key] ? matrix(c[key], f + "." + key) : Matrix(); };
        b.B_ext = opt("B_ext");
        b.B_int = opt("B_int");
        b.C_ext = opt("C_ext");
        b.C_int = opt("C_int");
        b.D = opt("D");
        b.m_ext = c["m_ext"] ? scalar<Index>(c["m_ext"], f + ".m_ext")
                             : std::max(b.B_ext.cols(), b.C_ext.rows());
        b.m_int = c["m_int"] ? scalar<Index>(c["m_int"], f + ".m_int")
                             : std::max(b.B_int.cols(), b.C_int.rows());
        out.components.push_back(assemble_node(b, matrix(c["H"], f + ".H")));
    }
    out.coupling = root["coupling"] ? matrix(root["coupling"], "custom.coupling") : Matrix(0, 0);
    if (root["x0"]) {
        const std::vector<double> v = number_list(root["x0"], "custom.x0");
        out.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
    return out;
}

inline models::Wave1dParams wave_params(const WaveConfig& w) {
    models::Wave1dParams p;
    p.cells = w.cells;
    p.rho = w.rho;
    p.tension = w.tension;
    p.damping = w.damping;
    p.left_end = w.left_end;
    return p;
}

inline std::pair<models::Wave2dParams, models::Wave2dParams> lshape_params(const LShapeConfig& l) {
    auto pr = models::lshape_params(l.n);
    for (auto* p : {&pr.first, &pr.second}) {
        p->rho = {l.rho};
        p->tension = {l.tension};
        p->damping = {l.damping};
    }
    return pr;
}

}  // namespace detail

inline ProblemParts build_parts(const ExperimentConfig& c) {
    const TimeGrid grid(c.T, c.Nt);
    ProblemParts parts{{}, {}, CouplingOperator(), grid, Vector(), GridTrajectory(grid, Sampling::Midpoint, 0)};
    Vector bump;
    switch (c.model) {
        case ModelKind::WaveHeat: {
            const auto wp = detail::wave_params(c.wave);
            models::HeatCGParams hp;
            hp.nodes = c.heat_nodes;
            parts.names = {"wave", "heat"};
            parts.components = {models::build_wave1d(wp, models::WavePortMode::VelocityInForceOut),
                                models::build_heat_cg1d(hp)};
            parts.coupling = CouplingOperator(models::wave_heat_coupling());
            bump.resize(parts.components[0].n() + parts.components[1].n());
            bump << models::wave1d_bump(wp, parts.components[0]), models::heat_profile(hp);
            break;
        }
        case ModelKind::LShape: {
            const auto [a, b] = detail::lshape_params(c.lshape);
            parts.names = {"omega1", "omega2"};
            parts.components = {models::build_wave2d_rect(a), models::build_wave2d_rect(b)};
            const Index k = static_cast<Index>(models::port_faces(a, false).size());
            if (k != static_cast<Index>(models::port_faces(b, false).size())) {
                throw Error(ErrorCode::NonconformingInterface, "interface face counts differ");
            }
            parts.coupling = CouplingOperator(models::lshape_coupling(k));
            bump = Vector::Zero(parts.components[0].n() + parts.components[1].n());
            bump.head(parts.components[0].n()) = models::wave2d_bump(a, parts.components[0], 0.5, 1.0, 0.3);
            break;
        }
        case ModelKind::ScalarDemo: {
            NodeBlocks b{1, 0, 1, Matrix::Constant(1, 1, -1.0), Matrix(), Matrix::Constant(1, 1, 1.0), Matrix(),
                         Matrix::Constant(1, 1, 1.0), Matrix()};
            parts.names = {"scalar"};
            parts.components = {assemble_node(b, Matrix::Identity(1, 1))};
            parts.coupling = CouplingOperator(Matrix::Constant(1, 1, -1.0));
            bump = Vector::Ones(1);
            break;
        }
        case ModelKind::Custom: {
            std::filesystem::path f(c.custom_file);
            if (f.is_relative()) f = std::filesystem::path(c.base_dir) / f;
            detail::CustomData d = detail::load_custom(f.string());
            for (std::size_t i = 0; i < d.components.size(); ++i) parts.names.push_back("component" + std::to_string(i));
            parts.components = std::move(d.components);
            parts.coupling = CouplingOperator(d.coupling);
            Index n = 0;
            for (const auto& nd : parts.components) n += nd.n();
            bump = d.x0 ? *d.x0 : Vector::Zero(n);
            if (bump.size() != n) detail::invalid("custom.x0", "length must equal the total state dimension");
            break;
        }
    }
    Index n = 0, me = 0;
    for (const auto& nd : parts.components) {
        n += nd.n();
        me += nd.m_ext();
    }
    switch (c.initial) {
        case InitialKind::Zero: parts.x0 = Vector::Zero(n); break;
        case InitialKind::Bump: parts.x0 = c.initial_amplitude * bump; break;
        case InitialKind::Random: {
            std::mt19937_64 rng(c.seed);
            std::uniform_real_distribution<double> dist(-1.0, 1.0);
            parts.x0.resize(n);
            for (Index i = 0; i < n; ++i) parts.x0(i) = c.initial_amplitude * dist(rng);
            break;
        }
    }
    parts.u_ext = GridTrajectory(grid, Sampling::Midpoint, me);
    for (Index j = 0; j < grid.steps(); ++j) {
        double v = 0.0;
        if (c.input == InputKind::Constant) v = c.input_amplitude;
        if (c.input == InputKind::Sine) v = c.input_amplitude * std::sin(2.0 * M_PI * c.input_frequency * grid.mid_time(j));
        parts.u_ext.row(j).setConstant(v);
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Certificates

struct CertificateReport {
    struct Component {
        std::string name;
        DissipativityReport dissipativity;
        PsopEstimate psop;
    };
    std::vector<Component> components;
    double coupling_max_sym_eig = 0.0;
    bool coupling_ok = false;
    std::optional<MonotonicityReport> monotonicity;
    std::optional<double> closed_loop_residual;
    std::string error;

    bool ok() const {
        if (!error.empty() || !coupling_ok) return false;
        for (const auto& c : components)
            if (!c.dissipativity.is_dissipative) return false;
        return !monotonicity || monotonicity->passed;
    }
};

inline constexpr Index kCertificateSamples = 100;

/// Assembly certificates; the discrete monotonicity sample and closed-loop solve run only
/// when the problem assembles.
inline CertificateReport certify(const ProblemParts& parts, std::uint64_t seed) {
    CertificateReport r;
    for (std::size_t i = 0; i < parts.components.size(); ++i) {
        r.components.push_back({parts.names[i], check_dissipativity(parts.components[i]),
                                parts.components[i].m_ext() > 0 ? estimate_psop_epsilon(parts.components[i])
                                                                 : PsopEstimate{0.0, true}});
    }
    r.coupling_max_sym_eig = linalg::max_sym_eigenvalue(linalg::sym_part(parts.coupling.matrix()));
    r.coupling_ok = check_coupling_monotone(parts.coupling);
    try {
        const CoupledProblem p(parts.components, parts.coupling, parts.grid, parts.x0, parts.u_ext);
        r.monotonicity = check_discrete_monotonicity(p, kCertificateSamples, seed);
        r.closed_loop_residual = closed_loop_residual(p, solve_monolithic(p));
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

inline std::string format_certificates(const CertificateReport& r) {
    std::ostringstream os;
    os << std::setprecision(6) << std::scientific;
    for (const auto& c : r.components) {
        os << "component " << c.name << ": max_sym_eig=" << c.dissipativity.max_sym_eig
           << " dissipative=" << (c.dissipativity.is_dissipative ? "true" : "false");
        if (!c.psop.vacuous) os << " psop_epsilon=" << c.psop.epsilon;
        os << "\n";
    }
    os << "coupling: max_sym_eig=" << r.coupling_max_sym_eig << " monotone=" << (r.coupling_ok ? "true" : "false")
       << "\n";
    if (r.monotonicity) {
        os << "discrete monotonicity: min_slack=" << r.monotonicity->min_slack << " samples="
           << r.monotonicity->samples << " passed=" << (r.monotonicity->passed ? "true" : "false") << "\n";
    }
    if (r.closed_loop_residual) os << "closed-loop residual: " << *r.closed_loop_residual << "\n";
    if (!r.error.empty()) os << "assembly error: " << r.error << "\n";
    os << "certificates: " << (r.ok() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Runs and summary

struct CellResult {
    double lambda = 0.0;
    double omega = 0.0;
    std::optional<ConvergenceReport> report;
    std::string error;
};

struct SummaryRow {
    double lambda = 0.0;
    double omega = 0.0;
    Index iterations = 0;
    std::string status;
    double dxu_l2 = 0.0;
    double sup_err = 0.0;
    double yext_err = 0.0;
    double monotone_slack = std::numeric_limits<double>::infinity();
    double domination_slack = std::numeric_limits<double>::infinity();
    double b_slack = std::numeric_limits<double>::infinity();
    double c_slack = std::numeric_limits<double>::infinity();
    double psop_slack = std::numeric_limits<double>::infinity();
    bool ok = true;
};

inline SummaryRow summarize(const ConvergenceReport& rep) {
    SummaryRow s;
    s.lambda = rep.lambda;
    s.omega = rep.omega;
    s.iterations = rep.iterations;
    s.status = to_string(rep.status);
    if (!rep.rows.empty()) {
        s.dxu_l2 = rep.rows.back().dxu_l2;
        s.sup_err = rep.rows.back().sup_err;
        s.yext_err = rep.rows.back().yext_err;
    }
    for (const auto& r : rep.rows) {
        s.monotone_slack = std::min(s.monotone_slack, r.monotone_slack);
        s.domination_slack = std::min(s.domination_slack, r.domination_slack);
        s.b_slack = std::min(s.b_slack, r.b_slack);
        s.c_slack = std::min(s.c_slack, r.c_slack);
        s.psop_slack = std::min(s.psop_slack, r.psop_slack);
    }
    s.ok = rep.all_ok();
    return s;
}

/// Whitespace-aligned table, one row per report; unchecked slacks print as inf.
inline std::string emit_summary(std::span<const ConvergenceReport> reports) {
    std::ostringstream os;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-12s %-12s %-9s %6s %-14s %-14s %-14s %-14s %-14s %-14s %-14s %-14s %s\n",
                  "lambda", "omega", "status", "iters", "dxu_l2", "sup_err", "yext_err", "min_monotone",
                  "min_domination", "min_b", "min_c", "min_psop", "ok");
    os << buf;
    for (const auto& rep : reports) {
        const SummaryRow s = summarize(rep);
        std::snprintf(buf, sizeof buf,
                      "%-12.6g %-12.6g %-9s %6ld %-14.6e %-14.6e %-14.6e %-14.6e %-14.6e %-14.6e %-14.6e %-14.6e %s\n",
                      s.lambda, s.omega, s.status.c_str(), static_cast<long>(s.iterations), s.dxu_l2, s.sup_err,
                      s.yext_err, s.monotone_slack, s.domination_slack, s.b_slack, s.c_slack, s.psop_slack,
                      s.ok ? "true" : "false");
        os << buf;
    }
    return os.str();
}

inline std::string cell_tag(double lambda, double omega) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "lambda_%.6g_omega_%.6g", lambda, omega);
    return buf;
}

struct ExperimentResult {
    int exit_status = 0;
    CertificateReport certificates;
    std::vector<CellResult> cells;
    std::vector<std::string> files;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::string>& files) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    out << text;
    files.push_back(path.filename().string());
}

template <class T>
std::string csv_text(const T& v) {
    std::ostringstream os;
    write_csv(os, v);
    return os.str();
}

}  // namespace detail

/// Runs every (lambda, omega) cell against the monolithic reference and writes:
/// reference_x.csv, reference_u.csv, report_<tag>.csv, iterate_x_<tag>.csv,
/// iterate_u_<tag>.csv and summary.txt. Exit status is 1 iff a certificate, a cell or
/// any per-iteration check fails.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    ExperimentResult res;
    const std::filesystem::path dir(c.output);
    std::filesystem::create_directories(dir);

    std::optional<ProblemParts> parts;
    try {
        parts = build_parts(c);
        res.certificates = certify(*parts, c.seed);
    } catch (const Error& e) {
        res.certificates.error = e.what();
    }
    std::ostringstream summary;
    summary << "model: " << to_string(c.model) << "\n";
    summary << "T: " << c.T << "  Nt: " << c.Nt << "  tol: " << c.tol << "  max_iter: " << c.max_iter
            << "  seed: " << c.seed << "\n\n";
    summary << format_certificates(res.certificates) << "\n";
    if (!res.certificates.ok()) {
        detail::write_file(dir / "summary.txt", summary.str(), res.files);
        res.exit_status = 1;
        return res;
    }

    const CoupledProblem p(parts->components, parts->coupling, parts->grid, parts->x0, parts->u_ext);
    const TrajPair ref = solve_monolithic(p);
    detail::write_file(dir / "reference_x.csv", detail::csv_text(ref.x), res.files);
    detail::write_file(dir / "reference_u.csv", detail::csv_text(ref.u), res.files);

    std::vector<ConvergenceReport> reports;
    bool ok = true;
    for (double lambda : c.lambdas) {
        for (double omega : c.omegas) {
            CellResult cell{lambda, omega, std::nullopt, {}};
            try {
                ConvergenceReport rep = run(p, lambda, omega, StopCriteria{c.max_iter, c.tol}, ref);
                const std::string tag = cell_tag(lambda, omega);
                detail::write_file(dir / ("report_" + tag + ".csv"), detail::csv_text(rep), res.files);
                detail::write_file(dir / ("iterate_x_" + tag + ".csv"), detail::csv_text(rep.final_pair->x), res.files);
                detail::write_file(dir / ("iterate_u_" + tag + ".csv"), detail::csv_text(rep.final_pair->u), res.files);
                ok = ok && rep.all_ok();
                reports.push_back(rep);
                cell.report = std::move(rep);
            } catch (const Error& e) {
                cell.error = e.what();
                ok = false;
            }
            res.cells.push_back(std::move(cell));
        }
    }
    summary << emit_summary(reports);
    for (const auto& cell : res.cells) {
        if (!cell.error.empty()) {
            summary << "cell " << cell_tag(cell.lambda, cell.omega) << " failed: " << cell.error << "\n";
        }
    }
    summary << "\noverall: " << (ok ? "PASS" : "FAIL") << "\n";
    detail::write_file(dir / "summary.txt", summary.str(), res.files);
    res.exit_status = ok ? 0 : 1;
    return res;
}

}  // namespace prlm::experiment
