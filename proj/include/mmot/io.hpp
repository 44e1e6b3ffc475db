#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmot/analysis.hpp"
#include "mmot/costs.hpp"
#include "mmot/duality.hpp"
#include "mmot/extended_real.hpp"
#include "mmot/measures.hpp"
#include "mmot/solver.hpp"

namespace mmot::io {

using json = nlohmann::ordered_json;

// Malformed input. The message starts with the dotted path of the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what) : std::runtime_error(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// ---------------------------------------------------------------------------------------------
// Scalars. JSON has no infinity, so +inf is written as the string "inf" (and -inf as "-inf").

inline json real_to_json(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double real_from_json(const json& j, const std::string& field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(field, "expected a number or \"inf\"");
}

inline json to_json(const ExtendedReal& v) { return v.is_infinite() ? json("inf") : json(v.value()); }

inline ExtendedReal extended_from_json(const json& j, const std::string& field) {
    const double v = real_from_json(j, field);
    if (std::isinf(v) && v > 0) return ExtendedReal::infinity();
    if (!std::isfinite(v)) throw ConfigError(field, "expected a finite number or \"inf\"");
    return ExtendedReal(v);
}

inline json optional_to_json(const std::optional<double>& v) { return v ? real_to_json(*v) : json(nullptr); }

namespace detail {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline const json& require(const json& j, const std::string& path, const std::string& key) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(join(path, key), "missing");
    return *it;
}

inline double number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError(field, "expected a number");
    return j.get<double>();
}

inline std::uint64_t unsigned_integer(const json& j, const std::string& field) {
    if (!j.is_number_unsigned()) throw ConfigError(field, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline std::string string(const json& j, const std::string& field) {
    if (!j.is_string()) throw ConfigError(field, "expected a string");
    return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& field) {
    if (!j.is_boolean()) throw ConfigError(field, "expected true or false");
    return j.get<bool>();
}

inline const json& array(const json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError(field, "expected an array");
    return j;
}

inline std::vector<double> numbers(const json& j, const std::string& field) {
    std::vector<double> out;
    for (std::size_t i = 0; i < array(j, field).size(); ++i) {
        out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
}

// Runs a constructor and rewrites its validation error as a field error.
template <class F>
auto at_field(const std::string& field, F&& make) -> decltype(make()) {
    try {
        return make();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// Measures, densities, costs

inline json to_json(const DiscreteMeasure& rho) {
    json atoms = json::array();
    for (const auto& a : rho.atoms()) atoms.push_back({{"position", a.position}, {"weight", a.weight}});
    return {{"dimension", rho.dimension()}, {"atoms", std::move(atoms)}};
}

inline DiscreteMeasure measure_from_json(const json& j, const std::string& path = "measure") {
    using namespace detail;
    const auto d = unsigned_integer(require(j, path, "dimension"), join(path, "dimension"));
    const auto& atoms_j = array(require(j, path, "atoms"), join(path, "atoms"));
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < atoms_j.size(); ++i) {
        const std::string p = join(path, "atoms[" + std::to_string(i) + "]");
        atoms.push_back({numbers(require(atoms_j[i], p, "position"), join(p, "position")),
                         number(require(atoms_j[i], p, "weight"), join(p, "weight"))});
    }
    return at_field(path, [&] { return DiscreteMeasure(static_cast<std::size_t>(d), std::move(atoms)); });
}

inline json to_json(const HistogramDensity& h) {
    json cells = json::array();
    for (const auto& c : h.cells()) cells.push_back({{"min", c.min}, {"max", c.max}, {"value", c.value}});
    return {{"dimension", h.dimension()}, {"cells", std::move(cells)}};
}

inline HistogramDensity histogram_from_json(const json& j, const std::string& path = "histogram") {
    using namespace detail;
    const auto d = unsigned_integer(require(j, path, "dimension"), join(path, "dimension"));
    const auto& cells_j = array(require(j, path, "cells"), join(path, "cells"));
    std::vector<HistogramCell> cells;
    for (std::size_t i = 0; i < cells_j.size(); ++i) {
        const std::string p = join(path, "cells[" + std::to_string(i) + "]");
        cells.push_back({numbers(require(cells_j[i], p, "min"), join(p, "min")),
                         numbers(require(cells_j[i], p, "max"), join(p, "max")),
                         number(require(cells_j[i], p, "value"), join(p, "value"))});
    }
    return at_field(path, [&] { return HistogramDensity(static_cast<std::size_t>(d), std::move(cells)); });
}

inline json to_json(const RepulsiveCost& c) {
    json j;
    if (c.kind() == CostKind::power) {
        j["kind"] = "power";
        j["exponent"] = c.exponent();
    } else {
        j["kind"] = "table";
        json pts = json::array();
        for (const auto& [t, v] : c.table_points()) pts.push_back({t, v});
        j["points"] = std::move(pts);
    }
    j["truncation"] = optional_to_json(c.truncation());
    return j;
}

inline RepulsiveCost cost_from_json(const json& j, const std::string& path = "cost") {
    using namespace detail;
    const auto kind = string(require(j, path, "kind"), join(path, "kind"));
    std::optional<double> trunc;
    if (const auto it = j.find("truncation"); it != j.end() && !it->is_null()) {
        trunc = number(*it, join(path, "truncation"));
    }
    if (kind == "power") {
        const double s = number(require(j, path, "exponent"), join(path, "exponent"));
        return at_field(join(path, "exponent"), [&] { return RepulsiveCost::power(s, trunc); });
    }
    if (kind == "table") {
        const auto& pts_j = array(require(j, path, "points"), join(path, "points"));
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < pts_j.size(); ++i) {
            const std::string p = join(path, "points[" + std::to_string(i) + "]");
            const auto v = numbers(pts_j[i], p);
            if (v.size() != 2) throw ConfigError(p, "expected a pair [t, phi(t)]");
            pts.emplace_back(v[0], v[1]);
        }
        return at_field(join(path, "points"), [&] { return RepulsiveCost::table(std::move(pts), trunc); });
    }
    throw ConfigError(join(path, "kind"), "expected \"power\" or \"table\"");
}

// ---------------------------------------------------------------------------------------------
// Plans and potentials

inline json to_json(const TransportPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries()) entries.push_back({{"indices", e.indices}, {"weight", e.weight}});
    return {{"N", plan.n_marginals()}, {"atoms", to_json(plan.marginal())}, {"entries", std::move(entries)}};
}

inline json to_json(const SolveResult& r) {
    json j = to_json(r.plan);
    j["value"] = to_json(r.value);
    j["method"] = to_string(r.method);
    j["residuals"] = {{"primal", real_to_json(r.primal_residual)},
                      {"duality_gap", real_to_json(r.duality_gap)},
                      {"dual_violation", real_to_json(r.max_dual_violation)}};
    j["certified"] = r.certified;
    if (r.dual_objective) j["dual_objective"] = real_to_json(*r.dual_objective);
    if (r.method == Method::entropic) {
        j["regularized_value"] = real_to_json(r.regularized_value);
        j["iterations"] = r.iterations;
        j["converged"] = r.converged;
    }
    return j;
}

inline TransportPlan plan_from_json(const json& j, const std::string& path = "plan") {
    using namespace detail;
    const auto n = unsigned_integer(require(j, path, "N"), join(path, "N"));
    auto rho = measure_from_json(require(j, path, "atoms"), join(path, "atoms"));
    const auto& entries_j = array(require(j, path, "entries"), join(path, "entries"));
    std::vector<PlanEntry> entries;
    for (std::size_t i = 0; i < entries_j.size(); ++i) {
        const std::string p = join(path, "entries[" + std::to_string(i) + "]");
        PlanEntry e;
        for (double v : numbers(require(entries_j[i], p, "indices"), join(p, "indices"))) {
            e.indices.push_back(static_cast<std::size_t>(v));
        }
        e.weight = number(require(entries_j[i], p, "weight"), join(p, "weight"));
        entries.push_back(std::move(e));
    }
    return at_field(path, [&] { return TransportPlan(std::move(rho), static_cast<int>(n), std::move(entries)); });
}

inline json to_json(const PotentialSet& p) {
    json j;
    j["atoms"] = to_json(p.marginal);
    j["N"] = p.n_marginals;
    j["u"] = p.u;
    j["tuple"] = p.tuple ? json(*p.tuple) : json(nullptr);
    j["canonical"] = p.canonical;
    j["objective"] = real_to_json(p.objective());
    j["fixed_point_residual"] = real_to_json(p.fixed_point_residual);
    j["iterations"] = p.iterations;
    return j;
}

inline PotentialSet potential_from_json(const json& j, const std::string& path = "potential") {
    using namespace detail;
    PotentialSet p;
    p.marginal = measure_from_json(require(j, path, "atoms"), join(path, "atoms"));
    p.n_marginals = static_cast<int>(unsigned_integer(require(j, path, "N"), join(path, "N")));
    p.u = numbers(require(j, path, "u"), join(path, "u"));
    if (p.u.size() != p.marginal.size()) throw ConfigError(join(path, "u"), "length differs from the atom count");
    if (const auto it = j.find("tuple"); it != j.end() && !it->is_null()) {
        std::vector<std::vector<double>> t;
        for (std::size_t i = 0; i < array(*it, join(path, "tuple")).size(); ++i) {
            t.push_back(numbers((*it)[i], join(path, "tuple[" + std::to_string(i) + "]")));
        }
        p.tuple = std::move(t);
    }
    if (const auto it = j.find("canonical"); it != j.end()) p.canonical = boolean(*it, join(path, "canonical"));
    return p;
}

// ---------------------------------------------------------------------------------------------
// Reports

inline json to_json(const CheckEntry& e) {
    json j;
    j["name"] = e.name;
    j["paper_ref"] = e.paper_ref;
    j["claimed"] = real_to_json(e.claimed);
    j["measured"] = real_to_json(e.measured);
    j["margin"] = real_to_json(e.margin);
    j["pass"] = e.status == CheckStatus::pass;
    j["status"] = to_string(e.status);
    j["diagnostic"] = e.diagnostic;
    j["seed"] = e.seed;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
}

inline json to_json(const VerificationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back(to_json(c));
    return {{"instance", r.instance},   {"N", r.n_marginals},
            {"cost", r.cost},           {"beta", optional_to_json(r.beta)},
            {"alpha_star", optional_to_json(r.alpha_star)}, {"all_pass", r.all_pass()},
            {"checks", std::move(checks)}};
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string csv_number(double v) {
    const json j = real_to_json(v);
    return j.is_string() ? j.get<std::string>() : j.dump();
}

inline std::string csv_header() { return "instance,N,name,paper_ref,claimed,measured,margin,status,diagnostic,seed\n"; }

inline std::string to_csv_rows(const VerificationReport& r) {
    std::ostringstream os;
    for (const auto& c : r.checks) {
        os << r.instance << ',' << r.n_marginals << ',' << csv_field(c.name) << ',' << csv_field(c.paper_ref) << ','
           << csv_number(c.claimed) << ',' << csv_number(c.measured) << ',' << csv_number(c.margin) << ','
           << to_string(c.status) << ',' << (c.diagnostic ? 1 : 0) << ',' << c.seed << '\n';
    }
    return os.str();
}

// Two whitespace-separated columns with a commented header.
inline std::string xy_data(const std::string& x_label, const std::string& y_label, const std::vector<double>& x,
                           const std::vector<double>& y) {
    std::ostringstream os;
    os << "# " << x_label << ' ' << y_label << '\n';
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) os << csv_number(x[i]) << ' ' << csv_number(y[i]) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------------------------
// Experiment configuration

enum class Task { solve, dual, verify, campaign, continuity };

inline const char* to_string(Task t) {
    switch (t) {
        case Task::solve: return "solve";
        case Task::dual: return "dual";
        case Task::verify: return "verify";
        case Task::campaign: return "campaign";
        case Task::continuity: return "continuity";
    }
    return "?";
}

inline Task task_from_string(const std::string& s, const std::string& field = "task") {
    for (Task t : {Task::solve, Task::dual, Task::verify, Task::campaign, Task::continuity})
        if (s == to_string(t)) return t;
    throw ConfigError(field, "unknown task \"" + s + "\" (expected solve, dual, verify, campaign or continuity)");
}

// Exactly one of file, inline measure or generator.
struct MeasureSource {
    std::optional<std::string> file;
    std::optional<DiscreteMeasure> measure;
    std::optional<GeneratorSpec> generator;
};

// rho_n = base with weights perturbed by at most amplitude * decay^n, n = 1..count.
struct PerturbationFamily {
    MeasureSource base;
    std::size_t count = 10;
    std::uint64_t seed = 0;
    double amplitude = 0.5;
    double decay = 0.25;
};

// rho_n = (1/2 + 1/n) delta_0 + (1/2 - 1/n) delta_1 for n = offset + 1, ..., offset + count; limit (delta_0 + delta_1)/2.
struct TwoDiracFamily {
    std::size_t count = 10;
    std::size_t offset = 2;
};

struct MeasuresConfig {
    int n_marginals = 2;
    std::optional<MeasureSource> measure;
    std::optional<CampaignSpec> campaign;
    std::optional<PerturbationFamily> perturbation;
    std::optional<TwoDiracFamily> two_dirac;
    std::vector<MeasureSource> sequence;
    std::optional<MeasureSource> limit;
};

struct SolverConfig {
    std::string method = "exact-lp";  // or "entropic" for task solve
    std::size_t budget = 2'000'000;
    std::vector<double> epsilons{1.0, 0.1, 0.01};
    std::size_t max_iters = 200000;
    double support_threshold = 1e-9;
    std::size_t probes = 1000;
    std::uint64_t probe_seed = 20240601;
    bool entropic_checks = false;
    double tail_tolerance = 1e-3;
};

struct OutputConfig {
    std::string directory = "out";
    bool csv = true;
    bool plots = true;
};

struct ExperimentConfig {
    Task task = Task::solve;
    MeasuresConfig measures;
    RepulsiveCost cost = RepulsiveCost::power(1.0);
    SolverConfig solver;
    OutputConfig outputs;
};

inline json to_json(const GeneratorSpec& g) {
    return {{"seed", g.seed}, {"dimension", g.dimension}, {"atoms", g.atoms}, {"min_spacing", g.min_spacing}};
}

inline json to_json(const MeasureSource& s) {
    if (s.file) return {{"file", *s.file}};
    if (s.measure) return {{"inline", to_json(*s.measure)}};
    if (s.generator) return {{"generator", to_json(*s.generator)}};
    return nullptr;
}

inline json to_json(const ExperimentConfig& c) {
    json m;
    m["N"] = c.measures.n_marginals;
    if (c.measures.measure) m["measure"] = to_json(*c.measures.measure);
    if (c.measures.campaign) {
        const auto& s = *c.measures.campaign;
        m["campaign"] = {{"seed", s.seed}, {"count", s.count}, {"n_values", s.n_values}, {"dimensions", s.dimensions}};
    }
    if (c.measures.perturbation) {
        const auto& p = *c.measures.perturbation;
        m["perturbation"] = {{"base", to_json(p.base)}, {"count", p.count},         {"seed", p.seed},
                             {"amplitude", p.amplitude}, {"decay", p.decay}};
    }
    if (c.measures.two_dirac) m["two_dirac"] = {{"count", c.measures.two_dirac->count}, {"offset", c.measures.two_dirac->offset}};
    if (!c.measures.sequence.empty()) {
        json seq = json::array();
        for (const auto& s : c.measures.sequence) seq.push_back(to_json(s));
        m["sequence"] = std::move(seq);
    }
    if (c.measures.limit) m["limit"] = to_json(*c.measures.limit);

    const auto& s = c.solver;
    json solver = {{"method", s.method},
                   {"budget", s.budget},
                   {"epsilons", s.epsilons},
                   {"max_iters", s.max_iters},
                   {"support_threshold", s.support_threshold},
                   {"probes", s.probes},
                   {"probe_seed", s.probe_seed},
                   {"entropic_checks", s.entropic_checks},
                   {"tail_tolerance", s.tail_tolerance}};
    json outputs = {{"directory", c.outputs.directory}, {"csv", c.outputs.csv}, {"plots", c.outputs.plots}};
    return {{"task", to_string(c.task)}, {"measures", std::move(m)}, {"cost", to_json(c.cost)},
            {"solver", std::move(solver)}, {"outputs", std::move(outputs)}};
}

namespace detail {

inline MeasureSource source_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || j.size() != 1) {
        throw ConfigError(path, "expected exactly one of \"file\", \"inline\" or \"generator\"");
    }
    MeasureSource s;
    if (j.contains("file")) {
        s.file = string(j["file"], join(path, "file"));
    } else if (j.contains("inline")) {
        s.measure = measure_from_json(j["inline"], join(path, "inline"));
    } else if (j.contains("generator")) {
        const std::string p = join(path, "generator");
        const json& g = j["generator"];
        GeneratorSpec spec;
        spec.seed = unsigned_integer(require(g, p, "seed"), join(p, "seed"));
        spec.dimension = unsigned_integer(require(g, p, "dimension"), join(p, "dimension"));
        spec.atoms = unsigned_integer(require(g, p, "atoms"), join(p, "atoms"));
        if (g.contains("min_spacing")) spec.min_spacing = number(g["min_spacing"], join(p, "min_spacing"));
        if (spec.dimension == 0) throw ConfigError(join(p, "dimension"), "must be positive");
        s.generator = spec;
    } else {
        throw ConfigError(path, "expected exactly one of \"file\", \"inline\" or \"generator\"");
    }
    return s;
}

template <class T>
void optional_field(const json& j, const std::string& path, const std::string& key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    const std::string f = join(path, key);
    if constexpr (std::is_same_v<T, bool>) out = boolean(*it, f);
    else if constexpr (std::is_same_v<T, std::string>) out = string(*it, f);
    else if constexpr (std::is_same_v<T, double>) out = number(*it, f);
    else if constexpr (std::is_same_v<T, std::vector<double>>) out = numbers(*it, f);
    else out = static_cast<T>(unsigned_integer(*it, f));
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("<root>", "expected an object");
    for (const auto& [k, v] : j.items()) {
        if (k != "task" && k != "measures" && k != "cost" && k != "solver" && k != "outputs") {
            throw ConfigError(k, "unknown key");
        }
    }
    ExperimentConfig c;
    c.task = task_from_string(string(require(j, "", "task"), "task"));

    const json& m = require(j, "", "measures");
    const auto n = unsigned_integer(require(m, "measures", "N"), "measures.N");
    if (n < 2) throw ConfigError("measures.N", "must be at least 2");
    c.measures.n_marginals = static_cast<int>(n);
    if (m.contains("measure")) c.measures.measure = source_from_json(m["measure"], "measures.measure");
    if (m.contains("campaign")) {
        const json& cj = m["campaign"];
        CampaignSpec s;
        s.seed = unsigned_integer(require(cj, "measures.campaign", "seed"), "measures.campaign.seed");
        optional_field(cj, "measures.campaign", "count", s.count);
        if (cj.contains("n_values")) {
            s.n_values.clear();
            for (double v : numbers(cj["n_values"], "measures.campaign.n_values")) {
                if (v < 2 || v != std::floor(v)) throw ConfigError("measures.campaign.n_values", "entries must be integers >= 2");
                s.n_values.push_back(static_cast<int>(v));
            }
        }
        if (cj.contains("dimensions")) {
            s.dimensions.clear();
            for (double v : numbers(cj["dimensions"], "measures.campaign.dimensions")) {
                if (v < 1 || v != std::floor(v)) throw ConfigError("measures.campaign.dimensions", "entries must be positive integers");
                s.dimensions.push_back(static_cast<std::size_t>(v));
            }
        }
        if (s.n_values.empty()) throw ConfigError("measures.campaign.n_values", "must not be empty");
        if (s.dimensions.empty()) throw ConfigError("measures.campaign.dimensions", "must not be empty");
        c.measures.campaign = s;
    }
    if (m.contains("perturbation")) {
        const json& pj = m["perturbation"];
        const std::string p = "measures.perturbation";
        PerturbationFamily f;
        f.base = source_from_json(require(pj, p, "base"), p + ".base");
        f.seed = unsigned_integer(require(pj, p, "seed"), p + ".seed");
        optional_field(pj, p, "count", f.count);
        optional_field(pj, p, "amplitude", f.amplitude);
        optional_field(pj, p, "decay", f.decay);
        if (!(f.decay > 0.0 && f.decay < 1.0)) throw ConfigError(p + ".decay", "must lie in (0, 1)");
        if (!(f.amplitude >= 0.0 && f.amplitude < 1.0)) throw ConfigError(p + ".amplitude", "must lie in [0, 1)");
        c.measures.perturbation = f;
    }
    if (m.contains("two_dirac")) {
        TwoDiracFamily f;
        optional_field(m["two_dirac"], "measures.two_dirac", "count", f.count);
        optional_field(m["two_dirac"], "measures.two_dirac", "offset", f.offset);
        if (f.offset < 2) throw ConfigError("measures.two_dirac.offset", "must be at least 2 so that weights stay positive");
        c.measures.two_dirac = f;
    }
    if (m.contains("sequence")) {
        const auto& seq = array(m["sequence"], "measures.sequence");
        for (std::size_t i = 0; i < seq.size(); ++i) {
            c.measures.sequence.push_back(source_from_json(seq[i], "measures.sequence[" + std::to_string(i) + "]"));
        }
    }
    if (m.contains("limit")) c.measures.limit = source_from_json(m["limit"], "measures.limit");

    c.cost = cost_from_json(require(j, "", "cost"), "cost");

    if (j.contains("solver")) {
        const json& s = j["solver"];
        if (!s.is_object()) throw ConfigError("solver", "expected an object");
        optional_field(s, "solver", "method", c.solver.method);
        if (c.solver.method != "exact-lp" && c.solver.method != "entropic") {
            throw ConfigError("solver.method", "expected \"exact-lp\" or \"entropic\"");
        }
        optional_field(s, "solver", "budget", c.solver.budget);
        optional_field(s, "solver", "epsilons", c.solver.epsilons);
        for (double e : c.solver.epsilons)
            if (!(e > 0.0)) throw ConfigError("solver.epsilons", "entries must be positive");
        optional_field(s, "solver", "max_iters", c.solver.max_iters);
        optional_field(s, "solver", "support_threshold", c.solver.support_threshold);
        optional_field(s, "solver", "probes", c.solver.probes);
        optional_field(s, "solver", "probe_seed", c.solver.probe_seed);
        optional_field(s, "solver", "entropic_checks", c.solver.entropic_checks);
        optional_field(s, "solver", "tail_tolerance", c.solver.tail_tolerance);
    }
    if (j.contains("outputs")) {
        const json& o = j["outputs"];
        if (!o.is_object()) throw ConfigError("outputs", "expected an object");
        optional_field(o, "outputs", "directory", c.outputs.directory);
        optional_field(o, "outputs", "csv", c.outputs.csv);
        optional_field(o, "outputs", "plots", c.outputs.plots);
    }

    // Each task needs its own measure fields.
    switch (c.task) {
        case Task::solve:
        case Task::dual:
        case Task::verify:
            if (!c.measures.measure) throw ConfigError("measures.measure", "missing (required by task " + std::string(to_string(c.task)) + ")");
            break;
        case Task::campaign:
            if (!c.measures.campaign) throw ConfigError("measures.campaign", "missing (required by task campaign)");
            break;
        case Task::continuity: {
            const int families = (c.measures.perturbation ? 1 : 0) + (c.measures.two_dirac ? 1 : 0) +
                                 (!c.measures.sequence.empty() ? 1 : 0);
            if (families != 1) {
                throw ConfigError("measures", "task continuity needs exactly one of perturbation, two_dirac or sequence");
            }
            if (!c.measures.sequence.empty() && !c.measures.limit) {
                throw ConfigError("measures.limit", "missing (required with measures.sequence)");
            }
            break;
        }
    }
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Resolves a measure source. Relative file paths are taken relative to `base_dir`.
inline DiscreteMeasure load_measure(const MeasureSource& s, int n_marginals, const std::filesystem::path& base_dir,
                                    const std::string& field) {
    if (s.measure) return *s.measure;
    if (s.file) {
        std::filesystem::path p = *s.file;
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw ConfigError(field + ".file", "file not found: " + p.string());
        json j;
        try {
            j = json::parse(read_file(p));
        } catch (const json::parse_error& e) {
            throw ConfigError(field + ".file", std::string("invalid JSON: ") + e.what());
        }
        return measure_from_json(j, field + ".file");
    }
    GeneratorSpec g = *s.generator;
    g.n_marginals = n_marginals;
    return detail::at_field(field + ".generator", [&] { return generate_instance(g); });
}

}  // namespace mmot::io
