#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmot/analysis.hpp"
#include "mmot/duality.hpp"
#include "mmot/io.hpp"
#include "mmot/solver.hpp"

namespace mmot::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int { kSuccess = 0, kError = 1, kCheckFailure = 2 };

// Command-line overrides of config fields.
struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
};

// --seed replaces every generator seed named in the measures section.
inline void apply(io::ExperimentConfig& c, const Overrides& o) {
    if (o.out) c.outputs.directory = *o.out;
    if (o.budget) c.solver.budget = *o.budget;
    if (o.seed) {
        auto reseed = [&](std::optional<io::MeasureSource>& s) {
            if (s && s->generator) s->generator->seed = *o.seed;
        };
        reseed(c.measures.measure);
        reseed(c.measures.limit);
        if (c.measures.campaign) c.measures.campaign->seed = *o.seed;
        if (c.measures.perturbation) {
            c.measures.perturbation->seed = *o.seed;
            if (c.measures.perturbation->base.generator) c.measures.perturbation->base.generator->seed = *o.seed;
        }
        for (auto& s : c.measures.sequence)
            if (s.generator) s.generator->seed = *o.seed;
    }
}

namespace detail {

inline VerifyOptions verify_options(const io::ExperimentConfig& c) {
    VerifyOptions o;
    o.support_threshold = c.solver.support_threshold;
    o.probes = c.solver.probes;
    o.probe_seed = c.solver.probe_seed;
    o.exact.budget = c.solver.budget;
    return o;
}

inline void write_report_files(const io::ExperimentConfig& c, const fs::path& out,
                               const std::vector<const VerificationReport*>& reports) {
    if (c.outputs.csv) {
        std::string csv = io::csv_header();
        for (const auto* r : reports) csv += io::to_csv_rows(*r);
        io::write_file(out / "report.csv", csv);
    }
    if (c.outputs.plots) {
        std::vector<double> claimed, measured;
        for (const auto* r : reports)
            for (const auto& e : r->checks) {
                if (e.status == CheckStatus::skipped || e.diagnostic) continue;
                claimed.push_back(e.claimed);
                measured.push_back(e.measured);
            }
        io::write_file(out / "plots" / "bound_vs_measured.dat", io::xy_data("claimed", "measured", claimed, measured));
    }
}

inline int exit_for(bool all_pass) { return all_pass ? kSuccess : kCheckFailure; }

inline void log_report(const VerificationReport& r, std::ostream& log) {
    for (const auto& e : r.checks) {
        if (e.status == CheckStatus::fail && !e.diagnostic) {
            log << "FAIL " << r.instance << ' ' << e.name << ": measured " << e.measured << ", claimed " << e.claimed;
            if (!e.note.empty()) log << " (" << e.note << ')';
            log << '\n';
        }
    }
}

inline int run_solve(const io::ExperimentConfig& c, const DiscreteMeasure& rho, const fs::path& out, std::ostream& log) {
    const int n = c.measures.n_marginals;
    SolveResult r;
    if (c.solver.method == "entropic") {
        if (!c.cost.is_truncated()) throw io::ConfigError("cost.truncation", "entropic solves need a truncated cost");
        if (c.solver.epsilons.empty()) throw io::ConfigError("solver.epsilons", "must not be empty");
        EntropicOptions eo;
        eo.max_tensor = c.solver.budget;
        r = solve_entropic(rho, n, c.cost, c.solver.epsilons.back(), c.solver.max_iters, eo);
    } else {
        ExactOptions eo;
        eo.budget = c.solver.budget;
        r = solve_exact(rho, n, c.cost, eo);
    }
    io::write_file(out / "plan.json", io::dump(io::to_json(r)));
    log << "value " << r.value << " (" << to_string(r.method) << ")\n";
    return kSuccess;
}

// Symmetric dual for the configured truncation, or for alpha*/2 when the cost is untruncated and
// small concentration holds. The canonical potential is written together with its transfer checks.
inline int run_dual(const io::ExperimentConfig& c, const DiscreteMeasure& rho, const fs::path& out, std::ostream& log) {
    const int n = c.measures.n_marginals;
    InstanceVerifier v(rho, n, c.cost, verify_options(c));
    RepulsiveCost ct = c.cost;
    if (!ct.is_truncated()) {
        if (!v.assumption_A()) {
            throw io::ConfigError("cost.truncation",
                                  "required: the measure violates small concentration, so no truncation level is implied");
        }
        ct = c.cost.truncated_at(0.5 * *v.alpha());
    }
    const PotentialSet pot = canonicalize(solve_dual(rho, n, ct, verify_options(c).exact.lp), ct);
    json doc = io::to_json(pot);
    doc["cost"] = io::to_json(ct);
    io::write_file(out / "potential.json", io::dump(doc));
    log << "dual objective " << pot.objective() << '\n';
    if (!v.assumption_A()) return kSuccess;
    VerificationReport r = v.report_header();
    for (auto& e : v.strong_duality()) r.checks.push_back(std::move(e));
    for (auto& e : v.potential_transfer()) r.checks.push_back(std::move(e));
    io::write_file(out / "report.json", io::dump(io::to_json(r)));
    write_report_files(c, out, {&r});
    log_report(r, log);
    return exit_for(r.all_pass());
}

inline int run_verify(const io::ExperimentConfig& c, const DiscreteMeasure& rho, const fs::path& out, std::ostream& log) {
    InstanceVerifier v(rho, c.measures.n_marginals, c.cost, verify_options(c));
    const VerificationReport r = v.verify_all(c.solver.entropic_checks);
    io::write_file(out / "report.json", io::dump(io::to_json(r)));
    write_report_files(c, out, {&r});
    log_report(r, log);
    return exit_for(r.all_pass());
}

// Standalone config reproducing one campaign instance through task verify.
inline json reproducer(const io::ExperimentConfig& c, const CampaignInstance& ci) {
    io::ExperimentConfig rc = c;
    rc.task = io::Task::verify;
    rc.measures = {};
    rc.measures.n_marginals = ci.spec.n_marginals;
    rc.measures.measure = io::MeasureSource{};
    rc.measures.measure->measure = ci.measure;
    rc.outputs.directory = "reproducer-" + ci.report.instance;
    return io::to_json(rc);
}

inline int run_campaign_task(const io::ExperimentConfig& c, const fs::path& out, std::ostream& log) {
    const auto results = run_campaign(*c.measures.campaign, c.cost, verify_options(c), c.solver.entropic_checks);
    json reports = json::array();
    std::vector<const VerificationReport*> ptrs;
    bool all_pass = true;
    for (const auto& ci : results) {
        json rj = io::to_json(ci.report);
        rj["generator"] = io::to_json(ci.spec);
        reports.push_back(std::move(rj));
        ptrs.push_back(&ci.report);
        if (!ci.report.all_pass()) {
            all_pass = false;
            io::write_file(out / "reproducers" / (ci.report.instance + ".json"), io::dump(reproducer(c, ci)));
            log_report(ci.report, log);
        }
    }
    const auto& s = *c.measures.campaign;
    json doc = {{"campaign", {{"seed", s.seed}, {"count", s.count}, {"n_values", s.n_values}, {"dimensions", s.dimensions}}},
                {"cost", describe(c.cost)},
                {"all_pass", all_pass},
                {"reports", std::move(reports)}};
    io::write_file(out / "report.json", io::dump(doc));
    write_report_files(c, out, ptrs);
    log << results.size() << " instances, " << (all_pass ? "all checks pass" : "failures recorded") << '\n';
    return exit_for(all_pass);
}

inline int run_continuity(const io::ExperimentConfig& c, const fs::path& base_dir, const fs::path& out, std::ostream& log) {
    const int n = c.measures.n_marginals;
    std::vector<DiscreteMeasure> seq;
    std::optional<DiscreteMeasure> limit;
    if (c.measures.perturbation) {
        const auto& p = *c.measures.perturbation;
        limit = io::load_measure(p.base, n, base_dir, "measures.perturbation.base");
        for (std::size_t k = 1; k <= p.count; ++k) {
            seq.push_back(perturb_weights(*limit, p.amplitude * std::pow(p.decay, static_cast<double>(k)),
                                          derive_seed(p.seed, k)));
        }
    } else if (c.measures.two_dirac) {
        const auto& f = *c.measures.two_dirac;
        limit = DiscreteMeasure(1, {{{0.0}, 0.5}, {{1.0}, 0.5}});
        for (std::size_t k = f.offset + 1; k <= f.offset + f.count; ++k) {
            const double t = 1.0 / static_cast<double>(k);
            seq.push_back(DiscreteMeasure::normalized(1, {{{0.0}, 0.5 + t}, {{1.0}, 0.5 - t}}));
        }
    } else {
        limit = io::load_measure(*c.measures.limit, n, base_dir, "measures.limit");
        for (std::size_t i = 0; i < c.measures.sequence.size(); ++i) {
            seq.push_back(io::load_measure(c.measures.sequence[i], n, base_dir, "measures.sequence[" + std::to_string(i) + "]"));
        }
    }
    const auto res = run_continuity_experiment(seq, *limit, n, c.cost, c.solver.tail_tolerance, 0.9, verify_options(c));
    json values = json::array();
    for (const auto& v : res.values) values.push_back(io::to_json(v));
    json doc = io::to_json(res.report);
    doc["limit_value"] = io::to_json(res.limit_value);
    doc["values"] = std::move(values);
    json errors = json::array(), bl = json::array();
    for (double e : res.errors) errors.push_back(io::real_to_json(e));
    for (double d : res.bl_distances) bl.push_back(io::real_to_json(d));
    doc["errors"] = std::move(errors);
    doc["bounded_lipschitz"] = std::move(bl);
    doc["equidistribution_index"] = res.equidist_index ? json(*res.equidist_index) : json(nullptr);
    io::write_file(out / "report.json", io::dump(doc));
    write_report_files(c, out, {&res.report});
    if (c.outputs.plots) {
        std::vector<double> idx, cv;
        for (std::size_t i = 0; i < res.values.size(); ++i) {
            idx.push_back(static_cast<double>(i + 1));
            cv.push_back(res.values[i].value_or(std::numeric_limits<double>::infinity()));
        }
        io::write_file(out / "plots" / "cost_vs_n.dat", io::xy_data("n", "C(rho_n)", idx, cv));
        io::write_file(out / "plots" / "error_vs_n.dat", io::xy_data("n", "|C(rho_n)-C(rho)|", idx, res.errors));
    }
    for (const auto& e : res.report.checks) {
        if (e.status == CheckStatus::skipped) log << "skipped " << e.name << ": " << e.note << '\n';
    }
    log_report(res.report, log);
    return exit_for(res.report.all_pass());
}

}  // namespace detail

// Executes one configured run. Relative paths in the config resolve against `base_dir`; artifacts
// go to the output directory. Errors propagate as exceptions.
inline int run(const io::ExperimentConfig& c, const fs::path& base_dir, std::ostream& log) {
    const fs::path out = c.outputs.directory;
    fs::create_directories(out);
    io::write_file(out / "config.json", io::dump(io::to_json(c)));
    switch (c.task) {
        case io::Task::solve:
            return detail::run_solve(c, io::load_measure(*c.measures.measure, c.measures.n_marginals, base_dir, "measures.measure"), out, log);
        case io::Task::dual:
            return detail::run_dual(c, io::load_measure(*c.measures.measure, c.measures.n_marginals, base_dir, "measures.measure"), out, log);
        case io::Task::verify:
            return detail::run_verify(c, io::load_measure(*c.measures.measure, c.measures.n_marginals, base_dir, "measures.measure"), out, log);
        case io::Task::campaign:
            return detail::run_campaign_task(c, out, log);
        case io::Task::continuity:
            return detail::run_continuity(c, base_dir, out, log);
    }
    return kError;
}

// Runs and maps failures to exit codes, printing a message that names the offending field.
inline int run_guarded(const io::ExperimentConfig& c, const fs::path& base_dir, std::ostream& log, std::ostream& err) {
    try {
        return run(c, base_dir, log);
    } catch (const io::ConfigError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const BudgetExceeded& e) {
        err << "error: " << e.what()
            << "; reduce the number of atoms, raise solver.budget, or use solver.method = \"entropic\"\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
    }
    return kError;
}

}  // namespace mmot::cli
