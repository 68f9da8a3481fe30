#include "ledgerlab/report.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

namespace ledgerlab {

using nlohmann::ordered_json;

std::string_view to_string(ReportFormat format)
{
    return format == ReportFormat::Structured ? "structured" : "table";
}

std::optional<ReportFormat> parse_report_format(std::string_view text)
{
    if (text == "structured" || text == "json") return ReportFormat::Structured;
    if (text == "table" || text == "summary-table") return ReportFormat::Table;
    return std::nullopt;
}

std::vector<std::string> RunConfig::arguments(std::string_view verb) const
{
    std::vector<std::string> args{std::string(verb), "--scenario", scenario};
    for (const auto& t : toggles) {
        args.push_back("--toggle");
        args.push_back(t);
    }
    args.insert(args.end(), {"--engine", engine_name(), "--maintainers", std::to_string(maintainers), "--adversary-power",
                             fmt::format("{}", adversary_power), "--adversary", adversary});
    if (confirmation_depth) args.insert(args.end(), {"--c", std::to_string(*confirmation_depth)});
    args.insert(args.end(), {"--rounds", std::to_string(rounds), "--seed", std::to_string(seed), "--trials",
                             std::to_string(trials), "--out", out.string(), "--format", std::string(to_string(format))});
    return args;
}

namespace {

std::string joined(const std::vector<std::string>& parts, std::string_view sep = " ")
{
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

ordered_json header(const RunConfig& cfg, std::string_view verb)
{
    ordered_json h;
    h["scenario"] = cfg.scenario;
    h["toggles"] = cfg.toggles;
    h["engine"] = cfg.engine_name();
    h["maintainers"] = cfg.maintainers;
    h["adversary_power"] = cfg.adversary_power;
    h["adversary"] = cfg.adversary;
    h["confirmation_depth"] = cfg.confirmation_depth ? ordered_json(*cfg.confirmation_depth) : ordered_json(nullptr);
    h["rounds"] = cfg.rounds;
    h["seed"] = cfg.seed;
    h["trials"] = cfg.trials;
    h["out"] = cfg.out.string();
    h["format"] = to_string(cfg.format);
    h["command"] = joined(cfg.arguments(verb));
    return h;
}

std::string header_table(const RunConfig& cfg, std::string_view verb)
{
    return fmt::format("# {}\n", joined(cfg.arguments(verb)));
}

ordered_json verdict_json(const CriterionVerdict& v)
{
    ordered_json reasons = ordered_json::array();
    for (const auto& r : v.reasons) reasons.push_back({{"element", r.element}, {"code", r.code}, {"detail", r.detail}});
    return {{"met", v.met}, {"reasons", reasons}};
}

ordered_json entities_json(const std::set<TrustedEntity>& entities)
{
    ordered_json out = ordered_json::array();
    for (const auto& e : entities) out.push_back({{"entity", e.entity}, {"reason", to_string(e.reason)}});
    return out;
}

std::string entities_table(const std::set<TrustedEntity>& entities)
{
    if (entities.empty()) return "trusted entities: none\n";
    std::string out = "trusted entities:\n";
    for (const auto& e : entities) out += fmt::format("  - {} ({})\n", e.entity, to_string(e.reason));
    return out;
}

std::string dump(const ordered_json& j)
{
    return j.dump(2) + "\n";
}

} // namespace

std::string verdict_report(const Scenario& s, ReportFormat format)
{
    const auto oc = check_object_creation_criterion(s.spec);
    const auto ip = check_internal_predicate_criterion(s.spec);
    const auto trusted = static_trusted_entities(s.spec);
    if (format == ReportFormat::Structured) {
        ordered_json j;
        j["scenario"] = s.name();
        j["toggles"] = s.toggles;
        j["object_creation"] = verdict_json(oc);
        j["internal_predicate"] = verdict_json(ip);
        j["trusted_entities"] = entities_json(trusted);
        j["notes"] = s.notes;
        return dump(j);
    }
    std::string out = fmt::format("scenario: {}\n", s.name());
    out += explain_verdict(oc);
    out += explain_verdict(ip);
    out += entities_table(trusted);
    for (const auto& n : s.notes) out += fmt::format("note: {}\n", n);
    return out;
}

std::string run_report(const RunConfig& cfg, const Scenario& s, const ScenarioRun& run, ReportFormat format)
{
    const auto& m = run.monitor;
    if (format == ReportFormat::Structured) {
        ordered_json j;
        j["config"] = header(cfg, "simulate");
        j["scenario"] = s.name();
        j["monitor"] = {{"agreement_violations", m.agreement_violations},
                        {"validity_violations", m.validity_violations},
                        {"rounds_without_progress", m.rounds_without_progress},
                        {"progress_window", m.progress_window},
                        {"windows_checked", m.windows_checked},
                        {"stalled_windows", m.stalled_windows},
                        {"min_decided", m.min_decided}};
        j["audit"] = {{"object_creation", verdict_json(run.audit.object_creation)},
                      {"internal_predicate", verdict_json(run.audit.internal_predicate)},
                      {"trusted_entities", entities_json(run.audit.trusted_entities)},
                      {"queried_predicates", run.audit.queried_predicates}};
        ordered_json goals = ordered_json::array();
        for (const auto& g : run.goals)
            goals.push_back({{"goal", g.goal},
                             {"dependency", g.external ? "external" : "internal"},
                             {"ledger", g.ledger},
                             {"world", g.world},
                             {"diverges", g.diverges()}});
        j["goals"] = goals;
        j["decided_records"] = run.decided.size();
        j["oracle_queries"] = run.oracle_queries;
        j["hook_records"] = run.hook_records;
        j["rejected_proposals"] = run.rejected;
        j["notes"] = s.notes;
        return dump(j);
    }
    std::string out = header_table(cfg, "simulate");
    out += fmt::format("scenario: {}\n", s.name());
    out += fmt::format("decided records: {}  rejected proposals: {}  oracle queries: {}  hook records: {}\n",
                       run.decided.size(), run.rejected, run.oracle_queries, run.hook_records);
    out += fmt::format("agreement violations: {}  validity violations: {}  stalled windows: {}/{}\n", m.agreement_violations,
                       m.validity_violations, m.stalled_windows, m.windows_checked);
    out += explain_verdict(run.audit.object_creation);
    out += explain_verdict(run.audit.internal_predicate);
    out += entities_table(run.audit.trusted_entities);
    out += fmt::format("{:<28} {:<9} {:<7} {:<7}\n", "goal", "dep", "ledger", "world");
    for (const auto& g : run.goals)
        out += fmt::format("{:<28} {:<9} {:<7} {:<7}{}\n", g.goal, g.external ? "external" : "internal", g.ledger, g.world,
                           g.diverges() ? "  diverges" : "");
    for (const auto& n : s.notes) out += fmt::format("note: {}\n", n);
    return out;
}

namespace {

ordered_json params_json(const AttackParameters& params)
{
    ordered_json p = ordered_json::object();
    for (const auto& [k, v] : params.values) p[k] = v;
    return p;
}

std::string params_table(const AttackParameters& params)
{
    std::vector<std::string> parts;
    for (const auto& [k, v] : params.values) parts.push_back(k + "=" + v);
    return joined(parts);
}

} // namespace

std::string attack_report(const RunConfig& cfg, const AttackParameters& params, const AttackOutcome& outcome,
                          ReportFormat format)
{
    if (format == ReportFormat::Structured) {
        ordered_json j;
        j["config"] = header(cfg, "attack");
        j["attack"] = outcome.attack;
        j["parameters"] = params_json(params);
        j["trials"] = outcome.trials;
        j["successes"] = outcome.successes;
        j["success_rate"] = outcome.success_rate();
        j["seed"] = outcome.seed;
        return dump(j);
    }
    return header_table(cfg, "attack") +
           fmt::format("attack: {}  {}\ntrials: {}  successes: {}  success rate: {:.6f}  seed: {}\n", outcome.attack,
                       params_table(params), outcome.trials, outcome.successes, outcome.success_rate(), outcome.seed);
}

std::string divergence_report(const RunConfig& cfg, const AttackParameters& params, const DivergenceReport& report,
                              ReportFormat format)
{
    if (format == ReportFormat::Structured) {
        ordered_json j;
        j["config"] = header(cfg, "attack");
        j["attack"] = params.attack;
        j["parameters"] = params_json(params);
        j["divergent_goals"] = report.divergent_goals;
        ordered_json goals = ordered_json::array();
        for (const auto& g : report.goals) goals.push_back({{"goal", g.goal}, {"ledger", g.ledger}, {"world", g.world}});
        j["goals"] = goals;
        j["oracle_queries"] = report.oracle_queries;
        return dump(j);
    }
    std::string out = header_table(cfg, "attack") + fmt::format("attack: {}  {}\n", params.attack, params_table(params));
    for (const auto& g : report.goals)
        out += fmt::format("{:<28} ledger={:<5} world={:<5}{}\n", g.goal, g.ledger, g.world, g.diverges() ? "  diverges" : "");
    out += fmt::format("divergent goals: {}\n", report.divergent_goals.empty() ? "none" : joined(report.divergent_goals, ", "));
    return out;
}

std::vector<MatrixRow> verdict_matrix(const std::vector<Scenario>& scenarios)
{
    std::vector<MatrixRow> rows;
    for (const auto& s : scenarios)
        rows.push_back({s.name(), check_object_creation_criterion(s.spec).met, check_internal_predicate_criterion(s.spec).met,
                        static_trusted_entities(s.spec).size()});
    std::sort(rows.begin(), rows.end(), [](const MatrixRow& a, const MatrixRow& b) { return a.scenario < b.scenario; });
    return rows;
}

std::string matrix_report(const std::vector<MatrixRow>& rows,
                          const std::vector<std::pair<std::filesystem::path, std::string>>& errors, ReportFormat format)
{
    auto met = [](bool v) { return v ? "met" : "not met"; };
    if (format == ReportFormat::Structured) {
        ordered_json j;
        ordered_json r = ordered_json::array();
        for (const auto& row : rows)
            r.push_back({{"scenario", row.scenario},
                         {"object_creation", row.object_creation},
                         {"internal_predicate", row.internal_predicate},
                         {"trusted_entities", row.trusted_entities}});
        j["rows"] = r;
        ordered_json e = ordered_json::array();
        for (const auto& [path, msg] : errors) e.push_back({{"file", path.string()}, {"error", msg}});
        j["errors"] = e;
        return dump(j);
    }
    std::string out = fmt::format("{:<22} {:<16} {:<18} {}\n", "scenario", "object-creation", "internal-predicate", "trusted");
    for (const auto& row : rows)
        out += fmt::format("{:<22} {:<16} {:<18} {}\n", row.scenario, met(row.object_creation), met(row.internal_predicate),
                           row.trusted_entities);
    for (const auto& [path, msg] : errors) out += fmt::format("error: {}: {}\n", path.string(), msg);
    return out;
}

} // namespace ledgerlab
