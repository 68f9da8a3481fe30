#include "ledgerlab/cli.hpp"

#include <fstream>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <CLI11.hpp>

#include "ledgerlab/attacks.hpp"
#include "ledgerlab/report.hpp"

namespace ledgerlab {

namespace {

struct Options {
    std::string scenario;
    std::vector<std::string> toggles;
    std::string dir;
    std::string engine = "permissioned";
    std::optional<std::size_t> maintainers;
    double adversary_power = 0.0;
    std::string adversary = "withholder";
    std::optional<std::size_t> c;
    std::optional<Round> rounds;
    std::string seed = std::to_string(kDefaultSeed);
    std::uint64_t trials = 1000;
    std::string out;
    std::string format = "table";

    // attack
    std::string attack;
    std::string id_scheme = "sequential";
    std::uint16_t width = 128;
    Round advantage = 1;
    std::size_t honest = 10;
    std::size_t bogus = 11;
    std::vector<std::string> overrides;
};

std::filesystem::path scenario_dir(const Options& o)
{
    return o.dir.empty() ? default_scenario_dir() : std::filesystem::path(o.dir);
}

ReportFormat format_of(const Options& o)
{
    auto f = parse_report_format(o.format);
    if (!f) throw Error(ErrorCode::ConfigError, "unknown format '" + o.format + "' (structured|table)");
    return *f;
}

std::uint64_t seed_of(const Options& o)
{
    if (o.seed == "random") {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    try {
        std::size_t used = 0;
        const auto v = std::stoull(o.seed, &used, 0);
        if (used == o.seed.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, "seed must be an integer or 'random', got '" + o.seed + "'");
}

bool permissionless_of(const Options& o)
{
    if (o.engine == "permissionless" || o.engine == "chain") return true;
    if (o.engine == "permissioned" || o.engine == "quorum") return false;
    throw Error(ErrorCode::ConfigError, "unknown engine '" + o.engine + "' (permissionless|permissioned)");
}

RunConfig run_config(const Options& o, const Scenario& s)
{
    RunConfig cfg;
    cfg.scenario = o.scenario;
    cfg.toggles = o.toggles;
    cfg.permissionless = permissionless_of(o);
    cfg.maintainers = o.maintainers.value_or(s.network.maintainers);
    cfg.adversary_power = o.adversary_power;
    cfg.adversary = o.adversary;
    cfg.confirmation_depth = o.c;
    cfg.rounds = o.rounds.value_or(s.network.rounds);
    cfg.seed = seed_of(o);
    cfg.trials = o.trials;
    cfg.out = o.out.empty() ? std::filesystem::path(".") : std::filesystem::path(o.out);
    cfg.format = format_of(o);
    return cfg;
}

NetworkConfig network_of(const RunConfig& cfg, const Scenario& s)
{
    NetworkConfig net = scenario_network(s, cfg.seed);
    net.num_maintainers = cfg.maintainers;
    net.adversary_power = cfg.adversary_power;
    net.confirmation_depth = cfg.confirmation_depth;
    auto script = parse_adversary_script(cfg.adversary);
    if (!script) throw Error(ErrorCode::ConfigError, "unknown adversary script '" + cfg.adversary + "'");
    net.adversary = *script;
    return net;
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

/// `oracle:alias.property=value`
OracleOverride parse_override(const std::string& text)
{
    const auto colon = text.find(':');
    const auto eq = text.find('=');
    const auto dot = eq == std::string::npos ? std::string::npos : text.rfind('.', eq);
    if (colon == std::string::npos || eq == std::string::npos || dot == std::string::npos || dot < colon)
        throw Error(ErrorCode::ConfigError, "override '" + text + "' is not oracle:object.property=value");
    return {text.substr(0, colon),
            {text.substr(colon + 1, dot - colon - 1), text.substr(dot + 1, eq - dot - 1), scalar_from_word(text.substr(eq + 1))}};
}

int cmd_analyze(const Options& o, std::ostream& out)
{
    const auto s = resolve_scenario(o.scenario, o.toggles, scenario_dir(o));
    out << verdict_report(s, format_of(o));
    const bool met = check_object_creation_criterion(s.spec).met && check_internal_predicate_criterion(s.spec).met;
    return met ? kExitOk : kExitCriterionViolated;
}

int cmd_simulate(const Options& o, std::ostream& out)
{
    const auto s = resolve_scenario(o.scenario, o.toggles, scenario_dir(o));
    const auto cfg = run_config(o, s);
    const auto net = network_of(cfg, s);
    const auto run = run_scenario(s, net, scenario_engine(s, cfg.permissionless), cfg.rounds);

    const auto stem = fmt::format("{}-{}-{}", s.name(), cfg.engine_name(), cfg.seed);
    const auto report = run_report(cfg, s, run, cfg.format);
    if (!o.out.empty()) {
        write_file(cfg.out / (stem + ".log"), run.log.text());
        write_file(cfg.out / (stem + (cfg.format == ReportFormat::Structured ? ".report.json" : ".report.txt")), report);
    }
    out << report;
    return kExitOk;
}

int cmd_attack(const Options& o, std::ostream& out)
{
    const auto s = resolve_scenario(o.scenario, o.toggles, scenario_dir(o));
    const auto cfg = run_config(o, s);
    AttackParameters params{o.attack, {}};
    std::string report;
    if (o.attack == "premature-creation") {
        IdSchemeChoice scheme;
        if (o.id_scheme == "random" || o.id_scheme == "random-bits") scheme = IdSchemeChoice::random_bits(o.width);
        else if (o.id_scheme != "sequential")
            throw Error(ErrorCode::ConfigError, "unknown id scheme '" + o.id_scheme + "' (sequential|random)");
        params.values = {{"id_scheme", o.id_scheme}, {"advantage", std::to_string(o.advantage)}};
        if (scheme.scheme == ObjectId::Scheme::RandomBits) params.values.emplace_back("width", std::to_string(o.width));
        report = attack_report(cfg, params, premature_creation_attack(s, scheme, o.advantage, cfg.trials, cfg.seed), cfg.format);
    } else if (o.attack == "sybil-vote") {
        params.values = {{"honest", std::to_string(o.honest)}, {"bogus", std::to_string(o.bogus)}};
        const auto engine = scenario_engine(s, cfg.permissionless);
        report = attack_report(cfg, params, sybil_vote_attack(s, engine, o.honest, o.bogus, cfg.trials, cfg.seed), cfg.format);
    } else if (o.attack == "lying-oracle") {
        std::vector<OracleOverride> overrides;
        for (const auto& text : o.overrides) {
            overrides.push_back(parse_override(text));
            params.values.emplace_back("override", text);
        }
        const auto engine = scenario_engine(s, cfg.permissionless);
        report = divergence_report(cfg, params, lying_oracle_attack(s, overrides, cfg.rounds, cfg.seed, engine), cfg.format);
    } else {
        throw Error(ErrorCode::ConfigError, "unknown attack '" + o.attack + "' (premature-creation|sybil-vote|lying-oracle)");
    }
    if (!o.out.empty())
        write_file(cfg.out / fmt::format("{}-{}-{}.{}", s.name(), o.attack, cfg.seed,
                                         cfg.format == ReportFormat::Structured ? "json" : "txt"),
                   report);
    out << report;
    return kExitOk;
}

int cmd_matrix(const Options& o, std::ostream& out)
{
    const auto dir = scenario_dir(o);
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
    const auto suite = load_suite(dir);
    out << matrix_report(verdict_matrix(suite.scenarios), suite.errors, format_of(o));
    return suite.errors.empty() ? kExitOk : kExitError;
}

void add_common(CLI::App* app, Options& o)
{
    app->add_option("--toggle", o.toggles, "Scenario toggle to apply (repeatable)");
    app->add_option("--dir", o.dir, "Scenario directory");
    app->add_option("--format", o.format, "Report format: structured or table");
}

void add_run(CLI::App* app, Options& o)
{
    app->add_option("--engine", o.engine, "permissionless or permissioned");
    app->add_option("--maintainers", o.maintainers, "Number of maintainers");
    app->add_option("--adversary-power", o.adversary_power, "Adversarial share of block production or seats");
    app->add_option("--adversary", o.adversary, "Maintainer adversary script: withholder, equivocator, censor");
    app->add_option("--c", o.c, "Confirmation depth");
    app->add_option("--rounds", o.rounds, "Rounds to simulate");
    app->add_option("--seed", o.seed, "Seed, or 'random'");
    app->add_option("--trials", o.trials, "Attack trials");
    app->add_option("--out", o.out, "Output directory");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"Distributed-ledger simulator and trust-criteria analyzer", "ledgerlab"};
    app.require_subcommand(1);

    auto* analyze = app.add_subcommand("analyze", "Check both criteria for a scenario");
    analyze->add_option("scenario", o.scenario, "Scenario name or file")->required();
    add_common(analyze, o);

    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write its event log and report");
    simulate->add_option("--scenario", o.scenario, "Scenario name or file")->required();
    add_common(simulate, o);
    add_run(simulate, o);

    auto* attack = app.add_subcommand("attack", "Run an attack against a scenario");
    attack->add_option("attack", o.attack, "premature-creation, sybil-vote or lying-oracle")->required();
    attack->add_option("--scenario", o.scenario, "Scenario name or file")->required();
    add_common(attack, o);
    add_run(attack, o);
    attack->add_option("--id-scheme", o.id_scheme, "sequential or random");
    attack->add_option("--width", o.width, "Identifier width in bits for random ids");
    attack->add_option("--advantage", o.advantage, "Adversary latency advantage in rounds");
    attack->add_option("--honest", o.honest, "Honest voters");
    attack->add_option("--bogus", o.bogus, "Bogus identities");
    attack->add_option("--override", o.overrides, "Oracle lie oracle:object.property=value (repeatable)");

    auto* matrix = app.add_subcommand("matrix", "Verdicts for every scenario in a directory");
    matrix->add_option("dir", o.dir, "Scenario directory");
    matrix->add_option("--format", o.format, "Report format: structured or table");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(o, out);
        if (simulate->parsed()) return cmd_simulate(o, out);
        if (attack->parsed()) return cmd_attack(o, out);
        return cmd_matrix(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::InapplicableAttack ? kExitCriterionViolated : kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace ledgerlab
