#include "ledgerlab/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace ledgerlab {

std::int64_t WorkloadSpec::int_param(std::string_view key, std::int64_t fallback) const
{
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (auto v = as_int(it->second)) return *v;
    throw Error(ErrorCode::SpecError, "workload parameter '" + std::string(key) + "' must be an integer");
}

std::string WorkloadSpec::string_param(std::string_view key, std::string fallback) const
{
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (auto v = as_string(it->second)) return *v;
    return scalar_text(it->second);
}

namespace {

// ---------------------------------------------------------------------------
// YAML reading
// ---------------------------------------------------------------------------

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const
    {
        const auto mark = at.Mark();
        const std::string where = mark.is_null() ? source_ : fmt::format("{}:{}", source_, mark.line + 1);
        throw Error(ErrorCode::ParseError, where + ": " + what);
    }

    void expect_map(const YAML::Node& n, std::string_view what) const
    {
        if (!n.IsMap()) fail(n, std::string(what) + " must be a mapping");
    }

    void only_keys(const YAML::Node& n, std::initializer_list<std::string_view> keys, std::string_view what) const
    {
        expect_map(n, what);
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                fail(kv.first, "unknown key '" + key + "' in " + std::string(what));
        }
    }

    std::string text(const YAML::Node& n, std::string_view what) const
    {
        if (!n || !n.IsScalar()) fail(n, std::string(what) + " must be a scalar");
        return n.Scalar();
    }

    std::string name(const YAML::Node& n, std::string_view what) const
    {
        auto s = text(n, what);
        if (s.empty() || s.find_first_of(" \t|,=\"%") != std::string::npos)
            fail(n, std::string(what) + " '" + s + "' must be a non-empty word");
        return s;
    }

    Scalar scalar(const YAML::Node& n, std::string_view what) const
    {
        auto s = text(n, what);
        if (n.Tag() == "!") return s;   // quoted
        return scalar_from_word(s);
    }

    std::int64_t integer(const YAML::Node& n, std::string_view what) const
    {
        auto v = as_int(scalar(n, what));
        if (!v) fail(n, std::string(what) + " must be an integer");
        return *v;
    }

    double real(const YAML::Node& n, std::string_view what) const
    {
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            fail(n, std::string(what) + " must be a number");
        }
    }

    bool flag(const YAML::Node& n, std::string_view what) const
    {
        auto s = text(n, what);
        if (s == "true" || s == "met") return true;
        if (s == "false" || s == "not-met") return false;
        fail(n, std::string(what) + " must be true/false or met/not-met");
    }

    std::vector<std::string> names(const YAML::Node& n, std::string_view what) const
    {
        std::vector<std::string> out;
        if (!n) return out;
        if (!n.IsSequence()) fail(n, std::string(what) + " must be a list");
        for (const auto& item : n) out.push_back(name(item, what));
        return out;
    }

private:
    std::string source_;
};

const std::set<std::string, std::less<>> kPartyKeys = {"owner", "from", "to", "claimant"};

Scalar resolve_party_value(const UseCaseSpec& spec, std::string_view key, Scalar value)
{
    if (!kPartyKeys.contains(key)) return value;
    if (const auto* s = std::get_if<std::string>(&value))
        if (const auto* p = spec.party(*s)) return static_cast<std::int64_t>(p->party_id.id);
    return value;
}

Attributes read_attributes(const Reader& rd, const YAML::Node& n, const UseCaseSpec& spec,
                           std::initializer_list<std::string_view> skip)
{
    Attributes out;
    if (!n) return out;
    rd.expect_map(n, "attributes");
    for (const auto& kv : n) {
        const auto key = rd.name(kv.first, "attribute name");
        if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
        out[key] = resolve_party_value(spec, key, rd.scalar(kv.second, "attribute value"));
    }
    return out;
}

std::vector<AliasFact> read_facts(const Reader& rd, const YAML::Node& list, std::string_view what)
{
    std::vector<AliasFact> out;
    if (!list) return out;
    if (!list.IsSequence()) rd.fail(list, std::string(what) + " must be a list");
    for (const auto& item : list) {
        rd.expect_map(item, what);
        if (!item["object"]) rd.fail(item, std::string(what) + " entry needs 'object'");
        const auto alias = rd.name(item["object"], "object alias");
        for (const auto& kv : item) {
            const auto key = kv.first.as<std::string>();
            if (key == "object" || key == "round") continue;
            out.push_back({alias, rd.name(kv.first, "property"), rd.scalar(kv.second, "fact value")});
        }
    }
    return out;
}

PredicateDecl read_predicate(const Reader& rd, const YAML::Node& n)
{
    rd.only_keys(n, {"name", "scope", "dependency", "rule", "params"}, "predicate");
    PredicateDecl d;
    d.name = rd.name(n["name"], "predicate name");
    if (n["scope"]) {
        auto scope = parse_scope(rd.text(n["scope"], "scope"));
        if (!scope) rd.fail(n["scope"], "scope must be record or sequence");
        d.scope = *scope;
    }
    if (const auto dep = n["dependency"]) {
        if (dep.IsScalar()) {
            if (dep.Scalar() != "internal") rd.fail(dep, "dependency must be 'internal' or {external: <oracle>}");
        } else {
            rd.only_keys(dep, {"external"}, "dependency");
            d.dependency = Dependency::external(rd.name(dep["external"], "oracle name"));
        }
    }
    auto rule = parse_rule(rd.text(n["rule"], "rule"));
    if (!rule) rd.fail(n["rule"], "unknown rule '" + n["rule"].Scalar() + "'");
    d.rule = *rule;
    if (const auto params = n["params"]) {
        rd.expect_map(params, "params");
        for (const auto& kv : params) d.params[rd.name(kv.first, "parameter")] = rd.text(kv.second, "parameter value");
    }
    try {
        check_decl(d);
    } catch (const Error& e) {
        rd.fail(n, e.what());
    }
    return d;
}

ContractHook read_hook(const Reader& rd, const YAML::Node& n, const UseCaseSpec& spec)
{
    rd.only_keys(n, {"name", "trigger", "action", "scheme", "width", "record", "attributes"}, "hook");
    ContractHook h;
    h.name = rd.name(n["name"], "hook name");
    h.trigger = rd.name(n["trigger"], "hook trigger");
    const auto action = rd.text(n["action"], "hook action");
    if (action == "create-object") {
        h.action.kind = HookAction::Kind::CreateObject;
        const auto scheme = n["scheme"] ? rd.text(n["scheme"], "scheme") : "sequential";
        if (scheme == "sequential") {
            h.action.scheme = ObjectId::Scheme::Sequential;
        } else if (scheme == "random-bits") {
            h.action.scheme = ObjectId::Scheme::RandomBits;
            const auto width = n["width"] ? rd.integer(n["width"], "width") : 128;
            if (width < 1 || width > static_cast<std::int64_t>(kMaxObjectIdWidth)) rd.fail(n["width"], "width must be in [1, 256]");
            h.action.width = static_cast<std::uint16_t>(width);
        } else {
            rd.fail(n["scheme"], "scheme must be sequential or random-bits");
        }
    } else if (action == "append-record") {
        h.action.kind = HookAction::Kind::AppendRecord;
        auto kind = parse_payload_kind(rd.text(n["record"], "record kind"));
        if (!kind) rd.fail(n["record"], "unknown record kind");
        h.action.record_kind = *kind;
    } else {
        rd.fail(n["action"], "action must be create-object or append-record");
    }
    h.action.attributes = read_attributes(rd, n["attributes"], spec, {});
    return h;
}

CreationMode read_creation(const Reader& rd, const YAML::Node& n, const UseCaseSpec& spec)
{
    rd.only_keys(n, {"mode", "predicate", "creators", "executed-by-consensus"}, "creation");
    const auto mode = rd.text(n["mode"], "creation mode");
    if (mode == "predefined") return CreationMode::predefined();
    if (mode == "consensus-based") return CreationMode::consensus_based(rd.name(n["predicate"], "creation predicate"));
    if (mode != "party-created") rd.fail(n["mode"], "mode must be predefined, consensus-based or party-created");
    CreationMode out;
    const auto creators = n["creators"];
    if (creators && creators.IsScalar() && creators.Scalar() == "anyone") {
        out = CreationMode::open();
    } else {
        std::set<std::uint32_t> ids;
        for (const auto& label : rd.names(creators, "creators")) {
            const auto* p = spec.party(label);
            if (!p) rd.fail(creators, "creator '" + label + "' is not a party");
            ids.insert(p->party_id.id);
        }
        if (ids.empty()) rd.fail(n, "party-created mode needs creators");
        out = CreationMode::party_created(std::move(ids));
    }
    if (n["executed-by-consensus"]) out.executed_by_consensus = rd.flag(n["executed-by-consensus"], "executed-by-consensus");
    return out;
}

const std::initializer_list<std::string_view> kTopKeys = {
    "scenario", "description", "notes",  "parties",  "network", "genesis",    "creation",   "oracles",  "predicates",
    "ledger-binding", "hooks", "validate", "goals", "world",   "adversaries", "workload", "expected", "variants", "toggles"};

Scenario build_scenario(const Reader& rd, const YAML::Node& doc, const std::filesystem::path& source)
{
    rd.only_keys(doc, kTopKeys, "scenario");
    Scenario s;
    s.source = source;
    auto& spec = s.spec;
    spec.name = rd.name(doc["scenario"], "scenario name");
    if (doc["description"]) s.description = rd.text(doc["description"], "description");
    if (const auto notes = doc["notes"]) {
        if (!notes.IsSequence()) rd.fail(notes, "notes must be a list");
        for (const auto& n : notes) s.notes.push_back(rd.text(n, "note"));
    }

    // Parties.
    const auto parties = doc["parties"];
    if (!parties || !parties.IsSequence()) rd.fail(doc, "parties must be a list");
    for (const auto& p : parties) {
        Party party;
        party.party_id.id = static_cast<std::uint32_t>(spec.parties.size());
        party.roles = {Role::Participant};
        if (p.IsScalar()) {
            party.party_id.label = rd.name(p, "party name");
        } else {
            rd.only_keys(p, {"name", "adversary"}, "party");
            party.party_id.label = rd.name(p["name"], "party name");
            if (p["adversary"]) party.honesty = Honesty::adversary(rd.name(p["adversary"], "adversary script"));
        }
        if (spec.party(party.party_id.label)) rd.fail(p, "duplicate party '" + party.party_id.label + "'");
        spec.parties.push_back(std::move(party));
    }

    if (const auto net = doc["network"]) {
        rd.only_keys(net, {"maintainers", "block-capacity", "block-probability", "rounds"}, "network");
        if (net["maintainers"]) s.network.maintainers = static_cast<std::size_t>(rd.integer(net["maintainers"], "maintainers"));
        if (net["block-capacity"])
            s.network.block_capacity = static_cast<std::size_t>(rd.integer(net["block-capacity"], "block-capacity"));
        if (net["block-probability"]) s.network.block_probability = rd.real(net["block-probability"], "block-probability");
        if (net["rounds"]) s.network.rounds = static_cast<Round>(rd.integer(net["rounds"], "rounds"));
    }

    if (const auto genesis = doc["genesis"]) {
        if (!genesis.IsSequence()) rd.fail(genesis, "genesis must be a list");
        for (const auto& g : genesis) {
            rd.expect_map(g, "genesis object");
            const auto alias = rd.name(g["alias"], "genesis alias");
            if (s.genesis_aliases.contains(alias)) rd.fail(g, "duplicate alias '" + alias + "'");
            const auto id = ObjectId::sequential(kSystemPartyId, spec.genesis.size());
            s.genesis_aliases.emplace(alias, id);
            spec.genesis.push_back(ObjectDescriptor::genesis(id, read_attributes(rd, g, spec, {"alias"})));
        }
    }

    if (const auto creation = doc["creation"]) spec.creation = read_creation(rd, creation, spec);

    if (const auto oracles = doc["oracles"]) {
        if (!oracles.IsSequence()) rd.fail(oracles, "oracles must be a list");
        for (const auto& o : oracles) {
            rd.only_keys(o, {"name", "reads"}, "oracle");
            Oracle oracle;
            oracle.name = rd.name(o["name"], "oracle name");
            for (const auto& r : rd.names(o["reads"], "reads")) oracle.reads.insert(r);
            spec.oracles.push_back(std::move(oracle));
        }
    }

    if (const auto predicates = doc["predicates"]) {
        if (!predicates.IsSequence()) rd.fail(predicates, "predicates must be a list");
        for (const auto& p : predicates) spec.predicates.push_back(read_predicate(rd, p));
    }
    for (const auto& p : rd.names(doc["ledger-binding"], "ledger-binding")) spec.ledger_binding_properties.insert(p);
    if (const auto hooks = doc["hooks"]) {
        if (!hooks.IsSequence()) rd.fail(hooks, "hooks must be a list");
        for (const auto& h : hooks) spec.hooks.push_back(read_hook(rd, h, spec));
    }
    spec.validated_predicates = rd.names(doc["validate"], "validate");
    spec.goal_predicates = rd.names(doc["goals"], "goals");

    if (const auto world = doc["world"]) {
        rd.only_keys(world, {"facts", "timeline"}, "world");
        s.world = read_facts(rd, world["facts"], "world fact");
        if (const auto timeline = world["timeline"]) {
            if (!timeline.IsSequence()) rd.fail(timeline, "timeline must be a list");
            for (const auto& item : timeline) {
                const auto round = rd.integer(item["round"], "round");
                if (round < 0) rd.fail(item, "round must be non-negative");
                YAML::Node single(YAML::NodeType::Sequence);
                single.push_back(item);
                for (auto& f : read_facts(rd, single, "timeline entry"))
                    s.timeline.push_back({static_cast<Round>(round), std::move(f)});
            }
        }
    }

    if (const auto adversaries = doc["adversaries"]) {
        if (!adversaries.IsSequence()) rd.fail(adversaries, "adversaries must be a list");
        for (const auto& a : adversaries) {
            rd.only_keys(a, {"oracle", "lies", "noisy"}, "adversary");
            OracleCorruption c;
            c.oracle = rd.name(a["oracle"], "oracle name");
            if (a["lies"]) {
                c.kind = Corruption::Kind::Lies;
                c.overrides = read_facts(rd, a["lies"], "lie");
            } else if (a["noisy"]) {
                c.kind = Corruption::Kind::Noisy;
                c.flip_probability = rd.real(a["noisy"], "noisy");
                if (c.flip_probability < 0.0 || c.flip_probability > 1.0) rd.fail(a["noisy"], "flip probability must be in [0, 1]");
            } else {
                rd.fail(a, "oracle adversary needs 'lies' or 'noisy'");
            }
            if (!spec.oracle(c.oracle)) rd.fail(a, "adversary corrupts undeclared oracle '" + c.oracle + "'");
            s.corruptions.push_back(std::move(c));
        }
    }

    const auto workload = doc["workload"];
    if (!workload) rd.fail(doc, "scenario needs a workload");
    rd.expect_map(workload, "workload");
    for (const auto& kv : workload) {
        const auto key = kv.first.as<std::string>();
        if (key == "name")
            s.workload.name = rd.name(kv.second, "workload name");
        else
            s.workload.params[key] = rd.scalar(kv.second, "workload parameter");
    }

    if (const auto expected = doc["expected"]) {
        rd.only_keys(expected, {"object-creation", "internal-predicate"}, "expected");
        if (expected["object-creation"]) s.expected.object_creation = rd.flag(expected["object-creation"], "object-creation");
        if (expected["internal-predicate"])
            s.expected.internal_predicate = rd.flag(expected["internal-predicate"], "internal-predicate");
    }

    try {
        check_spec(spec);
        make_workload(s);
    } catch (const Error& e) {
        throw Error(e.code(), source.string() + ": " + e.what());
    }
    return s;
}

/// A new top-level map sharing the children of `base`, so source marks survive.
YAML::Node shallow_copy(const YAML::Node& base, std::initializer_list<std::string_view> skip = {})
{
    YAML::Node out(YAML::NodeType::Map);
    for (const auto& kv : base) {
        const auto key = kv.first.as<std::string>();
        if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
        out.force_insert(kv.first, kv.second);
    }
    return out;
}

YAML::Node overlay(const YAML::Node& base, const YAML::Node& patch, const Reader& rd, std::string_view what)
{
    rd.expect_map(patch, what);
    YAML::Node out = shallow_copy(base);
    for (const auto& kv : patch) {
        const auto key = kv.first.as<std::string>();
        out.remove(key);
        out.force_insert(kv.first, kv.second);
    }
    return out;
}

std::string read_file(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

std::vector<Scenario> parse_scenarios(std::string_view text, const std::vector<std::string>& toggles,
                                      const std::filesystem::path& source)
{
    const Reader rd(source.empty() ? "<scenario>" : source.string());
    YAML::Node doc;
    try {
        doc = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::ParseError,
                    fmt::format("{}:{}: {}", source.empty() ? "<scenario>" : source.string(), e.mark.line + 1, e.msg));
    }
    if (!doc.IsMap()) throw Error(ErrorCode::ParseError, (source.empty() ? "<scenario>" : source.string()) + ": not a mapping");

    YAML::Node base = shallow_copy(doc, {"variants", "toggles"});
    for (const auto& t : toggles) {
        const auto patch = doc["toggles"] ? doc["toggles"][t] : YAML::Node();
        if (!patch) throw Error(ErrorCode::SpecError, (source.empty() ? std::string("<scenario>") : source.string()) + ": unknown toggle '" + t + "'");
        base = overlay(base, patch, rd, "toggle");
    }

    std::vector<Scenario> out;
    if (const auto variants = doc["variants"]) {
        rd.expect_map(variants, "variants");
        for (const auto& kv : variants) {
            const auto variant = rd.name(kv.first, "variant name");
            auto node = overlay(base, kv.second, rd, "variant");
            node.remove("scenario");
            node["scenario"] = base["scenario"].as<std::string>() + "-" + variant;
            out.push_back(build_scenario(rd, node, source));
        }
    } else {
        out.push_back(build_scenario(rd, base, source));
    }
    for (auto& s : out) s.toggles = toggles;
    return out;
}

std::vector<Scenario> load_scenario_file(const std::filesystem::path& file, const std::vector<std::string>& toggles)
{
    return parse_scenarios(read_file(file), toggles, file);
}

SuiteLoad load_suite(const std::filesystem::path& dir)
{
    SuiteLoad out;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".yaml") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            auto scenarios = load_scenario_file(f);
            for (auto& s : scenarios) out.scenarios.push_back(std::move(s));
        } catch (const Error& e) {
            out.errors.emplace_back(f, e.what());
        }
    }
    std::sort(out.scenarios.begin(), out.scenarios.end(),
              [](const Scenario& a, const Scenario& b) { return a.name() < b.name(); });
    return out;
}

std::filesystem::path default_scenario_dir()
{
    if (const char* env = std::getenv("LEDGERLAB_SCENARIO_DIR"); env && *env) return env;
    return LEDGERLAB_DEFAULT_SCENARIO_DIR;
}

Scenario resolve_scenario(std::string_view name_or_path, const std::vector<std::string>& toggles,
                          const std::filesystem::path& dir)
{
    const std::filesystem::path as_path(name_or_path);
    std::error_code ec;
    auto pick = [&](std::vector<Scenario> scenarios, std::string_view wanted) -> std::optional<Scenario> {
        if (scenarios.size() == 1 && (wanted.empty() || scenarios.front().name() == wanted)) return std::move(scenarios.front());
        for (auto& s : scenarios)
            if (s.name() == wanted) return std::move(s);
        return std::nullopt;
    };
    for (auto file : {as_path, std::filesystem::path(as_path.string() + ".yaml")}) {
        if (!std::filesystem::is_regular_file(file, ec)) continue;
        auto all = load_scenario_file(file, toggles);
        if (all.size() != 1)
            throw Error(ErrorCode::SpecError, file.string() + " defines several variants; name one of them");
        return std::move(all.front());
    }
    const std::string name(name_or_path);
    if (auto direct = dir / (name + ".yaml"); std::filesystem::is_regular_file(direct, ec))
        if (auto s = pick(load_scenario_file(direct, toggles), name)) return std::move(*s);
    if (std::filesystem::is_directory(dir, ec)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".yaml") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto stem = f.stem().string();
            if (name.rfind(stem + "-", 0) != 0) continue;
            if (auto s = pick(load_scenario_file(f, toggles), name)) return std::move(*s);
        }
    }
    throw Error(ErrorCode::IoError, "no scenario named '" + name + "' in " + dir.string());
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

NetworkConfig scenario_network(const Scenario& s, std::uint64_t seed)
{
    NetworkConfig cfg;
    cfg.num_maintainers = s.network.maintainers;
    cfg.seed = seed;
    cfg.progress_window = 50;
    return cfg;
}

ConsensusEngineKind scenario_engine(const Scenario& s, bool permissionless)
{
    if (!permissionless) return ConsensusEngineKind::quorum();
    return ConsensusEngineKind{PermissionlessChain{s.network.block_probability, s.network.block_capacity}};
}

namespace {

std::string answer_text(const std::optional<Scalar>& answer)
{
    return answer ? scalar_text(*answer) : "-";
}

/// Per-maintainer ledger state reused across validator calls on a growing chain.
struct CachedState {
    LedgerState state;
    std::vector<std::uint64_t> digests;
};

class ScenarioRunner {
public:
    ScenarioRunner(const Scenario& s, const NetworkConfig& cfg, const ConsensusEngineKind& kind)
        : s_(s), spec_(s.spec), predicates_(effective_predicates(s.spec)), cfg_(cfg)
    {
        check_spec(spec_);
        if (cfg_.maintainer_ids.empty())
            for (std::size_t m = 0; m < cfg_.num_maintainers; ++m)
                cfg_.maintainer_ids.push_back(
                    PartyId{static_cast<std::uint32_t>(spec_.parties.size() + m), fmt::format("m{}", m)});
        engine_ = make_engine(cfg_, kind);
        for (std::size_t m = 0; m < engine_->maintainer_count(); ++m) maintainer_index_[engine_->maintainer(m).id] = m;
        caches_.assign(engine_->maintainer_count(), CachedState{LedgerState(spec_.genesis), {}});
        reference_ = engine_->reference_maintainer();
        aliases_ = s.genesis_aliases;
        reference_state_ = LedgerState(spec_.genesis);

        for (const auto& o : spec_.oracles) {
            Oracle live = o;
            live.seed = combine(cfg_.seed, fnv1a(o.name));
            truthful_.emplace(o.name, live);
            for (const auto& c : s.corruptions) {
                if (c.oracle != o.name) continue;
                live.corruption.kind = c.kind;
                live.corruption.flip_probability = c.flip_probability;
                for (const auto& f : c.overrides) pending_overrides_.push_back({o.name, f});
            }
            oracles_.emplace(o.name, std::move(live));
        }
        for (const auto& f : s.world) pending_facts_.push_back(f);
        pending_timeline_ = s.timeline;

        rng_.emplace(combine(cfg_.seed, fnv1a("workload")));
        workload_ = make_workload(s);
        engine_->set_validator([this](const ValidationRequest& req) { return validate(req); });
        reset_hooks();

        log().add(0, "-", run_event::scenario,
                  fmt::format("name={} engine={} maintainers={} seed={} toggles={}", spec_.name,
                              kind.permissionless() ? "permissionless-chain" : "permissioned-quorum",
                              cfg_.num_maintainers, cfg_.seed, toggles_text()));
        bind_pending(0);
    }

    ScenarioRun run(Round rounds)
    {
        for (Round r = 0; r < rounds; ++r) {
            bind_pending(r);
            promote_timeline();
            for (const auto& m : world_.advance(r))
                log().add(r, "-", "world", fmt::format("object={} property={} value={}", m.object.text(), m.property,
                                                      scalar_text(m.value)));
            follow_decided(r);
            for (const auto& rec : hooks_->advance(decided_)) {
                if (!emitted_.insert(rec.key()).second) continue;
                log().add(r, "system", "hook", fmt::format("hook={}", *rec.payload().string_attr("hook")));
                submit(r, rec);
            }
            WorkloadContext ctx{r,
                                s_,
                                decided_,
                                reference_state_,
                                aliases_,
                                *rng_,
                                [this, r](std::uint32_t reader, const std::string& oracle, const ObjectId& object,
                                          const std::string& property) {
                                    return read_oracle(r, reader, oracle, object, property);
                                },
                                [this](const std::string& alias, const std::string& property, Scalar value) {
                                    pending_facts_.push_back({alias, property, std::move(value)});
                                }};
            for (const auto& rec : workload_->step(ctx)) submit(r, rec);
            round_ = r;
            engine_->step();
        }
        follow_decided(rounds);

        ScenarioRun out;
        out.goals = evaluate_goals(rounds);
        out.monitor = engine_->monitor();
        out.decided = decided_;
        out.aliases = aliases_;
        out.oracle_queries = query_counter_;
        out.hook_records = emitted_.size();
        out.rejected = rejected_.size();
        out.audit = audit_trust(engine_->log(), spec_);
        out.log = engine_->log();
        return out;
    }

private:
    EventLog& log() { return engine_->log(); }

    std::string toggles_text() const
    {
        std::string out;
        for (const auto& t : s_.toggles) out += (out.empty() ? "" : ",") + t;
        return out.empty() ? "-" : out;
    }

    // -- aliases and world --------------------------------------------------

    void submit(Round r, const Record& rec)
    {
        if (rec.kind() == PayloadKind::Create) bind_alias(r, rec);
        engine_->submit(rec);
    }

    /// Facts about a new object are known to the world as soon as it is proposed.
    void bind_alias(Round r, const Record& rec)
    {
        auto alias = rec.payload().string_attr("alias");
        if (!alias || aliases_.contains(*alias)) return;
        const auto id = *rec.payload().object_attr(attr::object_id);
        aliases_.emplace(*alias, id);
        log().add(r, "-", "bind", fmt::format("alias={} object={}", *alias, id.text()));
        bind_pending(r);
        promote_timeline();
    }

    void bind_pending(Round r)
    {
        auto still = std::vector<AliasFact>{};
        for (auto& f : pending_facts_) {
            auto it = aliases_.find(f.alias);
            if (it == aliases_.end()) {
                still.push_back(std::move(f));
                continue;
            }
            world_.set(it->second, f.property, f.value);
            log().add(r, "-", "world", fmt::format("object={} property={} value={}", it->second.text(), f.property,
                                                  scalar_text(f.value)));
        }
        pending_facts_ = std::move(still);

        auto remaining = std::vector<std::pair<std::string, AliasFact>>{};
        for (auto& [oracle, f] : pending_overrides_) {
            auto it = aliases_.find(f.alias);
            if (it == aliases_.end()) {
                remaining.emplace_back(oracle, std::move(f));
                continue;
            }
            oracles_.at(oracle).corruption.overrides[{it->second, f.property}] = f.value;
        }
        pending_overrides_ = std::move(remaining);
    }

    void promote_timeline()
    {
        std::vector<TimedFact> still;
        for (auto& t : pending_timeline_) {
            auto it = aliases_.find(t.fact.alias);
            if (it == aliases_.end()) {
                still.push_back(std::move(t));
                continue;
            }
            world_.schedule({t.round, it->second, t.fact.property, t.fact.value});
        }
        pending_timeline_ = std::move(still);
    }

    // -- oracle access -------------------------------------------------------

    OracleAccess access(const std::string& oracle, std::string actor)
    {
        auto it = oracles_.find(oracle);
        if (it == oracles_.end()) throw Error(ErrorCode::SpecError, "undeclared oracle '" + oracle + "'");
        return OracleAccess{&it->second, &world_,
                            [this, actor = std::move(actor)](const OracleQuery& q) {
                                log().add(round_, actor, run_event::oracle_query,
                                          fmt::format("oracle={} predicate={} object={} property={} answer={}", q.oracle,
                                                      q.predicate, q.object.text(), q.property, answer_text(q.answer)));
                            },
                            &query_counter_};
    }

    std::optional<Scalar> read_oracle(Round r, std::uint32_t reader, const std::string& oracle, const ObjectId& object,
                                      const std::string& property)
    {
        auto it = oracles_.find(oracle);
        if (it == oracles_.end()) throw Error(ErrorCode::SpecError, "undeclared oracle '" + oracle + "'");
        auto answer = query_oracle(it->second, world_, object, property, query_counter_++);
        log().add(r, actor_field(reader), run_event::oracle_query,
                  fmt::format("oracle={} predicate=- object={} property={} answer={}", oracle, object.text(), property,
                              answer_text(answer)));
        return answer;
    }

    // -- validation ----------------------------------------------------------

    const LedgerState& state_for(std::size_t m, const RecordSequence& chain)
    {
        auto& c = caches_[m];
        std::size_t keep = std::min(c.digests.size(), chain.size());
        // Compare back to the latest block record, which pins every earlier record.
        for (std::size_t i = keep, checked = 0; i-- > 0 && checked < 64; ++checked) {
            if (chain[i].digest() != c.digests[i]) {
                keep = 0;
                break;
            }
            if (is_block_record(chain[i])) break;
        }
        if (keep < c.digests.size()) {
            c.state = LedgerState(spec_.genesis);
            c.digests.clear();
        }
        for (std::size_t i = c.digests.size(); i < chain.size(); ++i) {
            c.state.apply(chain[i]);
            c.digests.push_back(chain[i].digest());
        }
        return c.state;
    }

    const PredicateDecl& predicate(const std::string& name) const { return *find_predicate(predicates_, name); }

    bool validate(const ValidationRequest& req)
    {
        const Record& r = req.candidate;
        if (is_block_record(r)) return true;
        const auto m = maintainer_index_.at(req.maintainer.id);
        const auto& state = state_for(m, req.chain);
        bool ok = !state.duplicates(r);
        if (ok && r.kind() == PayloadKind::Create) ok = spec_.creation.allows(r.proposer().id);
        for (const auto& name : spec_.validated_predicates) {
            if (!ok) break;
            const auto& d = predicate(name);
            ok = d.is_internal() ? evaluate_with_state(d, state, r)
                                 : evaluate_with_state(d, state, r, access(*d.dependency.oracle, actor_field(req.maintainer.id)));
        }
        if (!ok) rejected_.insert(r.key());
        return ok;
    }

    // -- decided prefix ------------------------------------------------------

    void reset_hooks()
    {
        HookContext ctx{predicates_, spec_.genesis, cfg_.seed, [this](const PredicateDecl& d) -> std::optional<OracleAccess> {
                            return access(*d.dependency.oracle, "hook");
                        }};
        hooks_.emplace(spec_.hooks, std::move(ctx));
    }

    void follow_decided(Round r)
    {
        RecordSequence now = engine_->decided(reference_);
        std::size_t common = std::min(now.size(), decided_.size());
        for (std::size_t i = 0; i < common; ++i)
            if (now[i].digest() != decided_[i].digest()) {
                common = i;
                break;
            }
        if (common < decided_.size()) {
            log().add(r, actor_field(engine_->maintainer(reference_).id), "decided-rollback",
                      fmt::format("from={} to={}", decided_.size(), common));
            reference_state_ = LedgerState::replay(spec_.genesis, now, common);
            reset_hooks();
            hooks_->advance(now.prefix(common));
        }
        for (std::size_t i = common; i < now.size(); ++i) on_decided(r, now[i]);
        decided_ = std::move(now);
    }

    void on_decided(Round r, const Record& rec)
    {
        if (rec.kind() == PayloadKind::Create) {
            const auto id = *rec.payload().object_attr(attr::object_id);
            const bool by_consensus = rec.proposer().id == kSystemPartyId || spec_.creation.executed_by_consensus;
            if (logged_creates_.insert(rec.key()).second)
                log().add(r, actor_field(rec.proposer().id), run_event::decided_create,
                          fmt::format("object={} authority={} creator={}", id.text(), by_consensus ? "consensus" : "party",
                                      spec_.party_label(rec.proposer().id)));
            bind_alias(r, rec);
        }
        reference_state_.apply(rec);
    }

    // -- goals ---------------------------------------------------------------

    bool fold(const PredicateDecl& d, std::optional<OracleAccess> access)
    {
        LedgerState state(spec_.genesis);
        bool ok = true;
        for (const auto& rec : decided_) {
            if (ok && predicate_applies(d, rec)) ok = evaluate_with_state(d, state, rec, access);
            state.apply(rec);
        }
        return ok;
    }

    std::vector<GoalOutcome> evaluate_goals(Round r)
    {
        round_ = r;
        std::vector<GoalOutcome> out;
        for (const auto& name : spec_.goal_predicates) {
            const auto& d = predicate(name);
            GoalOutcome g{name, !d.is_internal(), true, true};
            if (d.is_internal()) {
                g.ledger = g.world = fold(d, std::nullopt);
            } else {
                g.ledger = fold(d, access(*d.dependency.oracle, "goal"));
                g.world = fold(d, OracleAccess{&truthful_.at(*d.dependency.oracle), &world_, {}, nullptr});
            }
            log().add(r, "-", "goal",
                      fmt::format("name={} dependency={} ledger={} world={}", name, g.external ? "external" : "internal",
                                  g.ledger, g.world));
            out.push_back(g);
        }
        return out;
    }

    const Scenario& s_;
    const UseCaseSpec& spec_;
    std::vector<PredicateDecl> predicates_;
    NetworkConfig cfg_;
    std::unique_ptr<ConsensusEngine> engine_;
    std::map<std::uint32_t, std::size_t> maintainer_index_;
    std::vector<CachedState> caches_;
    std::size_t reference_ = 0;
    Round round_ = 0;

    WorldModel world_;
    std::map<std::string, Oracle> oracles_;
    std::map<std::string, Oracle> truthful_;
    std::map<std::string, ObjectId> aliases_;
    std::vector<AliasFact> pending_facts_;
    std::vector<std::pair<std::string, AliasFact>> pending_overrides_;
    std::vector<TimedFact> pending_timeline_;
    std::uint64_t query_counter_ = 0;

    std::optional<Rng> rng_;
    std::unique_ptr<Workload> workload_;
    std::optional<HookRunner> hooks_;
    std::set<RecordKey> emitted_;
    std::set<RecordKey> rejected_;
    std::set<RecordKey> logged_creates_;

    RecordSequence decided_;
    LedgerState reference_state_;
};

} // namespace

ScenarioRun run_scenario(const Scenario& s, const NetworkConfig& cfg, const ConsensusEngineKind& engine, Round rounds)
{
    ScenarioRunner runner(s, cfg, engine);
    return runner.run(rounds);
}

} // namespace ledgerlab
