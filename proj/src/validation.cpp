#include "ledgerlab/validation.hpp"

#include <algorithm>

namespace ledgerlab {

namespace {

constexpr std::pair<Rule, std::string_view> kRuleNames[] = {
    {Rule::BalanceSufficiency, "balance-sufficiency"},
    {Rule::NoDoubleSpend, "no-double-spend"},
    {Rule::NoDuplicateClaim, "no-duplicate-claim"},
    {Rule::OwnershipUnique, "ownership-unique"},
    {Rule::ObjectExists, "object-exists"},
    {Rule::PropertyEquals, "property-equals"},
    {Rule::ProvenanceChainIntact, "provenance-chain-intact"},
};

const std::set<std::string> kKnownParams = {"property", "value", "subject", "applies-to"};

std::optional<std::string> param(const PredicateDecl& decl, std::string_view key)
{
    auto it = decl.params.find(std::string(key));
    if (it == decl.params.end()) return std::nullopt;
    return it->second;
}

/// `@name` references into the record, otherwise a literal word.
std::optional<Scalar> resolve(const Record& r, std::string_view text)
{
    if (text.empty() || text.front() != '@') return scalar_from_word(text);
    const auto name = text.substr(1);
    if (name == "proposer") return static_cast<std::int64_t>(r.proposer().id);
    if (name == "index") return static_cast<std::int64_t>(r.index());
    if (const auto* v = r.payload().find(name)) return *v;
    return std::nullopt;
}

/// Objects a predicate talks about for record r; nullopt when a declared
/// subject attribute is missing or malformed.
std::optional<std::vector<ObjectId>> subjects(const PredicateDecl& decl, const Record& r)
{
    if (auto subject = param(decl, "subject")) {
        if (subject->empty() || subject->front() != '@') return std::nullopt;
        auto id = r.payload().object_attr(std::string_view(*subject).substr(1));
        if (!id) return std::nullopt;
        return std::vector<ObjectId>{*id};
    }
    return std::vector<ObjectId>(r.objects().begin(), r.objects().end());
}

bool creates(const Record& r, const ObjectId& id)
{
    return r.kind() == PayloadKind::Create && r.payload().object_attr(attr::object_id) == id;
}

/// What the ledger itself states about (object, property) once r is appended.
std::optional<Scalar> ledger_value(const LedgerState& before, const Record& r, const ObjectId& object,
                                   std::string_view property)
{
    const auto& p = r.payload();
    const bool involved = r.objects().contains(object);
    if (involved && p.kind == PayloadKind::Assert && p.string_attr(attr::property) == property)
        return *p.find(attr::value);
    if (property == attr::owner && involved) {
        if (p.kind == PayloadKind::Transfer) return *p.find(attr::to);
        if (p.kind == PayloadKind::Claim && p.object_attr(attr::object_id) == object) return *p.find(attr::claimant);
    }
    if (creates(r, object))
        if (const auto* v = p.find(property)) return *v;
    if (property == "exists") return before.exists(object) || creates(r, object);
    if (auto v = before.claim(object, property)) return v;
    if (property == attr::owner)
        if (auto owner = before.owner(object)) return static_cast<std::int64_t>(*owner);
    return std::nullopt;
}

// -- Internal evaluators: (state, record) only ------------------------------

bool internal_check(const PredicateDecl& decl, const LedgerState& before, const Record& r)
{
    const auto& p = r.payload();
    switch (decl.rule) {
    case Rule::BalanceSufficiency:
        if (p.kind != PayloadKind::Transfer) return true;
        return before.balance(static_cast<std::uint32_t>(*p.int_attr(attr::from))) >= *p.int_attr(attr::amount);
    case Rule::NoDoubleSpend:
        return p.kind != PayloadKind::Transfer || !before.duplicates(r);
    case Rule::NoDuplicateClaim:
        return p.kind != PayloadKind::Claim || !before.claimed(*p.object_attr(attr::object_id));
    case Rule::OwnershipUnique:
        return p.kind != PayloadKind::Create || !before.exists(*p.object_attr(attr::object_id));
    case Rule::ObjectExists: {
        auto subs = subjects(decl, r);
        if (!subs) return false;
        return std::all_of(subs->begin(), subs->end(),
                           [&](const ObjectId& o) { return before.exists(o) || creates(r, o); });
    }
    case Rule::PropertyEquals: {
        const auto property = *param(decl, "property");
        const auto expected = resolve(r, param(decl, "value").value_or("true"));
        if (!expected) return false;
        auto subs = subjects(decl, r);
        if (!subs) return false;
        if (subs->empty() && !param(decl, "subject")) {
            const auto* own = p.find(property);
            return own && *own == *expected;
        }
        return std::all_of(subs->begin(), subs->end(), [&](const ObjectId& o) {
            auto actual = ledger_value(before, r, o, property);
            return actual && *actual == *expected;
        });
    }
    case Rule::ProvenanceChainIntact: {
        if (p.kind != PayloadKind::Transfer) return true;
        const auto from = static_cast<std::uint32_t>(*p.int_attr(attr::from));
        return std::all_of(r.objects().begin(), r.objects().end(),
                           [&](const ObjectId& o) { return before.owner(o) == from; });
    }
    }
    return false;
}

// -- External evaluators: record plus oracle --------------------------------

std::optional<Scalar> read(OracleAccess& access, const PredicateDecl& decl, const ObjectId& object,
                           std::string_view property)
{
    if (access.oracle->name != *decl.dependency.oracle)
        throw Error(ErrorCode::SpecError,
                    "predicate '" + decl.name + "' depends on oracle '" + *decl.dependency.oracle + "', got '" +
                        access.oracle->name + "'");
    const std::uint64_t query = access.query_counter ? (*access.query_counter)++ : 0;
    auto answer = query_oracle(*access.oracle, *access.world, object, property, query);
    if (access.observer) access.observer({access.oracle->name, decl.name, object, std::string(property), answer});
    return answer;
}

bool external_check(const PredicateDecl& decl, const Record& r, OracleAccess& access)
{
    auto subs = subjects(decl, r);
    if (!subs) return false;
    auto all_read = [&](std::string_view property, const Scalar& expected) {
        bool ok = true;
        for (const auto& o : *subs) {
            auto answer = read(access, decl, o, property);
            ok = ok && answer && *answer == expected;
        }
        return ok;
    };
    switch (decl.rule) {
    case Rule::ObjectExists:
        return all_read("exists", true);
    case Rule::ProvenanceChainIntact:
        if (r.kind() != PayloadKind::Transfer) return true;
        return all_read("provenance", true);
    case Rule::PropertyEquals: {
        const auto expected = resolve(r, param(decl, "value").value_or("true"));
        if (!expected) return false;
        return all_read(*param(decl, "property"), *expected);
    }
    default:
        throw Error(ErrorCode::SpecError, "rule '" + std::string(to_string(decl.rule)) + "' cannot be external");
    }
}

} // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(PredicateScope scope)
{
    return scope == PredicateScope::SingleRecord ? "record" : "sequence";
}

std::optional<PredicateScope> parse_scope(std::string_view text)
{
    if (text == "record" || text == "single-record") return PredicateScope::SingleRecord;
    if (text == "sequence") return PredicateScope::Sequence;
    return std::nullopt;
}

std::string_view to_string(Rule rule)
{
    for (const auto& [r, name] : kRuleNames)
        if (r == rule) return name;
    return "property-equals";
}

std::optional<Rule> parse_rule(std::string_view text)
{
    for (const auto& [r, name] : kRuleNames)
        if (name == text) return r;
    return std::nullopt;
}

bool ledger_only_rule(Rule rule)
{
    return rule == Rule::BalanceSufficiency || rule == Rule::NoDoubleSpend || rule == Rule::NoDuplicateClaim ||
           rule == Rule::OwnershipUnique;
}

std::optional<PayloadKind> PredicateDecl::applies_to() const
{
    auto kind = param(*this, "applies-to");
    if (!kind) return std::nullopt;
    return parse_payload_kind(*kind);
}

std::set<std::string> PredicateDecl::properties() const
{
    switch (rule) {
    case Rule::ObjectExists: return {"exists"};
    case Rule::ProvenanceChainIntact: return {"provenance"};
    case Rule::PropertyEquals:
        if (auto p = param(*this, "property")) return {*p};
        return {};
    default: return {};
    }
}

void check_decl(const PredicateDecl& decl)
{
    auto fail = [&](const std::string& why) { throw Error(ErrorCode::SpecError, "predicate '" + decl.name + "': " + why); };
    if (decl.name.empty()) throw Error(ErrorCode::SpecError, "predicate without a name");
    if (decl.dependency.is_external() && ledger_only_rule(decl.rule))
        fail("rule " + std::string(to_string(decl.rule)) + " reads only the ledger and cannot depend on an oracle");
    for (const auto& [key, value] : decl.params)
        if (!kKnownParams.contains(key)) fail("unknown parameter '" + key + "'");
    if (decl.rule == Rule::PropertyEquals) {
        auto p = param(decl, "property");
        if (!p || p->empty() || p->front() == '@') fail("property-equals needs a literal 'property'");
    }
    if (auto kind = param(decl, "applies-to"); kind && !parse_payload_kind(*kind))
        fail("unknown payload kind '" + *kind + "'");
    if (auto subject = param(decl, "subject"); subject && (subject->size() < 2 || subject->front() != '@'))
        fail("subject must name a record attribute as @attr");
}

PredicateDecl with_ledger_binding(const PredicateDecl& decl, const std::set<std::string>& ledger_binding)
{
    PredicateDecl out = decl;
    if (!decl.dependency.is_external()) return out;
    const auto props = decl.properties();
    if (!props.empty() && std::all_of(props.begin(), props.end(), [&](const std::string& p) { return ledger_binding.contains(p); }))
        out.dependency = Dependency::internal();
    return out;
}

// ---------------------------------------------------------------------------

void WorldModel::set(const ObjectId& object, std::string property, Scalar value)
{
    facts_[{object, std::move(property)}] = std::move(value);
}

std::optional<Scalar> WorldModel::fact(const ObjectId& object, std::string_view property) const
{
    auto it = facts_.find({object, std::string(property)});
    if (it == facts_.end()) return std::nullopt;
    return it->second;
}

void WorldModel::schedule(Mutation m)
{
    auto pos = std::upper_bound(timeline_.begin() + static_cast<std::ptrdiff_t>(applied_), timeline_.end(), m.round,
                                [](Round r, const Mutation& x) { return r < x.round; });
    timeline_.insert(pos, std::move(m));
}

std::vector<WorldModel::Mutation> WorldModel::advance(Round round)
{
    std::vector<Mutation> out;
    while (applied_ < timeline_.size() && timeline_[applied_].round <= round) {
        const auto& m = timeline_[applied_++];
        set(m.object, m.property, m.value);
        out.push_back(m);
    }
    return out;
}

Scalar perturb(const Scalar& truth)
{
    if (const auto* b = std::get_if<bool>(&truth)) return !*b;
    if (const auto* i = std::get_if<std::int64_t>(&truth)) return *i + 1;
    return std::get<std::string>(truth) + "~";
}

std::optional<Scalar> query_oracle(const Oracle& oracle, const WorldModel& world, const ObjectId& object,
                                   std::string_view property, std::uint64_t query)
{
    if (!oracle.reads.contains(std::string(property)))
        throw Error(ErrorCode::OracleRefused, "oracle '" + oracle.name + "' cannot read '" + std::string(property) + "'");
    const auto& c = oracle.corruption;
    if (c.kind == Corruption::Kind::Lies) {
        auto it = c.overrides.find({object, std::string(property)});
        if (it != c.overrides.end()) return it->second;
    }
    auto truth = world.fact(object, property);
    if (!truth || c.kind != Corruption::Kind::Noisy) return truth;
    const std::uint64_t stream = combine(oracle.seed, fnv1a(oracle.name));
    const std::uint64_t draw = combine(stream, combine(fnv1a(object.text() + "/" + std::string(property)), query));
    return unit_interval(draw) < c.flip_probability ? perturb(*truth) : *truth;
}

// ---------------------------------------------------------------------------

bool predicate_applies(const PredicateDecl& decl, const Record& r)
{
    auto kind = decl.applies_to();
    return !kind || *kind == r.kind();
}

bool evaluate_with_state(const PredicateDecl& decl, const LedgerState& before, const Record& r,
                         std::optional<OracleAccess> oracle)
{
    if (decl.is_internal()) {
        if (oracle)
            throw Error(ErrorCode::SpecError, "internal predicate '" + decl.name + "' must not be given an oracle");
        return !predicate_applies(decl, r) || internal_check(decl, before, r);
    }
    if (!oracle || !oracle->oracle || !oracle->world)
        throw Error(ErrorCode::MissingOracle, "external predicate '" + decl.name + "' needs oracle '" +
                                                  *decl.dependency.oracle + "'");
    return !predicate_applies(decl, r) || external_check(decl, r, *oracle);
}

bool evaluate_record_predicate(const PredicateDecl& decl, const RecordSequence& seq, const Record& r,
                               std::optional<OracleAccess> oracle, std::span<const ObjectDescriptor> genesis)
{
    if (decl.scope != PredicateScope::SingleRecord)
        throw Error(ErrorCode::SpecError, "predicate '" + decl.name + "' is not record-scoped");
    if (decl.is_internal() && oracle)
        throw Error(ErrorCode::SpecError, "internal predicate '" + decl.name + "' must not be given an oracle");
    if (!decl.is_internal()) return evaluate_with_state(decl, LedgerState(genesis), r, std::move(oracle));
    return evaluate_with_state(decl, LedgerState::replay(genesis, seq), r);
}

bool evaluate_sequence_predicate(const PredicateDecl& decl, const RecordSequence& seq, std::optional<OracleAccess> oracle,
                                 std::span<const ObjectDescriptor> genesis)
{
    if (decl.scope != PredicateScope::Sequence)
        throw Error(ErrorCode::SpecError, "predicate '" + decl.name + "' is not sequence-scoped");
    if (decl.is_internal() && oracle)
        throw Error(ErrorCode::SpecError, "internal predicate '" + decl.name + "' must not be given an oracle");
    if (!decl.is_internal() && (!oracle || !oracle->oracle || !oracle->world))
        throw Error(ErrorCode::MissingOracle, "external predicate '" + decl.name + "' needs an oracle");
    LedgerState state(genesis);
    for (const auto& r : seq) {
        if (!evaluate_with_state(decl, state, r, oracle)) return false;
        state.apply(r);
    }
    return true;
}

// ---------------------------------------------------------------------------

const PredicateDecl* find_predicate(std::span<const PredicateDecl> predicates, std::string_view name)
{
    for (const auto& p : predicates)
        if (p.name == name) return &p;
    return nullptr;
}

HookRunner::HookRunner(std::vector<ContractHook> hooks, HookContext context)
    : hooks_(std::move(hooks)), context_(std::move(context)), state_(context_.genesis)
{
    for (const auto& h : hooks_) {
        const auto* trigger = find_predicate(context_.predicates, h.trigger);
        if (!trigger) throw Error(ErrorCode::UnknownTrigger, "hook '" + h.name + "' names unknown trigger '" + h.trigger + "'");
        if (trigger->scope != PredicateScope::SingleRecord)
            throw Error(ErrorCode::SpecError, "hook '" + h.name + "' trigger must be record-scoped");
        triggers_.push_back(*trigger);
    }
    for (const auto& d : context_.genesis)
        if (d.object_id.scheme == ObjectId::Scheme::Sequential && d.object_id.issuer == kSystemPartyId &&
            d.object_id.value.fits_u64())
            next_sequential_ = std::max(next_sequential_, d.object_id.value.limbs[0] + 1);
    context_.predicates = {};
    context_.genesis = {};
}

std::vector<Record> HookRunner::advance(const RecordSequence& decided)
{
    std::vector<Record> out;
    for (; processed_ < decided.size(); ++processed_) {
        auto emitted = process(decided[processed_]);
        out.insert(out.end(), emitted.begin(), emitted.end());
    }
    return out;
}

std::vector<Record> HookRunner::process(const Record& r)
{
    std::vector<Record> out;
    for (std::size_t h = 0; h < hooks_.size(); ++h) {
        const auto& hook = hooks_[h];
        const auto& trigger = triggers_[h];
        if (!predicate_applies(trigger, r)) continue;
        std::optional<OracleAccess> access;
        if (!trigger.is_internal() && context_.oracle_for) access = context_.oracle_for(trigger);
        if (!evaluate_with_state(trigger, state_, r, access)) continue;

        Attributes attributes;
        for (const auto& [key, value] : hook.action.attributes) {
            const auto* text = std::get_if<std::string>(&value);
            if (text && !text->empty() && text->front() == '@') {
                if (auto resolved = resolve(r, *text)) attributes[key] = *resolved;
            } else {
                attributes[key] = value;
            }
        }
        attributes["hook"] = hook.name;
        const std::uint64_t nonce = combine(fnv1a(hook.name), combine(r.key().proposer, r.key().nonce));

        std::set<ObjectId> objects;
        PayloadKind kind = hook.action.record_kind;
        if (hook.action.kind == HookAction::Kind::CreateObject) {
            kind = PayloadKind::Create;
            ObjectId id;
            if (hook.action.scheme == ObjectId::Scheme::Sequential) {
                id = ObjectId::sequential(kSystemPartyId, next_sequential_++);
            } else {
                Rng rng(combine(context_.seed, nonce));
                id = ObjectId::random_bits(hook.action.width, rng);
            }
            attributes[std::string(attr::object_id)] = id.text();
            objects.insert(id);
        } else if (auto it = attributes.find(attr::object_id); it != attributes.end()) {
            if (auto text = as_string(it->second))
                if (auto id = ObjectId::parse(*text)) objects.insert(*id);
        }
        std::set<PartyId> parties;
        for (auto key : {attr::owner, attr::from, attr::to, attr::claimant})
            if (auto it = attributes.find(key); it != attributes.end())
                if (auto id = as_int(it->second)) parties.insert(PartyId{static_cast<std::uint32_t>(*id), {}});

        out.push_back(make_record(0, std::move(parties), std::move(objects), Payload{kind, std::move(attributes)},
                                  system_party(), nonce));
        ++fired_;
    }
    state_.apply(r);
    return out;
}

std::vector<Record> fire_contract_hooks(std::span<const ContractHook> hooks, const RecordSequence& decided,
                                        const HookContext& context)
{
    HookRunner runner(std::vector<ContractHook>(hooks.begin(), hooks.end()), context);
    return runner.advance(decided);
}

} // namespace ledgerlab
