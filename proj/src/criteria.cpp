#include "ledgerlab/criteria.hpp"

#include <fmt/format.h>

namespace ledgerlab {

bool CreationMode::allows(std::uint32_t proposer) const
{
    switch (kind) {
    case Kind::Predefined: return false;
    case Kind::ConsensusBased: return proposer == kSystemPartyId;
    case Kind::PartyCreated: return anyone || proposer == kSystemPartyId || creators.contains(proposer);
    }
    return false;
}

std::string_view to_string(CreationMode::Kind kind)
{
    switch (kind) {
    case CreationMode::Kind::Predefined: return "predefined";
    case CreationMode::Kind::ConsensusBased: return "consensus-based";
    case CreationMode::Kind::PartyCreated: return "party-created";
    }
    return "predefined";
}

const Party* UseCaseSpec::party(std::string_view label) const
{
    for (const auto& p : parties)
        if (p.party_id.label == label) return &p;
    return nullptr;
}

const Party* UseCaseSpec::party(std::uint32_t id) const
{
    for (const auto& p : parties)
        if (p.party_id.id == id) return &p;
    return nullptr;
}

std::string UseCaseSpec::party_label(std::uint32_t id) const
{
    if (id == kSystemPartyId) return "system";
    if (const auto* p = party(id)) return p->party_id.label;
    return std::to_string(id);
}

const Oracle* UseCaseSpec::oracle(std::string_view name) const
{
    for (const auto& o : oracles)
        if (o.name == name) return &o;
    return nullptr;
}

void check_spec(const UseCaseSpec& spec)
{
    auto fail = [&](const std::string& why) { throw Error(ErrorCode::SpecError, spec.name + ": " + why); };
    if (spec.name.empty()) throw Error(ErrorCode::SpecError, "use case without a name");

    std::set<std::string> labels;
    for (const auto& p : spec.parties)
        if (!labels.insert(p.party_id.label).second) fail("duplicate party '" + p.party_id.label + "'");

    std::set<std::string> names;
    std::set<std::string> read_properties;
    for (const auto& d : spec.predicates) {
        check_decl(d);
        if (!names.insert(d.name).second) fail("duplicate predicate '" + d.name + "'");
        if (d.dependency.is_external() && !spec.oracle(*d.dependency.oracle))
            fail("predicate '" + d.name + "' depends on undeclared oracle '" + *d.dependency.oracle + "'");
        const auto props = d.properties();
        read_properties.insert(props.begin(), props.end());
    }
    for (const auto& g : spec.goal_predicates)
        if (!names.contains(g)) fail("goal '" + g + "' is not a declared predicate");
    for (const auto& v : spec.validated_predicates)
        if (!names.contains(v)) fail("validated predicate '" + v + "' is not declared");
    for (const auto& p : spec.ledger_binding_properties)
        if (!read_properties.contains(p)) fail("ledger-binding property '" + p + "' is not read by any predicate");

    if (spec.creation.kind == CreationMode::Kind::ConsensusBased && !names.contains(spec.creation.predicate))
        fail("creation predicate '" + spec.creation.predicate + "' is not declared");
    for (auto c : spec.creation.creators)
        if (!spec.party(c)) fail("creator " + std::to_string(c) + " is not a party");

    for (const auto& h : spec.hooks) {
        const auto* trigger = find_predicate(spec.predicates, h.trigger);
        if (!trigger) throw Error(ErrorCode::UnknownTrigger, "hook '" + h.name + "' names unknown trigger '" + h.trigger + "'");
        if (trigger->scope != PredicateScope::SingleRecord) fail("hook '" + h.name + "' trigger must be record-scoped");
    }
    if (spec.creation.kind == CreationMode::Kind::Predefined)
        for (const auto& h : spec.hooks)
            if (h.action.kind == HookAction::Kind::CreateObject)
                fail("hook '" + h.name + "' creates objects but the object set is predefined");
}

std::vector<PredicateDecl> effective_predicates(const UseCaseSpec& spec)
{
    std::vector<PredicateDecl> out;
    out.reserve(spec.predicates.size());
    for (const auto& d : spec.predicates) out.push_back(with_ledger_binding(d, spec.ledger_binding_properties));
    return out;
}

std::string_view to_string(Criterion criterion)
{
    return criterion == Criterion::ObjectCreation ? "object-creation" : "internal-predicate";
}

CriterionVerdict check_object_creation_criterion(const UseCaseSpec& spec)
{
    check_spec(spec);
    CriterionVerdict v{Criterion::ObjectCreation, true, {}};
    const auto& mode = spec.creation;
    if (mode.kind != CreationMode::Kind::PartyCreated || mode.executed_by_consensus) return v;
    v.met = false;
    if (mode.anyone) v.reasons.push_back({"anyone", "open-creation", "any party may create objects outside consensus"});
    for (auto c : mode.creators)
        v.reasons.push_back({spec.party_label(c), "creation-authority", "creates objects outside consensus"});
    if (v.reasons.empty()) v.reasons.push_back({"creation", "no-creators", "party-created mode without creators"});
    return v;
}

CriterionVerdict check_internal_predicate_criterion(const UseCaseSpec& spec)
{
    check_spec(spec);
    CriterionVerdict v{Criterion::InternalPredicate, true, {}};
    for (const auto& d : effective_predicates(spec)) {
        if (d.is_internal()) continue;
        v.met = false;
        std::string props;
        for (const auto& p : d.properties()) props += (props.empty() ? "" : ",") + p;
        v.reasons.push_back({d.name, "external-oracle", "reads " + props + " through oracle " + *d.dependency.oracle});
    }
    return v;
}

std::string explain_verdict(const CriterionVerdict& verdict)
{
    std::string out = fmt::format("{}: {}\n", to_string(verdict.criterion), verdict.met ? "met" : "not met");
    for (const auto& r : verdict.reasons) out += fmt::format("  - {} [{}]: {}\n", r.element, r.code, r.detail);
    return out;
}

// ---------------------------------------------------------------------------

std::set<TrustedEntity> static_trusted_entities(const UseCaseSpec& spec)
{
    std::set<TrustedEntity> out;
    for (const auto& r : check_object_creation_criterion(spec).reasons)
        out.insert({r.element, TrustReason::ObjectCreationAuthority});
    for (const auto& d : effective_predicates(spec))
        if (!d.is_internal()) out.insert({*d.dependency.oracle, TrustReason::ExternalOracle});
    for (const auto& v : spec.privileged_validators) out.insert({v, TrustReason::PrivilegedValidator});
    return out;
}

std::string_view to_string(TrustReason reason)
{
    switch (reason) {
    case TrustReason::ObjectCreationAuthority: return "object-creation-authority";
    case TrustReason::ExternalOracle: return "external-oracle";
    case TrustReason::PrivilegedValidator: return "privileged-validator";
    }
    return "external-oracle";
}

std::map<std::string, std::string, std::less<>> detail_fields(std::string_view detail)
{
    std::map<std::string, std::string, std::less<>> out;
    std::size_t pos = 0;
    while (pos < detail.size()) {
        auto end = detail.find(' ', pos);
        if (end == std::string_view::npos) end = detail.size();
        const auto token = detail.substr(pos, end - pos);
        if (auto eq = token.find('='); eq != std::string_view::npos)
            out.emplace(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
        pos = end + 1;
    }
    return out;
}

TrustAuditReport audit_trust(const EventLog& log, const UseCaseSpec& spec)
{
    return audit_trust(log.text(), spec);
}

TrustAuditReport audit_trust(std::string_view log_text, const UseCaseSpec& spec)
{
    TrustAuditReport report;
    report.scenario = spec.name;
    std::optional<std::string> logged_name;
    std::size_t pos = 0;
    while (pos < log_text.size()) {
        auto end = log_text.find('\n', pos);
        if (end == std::string_view::npos) end = log_text.size();
        const auto line = log_text.substr(pos, end - pos);
        pos = end + 1;

        std::string_view fields[4];
        std::size_t start = 0;
        bool complete = true;
        for (int i = 0; i < 3; ++i) {
            auto bar = line.find('|', start);
            if (bar == std::string_view::npos) {
                complete = false;
                break;
            }
            fields[i] = line.substr(start, bar - start);
            start = bar + 1;
        }
        if (!complete) continue;
        fields[3] = line.substr(start);
        const auto event = fields[2];

        if (event == run_event::scenario) {
            auto f = detail_fields(fields[3]);
            logged_name = f["name"];
        } else if (event == run_event::oracle_query) {
            auto f = detail_fields(fields[3]);
            report.trusted_entities.insert({f["oracle"], TrustReason::ExternalOracle});
            if (f["predicate"] != "-") report.queried_predicates.insert(f["predicate"]);
        } else if (event == run_event::decided_create) {
            auto f = detail_fields(fields[3]);
            if (f["authority"] == "party") report.trusted_entities.insert({f["creator"], TrustReason::ObjectCreationAuthority});
        } else if (event == run_event::committee_approve) {
            auto f = detail_fields(fields[3]);
            report.trusted_entities.insert({f["validator"], TrustReason::PrivilegedValidator});
        }
    }
    if (!logged_name) throw Error(ErrorCode::LogMismatch, "log carries no scenario line");
    if (*logged_name != spec.name)
        throw Error(ErrorCode::LogMismatch, "log belongs to '" + *logged_name + "', not '" + spec.name + "'");
    report.object_creation = check_object_creation_criterion(spec);
    report.internal_predicate = check_internal_predicate_criterion(spec);
    return report;
}

} // namespace ledgerlab
