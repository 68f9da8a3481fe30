#pragma once

#include <compare>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ledgerlab/consensus.hpp"
#include "ledgerlab/ledger.hpp"
#include "ledgerlab/validation.hpp"

namespace ledgerlab {

struct CreationMode {
    enum class Kind : std::uint8_t { Predefined, ConsensusBased, PartyCreated };

    Kind kind = Kind::Predefined;
    std::string predicate;                 // ConsensusBased
    std::set<std::uint32_t> creators;      // PartyCreated
    bool anyone = false;                   // PartyCreated
    /// PartyCreated whose creation vote is run by the consensus protocol itself.
    bool executed_by_consensus = false;

    static CreationMode predefined() { return {}; }
    static CreationMode consensus_based(std::string predicate) { return {Kind::ConsensusBased, std::move(predicate), {}, false, false}; }
    static CreationMode party_created(std::set<std::uint32_t> creators) { return {Kind::PartyCreated, {}, std::move(creators), false, false}; }
    static CreationMode open() { return {Kind::PartyCreated, {}, {}, true, false}; }

    bool allows(std::uint32_t proposer) const;
};

std::string_view to_string(CreationMode::Kind kind);

struct UseCaseSpec {
    std::string name;
    std::vector<Party> parties;
    CreationMode creation;
    std::vector<ObjectDescriptor> genesis;
    std::vector<PredicateDecl> predicates;
    std::vector<std::string> goal_predicates;
    std::set<std::string> ledger_binding_properties;
    /// Predicates every maintainer checks before accepting a record.
    std::vector<std::string> validated_predicates;
    std::vector<ContractHook> hooks;
    std::vector<Oracle> oracles;
    std::set<std::string> privileged_validators;

    const Party* party(std::string_view label) const;
    const Party* party(std::uint32_t id) const;
    std::string party_label(std::uint32_t id) const;
    const Oracle* oracle(std::string_view name) const;
};

/// Throws SpecError on dangling names, ill-formed predicates or hooks.
void check_spec(const UseCaseSpec& spec);

/// Predicates after ledger-binding reclassification.
std::vector<PredicateDecl> effective_predicates(const UseCaseSpec& spec);

// ---------------------------------------------------------------------------

enum class Criterion : std::uint8_t { ObjectCreation, InternalPredicate };
std::string_view to_string(Criterion criterion);

struct Reason {
    std::string element;
    std::string code;
    std::string detail;

    friend bool operator==(const Reason&, const Reason&) = default;
};

struct CriterionVerdict {
    Criterion criterion = Criterion::ObjectCreation;
    bool met = true;
    std::vector<Reason> reasons;
};

CriterionVerdict check_object_creation_criterion(const UseCaseSpec& spec);
CriterionVerdict check_internal_predicate_criterion(const UseCaseSpec& spec);

/// Deterministic text rendering: one line when met, one line per reason otherwise.
std::string explain_verdict(const CriterionVerdict& verdict);

// ---------------------------------------------------------------------------

enum class TrustReason : std::uint8_t { ObjectCreationAuthority, ExternalOracle, PrivilegedValidator };
std::string_view to_string(TrustReason reason);

struct TrustedEntity {
    std::string entity;
    TrustReason reason = TrustReason::ExternalOracle;

    friend bool operator==(const TrustedEntity&, const TrustedEntity&) = default;
    friend auto operator<=>(const TrustedEntity&, const TrustedEntity&) = default;
};

struct TrustAuditReport {
    std::string scenario;
    std::set<TrustedEntity> trusted_entities;
    CriterionVerdict object_creation;
    CriterionVerdict internal_predicate;
    /// Predicate names seen in oracle queries, for the static/dynamic cross-check.
    std::set<std::string> queried_predicates;
};

/// Entities whose honesty the verdicts depend on, read from the spec alone.
std::set<TrustedEntity> static_trusted_entities(const UseCaseSpec& spec);

/// Run-log event names the auditor reads.
namespace run_event {
inline constexpr std::string_view scenario = "scenario";
inline constexpr std::string_view oracle_query = "oracle-query";
inline constexpr std::string_view decided_create = "decided-create";
inline constexpr std::string_view committee_approve = "committee-approve";
} // namespace run_event

/// Scans a run log for trust dependencies. Throws LogMismatch when the log
/// belongs to another scenario or carries no scenario line.
TrustAuditReport audit_trust(const EventLog& log, const UseCaseSpec& spec);
TrustAuditReport audit_trust(std::string_view log_text, const UseCaseSpec& spec);

/// `key=value` fields of a log detail column.
std::map<std::string, std::string, std::less<>> detail_fields(std::string_view detail);

} // namespace ledgerlab
