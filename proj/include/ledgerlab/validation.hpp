#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ledgerlab/consensus.hpp"
#include "ledgerlab/ledger.hpp"

namespace ledgerlab {

enum class PredicateScope : std::uint8_t { SingleRecord, Sequence };

enum class Rule : std::uint8_t {
    BalanceSufficiency,
    NoDoubleSpend,
    NoDuplicateClaim,
    OwnershipUnique,
    ObjectExists,
    PropertyEquals,
    ProvenanceChainIntact,
};

std::string_view to_string(PredicateScope scope);
std::optional<PredicateScope> parse_scope(std::string_view text);
std::string_view to_string(Rule rule);
std::optional<Rule> parse_rule(std::string_view text);

/// Rules that can only ever be evaluated from the records themselves.
bool ledger_only_rule(Rule rule);

struct Dependency {
    std::optional<std::string> oracle;   // nullopt: Internal

    static Dependency internal() { return {}; }
    static Dependency external(std::string oracle_name) { return {std::move(oracle_name)}; }
    bool is_external() const { return oracle.has_value(); }

    friend bool operator==(const Dependency&, const Dependency&) = default;
};

/// Rule parameters (all optional unless noted):
///   property    property-equals: property read (required, literal)
///   value       property-equals: literal scalar or `@attr` of the record
///   subject     `@attr` naming an object-id attribute; default: the record's objects
///   applies-to  payload kind filter; other kinds evaluate vacuously true
struct PredicateDecl {
    std::string name;
    PredicateScope scope = PredicateScope::SingleRecord;
    Dependency dependency;
    Rule rule = Rule::PropertyEquals;
    std::map<std::string, std::string> params;

    std::optional<PayloadKind> applies_to() const;
    /// Object properties the rule reads (empty for ledger-only rules).
    std::set<std::string> properties() const;
    bool is_internal() const { return !dependency.is_external(); }
};

/// Throws SpecError for malformed declarations.
void check_decl(const PredicateDecl& decl);

/// Reclassifies an External predicate as Internal when every property it reads
/// is ledger-binding.
PredicateDecl with_ledger_binding(const PredicateDecl& decl, const std::set<std::string>& ledger_binding);

// ---------------------------------------------------------------------------
// World model and oracles
// ---------------------------------------------------------------------------

using FactKey = std::pair<ObjectId, std::string>;

class WorldModel {
public:
    struct Mutation {
        Round round = 0;
        ObjectId object;
        std::string property;
        Scalar value;
    };

    void set(const ObjectId& object, std::string property, Scalar value);
    std::optional<Scalar> fact(const ObjectId& object, std::string_view property) const;
    const std::map<FactKey, Scalar>& facts() const { return facts_; }

    /// Queues a mutation; applied by advance() once its round is reached.
    void schedule(Mutation m);
    /// Applies every scheduled mutation with round <= `round`; returns those applied.
    std::vector<Mutation> advance(Round round);
    const std::vector<Mutation>& timeline() const { return timeline_; }

private:
    std::map<FactKey, Scalar> facts_;
    std::vector<Mutation> timeline_;   // stable-sorted by round
    std::size_t applied_ = 0;
};

struct Corruption {
    enum class Kind : std::uint8_t { Truthful, Lies, Noisy };

    Kind kind = Kind::Truthful;
    std::map<FactKey, Scalar> overrides;   // Lies
    double flip_probability = 0.0;         // Noisy

    static Corruption truthful() { return {}; }
    static Corruption lies(std::map<FactKey, Scalar> overrides) { return {Kind::Lies, std::move(overrides), 0.0}; }
    static Corruption noisy(double p) { return {Kind::Noisy, {}, p}; }
};

struct Oracle {
    std::string name;
    std::set<std::string> reads;
    Corruption corruption;
    std::uint64_t seed = kDefaultSeed;
};

/// Answer for one query; `query` distinguishes repeated queries for the noise
/// draw. Missing facts answer nullopt. Throws OracleRefused for unreadable
/// properties.
std::optional<Scalar> query_oracle(const Oracle& oracle, const WorldModel& world, const ObjectId& object,
                                   std::string_view property, std::uint64_t query = 0);

/// Value a noisy oracle reports instead of `truth`.
Scalar perturb(const Scalar& truth);

struct OracleQuery {
    std::string oracle;
    std::string predicate;
    ObjectId object;
    std::string property;
    std::optional<Scalar> answer;
};

/// Everything an External evaluation is handed: the oracle, the world it
/// observes, and a sink for the query log.
struct OracleAccess {
    const Oracle* oracle = nullptr;
    const WorldModel* world = nullptr;
    std::function<void(const OracleQuery&)> observer;
    std::uint64_t* query_counter = nullptr;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

bool evaluate_record_predicate(const PredicateDecl& decl, const RecordSequence& seq, const Record& r,
                               std::optional<OracleAccess> oracle = {}, std::span<const ObjectDescriptor> genesis = {});

bool evaluate_sequence_predicate(const PredicateDecl& decl, const RecordSequence& seq,
                                 std::optional<OracleAccess> oracle = {}, std::span<const ObjectDescriptor> genesis = {});

/// Record check against an already replayed state (the incremental path used by runs).
bool evaluate_with_state(const PredicateDecl& decl, const LedgerState& before, const Record& r,
                         std::optional<OracleAccess> oracle = {});

/// True when the record falls under the predicate's kind filter.
bool predicate_applies(const PredicateDecl& decl, const Record& r);

// ---------------------------------------------------------------------------
// Contract hooks
// ---------------------------------------------------------------------------

struct HookAction {
    enum class Kind : std::uint8_t { CreateObject, AppendRecord };

    Kind kind = Kind::CreateObject;
    ObjectId::Scheme scheme = ObjectId::Scheme::Sequential;   // CreateObject
    std::uint16_t width = 128;                                // CreateObject, RandomBits
    PayloadKind record_kind = PayloadKind::ContractInvoke;    // AppendRecord
    /// Attribute template; string values `@name` copy the trigger record's
    /// attribute, `@proposer` and `@index` its proposer id and index.
    Attributes attributes;
};

struct ContractHook {
    std::string name;
    std::string trigger;
    HookAction action;
};

struct HookContext {
    std::span<const PredicateDecl> predicates;
    std::span<const ObjectDescriptor> genesis;
    std::uint64_t seed = kDefaultSeed;
    /// Oracle access per External trigger predicate, looked up by oracle name.
    std::function<std::optional<OracleAccess>(const PredicateDecl&)> oracle_for;
};

/// Candidate records the hooks emit for the decided prefix. Pure in
/// (hooks, decided, context).
std::vector<Record> fire_contract_hooks(std::span<const ContractHook> hooks, const RecordSequence& decided,
                                        const HookContext& context);

/// Incremental form of fire_contract_hooks: feed growing decided prefixes and
/// receive only the newly emitted candidates.
class HookRunner {
public:
    HookRunner(std::vector<ContractHook> hooks, HookContext context);

    std::vector<Record> advance(const RecordSequence& decided);
    std::size_t fired() const { return fired_; }

private:
    std::vector<Record> process(const Record& r);

    std::vector<ContractHook> hooks_;
    std::vector<PredicateDecl> triggers_;
    HookContext context_;
    LedgerState state_;
    std::size_t processed_ = 0;
    std::size_t fired_ = 0;
    std::uint64_t next_sequential_ = 0;
};

const PredicateDecl* find_predicate(std::span<const PredicateDecl> predicates, std::string_view name);

} // namespace ledgerlab
