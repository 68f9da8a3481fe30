#include <gtest/gtest.h>

#include "ledgerlab/criteria.hpp"

using namespace ledgerlab;

namespace {

Party party(std::uint32_t id, std::string label) { return Party{PartyId{id, std::move(label)}, {}, {}}; }

PredicateDecl reads(std::string name, std::string property, Dependency dep = Dependency::internal())
{
    return PredicateDecl{std::move(name), PredicateScope::SingleRecord, std::move(dep), Rule::PropertyEquals,
                         {{"property", std::move(property)}}};
}

UseCaseSpec base_spec()
{
    UseCaseSpec s;
    s.name = "sample";
    s.parties = {party(0, "alice"), party(1, "bob"), party(2, "carol")};
    return s;
}

template <typename F>
std::optional<ErrorCode> code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// Independent restatement of both criteria, used as the oracle for generated specs.
bool expected_creation_met(const UseCaseSpec& s)
{
    return s.creation.kind != CreationMode::Kind::PartyCreated || s.creation.executed_by_consensus;
}

bool expected_internal_met(const UseCaseSpec& s)
{
    for (const auto& d : s.predicates) {
        if (!d.dependency.is_external()) continue;
        const auto& property = d.params.at("property");
        if (!s.ledger_binding_properties.contains(property)) return false;
    }
    return true;
}

UseCaseSpec random_spec(Rng& rng)
{
    UseCaseSpec s;
    s.name = "generated";
    const auto n_parties = 1 + rng.below(5);
    for (std::uint32_t i = 0; i < n_parties; ++i) s.parties.push_back(party(i, "p" + std::to_string(i)));

    const std::vector<std::string> properties{"a", "b", "c"};
    s.oracles = {Oracle{"feed", {"a", "b", "c"}, {}, 1}};
    const auto n_predicates = rng.below(5);
    for (std::uint64_t i = 0; i < n_predicates; ++i) {
        const auto& property = properties[rng.below(properties.size())];
        auto dep = rng.bernoulli(0.5) ? Dependency::external("feed") : Dependency::internal();
        s.predicates.push_back(reads("q" + std::to_string(i), property, dep));
        if (rng.bernoulli(0.3)) s.ledger_binding_properties.insert(property);
    }
    switch (rng.below(4)) {
    case 0: s.creation = CreationMode::predefined(); break;
    case 1:
        if (!s.predicates.empty()) {
            s.creation = CreationMode::consensus_based(s.predicates.front().name);
            break;
        }
        [[fallthrough]];
    case 2: {
        std::set<std::uint32_t> creators;
        for (std::uint32_t i = 0; i < n_parties; ++i)
            if (rng.bernoulli(0.5)) creators.insert(i);
        s.creation = creators.empty() ? CreationMode::open() : CreationMode::party_created(creators);
        s.creation.executed_by_consensus = rng.bernoulli(0.25);
        break;
    }
    default: s.creation = CreationMode::open(); break;
    }
    return s;
}

} // namespace

TEST(ObjectCreationCriterion, ConsensusBasedCreationIsMet)
{
    auto s = base_spec();
    s.predicates = {reads("mined", "contract")};
    s.creation = CreationMode::consensus_based("mined");
    const auto v = check_object_creation_criterion(s);
    EXPECT_TRUE(v.met);
    EXPECT_TRUE(v.reasons.empty());
}

TEST(ObjectCreationCriterion, GenesisOnlyIsMet)
{
    auto s = base_spec();
    s.creation = CreationMode::predefined();
    EXPECT_TRUE(check_object_creation_criterion(s).met);
}

TEST(ObjectCreationCriterion, PartyCreatedListsEachCreator)
{
    auto s = base_spec();
    s.creation = CreationMode::party_created({0, 2});
    const auto v = check_object_creation_criterion(s);
    EXPECT_FALSE(v.met);
    ASSERT_EQ(v.reasons.size(), 2u);
    EXPECT_EQ(v.reasons[0], (Reason{"alice", "creation-authority", "creates objects outside consensus"}));
    EXPECT_EQ(v.reasons[1].element, "carol");
}

TEST(ObjectCreationCriterion, OpenCreationNamesAnyone)
{
    auto s = base_spec();
    s.creation = CreationMode::open();
    const auto v = check_object_creation_criterion(s);
    EXPECT_FALSE(v.met);
    ASSERT_EQ(v.reasons.size(), 1u);
    EXPECT_EQ(v.reasons[0].code, "open-creation");
}

TEST(ObjectCreationCriterion, VoteRunByConsensusCountsAsConsensusBased)
{
    auto s = base_spec();
    s.creation = CreationMode::party_created({0, 1, 2});
    s.creation.executed_by_consensus = true;
    EXPECT_TRUE(check_object_creation_criterion(s).met);
}

TEST(ObjectCreationCriterion, DanglingCreationPredicateIsSpecError)
{
    auto s = base_spec();
    s.creation = CreationMode::consensus_based("nowhere");
    EXPECT_EQ(code_of([&] { check_object_creation_criterion(s); }), ErrorCode::SpecError);
}

TEST(ObjectCreationCriterion, PredefinedSetRejectsLaterCreation)
{
    const auto mode = CreationMode::predefined();
    EXPECT_FALSE(mode.allows(0));
    EXPECT_FALSE(mode.allows(kSystemPartyId));
    EXPECT_TRUE(CreationMode::consensus_based("x").allows(kSystemPartyId));
    EXPECT_FALSE(CreationMode::consensus_based("x").allows(0));
    EXPECT_TRUE(CreationMode::party_created({1}).allows(1));
    EXPECT_FALSE(CreationMode::party_created({1}).allows(0));
    EXPECT_TRUE(CreationMode::open().allows(7));
}

TEST(InternalPredicateCriterion, NoPredicatesIsMet)
{
    EXPECT_TRUE(check_internal_predicate_criterion(base_spec()).met);
}

TEST(InternalPredicateCriterion, ExternalPredicateIsReportedWithItsOracle)
{
    auto s = base_spec();
    s.oracles = {Oracle{"gps", {"location"}, {}, 1}};
    s.predicates = {reads("arrived", "location", Dependency::external("gps")), reads("paid", "amount")};
    const auto v = check_internal_predicate_criterion(s);
    EXPECT_FALSE(v.met);
    ASSERT_EQ(v.reasons.size(), 1u);
    EXPECT_EQ(v.reasons[0], (Reason{"arrived", "external-oracle", "reads location through oracle gps"}));
}

TEST(InternalPredicateCriterion, LedgerBindingMakesPredicateInternal)
{
    auto s = base_spec();
    s.oracles = {Oracle{"core-banking", {"owner"}, {}, 1}};
    s.predicates = {reads("funds-transferred", "owner", Dependency::external("core-banking"))};
    EXPECT_FALSE(check_internal_predicate_criterion(s).met);
    s.ledger_binding_properties = {"owner"};
    EXPECT_TRUE(check_internal_predicate_criterion(s).met);
}

TEST(InternalPredicateCriterion, UnknownBindingPropertyIsSpecError)
{
    auto s = base_spec();
    s.ledger_binding_properties = {"balance"};
    EXPECT_EQ(code_of([&] { check_internal_predicate_criterion(s); }), ErrorCode::SpecError);
}

TEST(CheckSpec, RejectsDanglingNames)
{
    auto goal = base_spec();
    goal.goal_predicates = {"missing"};
    EXPECT_EQ(code_of([&] { check_spec(goal); }), ErrorCode::SpecError);

    auto oracle = base_spec();
    oracle.predicates = {reads("q", "x", Dependency::external("ghost"))};
    EXPECT_EQ(code_of([&] { check_spec(oracle); }), ErrorCode::SpecError);

    auto hook = base_spec();
    hook.hooks = {ContractHook{"h", "missing", {}}};
    EXPECT_EQ(code_of([&] { check_spec(hook); }), ErrorCode::UnknownTrigger);

    auto creator = base_spec();
    creator.creation = CreationMode::party_created({9});
    EXPECT_EQ(code_of([&] { check_spec(creator); }), ErrorCode::SpecError);
}

TEST(ExplainVerdict, MetVerdictIsOneLine)
{
    const auto text = explain_verdict(check_object_creation_criterion(base_spec()));
    EXPECT_EQ(text, "object-creation: met\n");
}

TEST(ExplainVerdict, ListsCreatorsAndIsStable)
{
    auto s = base_spec();
    s.parties.push_back(party(3, "insurer1"));
    s.parties.push_back(party(4, "insurer2"));
    s.creation = CreationMode::party_created({3, 4});
    const auto v = check_object_creation_criterion(s);
    const auto text = explain_verdict(v);
    EXPECT_EQ(text, "object-creation: not met\n"
                    "  - insurer1 [creation-authority]: creates objects outside consensus\n"
                    "  - insurer2 [creation-authority]: creates objects outside consensus\n");
    EXPECT_EQ(text, explain_verdict(check_object_creation_criterion(s)));
}

TEST(AuditTrust, CollectsEveryTrustSource)
{
    auto s = base_spec();
    EventLog log("seed=1 engine=x c=0");
    log.add(0, "-", "scenario", "name=sample engine=x");
    log.add(3, 5, "oracle-query", "oracle=gps predicate=arrived object=s0.1 property=location");
    log.add(4, 0, "decided-create", "object=s0.1 authority=party creator=alice");
    log.add(5, "system", "decided-create", "object=ssys.9 authority=consensus creator=system");
    log.add(6, 5, "committee-approve", "validator=notary");
    log.add(7, 5, "oracle-query", "oracle=gps predicate=- object=s0.1 property=location");
    const auto report = audit_trust(log, s);
    const std::set<TrustedEntity> expected{{"alice", TrustReason::ObjectCreationAuthority},
                                           {"gps", TrustReason::ExternalOracle},
                                           {"notary", TrustReason::PrivilegedValidator}};
    EXPECT_EQ(report.trusted_entities, expected);
    EXPECT_EQ(report.queried_predicates, std::set<std::string>{"arrived"});
    EXPECT_TRUE(report.object_creation.met);
}

TEST(AuditTrust, QuietLogTrustsNobody)
{
    EventLog log;
    log.add(0, "-", "scenario", "name=sample");
    log.add(1, 0, "propose", "0|0|transfer|...");
    EXPECT_TRUE(audit_trust(log, base_spec()).trusted_entities.empty());
}

TEST(AuditTrust, ForeignLogIsRejected)
{
    EventLog other;
    other.add(0, "-", "scenario", "name=elsewhere");
    EXPECT_EQ(code_of([&] { audit_trust(other, base_spec()); }), ErrorCode::LogMismatch);
    EXPECT_EQ(code_of([&] { audit_trust(EventLog{}, base_spec()); }), ErrorCode::LogMismatch);
}

TEST(DetailFields, SplitsKeyValueTokens)
{
    const auto f = detail_fields("a=1 b=two  c=x=y junk");
    EXPECT_EQ(f.at("a"), "1");
    EXPECT_EQ(f.at("b"), "two");
    EXPECT_EQ(f.at("c"), "x=y");
    EXPECT_FALSE(f.contains("junk"));
}

TEST(CriteriaProperty, VerdictsMatchIndependentOracle)
{
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto s = random_spec(rng);
        const auto oc = check_object_creation_criterion(s);
        const auto ip = check_internal_predicate_criterion(s);
        ASSERT_EQ(oc.met, expected_creation_met(s)) << i;
        ASSERT_EQ(ip.met, expected_internal_met(s)) << i;
        ASSERT_TRUE(oc.met || !oc.reasons.empty());
        ASSERT_TRUE(ip.met || !ip.reasons.empty());
        ASSERT_EQ(static_trusted_entities(s).empty(), oc.met && ip.met) << i;
    }
}

TEST(CriteriaProperty, AddingExternalPredicateNeverHelps)
{
    Rng rng(12);
    for (int i = 0; i < 2000; ++i) {
        auto s = random_spec(rng);
        const bool before = check_internal_predicate_criterion(s).met;
        s.predicates.push_back(reads("extra", "z", Dependency::external("feed")));
        s.oracles.front().reads.insert("z");
        const bool after = check_internal_predicate_criterion(s).met;
        ASSERT_FALSE(after);
        ASSERT_TRUE(before || !after);
    }
}

TEST(CriteriaProperty, DroppingCreationPermissionsMeetsCriterion)
{
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
        auto s = random_spec(rng);
        s.creation = CreationMode::predefined();
        ASSERT_TRUE(check_object_creation_criterion(s).met);
    }
}
