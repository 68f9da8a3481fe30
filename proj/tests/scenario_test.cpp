#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ledgerlab/attacks.hpp"
#include "ledgerlab/report.hpp"

using namespace ledgerlab;

namespace {

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

std::string error_text(std::string_view yaml)
{
    try {
        parse_scenarios(yaml, {}, "inline.yaml");
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

const SuiteLoad& suite()
{
    static const SuiteLoad loaded = load_suite(default_scenario_dir());
    return loaded;
}

ScenarioRun run(const Scenario& s, bool permissionless, std::uint64_t seed = 3, std::optional<Round> rounds = {})
{
    return run_scenario(s, scenario_network(s, seed), scenario_engine(s, permissionless), rounds.value_or(s.network.rounds));
}

const GoalOutcome& goal(const ScenarioRun& r, std::string_view name)
{
    auto it = std::find_if(r.goals.begin(), r.goals.end(), [&](const GoalOutcome& g) { return g.goal == name; });
    if (it == r.goals.end()) throw std::runtime_error("no goal " + std::string(name));
    return *it;
}

constexpr std::string_view kMinimal = R"(scenario: tiny
parties: [alice, bob]
genesis:
  - {alias: coin, owner: alice, amount: 5}
creation: {mode: predefined}
predicates:
  - {name: funds, scope: record, dependency: internal, rule: balance-sufficiency}
validate: [funds]
goals: [funds]
workload: {name: currency-transfers, transfers: 2}
expected: {object-creation: met, internal-predicate: met}
)";

} // namespace

TEST(ScenarioSuite, LoadsEveryBundledFile)
{
    EXPECT_TRUE(suite().errors.empty());
    std::vector<std::string> names;
    for (const auto& s : suite().scenarios) names.push_back(s.name());
    const std::vector<std::string> expected{"diamond-notary",    "energy-trading", "insurance-generic", "insurance-specific",
                                            "inter-bank",        "location-tracking", "supply-chain",   "virtual-currency"};
    EXPECT_EQ(names, expected);
}

TEST(ScenarioSuite, VerdictsMatchExpectations)
{
    for (const auto& s : suite().scenarios) {
        EXPECT_EQ(check_object_creation_criterion(s.spec).met, s.expected.object_creation) << s.name();
        EXPECT_EQ(check_internal_predicate_criterion(s.spec).met, s.expected.internal_predicate) << s.name();
    }
}

TEST(ScenarioSuite, MatrixRows)
{
    const auto rows = verdict_matrix(suite().scenarios);
    std::map<std::string, std::pair<bool, bool>> got;
    for (const auto& r : rows) got[r.scenario] = {r.object_creation, r.internal_predicate};
    const std::map<std::string, std::pair<bool, bool>> expected{
        {"virtual-currency", {true, true}},    {"diamond-notary", {false, false}},    {"inter-bank", {false, true}},
        {"insurance-specific", {false, false}}, {"insurance-generic", {true, false}}, {"energy-trading", {false, false}},
        {"supply-chain", {true, false}},        {"location-tracking", {true, false}}};
    EXPECT_EQ(got, expected);
}

TEST(ScenarioSuite, CreationToggleFlipsVerdict)
{
    for (const char* name : {"supply-chain", "location-tracking"}) {
        const auto s = resolve_scenario(name, {"party-created"});
        EXPECT_FALSE(check_object_creation_criterion(s.spec).met) << name;
        EXPECT_FALSE(s.expected.object_creation) << name;
        EXPECT_EQ(s.toggles, std::vector<std::string>{"party-created"});
    }
    EXPECT_EQ(code_of([] { resolve_scenario("supply-chain", {"no-such-toggle"}); }), ErrorCode::SpecError);
}

TEST(ScenarioSuite, DiamondVerdictNamesInsurers)
{
    const auto s = resolve_scenario("diamond-notary");
    const auto text = explain_verdict(check_object_creation_criterion(s.spec));
    for (const char* insurer : {"insurer1", "insurer2", "insurer3"}) EXPECT_NE(text.find(insurer), std::string::npos);
    EXPECT_EQ(text.find("mine1"), std::string::npos);
}

TEST(ScenarioParse, MinimalDocument)
{
    const auto all = parse_scenarios(kMinimal);
    ASSERT_EQ(all.size(), 1u);
    const auto& s = all.front();
    EXPECT_EQ(s.name(), "tiny");
    ASSERT_EQ(s.spec.parties.size(), 2u);
    EXPECT_EQ(s.spec.parties[1].party_id, (PartyId{1, "bob"}));
    EXPECT_EQ(s.genesis_aliases.at("coin"), ObjectId::sequential(kSystemPartyId, 0));
    EXPECT_EQ(s.spec.genesis.front().attributes.at("owner"), Scalar{std::int64_t{0}});
}

TEST(ScenarioParse, ErrorsCarryLineNumbers)
{
    std::string bad(kMinimal);
    bad.replace(bad.find("balance-sufficiency"), 19, "no-such-rule");
    EXPECT_NE(error_text(bad).find("inline.yaml:7:"), std::string::npos) << error_text(bad);

    EXPECT_NE(error_text("scenario: x\nparties: [a\n").find("inline.yaml:"), std::string::npos);
    EXPECT_NE(error_text(std::string(kMinimal) + "surprise: 1\n").find("inline.yaml:12:"), std::string::npos);
    EXPECT_EQ(code_of([] { parse_scenarios("scenario: x\nparties: [a\n"); }), ErrorCode::ParseError);
}

TEST(ScenarioParse, SpecProblemsAreSpecErrors)
{
    std::string dangling(kMinimal);
    dangling.replace(dangling.find("goals: [funds]"), 14, "goals: [nothing]");
    EXPECT_EQ(code_of([&] { parse_scenarios(dangling); }), ErrorCode::SpecError);

    std::string workload(kMinimal);
    workload.replace(workload.find("currency-transfers"), 18, "juggling");
    EXPECT_EQ(code_of([&] { parse_scenarios(workload); }), ErrorCode::SpecError);
}

TEST(ScenarioParse, VariantsExpandWithSuffix)
{
    const auto all = load_scenario_file(default_scenario_dir() / "insurance.yaml");
    ASSERT_EQ(all.size(), 2u);
    std::set<std::string> names{all[0].name(), all[1].name()};
    EXPECT_EQ(names, (std::set<std::string>{"insurance-generic", "insurance-specific"}));
    EXPECT_EQ(resolve_scenario("insurance-generic").spec.creation.kind, CreationMode::Kind::Predefined);
}

TEST(ScenarioParse, MissingScenarioIsIoError)
{
    EXPECT_EQ(code_of([] { resolve_scenario("no-such-scenario"); }), ErrorCode::IoError);
}

TEST(ScenarioRun, VirtualCurrencyHonestRun)
{
    const auto s = resolve_scenario("virtual-currency");
    for (bool chain : {false, true}) {
        const auto r = run(s, chain);
        for (const auto& g : r.goals) EXPECT_TRUE(g.ledger && g.world) << g.goal;
        EXPECT_TRUE(r.audit.trusted_entities.empty());
        EXPECT_TRUE(r.audit.object_creation.met && r.audit.internal_predicate.met);
        EXPECT_EQ(r.oracle_queries, 0u);
        EXPECT_GT(r.decided.size(), 10u);
    }
}

TEST(ScenarioRun, BlockRewardsMintCoinsOnTheChain)
{
    const auto s = resolve_scenario("virtual-currency");
    const auto r = run(s, true);
    EXPECT_GT(r.hook_records, 0u);
    std::size_t minted = 0;
    for (const auto& rec : r.decided)
        if (rec.kind() == PayloadKind::Create && rec.proposer().id == kSystemPartyId) ++minted;
    EXPECT_GT(minted, 0u);
}

TEST(ScenarioRun, InsuranceFraudDivergesFromWorld)
{
    for (const char* name : {"insurance-specific", "insurance-generic"}) {
        const auto r = run(resolve_scenario(name), false);
        const auto& dup = goal(r, "no-duplicate-claim");
        const auto& payout = goal(r, "payout-only-for-broken");
        EXPECT_TRUE(dup.ledger) << name;
        EXPECT_TRUE(payout.ledger) << name;
        EXPECT_FALSE(payout.world) << name;
        EXPECT_GT(r.rejected, 0u) << name;   // the duplicate claim
    }
}

TEST(ScenarioRun, EnergyRunTrustsMeters)
{
    const auto r = run(resolve_scenario("energy-trading"), false);
    EXPECT_TRUE(r.audit.trusted_entities.contains(TrustedEntity{"meter", TrustReason::ExternalOracle}));
}

TEST(ScenarioRun, InterBankTrustsOnlyIssuer)
{
    const auto r = run(resolve_scenario("inter-bank"), false);
    const std::set<TrustedEntity> expected{{"central-bank", TrustReason::ObjectCreationAuthority}};
    EXPECT_EQ(r.audit.trusted_entities, expected);
    EXPECT_FALSE(r.audit.object_creation.met);
    EXPECT_TRUE(r.audit.internal_predicate.met);
}

TEST(ScenarioRun, DiamondRecutGoesUndetected)
{
    const auto r = run(resolve_scenario("diamond-notary"), false);
    EXPECT_TRUE(r.aliases.contains("recut"));
    const auto& g = goal(r, "not-stolen");
    EXPECT_TRUE(g.ledger);
    EXPECT_FALSE(g.world);
}

TEST(ScenarioRun, ZeroRoundsDecidesNothing)
{
    for (const auto& s : suite().scenarios) {
        const auto r = run(s, false, 3, 0);
        EXPECT_TRUE(r.decided.empty()) << s.name();
        for (const auto& g : r.goals) EXPECT_TRUE(g.ledger && g.world) << s.name() << " " << g.goal;
    }
}

TEST(ScenarioRun, RepeatedRunsAreByteIdentical)
{
    for (const auto& s : suite().scenarios)
        for (bool chain : {false, true}) {
            const auto a = run(s, chain, 17).log.text();
            const auto b = run(s, chain, 17).log.text();
            EXPECT_EQ(a, b) << s.name();
        }
}

TEST(ScenarioRun, SeedChangesChainRun)
{
    const auto s = resolve_scenario("virtual-currency");
    EXPECT_NE(run(s, true, 1).log.text(), run(s, true, 2).log.text());
}

TEST(ScenarioRun, SuiteIsSafeAndLive)
{
    for (const auto& s : suite().scenarios)
        for (bool chain : {false, true}) {
            const auto r = run(s, chain);
            EXPECT_EQ(r.monitor.agreement_violations, 0u) << s.name();
            EXPECT_EQ(r.monitor.validity_violations, 0u) << s.name();
            EXPECT_EQ(r.monitor.stalled_windows, 0u) << s.name();
            EXPECT_GT(r.monitor.windows_checked, 0u) << s.name();
        }
}

TEST(ScenarioRun, AuditAgreesWithStaticVerdicts)
{
    for (const auto& s : suite().scenarios)
        for (bool chain : {false, true}) {
            const auto r = run(s, chain);
            const bool both = r.audit.object_creation.met && r.audit.internal_predicate.met;
            EXPECT_EQ(r.audit.trusted_entities.empty(), both) << s.name();
            for (const auto& d : effective_predicates(s.spec))
                EXPECT_EQ(r.audit.queried_predicates.contains(d.name), !d.is_internal()) << s.name() << " " << d.name;
        }
}

TEST(ScenarioRun, ZeroMaintainersIsConfigError)
{
    const auto s = resolve_scenario("virtual-currency");
    auto cfg = scenario_network(s, 1);
    cfg.num_maintainers = 0;
    EXPECT_EQ(code_of([&] { run_scenario(s, cfg, scenario_engine(s, false), 10); }), ErrorCode::ConfigError);
}

TEST(PrematureCreation, SequentialIdsAlwaysLose)
{
    const auto s = resolve_scenario("diamond-notary");
    const auto out = premature_creation_attack(s, IdSchemeChoice::sequential(), 1, 200, 5);
    EXPECT_EQ(out.trials, 200u);
    EXPECT_EQ(out.successes, 200u);
    EXPECT_DOUBLE_EQ(out.success_rate(), 1.0);
}

TEST(PrematureCreation, WideRandomIdsAreNeverGuessed)
{
    const auto s = resolve_scenario("diamond-notary");
    EXPECT_EQ(premature_creation_attack(s, IdSchemeChoice::random_bits(128), 1, 20000, 5).successes, 0u);
}

TEST(PrematureCreation, NarrowIdsMatchGuessingProbability)
{
    // A 4-bit identifier is guessed with probability 1/16.
    const auto s = resolve_scenario("diamond-notary");
    const std::uint64_t trials = 4000;
    const auto out = premature_creation_attack(s, IdSchemeChoice::random_bits(4), 1, trials, 9);
    const double p = 1.0 / 16.0;
    const double sd = std::sqrt(p * (1 - p) / static_cast<double>(trials));
    EXPECT_NEAR(out.success_rate(), p, 4 * sd);
}

TEST(PrematureCreation, RateFallsWithWidth)
{
    const auto s = resolve_scenario("diamond-notary");
    double previous = 1.0;
    for (std::uint16_t w : {1, 2, 4, 8, 16, 32, 64, 128}) {
        const double rate = premature_creation_attack(s, IdSchemeChoice::random_bits(w), 1, 3000, 21).success_rate();
        EXPECT_LE(rate, previous) << w;
        previous = rate;
    }
}

TEST(PrematureCreation, NeedsPartyCreation)
{
    for (const char* name : {"virtual-currency", "insurance-generic", "supply-chain"})
        EXPECT_EQ(code_of([&] { premature_creation_attack(resolve_scenario(name), {}, 1, 10); }), ErrorCode::InapplicableAttack)
            << name;
    EXPECT_EQ(code_of([] { premature_creation_attack(resolve_scenario("diamond-notary"), {}, 0, 10); }), ErrorCode::ConfigError);
}

TEST(PrematureCreation, SucceedsOnlyWhereCreationCriterionFails)
{
    for (const auto& s : suite().scenarios) {
        std::optional<double> rate;
        try {
            rate = premature_creation_attack(s, IdSchemeChoice::sequential(), 1, 20, 2).success_rate();
        } catch (const Error& e) {
            ASSERT_EQ(e.code(), ErrorCode::InapplicableAttack);
        }
        if (rate && *rate > 0) EXPECT_FALSE(check_object_creation_criterion(s.spec).met) << s.name();
    }
}

TEST(SybilVote, MajorityByCount)
{
    const auto s = resolve_scenario("diamond-notary");
    const auto chain = scenario_engine(s, true);
    EXPECT_DOUBLE_EQ(sybil_vote_attack(s, chain, 10, 11, 50).success_rate(), 1.0);
    EXPECT_DOUBLE_EQ(sybil_vote_attack(s, chain, 10, 5, 50).success_rate(), 0.0);
    EXPECT_DOUBLE_EQ(sybil_vote_attack(s, chain, 10, 10, 50).success_rate(), 0.0);
}

TEST(SybilVote, ClosedMembershipIsInapplicable)
{
    const auto s = resolve_scenario("diamond-notary");
    EXPECT_EQ(code_of([&] { sybil_vote_attack(s, ConsensusEngineKind::quorum(), 10, 11, 5); }), ErrorCode::InapplicableAttack);
    EXPECT_EQ(code_of([] {
                  sybil_vote_attack(resolve_scenario("insurance-generic"), ConsensusEngineKind::chain(), 10, 11, 5);
              }),
              ErrorCode::InapplicableAttack);
}

TEST(LyingOracle, DoubledMeterReadingDiverges)
{
    const auto s = resolve_scenario("energy-trading");
    const auto report = lying_oracle_attack(s, {{"meter", {"meter3", "produced_kwh", std::int64_t{80}}}}, 400, 4);
    EXPECT_EQ(report.divergent_goals, std::vector<std::string>{"payment-matches-production"});
}

TEST(LyingOracle, EmptyOverrideDoesNotDiverge)
{
    for (const auto& s : suite().scenarios) {
        try {
            EXPECT_TRUE(lying_oracle_attack(s, {}, 400, 4).divergent_goals.empty()) << s.name();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InapplicableAttack);
        }
    }
}

TEST(LyingOracle, ForgedArrivalTriggersPayment)
{
    const auto s = resolve_scenario("location-tracking");
    const auto report = lying_oracle_attack(s, {{"gps-feed", {"container1", "location", std::string("PortB")}}}, 400, 3);
    EXPECT_EQ(report.divergent_goals, std::vector<std::string>{"paid-on-arrival"});
    EXPECT_GT(report.oracle_queries, 0u);
}

TEST(LyingOracle, InternalOnlyScenariosAreInapplicable)
{
    for (const char* name : {"virtual-currency", "inter-bank"})
        EXPECT_EQ(code_of([&] { lying_oracle_attack(resolve_scenario(name), {}, 10); }), ErrorCode::InapplicableAttack) << name;
    EXPECT_EQ(code_of([] { lying_oracle_attack(resolve_scenario("energy-trading"), {{"nobody", {"meter0", "x", true}}}, 10); }),
              ErrorCode::SpecError);
}
