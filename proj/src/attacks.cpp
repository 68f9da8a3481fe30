#include "ledgerlab/attacks.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace ledgerlab {

namespace {

PartyId party_id(const UseCaseSpec& spec, std::uint32_t id)
{
    if (const auto* p = spec.party(id)) return p->party_id;
    return PartyId{id, std::to_string(id)};
}

/// Honest creator and adversary of the race.
std::pair<PartyId, PartyId> race_parties(const UseCaseSpec& spec)
{
    std::optional<PartyId> creator;
    if (!spec.creation.creators.empty()) creator = party_id(spec, *spec.creation.creators.begin());
    std::optional<PartyId> adversary;
    for (const auto& p : spec.parties)
        if (p.honesty.adversarial && (!creator || p.party_id.id != creator->id)) {
            adversary = p.party_id;
            break;
        }
    for (const auto& p : spec.parties) {
        if (!creator && !p.honesty.adversarial) creator = p.party_id;
        if (!adversary && creator && p.party_id.id != creator->id && !spec.creation.creators.contains(p.party_id.id))
            adversary = p.party_id;
    }
    if (!creator || !adversary) throw Error(ErrorCode::InapplicableAttack, spec.name + ": no creator/adversary pair");
    return {*creator, *adversary};
}

/// Four honest maintainers order both records; true when the claim lands first.
bool claim_decides_first(const Record& claim, const Record& create, Round advantage, std::uint64_t seed)
{
    NetworkConfig cfg;
    cfg.num_maintainers = 4;
    cfg.seed = seed;
    auto engine = make_engine(cfg, ConsensusEngineKind::quorum());
    const Round limit = advantage + 64;
    for (Round r = 0; r < limit; ++r) {
        if (r == 0) engine->submit(claim);
        if (r == advantage) engine->submit(create);
        engine->step();
        const auto decided = engine->decided(engine->reference_maintainer());
        std::optional<std::size_t> claim_at, create_at;
        for (std::size_t i = 0; i < decided.size(); ++i) {
            if (decided[i].key() == claim.key()) claim_at = i;
            if (decided[i].key() == create.key()) create_at = i;
        }
        if (claim_at && (!create_at || *claim_at < *create_at)) return true;
        if (create_at) return false;
    }
    return false;
}

} // namespace

AttackOutcome premature_creation_attack(const Scenario& s, IdSchemeChoice scheme, Round advantage, std::uint64_t trials,
                                        std::uint64_t seed)
{
    const auto& spec = s.spec;
    if (spec.creation.kind != CreationMode::Kind::PartyCreated || spec.creation.executed_by_consensus)
        throw Error(ErrorCode::InapplicableAttack,
                    fmt::format("{}: objects are not created by parties ({})", spec.name, to_string(spec.creation.kind)));
    if (advantage < 1) throw Error(ErrorCode::ConfigError, "the adversary needs at least one round of advantage");
    const auto [creator, adversary] = race_parties(spec);

    AttackOutcome out{"premature-creation", trials, 0, seed};
    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng(combine(seed, t));
        ObjectId actual, guess;
        if (scheme.scheme == ObjectId::Scheme::Sequential) {
            // The creator's counter is public: every earlier creation is on the ledger.
            const auto issued = rng.below(64);
            actual = ObjectId::sequential(creator.id, issued);
            guess = ObjectId::sequential(creator.id, issued);
        } else {
            actual = ObjectId::random_bits(scheme.width, rng);
            guess = ObjectId::random_bits(scheme.width, rng);
        }
        if (guess != actual) continue;

        Payload claim_payload{PayloadKind::Claim,
                              {{std::string(attr::object_id), guess.text()},
                               {std::string(attr::claimant), static_cast<std::int64_t>(adversary.id)}}};
        Payload create_payload{PayloadKind::Create,
                               {{std::string(attr::object_id), actual.text()},
                                {std::string(attr::owner), static_cast<std::int64_t>(creator.id)}}};
        const Record claim = make_record(0, {adversary}, {guess}, std::move(claim_payload), adversary, rng.next());
        const Record create = make_record(0, {creator}, {actual}, std::move(create_payload), creator, rng.next());
        if (claim_decides_first(claim, create, advantage, combine(seed, t))) ++out.successes;
    }
    return out;
}

AttackOutcome sybil_vote_attack(const Scenario& s, const ConsensusEngineKind& engine, std::size_t honest, std::size_t bogus,
                                std::uint64_t trials, std::uint64_t seed)
{
    const auto& spec = s.spec;
    if (!engine.permissionless())
        throw Error(ErrorCode::InapplicableAttack,
                    fmt::format("{}: membership of {} is closed, identities cannot be minted", spec.name, engine.name()));
    if (spec.creation.kind == CreationMode::Kind::Predefined)
        throw Error(ErrorCode::InapplicableAttack, spec.name + ": the object set is predefined, there is nothing to vote on");

    AttackOutcome out{"sybil-vote", trials, 0, seed};
    for (std::uint64_t t = 0; t < trials; ++t) {
        Rng rng(combine(seed, t));
        // Registration is open, so each minted identity is a distinct voter.
        std::set<std::uint64_t> yes, no;
        for (std::size_t v = 0; v < honest; ++v) no.insert(rng.next());
        for (std::size_t v = 0; v < bogus; ++v) {
            auto id = rng.next();
            while (no.contains(id) || yes.contains(id)) id = rng.next();
            yes.insert(id);
        }
        if (yes.size() > no.size()) ++out.successes;
    }
    return out;
}

DivergenceReport lying_oracle_attack(const Scenario& s, const std::vector<OracleOverride>& overrides, Round rounds,
                                     std::uint64_t seed, const ConsensusEngineKind& engine)
{
    const auto effective = effective_predicates(s.spec);
    if (std::all_of(effective.begin(), effective.end(), [](const PredicateDecl& d) { return d.is_internal(); }))
        throw Error(ErrorCode::InapplicableAttack, s.name() + ": every predicate is internal, no oracle to corrupt");

    Scenario attacked = s;
    attacked.corruptions.clear();
    for (const auto& o : overrides) {
        if (!s.spec.oracle(o.oracle)) throw Error(ErrorCode::SpecError, s.name() + ": unknown oracle '" + o.oracle + "'");
        auto it = std::find_if(attacked.corruptions.begin(), attacked.corruptions.end(),
                               [&](const OracleCorruption& c) { return c.oracle == o.oracle; });
        if (it == attacked.corruptions.end()) {
            attacked.corruptions.push_back({o.oracle, Corruption::Kind::Lies, {}, 0.0});
            it = std::prev(attacked.corruptions.end());
        }
        it->overrides.push_back(o.fact);
    }

    const auto engine_kind = engine.permissionless() ? scenario_engine(s, true) : engine;
    const auto run = run_scenario(attacked, scenario_network(s, seed), engine_kind, rounds);
    DivergenceReport out;
    out.goals = run.goals;
    out.oracle_queries = run.oracle_queries;
    for (const auto& g : run.goals)
        if (g.diverges()) out.divergent_goals.push_back(g.goal);
    return out;
}

} // namespace ledgerlab
