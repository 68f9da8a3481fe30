#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ledgerlab/scenario.hpp"

namespace ledgerlab {

struct AttackOutcome {
    std::string attack;
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    std::uint64_t seed = kDefaultSeed;

    double success_rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials); }
};

/// Identifier scheme used by the legitimate creator during the race.
struct IdSchemeChoice {
    ObjectId::Scheme scheme = ObjectId::Scheme::Sequential;
    std::uint16_t width = 128;   // RandomBits only

    static IdSchemeChoice sequential() { return {}; }
    static IdSchemeChoice random_bits(std::uint16_t width) { return {ObjectId::Scheme::RandomBits, width}; }
};

/// The adversary predicts the next identifier a creator will use and claims
/// it `advantage` rounds before the creation is proposed. A trial succeeds
/// when the adversary's claim on the real identifier is decided first.
/// Throws InapplicableAttack unless objects are created by parties.
AttackOutcome premature_creation_attack(const Scenario& s, IdSchemeChoice scheme, Round advantage, std::uint64_t trials,
                                        std::uint64_t seed = kDefaultSeed);

/// One user mints `bogus` identities to outvote `honest` voters on a
/// fraudulent creation. Throws InapplicableAttack on closed membership or a
/// predefined object set.
AttackOutcome sybil_vote_attack(const Scenario& s, const ConsensusEngineKind& engine, std::size_t honest, std::size_t bogus,
                                std::uint64_t trials, std::uint64_t seed = kDefaultSeed);

struct OracleOverride {
    std::string oracle;
    AliasFact fact;
};

struct DivergenceReport {
    std::vector<std::string> divergent_goals;
    std::vector<GoalOutcome> goals;
    std::size_t oracle_queries = 0;
};

/// Reruns the scenario with honest oracles except for `overrides`, then lists
/// the goals whose ledger outcome differs from the truth of the world.
/// Throws InapplicableAttack when every predicate is internal.
DivergenceReport lying_oracle_attack(const Scenario& s, const std::vector<OracleOverride>& overrides, Round rounds,
                                     std::uint64_t seed = kDefaultSeed, const ConsensusEngineKind& engine = ConsensusEngineKind::quorum());

} // namespace ledgerlab
