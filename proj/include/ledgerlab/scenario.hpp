#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ledgerlab/consensus.hpp"
#include "ledgerlab/criteria.hpp"
#include "ledgerlab/validation.hpp"

namespace ledgerlab {

/// A fact about an object named by its scenario alias; aliases of objects
/// created during a run bind once their creation is decided.
struct AliasFact {
    std::string alias;
    std::string property;
    Scalar value;
};

struct TimedFact {
    Round round = 0;
    AliasFact fact;
};

struct OracleCorruption {
    std::string oracle;
    Corruption::Kind kind = Corruption::Kind::Truthful;
    std::vector<AliasFact> overrides;   // Lies
    double flip_probability = 0.0;      // Noisy
};

struct WorkloadSpec {
    std::string name;
    std::map<std::string, Scalar, std::less<>> params;

    std::int64_t int_param(std::string_view key, std::int64_t fallback) const;
    std::string string_param(std::string_view key, std::string fallback) const;
};

struct NetworkDefaults {
    std::size_t maintainers = 5;
    std::size_t block_capacity = 4;
    double block_probability = 0.3;
    Round rounds = 400;
};

struct ExpectedVerdicts {
    bool object_creation = true;
    bool internal_predicate = true;
};

struct Scenario {
    UseCaseSpec spec;
    /// Genesis aliases; genesis object i gets ObjectId::sequential(system, i).
    std::map<std::string, ObjectId> genesis_aliases;
    std::vector<AliasFact> world;
    std::vector<TimedFact> timeline;
    std::vector<OracleCorruption> corruptions;
    WorkloadSpec workload;
    NetworkDefaults network;
    ExpectedVerdicts expected;
    std::string description;
    std::vector<std::string> notes;
    std::vector<std::string> toggles;   // applied toggles, in order
    std::filesystem::path source;

    const std::string& name() const { return spec.name; }
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Parses one scenario document. Variants expand into one Scenario each,
/// named `<name>-<variant>`; `toggles` are applied to every expansion.
/// Throws ParseError (with line numbers) or SpecError.
std::vector<Scenario> parse_scenarios(std::string_view text, const std::vector<std::string>& toggles = {},
                                      const std::filesystem::path& source = {});
std::vector<Scenario> load_scenario_file(const std::filesystem::path& file, const std::vector<std::string>& toggles = {});

struct SuiteLoad {
    std::vector<Scenario> scenarios;   // sorted by name
    std::vector<std::pair<std::filesystem::path, std::string>> errors;
};

/// Every `*.yaml` file of a directory; per-file failures are collected.
SuiteLoad load_suite(const std::filesystem::path& dir);

/// `LEDGERLAB_SCENARIO_DIR` if set, else the bundled directory.
std::filesystem::path default_scenario_dir();

/// A path to a file, or a scenario (or variant) name searched in `dir`.
Scenario resolve_scenario(std::string_view name_or_path, const std::vector<std::string>& toggles = {},
                          const std::filesystem::path& dir = default_scenario_dir());

// ---------------------------------------------------------------------------
// Workloads
// ---------------------------------------------------------------------------

struct WorkloadContext {
    Round round = 0;
    const Scenario& scenario;
    const RecordSequence& decided;
    const LedgerState& state;                          // after `decided`
    const std::map<std::string, ObjectId>& aliases;    // bound so far
    Rng& rng;
    /// A party reading an oracle directly (logged as a trust dependency).
    std::function<std::optional<Scalar>(std::uint32_t reader, const std::string& oracle, const ObjectId& object,
                                         const std::string& property)>
        read_oracle;
    /// Physical facts about an object that does not yet exist on the ledger.
    std::function<void(const std::string& alias, const std::string& property, Scalar value)> declare_fact;
};

class Workload {
public:
    virtual ~Workload() = default;
    /// Records the workload proposes in this round.
    virtual std::vector<Record> step(const WorkloadContext& ctx) = 0;
};

std::vector<std::string> workload_names();
/// Throws SpecError for unknown names or parameters.
std::unique_ptr<Workload> make_workload(const Scenario& scenario);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct GoalOutcome {
    std::string goal;
    bool external = false;
    bool ledger = true;   // on the decided prefix, through the run's oracles
    bool world = true;    // External goals: truthful oracle on the final world

    bool diverges() const { return ledger != world; }
};

struct ScenarioRun {
    EventLog log;
    ConsensusMonitorReport monitor;
    TrustAuditReport audit;
    std::vector<GoalOutcome> goals;
    RecordSequence decided;
    std::map<std::string, ObjectId> aliases;
    std::size_t oracle_queries = 0;
    std::size_t hook_records = 0;
    std::size_t rejected = 0;
};

/// Maintainer count and seed from the caller; everything else from the scenario.
NetworkConfig scenario_network(const Scenario& s, std::uint64_t seed = kDefaultSeed);
ConsensusEngineKind scenario_engine(const Scenario& s, bool permissionless);

ScenarioRun run_scenario(const Scenario& s, const NetworkConfig& cfg, const ConsensusEngineKind& engine, Round rounds);

} // namespace ledgerlab
