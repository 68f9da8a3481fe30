#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ledgerlab/ledger.hpp"

namespace ledgerlab {

using Round = std::uint64_t;

inline constexpr std::uint64_t kDefaultSeed = 0xD15EA5E;
inline constexpr std::size_t kDefaultConfirmationDepth = 6;
inline constexpr std::size_t kDefaultProgressWindow = 50;

/// Behaviour of the maintainers marked adversarial. Each engine interprets the
/// script in its own terms; see the engine sources.
enum class AdversaryScript : std::uint8_t { Withholder, Equivocator, Censor };

std::string_view to_string(AdversaryScript script);
std::optional<AdversaryScript> parse_adversary_script(std::string_view text);

struct NetworkConfig {
    std::size_t num_maintainers = 4;
    double adversary_power = 0.0;   // fraction of block production (chain) or of seats (quorum)
    Round delay_rounds = 0;
    std::uint64_t seed = kDefaultSeed;
    /// Overrides the engine default (6 for the chain, 0 for the quorum).
    std::optional<std::size_t> confirmation_depth;
    AdversaryScript adversary = AdversaryScript::Withholder;
    std::set<std::uint32_t> censored_proposers;
    std::size_t progress_window = kDefaultProgressWindow;
    /// Optional identities for the maintainer slots; synthetic ones otherwise.
    std::vector<PartyId> maintainer_ids;
};

struct PermissionlessChain {
    double block_probability_per_round = 0.3;
    std::size_t block_capacity = 1;   // proposals per block, besides the block record
};

struct PermissionedQuorum {
    double quorum_fraction = 2.0 / 3.0;
};

struct ConsensusEngineKind {
    std::variant<PermissionlessChain, PermissionedQuorum> kind = PermissionlessChain{};

    static ConsensusEngineKind chain(double block_probability = 0.3) { return {PermissionlessChain{block_probability, 1}}; }
    static ConsensusEngineKind quorum(double fraction = 2.0 / 3.0) { return {PermissionedQuorum{fraction}}; }

    bool permissionless() const { return std::holds_alternative<PermissionlessChain>(kind); }
    std::string name() const { return permissionless() ? "permissionless-chain" : "permissioned-quorum"; }
    std::size_t default_confirmation_depth() const { return permissionless() ? kDefaultConfirmationDepth : 0; }
};

/// Throws ConfigError on unusable configurations; returns warnings otherwise.
std::vector<std::string> validate_config(const NetworkConfig& cfg, const ConsensusEngineKind& engine);

// ---------------------------------------------------------------------------

struct MaintainerView {
    PartyId maintainer;
    bool honest = true;
    RecordSequence chain;
    std::size_t confirmation_depth = kDefaultConfirmationDepth;
};

/// The chain without its last c records.
RecordSequence decided_prefix(const MaintainerView& view);

struct AgreementViolation {
    Round round = 0;
    std::uint32_t maintainer = 0;
    std::uint32_t other = 0;
    std::size_t index = 0;

    friend bool operator==(const AgreementViolation&, const AgreementViolation&) = default;
};

/// Pairwise prefix consistency of the honest views' decided prefixes.
std::vector<AgreementViolation> check_agreement(std::span<const MaintainerView> views);

struct ProposalEvent {
    Round round = 0;
    Record record;
};

struct ValidityViolation {
    std::size_t index = 0;
    RecordKey key;
};

/// Decided records with no matching proposal (same key and content).
std::vector<ValidityViolation> check_validity(const RecordSequence& decided, std::span<const ProposalEvent> proposals);

struct ConsensusMonitorReport {
    std::size_t agreement_violations = 0;
    std::size_t validity_violations = 0;
    Round rounds_without_progress = 0;
    std::size_t progress_window = kDefaultProgressWindow;
    std::size_t windows_checked = 0;
    std::size_t stalled_windows = 0;
    std::size_t min_decided = 0;
    std::vector<AgreementViolation> agreement;
    std::vector<std::pair<std::uint32_t, ValidityViolation>> validity;
};

// ---------------------------------------------------------------------------

/// Line-delimited `round|maintainer|event|detail`, under a one-line header.
class EventLog {
public:
    explicit EventLog(std::string header = {}) : header_(std::move(header)) {}

    void add(Round round, std::string_view actor, std::string_view event, std::string_view detail);
    void add(Round round, std::uint32_t actor, std::string_view event, std::string_view detail);

    const std::string& header() const { return header_; }
    const std::vector<std::string>& lines() const { return lines_; }
    std::string text() const;

private:
    std::string header_;
    std::vector<std::string> lines_;
};

std::string actor_field(std::uint32_t party);

struct ValidationRequest {
    Round round = 0;
    const PartyId& maintainer;
    const RecordSequence& chain;   // records preceding the candidate
    const Record& candidate;       // candidate.index() == chain.size()
};

using Validator = std::function<bool(const ValidationRequest&)>;

/// Shared machinery: proposal intake, per-maintainer chains, event log and
/// the runtime agreement / validity / progress monitors.
class ConsensusEngine {
public:
    ConsensusEngine(const NetworkConfig& cfg, const ConsensusEngineKind& kind);
    virtual ~ConsensusEngine() = default;

    ConsensusEngine(const ConsensusEngine&) = delete;
    ConsensusEngine& operator=(const ConsensusEngine&) = delete;

    void set_validator(Validator validator) { validator_ = std::move(validator); }

    /// A participant proposes a candidate record in the current round.
    void submit(const Record& candidate);
    /// Runs one synchronous round, then the monitors.
    void step();

    Round round() const { return round_; }
    std::size_t maintainer_count() const { return maintainers_.size(); }
    const PartyId& maintainer(std::size_t m) const { return maintainers_[m]; }
    bool honest(std::size_t m) const { return honest_[m]; }
    std::size_t reference_maintainer() const;
    std::size_t confirmation_depth() const { return depth_; }

    const RecordSequence& chain(std::size_t m) const { return chains_[m]; }
    RecordSequence decided(std::size_t m) const;
    std::size_t decided_length(std::size_t m) const;
    std::vector<MaintainerView> views() const;

    const std::vector<ProposalEvent>& proposals() const { return proposals_; }
    ConsensusMonitorReport monitor() const;
    EventLog& log() { return log_; }
    const EventLog& log() const { return log_; }

protected:
    virtual void run_round() = 0;
    virtual void on_submit(std::size_t /*proposal*/) {}

    const NetworkConfig& config() const { return cfg_; }
    Rng& rng() { return rng_; }
    std::uint64_t next_nonce() { return combine(cfg_.seed, ++engine_nonce_); }
    void record_proposal(std::uint32_t actor, const Record& record);

    bool validate(std::size_t m, const RecordSequence& chain, const Record& candidate);
    void set_chain(std::size_t m, RecordSequence chain);
    void extend_chain(std::size_t m, const Record& record);
    bool chain_contains(std::size_t m, const RecordKey& key) const { return chain_keys_[m].contains(key); }
    /// Proposals visible to maintainers by `round`, in submission order.
    std::size_t visible_proposals(Round round) const;
    Round proposal_visible_at(std::size_t p) const { return proposals_[p].round + cfg_.delay_rounds; }

private:
    void observe();
    void note_changed(std::size_t m, std::size_t from);

    NetworkConfig cfg_;
    std::size_t depth_;
    Rng rng_;
    Validator validator_;
    Round round_ = 0;
    std::uint64_t engine_nonce_ = 0;
    EventLog log_;

    std::vector<PartyId> maintainers_;
    std::vector<bool> honest_;
    std::vector<RecordSequence> chains_;
    std::vector<std::set<RecordKey>> chain_keys_;

    std::vector<ProposalEvent> proposals_;
    std::map<RecordKey, std::size_t> proposal_index_;

    // Monitor state.
    std::vector<std::uint64_t> canonical_;        // digests of the reference decided sequence
    std::uint32_t canonical_owner_ = 0;
    std::vector<std::size_t> verified_;           // per maintainer: leading records known equal to canonical
    std::vector<std::size_t> validity_checked_;   // per maintainer: decided records already traced
    std::vector<AgreementViolation> agreement_;
    std::vector<std::pair<std::uint32_t, ValidityViolation>> validity_;
    std::vector<std::size_t> min_decided_history_;   // after each round
};

std::unique_ptr<ConsensusEngine> make_engine(const NetworkConfig& cfg, const ConsensusEngineKind& kind);

struct ConsensusRun {
    std::vector<MaintainerView> views;
    ConsensusMonitorReport report;
    EventLog log;
};

/// Submits every proposal in round 0 (order preserved) and runs `rounds` rounds.
ConsensusRun run_consensus(const NetworkConfig& cfg, const ConsensusEngineKind& kind, std::span<const Record> proposals,
                           Round rounds, Validator validator = {});

/// Maintainer-authored record opening every block of the permissionless chain.
bool is_block_record(const Record& r);

} // namespace ledgerlab
