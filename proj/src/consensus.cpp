#include "ledgerlab/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <fmt/format.h>

namespace ledgerlab {

std::string_view to_string(AdversaryScript script)
{
    switch (script) {
    case AdversaryScript::Withholder: return "withholder";
    case AdversaryScript::Equivocator: return "equivocator";
    case AdversaryScript::Censor: return "censor";
    }
    return "withholder";
}

std::optional<AdversaryScript> parse_adversary_script(std::string_view text)
{
    if (text == "withholder") return AdversaryScript::Withholder;
    if (text == "equivocator") return AdversaryScript::Equivocator;
    if (text == "censor") return AdversaryScript::Censor;
    return std::nullopt;
}

std::vector<std::string> validate_config(const NetworkConfig& cfg, const ConsensusEngineKind& engine)
{
    if (cfg.num_maintainers == 0)
        throw Error(ErrorCode::ConfigError, "empty maintainer set");
    if (!(cfg.adversary_power >= 0.0 && cfg.adversary_power <= 1.0))
        throw Error(ErrorCode::ConfigError, "adversary_power must lie in [0,1]");
    if (cfg.progress_window == 0)
        throw Error(ErrorCode::ConfigError, "progress window must be positive");
    if (!cfg.maintainer_ids.empty()) {
        if (cfg.maintainer_ids.size() != cfg.num_maintainers)
            throw Error(ErrorCode::ConfigError, "maintainer id list does not match num_maintainers");
        std::set<PartyId> unique(cfg.maintainer_ids.begin(), cfg.maintainer_ids.end());
        if (unique.size() != cfg.maintainer_ids.size())
            throw Error(ErrorCode::ConfigError, "maintainer ids must be unique");
    }
    if (const auto* chain = std::get_if<PermissionlessChain>(&engine.kind)) {
        if (!(chain->block_probability_per_round > 0.0 && chain->block_probability_per_round <= 1.0))
            throw Error(ErrorCode::ConfigError, "block_probability_per_round must lie in (0,1]");
    } else {
        const auto& quorum = std::get<PermissionedQuorum>(engine.kind);
        if (!(quorum.quorum_fraction > 0.5 && quorum.quorum_fraction <= 1.0))
            throw Error(ErrorCode::ConfigError, "quorum_fraction must lie in (1/2,1]");
    }
    std::vector<std::string> warnings;
    if (cfg.adversary_power >= 0.5)
        warnings.push_back(fmt::format("adversary_power {} >= 0.5: honest majority not assumed", cfg.adversary_power));
    return warnings;
}

// ---------------------------------------------------------------------------

RecordSequence decided_prefix(const MaintainerView& view)
{
    const std::size_t n = view.chain.size();
    return view.chain.prefix(n > view.confirmation_depth ? n - view.confirmation_depth : 0);
}

std::vector<AgreementViolation> check_agreement(std::span<const MaintainerView> views)
{
    std::vector<AgreementViolation> out;
    std::vector<std::pair<const MaintainerView*, RecordSequence>> decided;
    for (const auto& v : views)
        if (v.honest)
            decided.emplace_back(&v, decided_prefix(v));
    for (std::size_t a = 0; a < decided.size(); ++a)
        for (std::size_t b = a + 1; b < decided.size(); ++b) {
            const auto& x = decided[a].second;
            const auto& y = decided[b].second;
            const std::size_t n = std::min(x.size(), y.size());
            for (std::size_t i = 0; i < n; ++i)
                if (x[i].digest() != y[i].digest() || x[i].key() != y[i].key()) {
                    out.push_back({0, decided[a].first->maintainer.id, decided[b].first->maintainer.id, i});
                    break;
                }
        }
    return out;
}

std::vector<ValidityViolation> check_validity(const RecordSequence& decided, std::span<const ProposalEvent> proposals)
{
    std::map<RecordKey, std::uint64_t> proposed;
    for (const auto& p : proposals)
        proposed.emplace(p.record.key(), p.record.digest());
    std::vector<ValidityViolation> out;
    for (std::size_t i = 0; i < decided.size(); ++i) {
        auto it = proposed.find(decided[i].key());
        if (it == proposed.end() || it->second != decided[i].digest())
            out.push_back({i, decided[i].key()});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string actor_field(std::uint32_t party)
{
    return party == kSystemPartyId ? "system" : std::to_string(party);
}

void EventLog::add(Round round, std::string_view actor, std::string_view event, std::string_view detail)
{
    lines_.push_back(fmt::format("{}|{}|{}|{}", round, actor, event, detail));
}

void EventLog::add(Round round, std::uint32_t actor, std::string_view event, std::string_view detail)
{
    add(round, actor_field(actor), event, detail);
}

std::string EventLog::text() const
{
    std::string out = header_;
    out += '\n';
    for (const auto& line : lines_) {
        out += line;
        out += '\n';
    }
    return out;
}

bool is_block_record(const Record& r)
{
    return r.kind() == PayloadKind::ContractInvoke && r.payload().string_attr(attr::contract) == "block";
}

// ---------------------------------------------------------------------------

ConsensusEngine::ConsensusEngine(const NetworkConfig& cfg, const ConsensusEngineKind& kind)
    : cfg_(cfg),
      depth_(cfg.confirmation_depth.value_or(kind.default_confirmation_depth())),
      rng_(cfg.seed),
      log_(fmt::format("seed={} engine={} c={}", cfg.seed,
                       kind.name(), cfg.confirmation_depth.value_or(kind.default_confirmation_depth())))
{
    const auto warnings = validate_config(cfg, kind);
    for (const auto& w : warnings)
        log_.add(0, "-", "warning", w);

    const std::size_t n = cfg.num_maintainers;
    std::size_t adversarial = 0;
    if (cfg.adversary_power > 0.0)
        adversarial = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(cfg.adversary_power * static_cast<double>(n))));
    adversarial = std::min(adversarial, n - 1);

    for (std::size_t i = 0; i < n; ++i) {
        maintainers_.push_back(cfg.maintainer_ids.empty() ? PartyId{static_cast<std::uint32_t>(i), fmt::format("m{}", i)}
                                                          : cfg.maintainer_ids[i]);
        honest_.push_back(i < n - adversarial);
        log_.add(0, maintainers_[i].id, "maintainer",
                 honest_[i] ? std::string("honest") : fmt::format("adversarial script={}", to_string(cfg.adversary)));
    }
    chains_.resize(n);
    chain_keys_.resize(n);
    verified_.assign(n, 0);
    validity_checked_.assign(n, 0);
}

std::size_t ConsensusEngine::reference_maintainer() const
{
    for (std::size_t m = 0; m < honest_.size(); ++m)
        if (honest_[m]) return m;
    return 0;
}

std::size_t ConsensusEngine::decided_length(std::size_t m) const
{
    const std::size_t n = chains_[m].size();
    return n > depth_ ? n - depth_ : 0;
}

RecordSequence ConsensusEngine::decided(std::size_t m) const
{
    return chains_[m].prefix(decided_length(m));
}

std::vector<MaintainerView> ConsensusEngine::views() const
{
    std::vector<MaintainerView> out;
    for (std::size_t m = 0; m < maintainers_.size(); ++m)
        out.push_back({maintainers_[m], honest_[m], chains_[m], depth_});
    return out;
}

void ConsensusEngine::submit(const Record& candidate)
{
    if (proposal_index_.contains(candidate.key())) return;
    record_proposal(candidate.proposer().id, candidate);
    on_submit(proposals_.size() - 1);
}

void ConsensusEngine::record_proposal(std::uint32_t actor, const Record& record)
{
    proposal_index_.emplace(record.key(), proposals_.size());
    proposals_.push_back({round_, record});
    log_.add(round_, actor, "propose", record_line(record));
}

void ConsensusEngine::step()
{
    run_round();
    observe();
    ++round_;
}

bool ConsensusEngine::validate(std::size_t m, const RecordSequence& chain, const Record& candidate)
{
    if (!validator_) return true;
    const Record placed = candidate.index() == chain.size() ? candidate : candidate.at_index(chain.size());
    return validator_({round_, maintainers_[m], chain, placed});
}

std::size_t ConsensusEngine::visible_proposals(Round round) const
{
    // Proposal rounds are non-decreasing, so visibility is a prefix.
    std::size_t lo = 0, hi = proposals_.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (proposal_visible_at(mid) <= round) lo = mid + 1;
        else hi = mid;
    }
    return lo;
}

void ConsensusEngine::note_changed(std::size_t m, std::size_t from)
{
    verified_[m] = std::min(verified_[m], from);
    validity_checked_[m] = std::min(validity_checked_[m], from);
}

void ConsensusEngine::set_chain(std::size_t m, RecordSequence chain)
{
    auto& old = chains_[m];
    std::size_t common = 0;
    const std::size_t n = std::min(old.size(), chain.size());
    while (common < n && old[common].digest() == chain[common].digest() && old[common].key() == chain[common].key())
        ++common;
    for (std::size_t i = common; i < old.size(); ++i)
        chain_keys_[m].erase(old[i].key());
    for (std::size_t i = common; i < chain.size(); ++i)
        chain_keys_[m].insert(chain[i].key());
    old = std::move(chain);
    note_changed(m, common);
}

void ConsensusEngine::extend_chain(std::size_t m, const Record& record)
{
    auto& chain = chains_[m];
    chain.extend(record.index() == chain.size() ? record : record.at_index(chain.size()));
    chain_keys_[m].insert(record.key());
}

void ConsensusEngine::observe()
{
    std::size_t min_decided = SIZE_MAX;
    for (std::size_t m = 0; m < maintainers_.size(); ++m) {
        if (!honest_[m]) continue;
        const auto& chain = chains_[m];
        const std::size_t len = decided_length(m);
        min_decided = std::min(min_decided, len);

        for (std::size_t i = std::min(validity_checked_[m], len); i < len; ++i) {
            auto it = proposal_index_.find(chain[i].key());
            if (it == proposal_index_.end() || proposals_[it->second].record.digest() != chain[i].digest()) {
                validity_.push_back({maintainers_[m].id, {i, chain[i].key()}});
                log_.add(round_, maintainers_[m].id, "validity-violation",
                         fmt::format("index={} proposer={} nonce={}", i, chain[i].key().proposer, chain[i].key().nonce));
            }
        }
        validity_checked_[m] = len;

        const std::size_t known = canonical_.size();
        const std::size_t overlap = std::min(len, known);
        std::size_t i = std::min(verified_[m], overlap);
        while (i < overlap && chain[i].digest() == canonical_[i])
            ++i;
        if (i < overlap) {
            agreement_.push_back({round_, maintainers_[m].id, canonical_owner_, i});
            log_.add(round_, maintainers_[m].id, "agreement-violation",
                     fmt::format("other={} index={}", actor_field(canonical_owner_), i));
            if (len > known) {
                canonical_.resize(i);
                for (std::size_t j = i; j < len; ++j)
                    canonical_.push_back(chain[j].digest());
                canonical_owner_ = maintainers_[m].id;
                for (auto& v : verified_)
                    v = std::min(v, i);
                verified_[m] = len;
            } else {
                verified_[m] = i;
            }
        } else {
            verified_[m] = overlap;
            if (len > known) {
                for (std::size_t j = known; j < len; ++j)
                    canonical_.push_back(chain[j].digest());
                canonical_owner_ = maintainers_[m].id;
                verified_[m] = len;
            }
        }
    }
    min_decided_history_.push_back(min_decided == SIZE_MAX ? 0 : min_decided);
}

ConsensusMonitorReport ConsensusEngine::monitor() const
{
    ConsensusMonitorReport report;
    report.agreement = agreement_;
    report.validity = validity_;
    report.agreement_violations = agreement_.size();
    report.validity_violations = validity_.size();
    report.progress_window = cfg_.progress_window;
    report.min_decided = min_decided_history_.empty() ? 0 : min_decided_history_.back();

    // Position of every proposal in the reference maintainer's final decided prefix.
    const std::size_t ref = reference_maintainer();
    std::map<RecordKey, std::size_t> position;
    for (std::size_t i = 0; i < decided_length(ref); ++i)
        position.emplace(chains_[ref][i].key(), i);

    // A proposal never decided but still acceptable after the final decided
    // prefix stays pending for the whole run. Adversarial maintainers' own
    // records are exempt.
    const RecordSequence final_prefix = decided(ref);
    auto still_valid = [&](const Record& r) {
        if (!validator_) return true;
        const Record placed = r.at_index(final_prefix.size());
        return validator_({round_, maintainers_[ref], final_prefix, placed});
    };
    std::set<std::uint32_t> adversarial;
    for (std::size_t m = 0; m < maintainers_.size(); ++m)
        if (!honest_[m]) adversarial.insert(maintainers_[m].id);
    for (const auto& proposal : proposals_)
        if (!position.contains(proposal.record.key()) && !adversarial.contains(proposal.record.proposer().id) &&
            still_valid(proposal.record))
            position.emplace(proposal.record.key(), SIZE_MAX);

    const std::size_t rounds = min_decided_history_.size();
    // latest[t]: largest eventual position among proposals submitted by round t.
    std::vector<std::optional<std::size_t>> latest(rounds);
    std::size_t p = 0;
    std::optional<std::size_t> running;
    for (std::size_t t = 0; t < rounds; ++t) {
        while (p < proposals_.size() && proposals_[p].round <= t) {
            if (auto it = position.find(proposals_[p].record.key()); it != position.end())
                running = std::max(running.value_or(0), it->second);
            ++p;
        }
        latest[t] = running;
    }

    auto before = [&](std::size_t t) { return t == 0 ? std::size_t{0} : min_decided_history_[t - 1]; };
    Round stall = 0, longest = 0;
    for (std::size_t t = 0; t < rounds; ++t) {
        const bool pending = latest[t] && *latest[t] >= before(t);
        const bool progressed = min_decided_history_[t] > before(t);
        stall = (pending && !progressed) ? stall + 1 : 0;
        longest = std::max(longest, stall);
    }
    report.rounds_without_progress = longest;

    const std::size_t w = cfg_.progress_window;
    for (std::size_t s = 0; s + w <= rounds; s += w) {
        std::size_t t = s;
        while (t < s + w && !(latest[t] && *latest[t] >= before(t))) ++t;
        if (t == s + w || t + w > rounds) continue;
        ++report.windows_checked;
        if (min_decided_history_[t + w - 1] <= before(t))
            ++report.stalled_windows;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Permissionless longest-chain engine
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kGenesisBlock = 0;
constexpr std::size_t kWithholderGiveUp = 3;

class ChainEngine final : public ConsensusEngine {
public:
    ChainEngine(const NetworkConfig& cfg, const ConsensusEngineKind& kind)
        : ConsensusEngine(cfg, kind), params_(std::get<PermissionlessChain>(kind.kind))
    {
        blocks_.push_back(Block{});
        nodes_.resize(cfg.num_maintainers);
        for (auto& node : nodes_)
            node.status.assign(1, kValid);
        for (std::size_t m = 0; m < cfg.num_maintainers; ++m)
            if (!honest(m)) adversaries_.push_back(m);
        for (std::size_t m = 0; m < cfg.num_maintainers; ++m)
            if (honest(m)) ++honest_count_;
    }

protected:
    void on_submit(std::size_t proposal) override { pool_.push_back(proposal); }

    void run_round() override
    {
        deliver();
        const double p = params_.block_probability_per_round;
        const double power = adversaries_.empty() ? 0.0 : config().adversary_power;
        const double honest_rate = p * (1.0 - power) / static_cast<double>(honest_count_);
        for (std::size_t m = 0; m < nodes_.size(); ++m)
            if (honest(m) && rng().bernoulli(honest_rate))
                mine_honest(m);
        if (!adversaries_.empty()) {
            const bool mined = rng().bernoulli(p * power);
            switch (config().adversary) {
            case AdversaryScript::Withholder: withhold(mined); break;
            case AdversaryScript::Equivocator: if (mined) equivocate(); break;
            case AdversaryScript::Censor: if (mined) mine_censoring(); break;
            }
        }
    }

private:
    static constexpr std::uint8_t kUnknown = 0, kValid = 1, kInvalid = 2;

    struct Block {
        std::size_t parent = kGenesisBlock;
        std::size_t height = 0;
        std::size_t length = 0;   // records from genesis through this block
        std::vector<Record> records;
        std::uint64_t digest = 0;
        std::uint32_t miner = 0;
    };

    struct Node {
        std::vector<std::uint8_t> status;
        std::size_t tip = kGenesisBlock;
        std::map<std::size_t, std::size_t> rejected;   // proposal -> chain length when rejected
    };

    std::uint8_t status(Node& node, std::size_t b)
    {
        if (node.status.size() < blocks_.size()) node.status.resize(blocks_.size(), kUnknown);
        return node.status[b];
    }

    void set_status(Node& node, std::size_t b, std::uint8_t s)
    {
        status(node, b);
        node.status[b] = s;
    }

    std::string block_tag(std::size_t b) const { return fmt::format("{:016x}", blocks_[b].digest); }

    bool better(std::size_t a, std::size_t b) const
    {
        if (blocks_[a].height != blocks_[b].height) return blocks_[a].height > blocks_[b].height;
        return blocks_[a].digest < blocks_[b].digest;
    }

    /// Records along the path genesis..b.
    RecordSequence chain_at(std::size_t b) const
    {
        std::vector<std::size_t> path;
        for (std::size_t x = b; x != kGenesisBlock; x = blocks_[x].parent)
            path.push_back(x);
        RecordSequence seq;
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            for (const auto& r : blocks_[*it].records)
                seq.extend(r);
        return seq;
    }

    Record block_record(std::size_t m, std::size_t height)
    {
        Payload payload{PayloadKind::ContractInvoke,
                        {{std::string(attr::contract), std::string("block")},
                         {"miner", static_cast<std::int64_t>(maintainer(m).id)},
                         {"height", static_cast<std::int64_t>(height)}}};
        return make_record(0, {maintainer(m)}, {}, std::move(payload), maintainer(m), next_nonce());
    }

    /// Pending proposals m would include on top of `base`, validated in order.
    std::vector<Record> select(std::size_t m, const RecordSequence& base, bool on_own_chain, bool censor)
    {
        std::vector<Record> chosen;
        if (params_.block_capacity == 0) return chosen;
        auto& node = nodes_[m];
        const std::size_t visible = visible_proposals(round());
        std::set<RecordKey> base_keys;
        if (!on_own_chain)
            for (const auto& r : base) base_keys.insert(r.key());
        std::optional<RecordSequence> work;
        for (std::size_t p : pool_) {
            if (p >= visible) break;
            const Record& cand = proposals()[p].record;
            const auto key = cand.key();
            if (on_own_chain ? chain_contains(m, key) : base_keys.contains(key)) continue;
            if (censor && config().censored_proposers.contains(key.proposer)) continue;
            if (auto it = node.rejected.find(p); it != node.rejected.end() && it->second == base.size()) continue;
            const RecordSequence& ctx = work ? *work : base;
            if (!validate(m, ctx, cand)) {
                if (!work) node.rejected[p] = base.size();
                continue;
            }
            chosen.push_back(cand.at_index(ctx.size()));
            if (chosen.size() >= params_.block_capacity) break;
            if (!work) work = base;
            work->extend(chosen.back());
        }
        return chosen;
    }

    std::size_t new_block(std::size_t parent, std::size_t miner, std::vector<Record> body)
    {
        Block b;
        b.parent = parent;
        b.height = blocks_[parent].height + 1;
        b.miner = maintainer(miner).id;
        std::size_t index = blocks_[parent].length;
        for (auto& r : body)
            b.records.push_back(r.at_index(index++));
        Record marker = block_record(miner, b.height).at_index(index++);
        record_proposal(maintainer(miner).id, marker);
        b.records.push_back(marker);
        b.length = index;
        b.digest = combine(config().seed ^ 0xB10CB10CULL, blocks_.size());
        blocks_.push_back(std::move(b));
        const std::size_t id = blocks_.size() - 1;
        log().add(round(), maintainer(miner).id, "mine",
                  fmt::format("block={} parent={} height={} records={}", block_tag(id), block_tag(parent),
                              blocks_[id].height, blocks_[id].records.size()));
        return id;
    }

    void broadcast(std::size_t b, std::size_t from, const std::vector<std::size_t>& to)
    {
        const Round at = round() + 1 + config().delay_rounds;
        for (std::size_t m : to)
            if (m != from) inbox_.emplace(at, std::make_pair(m, b));
    }

    std::vector<std::size_t> everyone() const
    {
        std::vector<std::size_t> all(nodes_.size());
        for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
        return all;
    }

    void mine_honest(std::size_t m)
    {
        auto& node = nodes_[m];
        auto body = select(m, chain(m), true, false);
        const std::size_t b = new_block(node.tip, m, std::move(body));
        set_status(node, b, kValid);
        adopt(m, b);
        broadcast(b, m, everyone());
    }

    bool block_valid(std::size_t m, std::size_t b)
    {
        const auto& block = blocks_[b];
        if (block.records.empty() || !is_block_record(block.records.back())) return false;
        if (block.records.back().payload().int_attr("miner") != static_cast<std::int64_t>(block.miner)) return false;
        if (!honest(m) || block.records.size() == 1) return true;

        const bool on_tip = block.parent == nodes_[m].tip;
        std::optional<RecordSequence> built;
        if (!on_tip) built = chain_at(block.parent);
        std::set<RecordKey> keys;
        if (built)
            for (const auto& r : *built) keys.insert(r.key());
        std::optional<RecordSequence> work;
        for (std::size_t j = 0; j + 1 < block.records.size(); ++j) {
            const Record& r = block.records[j];
            const bool seen = built ? keys.contains(r.key()) : chain_contains(m, r.key());
            if (seen) return false;
            const RecordSequence& ctx = work ? *work : (built ? *built : chain(m));
            if (!validate(m, ctx, r)) return false;
            if (j + 2 < block.records.size()) {
                if (!work) work = ctx;
                work->extend(r);
                keys.insert(r.key());
            }
        }
        return true;
    }

    void receive(std::size_t m, std::size_t b, std::size_t& best)
    {
        auto& node = nodes_[m];
        if (status(node, b) != kUnknown) return;
        // Missing ancestors are fetched from the peer that sent the block.
        const std::size_t parent = blocks_[b].parent;
        if (status(node, parent) == kUnknown) receive(m, parent, best);
        const bool ok = status(node, parent) == kValid && block_valid(m, b);
        set_status(node, b, ok ? kValid : kInvalid);
        if (!ok) log().add(round(), maintainer(m).id, "reject-block", fmt::format("block={}", block_tag(b)));
        if (ok && better(b, best)) best = b;
    }

    void deliver()
    {
        std::map<std::size_t, std::size_t> best;
        while (!inbox_.empty() && inbox_.begin()->first <= round()) {
            auto [m, b] = inbox_.begin()->second;
            inbox_.erase(inbox_.begin());
            auto [it, inserted] = best.try_emplace(m, nodes_[m].tip);
            receive(m, b, it->second);
        }
        for (auto [m, b] : best)
            if (b != nodes_[m].tip) adopt(m, b);
    }

    /// Switches maintainer m to tip b, reporting reorganisations.
    void adopt(std::size_t m, std::size_t b)
    {
        auto& node = nodes_[m];
        const std::size_t old = node.tip;
        std::size_t x = old, y = b;
        std::vector<std::size_t> path;
        while (blocks_[y].height > blocks_[x].height) { path.push_back(y); y = blocks_[y].parent; }
        while (blocks_[x].height > blocks_[y].height) x = blocks_[x].parent;
        while (x != y) {
            path.push_back(y);
            x = blocks_[x].parent;
            y = blocks_[y].parent;
        }
        const std::size_t ancestor = x;
        const std::size_t dropped = blocks_[old].length - blocks_[ancestor].length;
        node.tip = b;
        if (dropped == 0) {
            for (auto it = path.rbegin(); it != path.rend(); ++it)
                for (const auto& r : blocks_[*it].records)
                    extend_chain(m, r);
            log().add(round(), maintainer(m).id, "adopt", fmt::format("block={} height={}", block_tag(b), blocks_[b].height));
            return;
        }
        RecordSequence rebuilt = chain(m).prefix(blocks_[ancestor].length);
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            for (const auto& r : blocks_[*it].records)
                rebuilt.extend(r);
        set_chain(m, std::move(rebuilt));
        node.rejected.clear();
        log().add(round(), maintainer(m).id, "reorg",
                  fmt::format("from={} to={} dropped={}", block_tag(old), block_tag(b), dropped));
    }

    // -- adversary scripts ------------------------------------------------

    std::size_t coalition() const { return adversaries_.front(); }

    void withhold(bool mined)
    {
        const std::size_t lead = coalition();
        const std::size_t public_tip = nodes_[lead].tip;
        if (private_blocks_.empty()) {
            fork_base_ = public_tip;
        } else if (blocks_[public_tip].height >= blocks_[private_blocks_.back()].height + kWithholderGiveUp) {
            log().add(round(), maintainer(lead).id, "abandon",
                      fmt::format("private={} public-height={}", private_blocks_.size(), blocks_[public_tip].height));
            private_blocks_.clear();
            fork_base_ = public_tip;
        }
        if (mined) {
            const std::size_t parent = private_blocks_.empty() ? fork_base_ : private_blocks_.back();
            private_blocks_.push_back(new_block(parent, lead, {}));
            log().add(round(), maintainer(lead).id, "withhold", fmt::format("block={}", block_tag(private_blocks_.back())));
        }
        if (private_blocks_.empty()) return;
        const std::size_t private_tip = private_blocks_.back();
        const std::size_t public_since_fork = blocks_[public_tip].length - blocks_[fork_base_].length;
        if (blocks_[private_tip].height > blocks_[public_tip].height && public_since_fork > confirmation_depth()) {
            log().add(round(), maintainer(lead).id, "release",
                      fmt::format("blocks={} overtaken={}", private_blocks_.size(), public_since_fork));
            for (std::size_t b : private_blocks_) broadcast(b, lead, everyone());
            std::size_t best = nodes_[lead].tip;
            for (std::size_t b : private_blocks_) receive(lead, b, best);
            if (best != nodes_[lead].tip) adopt(lead, best);
            private_blocks_.clear();
        }
    }

    void equivocate()
    {
        const std::size_t lead = coalition();
        const std::size_t parent = nodes_[lead].tip;
        const std::size_t first = new_block(parent, lead, {});
        const std::size_t second = new_block(parent, lead, {});
        std::vector<std::size_t> even, odd;
        for (std::size_t m = 0; m < nodes_.size(); ++m)
            (m % 2 == 0 ? even : odd).push_back(m);
        log().add(round(), maintainer(lead).id, "equivocate",
                  fmt::format("first={} second={}", block_tag(first), block_tag(second)));
        broadcast(first, lead, even);
        broadcast(second, lead, odd);
        set_status(nodes_[lead], first, kValid);
        adopt(lead, first);
    }

    void mine_censoring()
    {
        const std::size_t lead = coalition();
        auto body = select(lead, chain(lead), true, true);
        const std::size_t b = new_block(nodes_[lead].tip, lead, std::move(body));
        set_status(nodes_[lead], b, kValid);
        adopt(lead, b);
        broadcast(b, lead, everyone());
    }

    PermissionlessChain params_;
    std::vector<Block> blocks_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> adversaries_;
    std::size_t honest_count_ = 0;
    std::vector<std::size_t> pool_;
    std::multimap<Round, std::pair<std::size_t, std::size_t>> inbox_;
    std::vector<std::size_t> private_blocks_;
    std::size_t fork_base_ = kGenesisBlock;
};

// ---------------------------------------------------------------------------
// Permissioned quorum engine
// ---------------------------------------------------------------------------

class QuorumEngine final : public ConsensusEngine {
public:
    QuorumEngine(const NetworkConfig& cfg, const ConsensusEngineKind& kind)
        : ConsensusEngine(cfg, kind),
          quorum_(static_cast<std::size_t>(std::ceil(std::get<PermissionedQuorum>(kind.kind).quorum_fraction *
                                                     static_cast<double>(cfg.num_maintainers) - 1e-9))),
          rejected_(cfg.num_maintainers)
    {
        quorum_ = std::max<std::size_t>(quorum_, 1);
    }

protected:
    void on_submit(std::size_t proposal) override { pool_.push_back(proposal); }

    void run_round() override
    {
        const Round d = config().delay_rounds;
        const Round span = 2 * d + 1;
        const Round phase = round() % span;
        if (phase == 0) propose(static_cast<std::size_t>((round() / span) % maintainer_count()));
        if (phase == d) vote();
        if (phase == 2 * d) tally();
    }

private:
    struct Candidate {
        Record record;
        std::set<std::size_t> recipients;
        std::set<std::size_t> voters;
    };

    std::optional<Record> pending_for(std::size_t m, bool censor)
    {
        const std::size_t visible = visible_proposals(round());
        for (std::size_t p : pool_) {
            if (p >= visible) break;
            const Record& cand = proposals()[p].record;
            if (chain_contains(m, cand.key())) continue;
            if (censor && config().censored_proposers.contains(cand.key().proposer)) continue;
            auto& rejected = rejected_[m];
            if (auto it = rejected.find(p); it != rejected.end() && it->second == chain(m).size()) continue;
            if (!validate(m, chain(m), cand)) {
                rejected[p] = chain(m).size();
                continue;
            }
            return cand.at_index(chain(m).size());
        }
        return std::nullopt;
    }

    Record crafted(std::size_t m, std::size_t slot)
    {
        Payload payload{PayloadKind::ContractInvoke,
                        {{std::string(attr::contract), std::string("equivocation")},
                         {"slot", static_cast<std::int64_t>(slot)}}};
        Record r = make_record(slot, {maintainer(m)}, {}, std::move(payload), maintainer(m), next_nonce());
        record_proposal(maintainer(m).id, r);
        return r;
    }

    void propose(std::size_t leader)
    {
        candidates_.clear();
        slot_ = chain(leader).size();
        std::set<std::size_t> all;
        for (std::size_t m = 0; m < maintainer_count(); ++m) all.insert(m);

        if (honest(leader) || config().adversary == AdversaryScript::Censor) {
            auto rec = pending_for(leader, !honest(leader));
            if (!rec) return;
            candidates_.push_back({*rec, all, {}});
        } else if (config().adversary == AdversaryScript::Equivocator) {
            auto first = pending_for(leader, false);
            Record a = first ? *first : crafted(leader, slot_);
            Record b = crafted(leader, slot_);
            std::set<std::size_t> even, odd;
            for (std::size_t m = 0; m < maintainer_count(); ++m)
                (m % 2 == 0 ? even : odd).insert(m);
            candidates_.push_back({a, even, {}});
            candidates_.push_back({b, odd, {}});
            log().add(round(), maintainer(leader).id, "equivocate", fmt::format("slot={}", slot_));
        } else {
            log().add(round(), maintainer(leader).id, "silent", fmt::format("slot={}", slot_));
            return;
        }
        for (const auto& c : candidates_)
            log().add(round(), maintainer(leader).id, "lead",
                      fmt::format("slot={} proposer={} nonce={}", slot_, c.record.key().proposer, c.record.key().nonce));
    }

    void vote()
    {
        for (std::size_t m = 0; m < maintainer_count(); ++m) {
            if (!honest(m)) {
                if (config().adversary == AdversaryScript::Withholder) continue;
                for (auto& c : candidates_) {
                    if (config().adversary == AdversaryScript::Censor &&
                        config().censored_proposers.contains(c.record.key().proposer))
                        continue;
                    if (config().adversary == AdversaryScript::Censor && !c.recipients.contains(m)) continue;
                    c.voters.insert(m);
                }
                continue;
            }
            if (chain(m).size() != slot_) continue;
            for (auto& c : candidates_) {
                if (!c.recipients.contains(m)) continue;
                if (chain_contains(m, c.record.key()) || !validate(m, chain(m), c.record)) {
                    log().add(round(), maintainer(m).id, "refuse",
                              fmt::format("slot={} proposer={} nonce={}", slot_, c.record.key().proposer, c.record.key().nonce));
                    break;
                }
                c.voters.insert(m);
                log().add(round(), maintainer(m).id, "vote",
                          fmt::format("slot={} proposer={} nonce={}", slot_, c.record.key().proposer, c.record.key().nonce));
                break;
            }
        }
    }

    void tally()
    {
        const Candidate* winner = nullptr;
        for (const auto& c : candidates_)
            if (c.voters.size() >= quorum_ && (!winner || c.record.digest() < winner->record.digest()))
                winner = &c;
        if (winner) {
            certificates_.emplace(slot_, winner->record);
            log().add(round(), "-", "commit",
                      fmt::format("slot={} votes={} quorum={} proposer={} nonce={}", slot_, winner->voters.size(), quorum_,
                                  winner->record.key().proposer, winner->record.key().nonce));
        }
        candidates_.clear();
        for (std::size_t m = 0; m < maintainer_count(); ++m) {
            for (auto it = certificates_.find(chain(m).size()); it != certificates_.end();
                 it = certificates_.find(chain(m).size())) {
                extend_chain(m, it->second);
                log().add(round(), maintainer(m).id, "decide",
                          fmt::format("index={} proposer={} nonce={}", it->first, it->second.key().proposer,
                                      it->second.key().nonce));
            }
        }
    }

    std::size_t quorum_;
    std::vector<std::size_t> pool_;
    std::vector<std::map<std::size_t, std::size_t>> rejected_;
    std::vector<Candidate> candidates_;
    std::size_t slot_ = 0;
    std::map<std::size_t, Record> certificates_;
};

} // namespace

std::unique_ptr<ConsensusEngine> make_engine(const NetworkConfig& cfg, const ConsensusEngineKind& kind)
{
    if (kind.permissionless()) return std::make_unique<ChainEngine>(cfg, kind);
    return std::make_unique<QuorumEngine>(cfg, kind);
}

ConsensusRun run_consensus(const NetworkConfig& cfg, const ConsensusEngineKind& kind, std::span<const Record> proposals,
                           Round rounds, Validator validator)
{
    auto engine = make_engine(cfg, kind);
    if (validator) engine->set_validator(std::move(validator));
    for (const auto& r : proposals)
        engine->submit(r);
    for (Round t = 0; t < rounds; ++t)
        engine->step();
    return {engine->views(), engine->monitor(), engine->log()};
}

} // namespace ledgerlab
