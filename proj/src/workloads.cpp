#include "ledgerlab/scenario.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace ledgerlab {

namespace {

PartyId pid(const Party& p) { return p.party_id; }

/// Shared plumbing: party lookup, nonces, decided-key tracking and the
/// creation path the scenario's creation mode prescribes.
class WorkloadBase : public Workload {
public:
    explicit WorkloadBase(const Scenario& s) : s_(s), spec_(s.spec), salt_(fnv1a(s.workload.name)) {}

protected:
    const Party& party(const std::string& label) const
    {
        const auto* p = spec_.party(label);
        if (!p) throw Error(ErrorCode::SpecError, "workload names unknown party '" + label + "'");
        return *p;
    }

    const Party& param_party(std::string_view key, const std::string& fallback) const
    {
        return party(s_.workload.string_param(key, fallback));
    }

    std::int64_t param(std::string_view key, std::int64_t fallback) const
    {
        const auto v = s_.workload.int_param(key, fallback);
        if (v < 0) throw Error(ErrorCode::SpecError, "workload parameter '" + std::string(key) + "' must be non-negative");
        return v;
    }

    std::vector<const Party*> with_script(std::string_view script) const
    {
        std::vector<const Party*> out;
        for (const auto& p : spec_.parties)
            if (p.honesty.adversarial && p.honesty.script == script) out.push_back(&p);
        return out;
    }

    std::vector<const Party*> honest_non_creators() const
    {
        std::vector<const Party*> out;
        for (const auto& p : spec_.parties)
            if (!p.honesty.adversarial && !spec_.creation.creators.contains(p.party_id.id)) out.push_back(&p);
        return out;
    }

    std::vector<const Party*> creators() const
    {
        std::vector<const Party*> out;
        for (auto id : spec_.creation.creators) out.push_back(spec_.party(id));
        return out;
    }

    std::uint64_t nonce() { return combine(salt_, ++counter_); }

    Record transfer(const PartyId& from, const PartyId& to, std::set<ObjectId> objects, std::int64_t amount,
                    Attributes extra = {})
    {
        extra["amount"] = amount;
        extra["from"] = static_cast<std::int64_t>(from.id);
        extra["to"] = static_cast<std::int64_t>(to.id);
        return make_record(0, {from, to}, std::move(objects), Payload{PayloadKind::Transfer, std::move(extra)}, from, nonce());
    }

    Record claim(const PartyId& who, const ObjectId& id)
    {
        Payload p{PayloadKind::Claim, {{"object_id", id.text()}, {"claimant", static_cast<std::int64_t>(who.id)}}};
        return make_record(0, {who}, {id}, std::move(p), who, nonce());
    }

    Record assertion(const PartyId& who, const ObjectId& id, const std::string& property, Scalar value)
    {
        Payload p{PayloadKind::Assert, {{"object_id", id.text()}, {"property", property}, {"value", std::move(value)}}};
        return make_record(0, {who}, {id}, std::move(p), who, nonce());
    }

    /// Party creation writes a Create directly; consensus-based creation asks
    /// the registration contract, whose hook mints the object once decided.
    Record creation(const PartyId& creator, const PartyId& owner, const std::string& alias, Attributes attrs)
    {
        attrs["alias"] = alias;
        attrs["owner"] = static_cast<std::int64_t>(owner.id);
        if (spec_.creation.kind == CreationMode::Kind::ConsensusBased) {
            attrs["contract"] = s_.workload.string_param("contract", "register");
            return make_record(0, {creator, owner}, {}, Payload{PayloadKind::ContractInvoke, std::move(attrs)}, creator,
                               nonce());
        }
        const auto id = ObjectId::sequential(creator.id, next_sequential_[creator.id]++);
        attrs["object_id"] = id.text();
        return make_record(0, {creator, owner}, {id}, Payload{PayloadKind::Create, std::move(attrs)}, creator, nonce());
    }

    void require_creation() const
    {
        if (spec_.creation.kind == CreationMode::Kind::Predefined)
            throw Error(ErrorCode::SpecError, "workload '" + s_.workload.name + "' creates objects but the object set is predefined");
    }

    void track(const RecordSequence& decided)
    {
        if (decided.size() < seen_) {
            decided_keys_.clear();
            seen_ = 0;
        }
        for (; seen_ < decided.size(); ++seen_) decided_keys_.insert(decided[seen_].key());
    }

    bool decided(const RecordKey& key) const { return decided_keys_.contains(key); }

    static std::optional<ObjectId> bound(const WorkloadContext& ctx, const std::string& alias)
    {
        auto it = ctx.aliases.find(alias);
        if (it == ctx.aliases.end() || !ctx.state.exists(it->second)) return std::nullopt;
        return it->second;
    }

    const Scenario& s_;
    const UseCaseSpec& spec_;

private:
    std::uint64_t salt_;
    std::uint64_t counter_ = 0;
    std::map<std::uint32_t, std::uint64_t> next_sequential_;
    std::set<RecordKey> decided_keys_;
    std::size_t seen_ = 0;
};

bool due(Round round, std::int64_t start, std::int64_t every, std::int64_t count)
{
    const auto r = static_cast<std::int64_t>(round);
    if (r < start || every <= 0) return false;
    return (r - start) % every == 0 && (r - start) / every < count;
}

std::int64_t index_at(Round round, std::int64_t start, std::int64_t every)
{
    return (static_cast<std::int64_t>(round) - start) / every;
}

// ---------------------------------------------------------------------------

/// Whole-coin payments between honest holders; a double-spender pays the
/// same coin to two parties in one round.
class CurrencyTransfers final : public WorkloadBase {
public:
    explicit CurrencyTransfers(const Scenario& s) : WorkloadBase(s)
    {
        count_ = param("transfers", 40);
        every_ = std::max<std::int64_t>(1, param("every", 4));
        start_ = param("start", 2);
        attack_round_ = param("attack-round", 30);
        for (const auto& [alias, id] : s.genesis_aliases) coins_.push_back(id);
        for (const auto& p : spec_.parties)
            if (!p.honesty.adversarial) holders_.push_back(&p);
        if (holders_.size() < 2) throw Error(ErrorCode::SpecError, "currency-transfers needs two honest parties");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        track(ctx.decided);
        std::vector<Record> out;
        std::erase_if(pending_, [&](const auto& kv) { return decided(kv.second.first) || ctx.round > kv.second.second + 80; });

        if (due(ctx.round, start_, every_, count_)) {
            std::vector<ObjectId> free;
            for (const auto& c : coins_) {
                auto owner = ctx.state.owner(c);
                const auto* p = owner ? spec_.party(*owner) : nullptr;
                if (p && !p->honesty.adversarial && !pending_.contains(c)) free.push_back(c);
            }
            if (!free.empty()) {
                const auto coin = free[ctx.rng.below(free.size())];
                const auto& from = *spec_.party(*ctx.state.owner(coin));
                const Party* to = holders_[ctx.rng.below(holders_.size())];
                if (to->party_id == from.party_id) to = holders_[(index_of(to) + 1) % holders_.size()];
                out.push_back(transfer(pid(from), pid(*to), {coin}, amount(ctx, coin)));
                pending_[coin] = {out.back().key(), ctx.round};
            }
        }

        if (static_cast<std::int64_t>(ctx.round) == attack_round_)
            for (const auto* spender : with_script("double-spend"))
                for (const auto& c : coins_)
                    if (ctx.state.owner(c) == spender->party_id.id) {
                        out.push_back(transfer(pid(*spender), pid(*holders_[0]), {c}, amount(ctx, c)));
                        out.push_back(transfer(pid(*spender), pid(*holders_[1]), {c}, amount(ctx, c)));
                        break;
                    }
        return out;
    }

private:
    std::size_t index_of(const Party* p) const
    {
        return static_cast<std::size_t>(std::find(holders_.begin(), holders_.end(), p) - holders_.begin());
    }

    static std::int64_t amount(const WorkloadContext& ctx, const ObjectId& coin)
    {
        if (auto v = ctx.state.claim(coin, "amount"))
            if (auto i = as_int(*v)) return *i;
        return 0;
    }

    std::int64_t count_, every_, start_, attack_round_;
    std::vector<ObjectId> coins_;
    std::vector<const Party*> holders_;
    std::map<ObjectId, std::pair<RecordKey, Round>> pending_;
};

// ---------------------------------------------------------------------------

/// Insurers register diamonds for customers, customers resell them; a thief
/// has a stolen stone re-registered under fresh attributes.
class DiamondRegistry final : public WorkloadBase {
public:
    explicit DiamondRegistry(const Scenario& s) : WorkloadBase(s)
    {
        require_creation();
        count_ = param("registrations", 8);
        every_ = std::max<std::int64_t>(1, param("every", 6));
        start_ = param("start", 2);
        sales_ = param("sales", 4);
        recut_round_ = param("recut-round", 40);
        registrars_ = creators();
        if (registrars_.empty()) registrars_.push_back(&spec_.parties.front());
        customers_ = honest_non_creators();
        if (customers_.size() < 2) throw Error(ErrorCode::SpecError, "diamond-registry needs two customers");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        track(ctx.decided);
        std::vector<Record> out;
        if (due(ctx.round, start_, every_, count_)) {
            const auto i = index_at(ctx.round, start_, every_);
            const auto alias = fmt::format("diamond{}", i);
            const auto& insurer = *registrars_[static_cast<std::size_t>(i) % registrars_.size()];
            const auto& owner = *customers_[static_cast<std::size_t>(i) % customers_.size()];
            ctx.declare_fact(alias, "certified", true);
            ctx.declare_fact(alias, "stolen", false);
            out.push_back(creation(pid(insurer), pid(owner), alias, {{"carat", 1 + i % 3}, {"cut", std::string("ideal")}}));
            registered_.push_back(alias);
        }
        if (static_cast<std::int64_t>(ctx.round) == recut_round_)
            for (const auto* thief : with_script("recut"))
                out.push_back(creation(pid(*registrars_.back()), pid(*thief), "recut",
                                       {{"carat", std::int64_t{2}}, {"cut", std::string("cushion")}}));

        for (const auto& alias : registered_) {
            if (sold_ >= sales_ || sold_aliases_.contains(alias)) continue;
            const auto id = bound(ctx, alias);
            if (!id) continue;
            const auto owner = ctx.state.owner(*id);
            if (!owner) continue;
            const auto* seller = spec_.party(*owner);
            const auto* buyer = customers_[(static_cast<std::size_t>(sold_) + 1) % customers_.size()];
            if (buyer->party_id.id == *owner) buyer = customers_[(static_cast<std::size_t>(sold_) + 2) % customers_.size()];
            out.push_back(transfer(pid(*seller), pid(*buyer), {*id}, 0));
            sold_aliases_.insert(alias);
            ++sold_;
        }
        return out;
    }

private:
    std::int64_t count_, every_, start_, sales_, recut_round_;
    std::int64_t sold_ = 0;
    std::vector<const Party*> registrars_, customers_;
    std::vector<std::string> registered_;
    std::set<std::string> sold_aliases_;
};

// ---------------------------------------------------------------------------

/// The central bank issues reserve tokens; banks settle by passing them on.
class InterbankPayments final : public WorkloadBase {
public:
    explicit InterbankPayments(const Scenario& s) : WorkloadBase(s)
    {
        require_creation();
        count_ = param("payments", 20);
        every_ = std::max<std::int64_t>(1, param("every", 5));
        amount_ = param("amount", 100);
        start_ = param("start", 20);
        auto issuers = creators();
        if (issuers.empty()) throw Error(ErrorCode::SpecError, "interbank-payments needs an issuing party");
        issuer_ = issuers.front();
        banks_ = honest_non_creators();
        if (banks_.size() < 2) throw Error(ErrorCode::SpecError, "interbank-payments needs two banks");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        track(ctx.decided);
        std::vector<Record> out;
        if (ctx.round < banks_.size()) {
            const auto& bank = *banks_[ctx.round];
            out.push_back(creation(pid(*issuer_), pid(bank), fmt::format("reserve{}", ctx.round), {{"amount", amount_}}));
        }
        std::erase_if(pending_, [&](const auto& kv) { return decided(kv.second.first) || ctx.round > kv.second.second + 80; });
        if (due(ctx.round, start_, every_, count_)) {
            std::vector<ObjectId> free;
            for (std::size_t b = 0; b < banks_.size(); ++b)
                if (auto id = bound(ctx, fmt::format("reserve{}", b)); id && !pending_.contains(*id)) free.push_back(*id);
            if (!free.empty()) {
                const auto token = free[ctx.rng.below(free.size())];
                const auto& from = *spec_.party(*ctx.state.owner(token));
                const Party* to = banks_[ctx.rng.below(banks_.size())];
                if (to->party_id == from.party_id) to = banks_[(ctx.rng.below(banks_.size() - 1) + 1 + index_of(&from)) % banks_.size()];
                out.push_back(transfer(pid(from), pid(*to), {token}, amount_));
                pending_[token] = {out.back().key(), ctx.round};
            }
        }
        return out;
    }

private:
    std::size_t index_of(const Party* p) const
    {
        for (std::size_t i = 0; i < banks_.size(); ++i)
            if (banks_[i]->party_id == p->party_id) return i;
        return 0;
    }

    std::int64_t count_, every_, amount_, start_;
    const Party* issuer_ = nullptr;
    std::vector<const Party*> banks_;
    std::map<ObjectId, std::pair<RecordKey, Round>> pending_;
};

// ---------------------------------------------------------------------------

/// Customers claim insured items; specific-object insurance first registers
/// each item, generic-collection insurance claims from the genesis set.
class InsuranceClaims final : public WorkloadBase {
public:
    explicit InsuranceClaims(const Scenario& s) : WorkloadBase(s)
    {
        every_ = std::max<std::int64_t>(1, param("every", 6));
        start_ = param("start", 2);
        duplicate_round_ = param("duplicate-round", 60);
        for (const auto& p : spec_.parties)
            if (!spec_.creation.creators.contains(p.party_id.id) &&
                !(p.honesty.adversarial && p.honesty.script == "duplicate-claim"))
                customers_.push_back(&p);
        count_ = param("claims", static_cast<std::int64_t>(customers_.size()));
        specific_ = spec_.creation.kind != CreationMode::Kind::Predefined;
        if (customers_.empty()) throw Error(ErrorCode::SpecError, "insurance-claims needs customers");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        std::vector<Record> out;
        if (due(ctx.round, start_, every_, count_)) {
            const auto i = static_cast<std::size_t>(index_at(ctx.round, start_, every_));
            const auto& owner = *customers_[i % customers_.size()];
            const auto alias = fmt::format("item{}", i);
            if (specific_) out.push_back(creation(pid(owner), pid(owner), alias, {{"insured", true}}));
            wanted_.emplace_back(alias, &owner);
        }
        for (auto& [alias, owner] : wanted_) {
            if (!owner) continue;
            if (auto id = bound(ctx, alias)) {
                out.push_back(claim(pid(*owner), *id));
                owner = nullptr;
            }
        }
        if (static_cast<std::int64_t>(ctx.round) == duplicate_round_)
            for (const auto* cheat : with_script("duplicate-claim"))
                if (auto id = bound(ctx, "item0")) out.push_back(claim(pid(*cheat), *id));
        return out;
    }

private:
    std::int64_t count_, every_, start_, duplicate_round_;
    bool specific_ = false;
    std::vector<const Party*> customers_;
    std::vector<std::pair<std::string, const Party*>> wanted_;
};

// ---------------------------------------------------------------------------

/// Producers read their meters and mint energy tokens; consumers pay per
/// reported kWh.
class MeterSettlement final : public WorkloadBase {
public:
    explicit MeterSettlement(const Scenario& s) : WorkloadBase(s)
    {
        require_creation();
        every_ = std::max<std::int64_t>(1, param("every", 8));
        start_ = param("start", 2);
        price_ = param("price", 1);
        oracle_ = s.workload.string_param("oracle", "meter");
        for (const auto& [alias, id] : s.genesis_aliases)
            if (alias.rfind("meter", 0) == 0) meters_.push_back(alias);
        std::sort(meters_.begin(), meters_.end(), [](const std::string& a, const std::string& b) {
            return a.size() != b.size() ? a.size() < b.size() : a < b;
        });
        consumers_ = honest_non_creators();
        if (consumers_.empty() || meters_.empty()) throw Error(ErrorCode::SpecError, "meter-settlement needs meters and consumers");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        std::vector<Record> out;
        if (!due(ctx.round, start_, every_, static_cast<std::int64_t>(meters_.size()))) return out;
        const auto i = static_cast<std::size_t>(index_at(ctx.round, start_, every_));
        const auto meter = s_.genesis_aliases.at(meters_[i]);
        const auto owner = ctx.state.owner(meter);
        if (!owner) return out;
        const auto& producer = *spec_.party(*owner);
        const auto reading = ctx.read_oracle(*owner, oracle_, meter, "produced_kwh");
        const auto kwh = reading ? as_int(*reading) : std::nullopt;
        if (!kwh) return out;
        out.push_back(creation(pid(producer), pid(producer), fmt::format("energy{}", i),
                               {{"kwh", *kwh}, {"meter", meter.text()}}));
        const auto& consumer = *consumers_[i % consumers_.size()];
        out.push_back(transfer(pid(consumer), pid(producer), {}, *kwh * price_, {{"kwh", *kwh}, {"meter", meter.text()}}));
        return out;
    }

private:
    std::int64_t every_, start_, price_;
    std::string oracle_;
    std::vector<std::string> meters_;
    std::vector<const Party*> consumers_;
};

// ---------------------------------------------------------------------------

/// Products are registered by a supplier, labelled with their origin and
/// passed down the chain.
class SupplyChainTracking final : public WorkloadBase {
public:
    explicit SupplyChainTracking(const Scenario& s) : WorkloadBase(s)
    {
        require_creation();
        count_ = param("products", 4);
        every_ = std::max<std::int64_t>(1, param("every", 10));
        start_ = param("start", 2);
        supplier_ = &param_party("supplier", "supplier");
        hops_ = {supplier_, &param_party("processor", "processor"), &param_party("retailer", "retailer")};
        origin_ = s.workload.string_param("origin", "farm-a");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        track(ctx.decided);
        std::vector<Record> out;
        if (due(ctx.round, start_, every_, count_)) {
            const auto alias = fmt::format("product{}", index_at(ctx.round, start_, every_));
            out.push_back(creation(pid(*supplier_), pid(*supplier_), alias, {{"product", alias}}));
            products_.push_back(Product{alias, false, 0, std::nullopt});
        }
        for (auto& p : products_) {
            const auto id = bound(ctx, p.alias);
            if (!id) continue;
            if (!p.labelled) {
                out.push_back(assertion(pid(*supplier_), *id, "origin", origin_));
                p.labelled = true;
                continue;
            }
            if (p.hop + 1 >= hops_.size()) continue;
            if (p.pending && !decided(*p.pending)) continue;
            if (ctx.state.owner(*id) != hops_[p.hop]->party_id.id) continue;
            out.push_back(transfer(pid(*hops_[p.hop]), pid(*hops_[p.hop + 1]), {*id}, 0));
            p.pending = out.back().key();
            ++p.hop;
        }
        return out;
    }

private:
    struct Product {
        std::string alias;
        bool labelled = false;
        std::size_t hop = 0;
        std::optional<RecordKey> pending;
    };

    std::int64_t count_, every_, start_;
    const Party* supplier_;
    std::vector<const Party*> hops_;
    std::string origin_;
    std::vector<Product> products_;
};

// ---------------------------------------------------------------------------

/// Containers are registered for a shipper; the carrier reports their
/// arrival, which the arrival contract turns into a payment.
class ContainerShipping final : public WorkloadBase {
public:
    explicit ContainerShipping(const Scenario& s) : WorkloadBase(s)
    {
        require_creation();
        count_ = param("containers", 2);
        every_ = std::max<std::int64_t>(1, param("every", 5));
        start_ = param("start", 2);
        report_round_ = param("report-round", 120);
        shipper_ = &param_party("shipper", "shipper");
        carrier_ = &param_party("carrier", "carrier");
        destination_ = s.workload.string_param("destination", "PortB");
    }

    std::vector<Record> step(const WorkloadContext& ctx) override
    {
        std::vector<Record> out;
        if (due(ctx.round, start_, every_, count_)) {
            const auto alias = fmt::format("container{}", index_at(ctx.round, start_, every_));
            out.push_back(creation(pid(*shipper_), pid(*shipper_), alias, {{"cargo", std::string("general")}}));
        }
        if (static_cast<std::int64_t>(ctx.round) >= report_round_)
            for (std::int64_t i = 0; i < count_; ++i) {
                const auto alias = fmt::format("container{}", i);
                const auto id = bound(ctx, alias);
                if (!id || reported_.contains(alias)) continue;
                out.push_back(assertion(pid(*carrier_), *id, "location", destination_));
                reported_.insert(alias);
            }
        return out;
    }

private:
    std::int64_t count_, every_, start_, report_round_;
    const Party* shipper_;
    const Party* carrier_;
    std::string destination_;
    std::set<std::string> reported_;
};

template <typename T>
std::unique_ptr<Workload> build(const Scenario& s)
{
    return std::make_unique<T>(s);
}

using Factory = std::unique_ptr<Workload> (*)(const Scenario&);

const std::map<std::string, Factory, std::less<>>& registry()
{
    static const std::map<std::string, Factory, std::less<>> r = {
        {"currency-transfers", &build<CurrencyTransfers>},   {"diamond-registry", &build<DiamondRegistry>},
        {"interbank-payments", &build<InterbankPayments>},   {"insurance-claims", &build<InsuranceClaims>},
        {"meter-settlement", &build<MeterSettlement>},       {"supply-chain-tracking", &build<SupplyChainTracking>},
        {"container-shipping", &build<ContainerShipping>},
    };
    return r;
}

} // namespace

std::vector<std::string> workload_names()
{
    std::vector<std::string> out;
    for (const auto& [name, f] : registry()) out.push_back(name);
    return out;
}

std::unique_ptr<Workload> make_workload(const Scenario& scenario)
{
    auto it = registry().find(scenario.workload.name);
    if (it == registry().end()) throw Error(ErrorCode::SpecError, "unknown workload '" + scenario.workload.name + "'");
    return it->second(scenario);
}

} // namespace ledgerlab
