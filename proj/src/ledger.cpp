#include "ledgerlab/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace ledgerlab {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::IndexGap: return "IndexGap";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingOracle: return "MissingOracle";
    case ErrorCode::OracleRefused: return "OracleRefused";
    case ErrorCode::UnknownTrigger: return "UnknownTrigger";
    case ErrorCode::SpecError: return "SpecError";
    case ErrorCode::LogMismatch: return "LogMismatch";
    case ErrorCode::InapplicableAttack: return "InapplicableAttack";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

namespace {

bool needs_escape(char c)
{
    return c == '%' || c == ' ' || c == '|' || c == ',' || c == '=' || c == '"' || c == '\n' || c == '\r';
}

template <typename T>
std::optional<T> parse_number(std::string_view text)
{
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        return std::nullopt;
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace

// ---------------------------------------------------------------------------

std::string scalar_text(const Scalar& value)
{
    if (const auto* i = std::get_if<std::int64_t>(&value))
        return std::to_string(*i);
    if (const auto* b = std::get_if<bool>(&value))
        return *b ? "true" : "false";
    const auto& s = std::get<std::string>(value);
    std::string out = "\"";
    static constexpr char kHex[] = "0123456789ABCDEF";
    for (char c : s) {
        if (needs_escape(c)) {
            out.push_back('%');
            out.push_back(kHex[(static_cast<unsigned char>(c) >> 4) & 0xF]);
            out.push_back(kHex[static_cast<unsigned char>(c) & 0xF]);
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::optional<Scalar> parse_scalar(std::string_view text)
{
    if (text == "true") return Scalar{true};
    if (text == "false") return Scalar{false};
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        std::string out;
        text = text.substr(1, text.size() - 2);
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '%') {
                if (i + 2 >= text.size())
                    return std::nullopt;
                unsigned v = 0;
                auto [p, ec] = std::from_chars(text.data() + i + 1, text.data() + i + 3, v, 16);
                if (ec != std::errc{} || p != text.data() + i + 3)
                    return std::nullopt;
                out.push_back(static_cast<char>(v));
                i += 2;
            } else {
                out.push_back(text[i]);
            }
        }
        return Scalar{std::move(out)};
    }
    if (auto i = parse_number<std::int64_t>(text))
        return Scalar{*i};
    return std::nullopt;
}

Scalar scalar_from_word(std::string_view word)
{
    if (word == "true") return true;
    if (word == "false") return false;
    if (auto i = parse_number<std::int64_t>(word)) return *i;
    return std::string(word);
}

std::optional<std::int64_t> as_int(const Scalar& value)
{
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    return std::nullopt;
}

std::optional<std::string> as_string(const Scalar& value)
{
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    return std::nullopt;
}

std::optional<bool> as_bool(const Scalar& value)
{
    if (const auto* b = std::get_if<bool>(&value)) return *b;
    return std::nullopt;
}

PartyId system_party()
{
    return PartyId{kSystemPartyId, "system"};
}

// ---------------------------------------------------------------------------

U256 U256::masked(unsigned width) const
{
    U256 out = *this;
    for (unsigned limb = 0; limb < 4; ++limb) {
        const unsigned lo = limb * 64;
        if (width <= lo)
            out.limbs[limb] = 0;
        else if (width < lo + 64)
            out.limbs[limb] &= (std::uint64_t{1} << (width - lo)) - 1;
    }
    return out;
}

std::string U256::hex() const
{
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (int limb = 3; limb >= 0; --limb)
        for (int nibble = 15; nibble >= 0; --nibble)
            out.push_back(kHex[(limbs[limb] >> (nibble * 4)) & 0xF]);
    auto first = out.find_first_not_of('0');
    return first == std::string::npos ? "0" : out.substr(first);
}

std::optional<U256> U256::parse_hex(std::string_view text)
{
    if (text.empty() || text.size() > 64)
        return std::nullopt;
    U256 out;
    for (char c : text) {
        unsigned v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else return std::nullopt;
        for (int limb = 3; limb >= 0; --limb) {
            out.limbs[limb] <<= 4;
            if (limb > 0)
                out.limbs[limb] |= out.limbs[limb - 1] >> 60;
        }
        out.limbs[0] |= v;
    }
    return out;
}

ObjectId ObjectId::sequential(std::uint32_t issuer, std::uint64_t n)
{
    ObjectId id;
    id.scheme = Scheme::Sequential;
    id.issuer = issuer;
    id.value = U256::from_u64(n);
    return id;
}

ObjectId ObjectId::random_bits(std::uint16_t width, const U256& raw)
{
    if (width < 1 || width > kMaxObjectIdWidth)
        throw Error(ErrorCode::ConfigError, "object id width must be in [1, 256], got " + std::to_string(width));
    ObjectId id;
    id.scheme = Scheme::RandomBits;
    id.width = width;
    id.value = raw.masked(width);
    return id;
}

ObjectId ObjectId::random_bits(std::uint16_t width, Rng& rng)
{
    U256 raw;
    for (auto& limb : raw.limbs)
        limb = rng.next();
    return random_bits(width, raw);
}

std::string ObjectId::text() const
{
    if (scheme == Scheme::Sequential) {
        std::string issuer_text = issuer == kSystemPartyId ? "sys" : std::to_string(issuer);
        return "s" + issuer_text + "." + std::to_string(value.limbs[0]);
    }
    return "r" + std::to_string(width) + "." + value.hex();
}

std::optional<ObjectId> ObjectId::parse(std::string_view text)
{
    if (text.size() < 4)
        return std::nullopt;
    auto dot = text.find('.');
    if (dot == std::string_view::npos)
        return std::nullopt;
    auto head = text.substr(1, dot - 1);
    auto tail = text.substr(dot + 1);
    if (text[0] == 's') {
        std::uint32_t issuer;
        if (head == "sys") {
            issuer = kSystemPartyId;
        } else if (auto v = parse_number<std::uint32_t>(head)) {
            issuer = *v;
        } else {
            return std::nullopt;
        }
        auto n = parse_number<std::uint64_t>(tail);
        if (!n) return std::nullopt;
        return sequential(issuer, *n);
    }
    if (text[0] == 'r') {
        auto width = parse_number<std::uint16_t>(head);
        auto value = U256::parse_hex(tail);
        if (!width || !value || *width < 1 || *width > kMaxObjectIdWidth) return std::nullopt;
        if (value->masked(*width) != *value) return std::nullopt;
        return random_bits(*width, *value);
    }
    return std::nullopt;
}

ObjectDescriptor ObjectDescriptor::genesis(ObjectId id, Attributes attributes)
{
    return ObjectDescriptor{std::move(id), std::nullopt, std::nullopt, std::move(attributes)};
}

// ---------------------------------------------------------------------------

std::string_view to_string(PayloadKind kind)
{
    switch (kind) {
    case PayloadKind::Transfer: return "transfer";
    case PayloadKind::Create: return "create";
    case PayloadKind::Claim: return "claim";
    case PayloadKind::Assert: return "assert";
    case PayloadKind::ContractInvoke: return "contract-invoke";
    }
    return "?";
}

std::optional<PayloadKind> parse_payload_kind(std::string_view text)
{
    for (auto kind : {PayloadKind::Transfer, PayloadKind::Create, PayloadKind::Claim, PayloadKind::Assert,
                      PayloadKind::ContractInvoke})
        if (to_string(kind) == text)
            return kind;
    return std::nullopt;
}

const Scalar* Payload::find(std::string_view key) const
{
    auto it = attributes.find(key);
    return it == attributes.end() ? nullptr : &it->second;
}

std::optional<std::int64_t> Payload::int_attr(std::string_view key) const
{
    const auto* v = find(key);
    return v ? as_int(*v) : std::nullopt;
}

std::optional<std::string> Payload::string_attr(std::string_view key) const
{
    const auto* v = find(key);
    return v ? as_string(*v) : std::nullopt;
}

std::optional<ObjectId> Payload::object_attr(std::string_view key) const
{
    auto s = string_attr(key);
    return s ? ObjectId::parse(*s) : std::nullopt;
}

void check_payload(const Payload& payload)
{
    auto require_int = [&](std::string_view key) {
        if (!payload.int_attr(key))
            throw Error(ErrorCode::MalformedPayload,
                        std::string(to_string(payload.kind)) + " payload requires integer attribute '" + std::string(key) + "'");
    };
    auto require_object = [&](std::string_view key) {
        if (!payload.object_attr(key))
            throw Error(ErrorCode::MalformedPayload,
                        std::string(to_string(payload.kind)) + " payload requires object id attribute '" + std::string(key) + "'");
    };
    auto require_any = [&](std::string_view key) {
        if (!payload.find(key))
            throw Error(ErrorCode::MalformedPayload,
                        std::string(to_string(payload.kind)) + " payload requires attribute '" + std::string(key) + "'");
    };
    switch (payload.kind) {
    case PayloadKind::Transfer:
        require_int(attr::amount);
        require_int(attr::from);
        require_int(attr::to);
        break;
    case PayloadKind::Create:
        require_object(attr::object_id);
        break;
    case PayloadKind::Claim:
        require_object(attr::object_id);
        require_int(attr::claimant);
        break;
    case PayloadKind::Assert:
        if (!payload.string_attr(attr::property))
            throw Error(ErrorCode::MalformedPayload, "assert payload requires string attribute 'property'");
        require_any(attr::value);
        break;
    case PayloadKind::ContractInvoke:
        if (!payload.string_attr(attr::contract))
            throw Error(ErrorCode::MalformedPayload, "contract-invoke payload requires string attribute 'contract'");
        break;
    }
    for (const auto& [key, value] : payload.attributes)
        if (key.empty() || key.find_first_of("|,=\"%\n") != std::string::npos)
            throw Error(ErrorCode::MalformedPayload, "attribute name '" + key + "' contains a reserved character");
}

// ---------------------------------------------------------------------------

namespace {

std::string join_parties(const std::set<PartyId>& parties)
{
    std::string out;
    for (const auto& p : parties) {
        if (!out.empty()) out.push_back(',');
        out += std::to_string(p.id);
    }
    return out;
}

std::string join_objects(const std::set<ObjectId>& objects)
{
    std::string out;
    for (const auto& o : objects) {
        if (!out.empty()) out.push_back(',');
        out += o.text();
    }
    return out;
}

std::string body_text(const std::set<PartyId>& parties, const std::set<ObjectId>& objects, const Payload& payload,
                      const PartyId& proposer, std::uint64_t nonce)
{
    std::string out = std::to_string(proposer.id);
    out += '|';
    out += to_string(payload.kind);
    out += '|';
    out += join_parties(parties);
    out += '|';
    out += join_objects(objects);
    out += '|';
    out += attributes_text(payload.attributes);
    out += '|';
    out += std::to_string(nonce);
    return out;
}

} // namespace

std::string attributes_text(const Attributes& attributes)
{
    std::string out;
    for (const auto& [key, value] : attributes) {
        if (!out.empty()) out.push_back(',');
        out += key;
        out += '=';
        out += scalar_text(value);
    }
    return out;
}

Record make_record(std::uint64_t index, std::set<PartyId> parties, std::set<ObjectId> objects, Payload payload,
                   PartyId proposer, std::uint64_t nonce)
{
    check_payload(payload);
    if (payload.kind == PayloadKind::Create || payload.kind == PayloadKind::Claim) {
        auto target = payload.object_attr(attr::object_id);
        if (!objects.contains(*target))
            throw Error(ErrorCode::MalformedPayload,
                        std::string(to_string(payload.kind)) + " record must list its object " + target->text());
    }
    auto body = std::make_shared<Record::Body>();
    body->digest = fnv1a(body_text(parties, objects, payload, proposer, nonce));
    body->parties = std::move(parties);
    body->objects = std::move(objects);
    body->payload = std::move(payload);
    body->proposer = std::move(proposer);
    body->nonce = nonce;
    return Record(index, std::move(body));
}

Record Record::at_index(std::uint64_t index) const
{
    return Record(index, body_);
}

bool operator==(const Record& a, const Record& b)
{
    if (a.index_ != b.index_) return false;
    if (a.body_ == b.body_) return true;
    return a.digest() == b.digest() && a.parties() == b.parties() && a.objects() == b.objects() &&
           a.payload().kind == b.payload().kind && a.payload().attributes == b.payload().attributes &&
           a.proposer() == b.proposer() && a.nonce() == b.nonce();
}

RecordSequence RecordSequence::prefix(std::size_t n) const
{
    RecordSequence out;
    n = std::min(n, records_.size());
    out.records_.assign(records_.begin(), records_.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

void RecordSequence::extend(Record r)
{
    if (r.index() != records_.size())
        throw Error(ErrorCode::IndexGap, "record index " + std::to_string(r.index()) + " does not follow sequence length " +
                                             std::to_string(records_.size()));
    records_.push_back(std::move(r));
}

RecordSequence append(const RecordSequence& seq, Record r)
{
    RecordSequence out = seq;
    out.extend(std::move(r));
    return out;
}

bool is_duplicate_transaction(const RecordSequence& seq, const Record& r)
{
    if (r.kind() != PayloadKind::Transfer && r.kind() != PayloadKind::Claim)
        return false;
    return LedgerState::replay({}, seq).duplicates(r);
}

// ---------------------------------------------------------------------------

std::string record_line(const Record& r)
{
    return std::to_string(r.index()) + "|" + body_text(r.parties(), r.objects(), r.payload(), r.proposer(), r.nonce());
}

Record parse_record_line(std::string_view line)
{
    auto fields = split(line, '|');
    auto fail = [&](const std::string& why) -> Record {
        throw Error(ErrorCode::ParseError, "record line '" + std::string(line) + "': " + why);
    };
    if (fields.size() != 7)
        return fail("expected 7 fields");
    auto index = parse_number<std::uint64_t>(fields[0]);
    auto proposer = parse_number<std::uint32_t>(fields[1]);
    auto kind = parse_payload_kind(fields[2]);
    auto nonce = parse_number<std::uint64_t>(fields[6]);
    if (!index || !proposer || !kind || !nonce)
        return fail("bad index, proposer, kind or nonce");
    std::set<PartyId> parties;
    if (!fields[3].empty())
        for (auto p : split(fields[3], ',')) {
            auto id = parse_number<std::uint32_t>(p);
            if (!id) return fail("bad party id");
            parties.insert(PartyId{*id, {}});
        }
    std::set<ObjectId> objects;
    if (!fields[4].empty())
        for (auto o : split(fields[4], ',')) {
            auto id = ObjectId::parse(o);
            if (!id) return fail("bad object id");
            objects.insert(*id);
        }
    Payload payload{*kind, {}};
    if (!fields[5].empty())
        for (auto kv : split(fields[5], ',')) {
            auto eq = kv.find('=');
            if (eq == std::string_view::npos) return fail("attribute without '='");
            auto value = parse_scalar(kv.substr(eq + 1));
            if (!value) return fail("bad attribute value");
            payload.attributes.emplace(std::string(kv.substr(0, eq)), std::move(*value));
        }
    PartyId proposer_id{*proposer, *proposer == kSystemPartyId ? "system" : ""};
    return make_record(*index, std::move(parties), std::move(objects), std::move(payload), proposer_id, *nonce);
}

// ---------------------------------------------------------------------------

LedgerState::LedgerState(std::span<const ObjectDescriptor> genesis)
{
    for (const auto& d : genesis)
        register_object(d.object_id, d.attributes);
}

LedgerState LedgerState::replay(std::span<const ObjectDescriptor> genesis, const RecordSequence& seq, std::size_t upto)
{
    LedgerState state(genesis);
    const std::size_t n = std::min(upto, seq.size());
    for (std::size_t i = 0; i < n; ++i)
        state.apply(seq[i]);
    return state;
}

void LedgerState::register_object(const ObjectId& id, const Attributes& attributes)
{
    existing_.insert(id);
    for (const auto& [key, value] : attributes) {
        if (key == attr::object_id) continue;
        claims_[{id, key}] = value;
    }
    auto owner_it = attributes.find(attr::owner);
    if (owner_it != attributes.end())
        if (auto owner = as_int(owner_it->second)) {
            owners_[id] = static_cast<std::uint32_t>(*owner);
            auto amount_it = attributes.find(attr::amount);
            if (amount_it != attributes.end())
                if (auto amount = as_int(amount_it->second))
                    balances_[static_cast<std::uint32_t>(*owner)] += *amount;
        }
}

void LedgerState::apply(const Record& r)
{
    const auto& p = r.payload();
    switch (p.kind) {
    case PayloadKind::Create: {
        register_object(*p.object_attr(attr::object_id), p.attributes);
        ++created_by_[r.proposer().id];
        break;
    }
    case PayloadKind::Transfer: {
        const auto from = static_cast<std::uint32_t>(*p.int_attr(attr::from));
        const auto to = static_cast<std::uint32_t>(*p.int_attr(attr::to));
        const auto amount = *p.int_attr(attr::amount);
        balances_[from] -= amount;
        balances_[to] += amount;
        for (const auto& o : r.objects()) {
            spent_.insert({from, o});
            spent_.erase({to, o});
            owners_[o] = to;
        }
        break;
    }
    case PayloadKind::Claim:
        claimed_.insert(*p.object_attr(attr::object_id));
        break;
    case PayloadKind::Assert: {
        const auto property = *p.string_attr(attr::property);
        for (const auto& o : r.objects())
            claims_[{o, property}] = *p.find(attr::value);
        break;
    }
    case PayloadKind::ContractInvoke:
        break;
    }
    ++applied_;
}

std::optional<std::uint32_t> LedgerState::owner(const ObjectId& id) const
{
    auto it = owners_.find(id);
    if (it == owners_.end()) return std::nullopt;
    return it->second;
}

std::int64_t LedgerState::balance(std::uint32_t party) const
{
    auto it = balances_.find(party);
    return it == balances_.end() ? 0 : it->second;
}

bool LedgerState::spent_by(std::uint32_t party, const ObjectId& id) const
{
    return spent_.contains({party, id});
}

std::optional<Scalar> LedgerState::claim(const ObjectId& id, std::string_view property) const
{
    auto it = claims_.find({id, std::string(property)});
    if (it == claims_.end()) return std::nullopt;
    return it->second;
}

std::size_t LedgerState::created_by(std::uint32_t party) const
{
    auto it = created_by_.find(party);
    return it == created_by_.end() ? 0 : it->second;
}

bool LedgerState::duplicates(const Record& r) const
{
    const auto& p = r.payload();
    if (p.kind == PayloadKind::Transfer) {
        const auto from = static_cast<std::uint32_t>(*p.int_attr(attr::from));
        return std::any_of(r.objects().begin(), r.objects().end(), [&](const ObjectId& o) { return spent_by(from, o); });
    }
    if (p.kind == PayloadKind::Claim)
        return claimed(*p.object_attr(attr::object_id));
    return false;
}

} // namespace ledgerlab
