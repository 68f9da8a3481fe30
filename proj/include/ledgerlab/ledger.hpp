#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ledgerlab/error.hpp"
#include "ledgerlab/rng.hpp"

namespace ledgerlab {

// ---------------------------------------------------------------------------
// Scalars and attribute maps
// ---------------------------------------------------------------------------

/// Ledger state never holds floating point: integers, booleans, short strings.
using Scalar = std::variant<std::int64_t, bool, std::string>;
using Attributes = std::map<std::string, Scalar, std::less<>>;

/// Canonical text: integers in decimal, booleans as true/false, strings quoted
/// with %-escapes for the log separators.
std::string scalar_text(const Scalar& value);
std::optional<Scalar> parse_scalar(std::string_view text);

/// Interprets bare scenario-file words: integers, true/false, otherwise string.
Scalar scalar_from_word(std::string_view word);

std::optional<std::int64_t> as_int(const Scalar& value);
std::optional<std::string> as_string(const Scalar& value);
std::optional<bool> as_bool(const Scalar& value);

// ---------------------------------------------------------------------------
// Parties
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kSystemPartyId = 0xFFFFFFFFu;

struct PartyId {
    std::uint32_t id = 0;
    std::string label;

    friend bool operator==(const PartyId& a, const PartyId& b) { return a.id == b.id; }
    friend std::strong_ordering operator<=>(const PartyId& a, const PartyId& b) { return a.id <=> b.id; }
};

/// The protocol itself, used as proposer of records emitted by contract hooks.
PartyId system_party();

enum class Role : std::uint8_t { Participant, Maintainer };

struct Honesty {
    bool adversarial = false;
    std::string script;   // adversary script name when adversarial

    static Honesty honest() { return {}; }
    static Honesty adversary(std::string script_name) { return {true, std::move(script_name)}; }
};

struct Party {
    PartyId party_id;
    std::set<Role> roles;
    Honesty honesty;

    bool has_role(Role role) const { return roles.contains(role); }
};

// ---------------------------------------------------------------------------
// Object identifiers
// ---------------------------------------------------------------------------

/// 256-bit unsigned value, little-endian limbs.
struct U256 {
    std::array<std::uint64_t, 4> limbs{};

    static U256 from_u64(std::uint64_t v) { return U256{{v, 0, 0, 0}}; }
    /// Keeps the low `width` bits.
    U256 masked(unsigned width) const;
    std::string hex() const;
    static std::optional<U256> parse_hex(std::string_view text);
    bool fits_u64() const { return limbs[1] == 0 && limbs[2] == 0 && limbs[3] == 0; }

    friend bool operator==(const U256&, const U256&) = default;
    friend std::strong_ordering operator<=>(const U256& a, const U256& b)
    {
        for (int i = 3; i >= 0; --i)
            if (auto c = a.limbs[i] <=> b.limbs[i]; c != 0)
                return c;
        return std::strong_ordering::equal;
    }
};

struct ObjectId {
    enum class Scheme : std::uint8_t { Sequential, RandomBits };

    Scheme scheme = Scheme::Sequential;
    std::uint32_t issuer = 0;   // Sequential: the issuing party, kSystemPartyId for genesis/protocol
    std::uint16_t width = 0;    // RandomBits: 1..256
    U256 value;

    static ObjectId sequential(std::uint32_t issuer, std::uint64_t n);
    static ObjectId random_bits(std::uint16_t width, const U256& raw);
    static ObjectId random_bits(std::uint16_t width, Rng& rng);

    /// `s<issuer>.<n>` (issuer `sys` for the system) or `r<width>.<hex>`.
    std::string text() const;
    static std::optional<ObjectId> parse(std::string_view text);

    friend bool operator==(const ObjectId&, const ObjectId&) = default;
    friend std::strong_ordering operator<=>(const ObjectId& a, const ObjectId& b)
    {
        if (auto c = a.scheme <=> b.scheme; c != 0) return c;
        if (auto c = a.issuer <=> b.issuer; c != 0) return c;
        if (auto c = a.width <=> b.width; c != 0) return c;
        return a.value <=> b.value;
    }
};

inline constexpr unsigned kMaxObjectIdWidth = 256;

struct ObjectDescriptor {
    ObjectId object_id;
    std::optional<std::uint64_t> created_at_index;   // nullopt: genesis
    std::optional<PartyId> creator;                  // nullopt: system
    Attributes attributes;

    static ObjectDescriptor genesis(ObjectId id, Attributes attributes);
    bool is_genesis() const { return !created_at_index.has_value(); }
};

// ---------------------------------------------------------------------------
// Payloads and records
// ---------------------------------------------------------------------------

enum class PayloadKind : std::uint8_t { Transfer, Create, Claim, Assert, ContractInvoke };

std::string_view to_string(PayloadKind kind);
std::optional<PayloadKind> parse_payload_kind(std::string_view text);

namespace attr {
inline constexpr std::string_view amount = "amount";
inline constexpr std::string_view from = "from";
inline constexpr std::string_view to = "to";
inline constexpr std::string_view object_id = "object_id";
inline constexpr std::string_view owner = "owner";
inline constexpr std::string_view claimant = "claimant";
inline constexpr std::string_view property = "property";
inline constexpr std::string_view value = "value";
inline constexpr std::string_view contract = "contract";
} // namespace attr

struct Payload {
    PayloadKind kind = PayloadKind::ContractInvoke;
    Attributes attributes;

    const Scalar* find(std::string_view key) const;
    std::optional<std::int64_t> int_attr(std::string_view key) const;
    std::optional<std::string> string_attr(std::string_view key) const;
    /// Reads an attribute holding an ObjectId in canonical text form.
    std::optional<ObjectId> object_attr(std::string_view key) const;
};

/// Throws MalformedPayload when a required attribute for the kind is absent.
void check_payload(const Payload& payload);

/// Logical signature: records are attributed to (proposer, nonce).
struct RecordKey {
    std::uint32_t proposer = 0;
    std::uint64_t nonce = 0;

    friend bool operator==(const RecordKey&, const RecordKey&) = default;
    friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

class Record {
public:
    std::uint64_t index() const { return index_; }
    const std::set<PartyId>& parties() const { return body_->parties; }
    const std::set<ObjectId>& objects() const { return body_->objects; }
    const Payload& payload() const { return body_->payload; }
    PayloadKind kind() const { return body_->payload.kind; }
    const PartyId& proposer() const { return body_->proposer; }
    std::uint64_t nonce() const { return body_->nonce; }
    RecordKey key() const { return {body_->proposer.id, body_->nonce}; }

    /// Content hash over everything except the index.
    std::uint64_t digest() const { return body_->digest; }

    /// Same content placed at another logical time.
    Record at_index(std::uint64_t index) const;

    friend bool operator==(const Record& a, const Record& b);

private:
    struct Body {
        std::set<PartyId> parties;
        std::set<ObjectId> objects;
        Payload payload;
        PartyId proposer;
        std::uint64_t nonce = 0;
        std::uint64_t digest = 0;
    };

    Record(std::uint64_t index, std::shared_ptr<const Body> body) : index_(index), body_(std::move(body)) {}

    std::uint64_t index_ = 0;
    std::shared_ptr<const Body> body_;

    friend Record make_record(std::uint64_t, std::set<PartyId>, std::set<ObjectId>, Payload, PartyId, std::uint64_t);
};

Record make_record(std::uint64_t index, std::set<PartyId> parties, std::set<ObjectId> objects, Payload payload,
                   PartyId proposer, std::uint64_t nonce);

/// Append-only, gap-free sequence of records.
class RecordSequence {
public:
    RecordSequence() = default;

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const Record& operator[](std::size_t i) const { return records_[i]; }
    const Record& back() const { return records_.back(); }
    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }
    std::span<const Record> records() const { return records_; }

    /// First n records (all of them if n exceeds the length).
    RecordSequence prefix(std::size_t n) const;

    /// In-place append with the same contract as the free function.
    void extend(Record r);

    friend bool operator==(const RecordSequence& a, const RecordSequence& b) { return a.records_ == b.records_; }

private:
    std::vector<Record> records_;
};

/// Returns seq + r; seq is untouched. Throws IndexGap unless r.index() == seq.size().
RecordSequence append(const RecordSequence& seq, Record r);

/// Record re-spends an object its sender already gave away (Transfer), or claims
/// an object that was already claimed (Claim).
bool is_duplicate_transaction(const RecordSequence& seq, const Record& r);

// ---------------------------------------------------------------------------
// Event-log line format
// ---------------------------------------------------------------------------

/// `index|proposer|kind|parties|objects|attributes|nonce`; attributes as sorted
/// key=value pairs joined by commas.
std::string record_line(const Record& r);
std::string attributes_text(const Attributes& attributes);
Record parse_record_line(std::string_view line);

// ---------------------------------------------------------------------------
// Replayed ledger state
// ---------------------------------------------------------------------------

/// State derived purely from genesis descriptors plus records, one record at a
/// time. Everything an internal predicate may know lives here.
class LedgerState {
public:
    LedgerState() = default;
    explicit LedgerState(std::span<const ObjectDescriptor> genesis);

    static LedgerState replay(std::span<const ObjectDescriptor> genesis, const RecordSequence& seq,
                              std::size_t upto = SIZE_MAX);

    void apply(const Record& r);

    bool exists(const ObjectId& id) const { return existing_.contains(id); }
    std::optional<std::uint32_t> owner(const ObjectId& id) const;
    std::int64_t balance(std::uint32_t party) const;
    bool claimed(const ObjectId& id) const { return claimed_.contains(id); }
    /// Sender has given the object away and not received it back since.
    bool spent_by(std::uint32_t party, const ObjectId& id) const;
    /// Latest value the ledger states for (object, property): Assert records
    /// and creation attributes.
    std::optional<Scalar> claim(const ObjectId& id, std::string_view property) const;
    std::size_t created_by(std::uint32_t party) const;
    std::size_t records_applied() const { return applied_; }

    /// Would appending r duplicate a transaction or re-create an object?
    bool duplicates(const Record& r) const;

private:
    void register_object(const ObjectId& id, const Attributes& attributes);

    std::set<ObjectId> existing_;
    std::map<ObjectId, std::uint32_t> owners_;
    std::map<std::uint32_t, std::int64_t> balances_;
    std::set<std::pair<std::uint32_t, ObjectId>> spent_;
    std::set<ObjectId> claimed_;
    std::map<std::pair<ObjectId, std::string>, Scalar, std::less<>> claims_;
    std::map<std::uint32_t, std::size_t> created_by_;
    std::size_t applied_ = 0;
};

} // namespace ledgerlab
