#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "sentry/digest.hpp"

namespace sentry {

enum class HashMode {
    production, // HMAC-SHA256 under the trusted key
    symbolic,   // collision-free tags handed out per distinct payload, session-scoped
};

/// Reads SENTRY_HASH_MODE (production|symbolic). Unset means production.
HashMode hash_mode_from_env();
const char* hash_mode_name(HashMode mode) noexcept;

struct HmacKey {
    std::array<std::uint8_t, 32> bytes{};

    static HmacKey generate();
    static HmacKey from_seed(std::uint64_t seed);

    friend bool operator==(const HmacKey&, const HmacKey&) = default;
};

/// Keyed digests over blocks and over Merkle nodes, plus the per-session hash counter.
///
/// Nodes are hashed as their serialized hash block: child digests concatenated in slot order
/// and zero-padded to the block size, so digest_node(c) == digest_block(serialize_node(c)).
/// The block address is not an input; position is bound by the parent slot.
///
/// digest_* may be called concurrently. In symbolic mode every distinct payload gets a fresh
/// tag and the registry aborts on any tag reuse, so two different payloads can never be
/// confused inside one session.
class Hasher {
public:
    Hasher(const HmacKey& key, HashMode mode, std::uint32_t block_size);

    Hasher(const Hasher&) = delete;
    Hasher& operator=(const Hasher&) = delete;

    Digest digest_block(std::span<const std::uint8_t> payload);
    Digest digest_node(std::span<const Digest> children);
    Block serialize_node(std::span<const Digest> children) const;
    static std::vector<Digest> parse_node(std::span<const std::uint8_t> block, std::uint32_t fanout);

    std::uint64_t hash_counter() const noexcept { return counter_.load(std::memory_order_relaxed); }
    const HmacKey& key() const noexcept { return key_; }
    HashMode mode() const noexcept { return mode_; }
    std::uint32_t block_size() const noexcept { return block_size_; }
    std::uint32_t fanout() const noexcept { return fanout_; }

private:
    Digest symbolic_tag(std::span<const std::uint8_t> payload);

    HmacKey key_;
    HashMode mode_;
    std::uint32_t block_size_;
    std::uint32_t fanout_;
    std::atomic<std::uint64_t> counter_{0};

    std::mutex registry_mu_;
    std::map<std::vector<std::uint8_t>, Digest> registry_;
    std::map<Digest, std::vector<std::uint8_t>> reverse_;
};

/// Plain SHA-256, used for log commit records. Not a Merkle digest and not counted.
Digest sha256(std::span<const std::uint8_t> data);

} // namespace sentry
