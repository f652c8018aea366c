#include "sentry/hashing.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <random>
#include <string>

#include "sentry/errors.hpp"

namespace sentry {

HashMode hash_mode_from_env() {
    const char* v = std::getenv("SENTRY_HASH_MODE");
    if (v == nullptr || *v == '\0' || std::strcmp(v, "production") == 0) return HashMode::production;
    if (std::strcmp(v, "symbolic") == 0) return HashMode::symbolic;
    throw Error(Errc::invalid_argument, std::string("SENTRY_HASH_MODE must be production or symbolic, got ") + v);
}

const char* hash_mode_name(HashMode mode) noexcept {
    return mode == HashMode::production ? "production" : "symbolic";
}

HmacKey HmacKey::generate() {
    HmacKey k;
    if (RAND_bytes(k.bytes.data(), static_cast<int>(k.bytes.size())) != 1) {
        throw Error(Errc::io, "RAND_bytes failed");
    }
    return k;
}

HmacKey HmacKey::from_seed(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    HmacKey k;
    for (auto& b : k.bytes) b = static_cast<std::uint8_t>(rng());
    return k;
}

Hasher::Hasher(const HmacKey& key, HashMode mode, std::uint32_t block_size)
    : key_(key), mode_(mode), block_size_(block_size),
      fanout_(static_cast<std::uint32_t>(block_size / kDigestSize)) {
    if (block_size == 0 || block_size % kDigestSize != 0) {
        throw Error(Errc::invalid_argument, "block size must be a positive multiple of the digest size");
    }
}

Digest Hasher::digest_block(std::span<const std::uint8_t> payload) {
    counter_.fetch_add(1, std::memory_order_relaxed);
    if (mode_ == HashMode::symbolic) return symbolic_tag(payload);
    Digest d;
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key_.bytes.data(), static_cast<int>(key_.bytes.size()), payload.data(),
             payload.size(), d.bytes.data(), &len) == nullptr ||
        len != kDigestSize) {
        throw Error(Errc::io, "HMAC-SHA256 failed");
    }
    return d;
}

Digest Hasher::symbolic_tag(std::span<const std::uint8_t> payload) {
    std::vector<std::uint8_t> key(payload.begin(), payload.end());
    std::lock_guard lock(registry_mu_);
    if (const auto it = registry_.find(key); it != registry_.end()) return it->second;
    // Tag layout: "SYM" marker, then the registration ordinal. Truncation to the digest width
    // would only bite past 2^64 payloads; the reverse map catches it regardless.
    Digest tag;
    tag.bytes[0] = 'S';
    tag.bytes[1] = 'Y';
    tag.bytes[2] = 'M';
    const std::uint64_t ordinal = registry_.size() + 1;
    for (int i = 0; i < 8; ++i) tag.bytes[8 + i] = static_cast<std::uint8_t>(ordinal >> (8 * i));
    if (const auto rev = reverse_.find(tag); rev != reverse_.end() && rev->second != key) {
        std::fprintf(stderr, "symbolic hash collision on tag %s\n", tag.hex().c_str());
        std::abort();
    }
    reverse_.emplace(tag, key);
    registry_.emplace(std::move(key), tag);
    return tag;
}

Block Hasher::serialize_node(std::span<const Digest> children) const {
    if (children.size() != fanout_) {
        throw Error(Errc::invalid_argument, "node needs exactly " + std::to_string(fanout_) +
                                                " children, got " + std::to_string(children.size()));
    }
    Block out(block_size_, 0);
    for (std::size_t i = 0; i < children.size(); ++i) {
        std::copy(children[i].bytes.begin(), children[i].bytes.end(), out.begin() + static_cast<std::ptrdiff_t>(i * kDigestSize));
    }
    return out;
}

std::vector<Digest> Hasher::parse_node(std::span<const std::uint8_t> block, std::uint32_t fanout) {
    if (block.size() < static_cast<std::size_t>(fanout) * kDigestSize) {
        throw Error(Errc::invalid_argument, "hash block too small for fanout");
    }
    std::vector<Digest> out(fanout);
    for (std::uint32_t i = 0; i < fanout; ++i) {
        out[i] = Digest::from_bytes(block.subspan(static_cast<std::size_t>(i) * kDigestSize, kDigestSize));
    }
    return out;
}

Digest Hasher::digest_node(std::span<const Digest> children) {
    return digest_block(serialize_node(children));
}

Digest sha256(std::span<const std::uint8_t> data) {
    Digest d;
    SHA256(data.data(), data.size(), d.bytes.data());
    return d;
}

} // namespace sentry
