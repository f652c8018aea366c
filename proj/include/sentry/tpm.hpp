#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include "sentry/digest.hpp"
#include "sentry/hashing.hpp"

namespace sentry {

struct TpmState {
    HmacKey key;
    Digest hash_sb;
    Digest hash_current; // root after the latest committed transaction
    Digest hash_recover; // root before it

    friend bool operator==(const TpmState&, const TpmState&) = default;
};

/// Modeled trusted store: the superblock digest, two Merkle roots and the HMAC key.
///
/// Every mutation replaces the whole state at once. With a backing file the new state is
/// written to a temporary file, fsynced and renamed over the old one, so a crash leaves either
/// the old pair of roots or the new pair, never a mixture.
///
/// File layout: "SNTRYTPM" | version u32 LE | key[32] | hash_sb | hash_current | hash_recover.
class Tpm {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    static Tpm provision(const HmacKey& key, const Digest& hash_sb, const Digest& initial_root,
                         std::optional<std::filesystem::path> store = std::nullopt);
    static Tpm load(const std::filesystem::path& store);

    /// recover := current; current := new_root.
    void update_hash_current(const Digest& new_root);
    /// current := recover. Returns the new current.
    Digest recover_old_hash();

    const Digest& get_current() const noexcept { return state_.hash_current; }
    const Digest& get_recover() const noexcept { return state_.hash_recover; }
    const Digest& get_sb() const noexcept { return state_.hash_sb; }
    const HmacKey& key() const noexcept { return state_.key; }
    const TpmState& state() const noexcept { return state_; }
    std::uint64_t update_count() const noexcept { return updates_; }

    /// Test hook run after the temporary file is durable and before the rename.
    void set_persist_hook(std::function<void()> hook) { persist_hook_ = std::move(hook); }

    /// In-memory copy detached from any backing file.
    Tpm detached() const;
    /// In-memory store holding exactly `s`.
    static Tpm restore(const TpmState& s) { return Tpm(s, std::nullopt); }

    static std::vector<std::uint8_t> encode(const TpmState& s);
    static TpmState decode(std::span<const std::uint8_t> bytes);

private:
    Tpm(TpmState state, std::optional<std::filesystem::path> store)
        : state_(state), store_(std::move(store)) {}

    void commit(const TpmState& next);

    TpmState state_;
    std::optional<std::filesystem::path> store_;
    std::function<void()> persist_hook_;
    std::uint64_t updates_ = 0;
};

} // namespace sentry
