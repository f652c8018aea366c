#pragma once

#include <cstdint>
#include <optional>

#include "sentry/errors.hpp"
#include "sentry/merkle.hpp"
#include "sentry/txlog.hpp"

namespace sentry {

/// Integrity-checked block interface over the data region. Indices are data-region relative.
///
/// Any IntegrityFailure poisons the session: the active transaction is discarded and every
/// later call fails with IntegrityKind::halted.
class SafeLog {
public:
    SafeLog(const Geometry& geo, Hasher& hasher, Log& log, MerkleTree& tree, const RootCommitment& root);

    Block safe_read(std::uint64_t data_index);
    RootCommitment safe_write(std::uint64_t data_index, Block v);

    const RootCommitment& pinned_root() const noexcept { return pinned_; }
    void set_pinned_root(const RootCommitment& root) noexcept { pinned_ = root; }

    bool halted() const noexcept { return failure_.has_value(); }
    const std::optional<IntegrityFailure>& failure() const noexcept { return failure_; }
    /// Records `f` as the halting failure (used for failures detected outside this layer).
    void halt(const IntegrityFailure& f);

private:
    void check_running() const;
    template <class F>
    auto guarded(F&& f);

    const Geometry& geo_;
    Hasher& hasher_;
    Log& log_;
    MerkleTree& tree_;
    RootCommitment pinned_;
    std::optional<IntegrityFailure> failure_;
};

} // namespace sentry
