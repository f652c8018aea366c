#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sentry/blockdev.hpp"
#include "sentry/geometry.hpp"
#include "sentry/hashing.hpp"
#include "sentry/merkle_kernels.hpp"
#include "sentry/txlog.hpp"

namespace sentry {

/// Digest of the root hash block; the value the trusted store holds.
struct RootCommitment {
    Digest digest;
    friend bool operator==(const RootCommitment&, const RootCommitment&) = default;
};

using AuditReport = kernels::AuditFinding;

/// The fat Merkle tree over the hash region. Every read and write goes through the log, so
/// tree updates share the file-system operation's transaction.
class MerkleTree {
public:
    MerkleTree(const Geometry& geo, Hasher& hasher, Log& log);

    /// Builds every hash block for `data` (data_len blocks, flat) and issues them through
    /// write_hash. Used once, at format time.
    RootCommitment build_initial(std::span<const std::uint8_t> data);

    /// Walks root to leaf, verifying each hash block against the slot above it.
    Digest get_hash_from_root(std::uint64_t data_index, const RootCommitment& root);

    /// Verified top-down read of the path, then a bottom-up rewrite with `new_leaf` in the
    /// leaf slot. Exactly depth write_hash calls and depth node digests.
    RootCommitment update_hash(std::uint64_t data_index, const Digest& new_leaf, const RootCommitment& root);

    /// Offline audit of the committed on-disk tree.
    static AuditReport verify_full(BlockDevice& dev, const Geometry& geo, Hasher& hasher, const RootCommitment& root);

private:
    std::vector<Block> read_path(const MerklePath& path, const RootCommitment& root);

    const Geometry& geo_;
    Hasher& hasher_;
    Log& log_;
};

} // namespace sentry
