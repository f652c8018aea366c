#pragma once

// Whole-tree kernels: bulk block hashing, bottom-up tree construction and full audits.
// Each comes as an OpenMP version and a serial reference; the two must agree bit-for-bit.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentry/geometry.hpp"
#include "sentry/hashing.hpp"

namespace sentry::kernels {

/// Hash region contents in on-disk (breadth-first) order plus the per-level node digests.
struct TreeImage {
    std::vector<std::uint8_t> hash_region;           // hash_len * block_size bytes
    std::vector<std::vector<Digest>> node_digests;   // [level][node_index]
    Digest root;
};

/// Digest of every block in a flat byte range of `count` blocks.
std::vector<Digest> hash_blocks_serial(Hasher& h, std::span<const std::uint8_t> blocks, std::uint32_t block_size);
std::vector<Digest> hash_blocks_parallel(Hasher& h, std::span<const std::uint8_t> blocks, std::uint32_t block_size);

/// Builds the full tree over `leaves` (one per data block; missing capacity uses the
/// empty-leaf digest). Subtrees lying wholly past the data region reuse the uniform empty
/// node instead of being rehashed.
TreeImage build_tree_serial(Hasher& h, const Geometry& geo, std::span<const Digest> leaves);
TreeImage build_tree_parallel(Hasher& h, const Geometry& geo, std::span<const Digest> leaves);

/// Digests of the uniform empty tree: [0] is the empty leaf, [k] a node whose subtree spans
/// k levels of empty leaves. Size depth+1.
std::vector<Digest> empty_digests(Hasher& h, const Geometry& geo);

struct AuditFinding {
    enum class Kind { ok, node_mismatch, leaf_mismatch } kind = Kind::ok;
    std::uint32_t level = 0;
    std::uint64_t index = 0;
    Digest root;

    std::string line() const;
    bool clean() const noexcept { return kind == Kind::ok; }
};

/// Checks root, every parent/child relation (breadth-first) and every leaf against its data
/// block; reports the first violation in that order.
AuditFinding audit_serial(Hasher& h, const Geometry& geo, std::span<const std::uint8_t> hash_region,
                          std::span<const std::uint8_t> data_region, const Digest& root);
AuditFinding audit_parallel(Hasher& h, const Geometry& geo, std::span<const std::uint8_t> hash_region,
                            std::span<const std::uint8_t> data_region, const Digest& root);

} // namespace sentry::kernels
