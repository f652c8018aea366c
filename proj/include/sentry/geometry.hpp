#pragma once

#include <cstdint>
#include <vector>

namespace sentry {

using BlockAddr = std::uint64_t;

/// Disk dimensions. fanout is derived: block_size / digest_size.
struct GeometryConfig {
    std::uint32_t block_size = 4096;
    std::uint32_t digest_size = 32;
    std::uint32_t fanout = 128;
    std::uint32_t depth = 4;
    std::uint64_t data_blocks = 1;
    std::uint64_t log_blocks = 64;

    /// Builds a config whose block holds exactly `fanout` digests.
    static GeometryConfig with_fanout(std::uint32_t fanout, std::uint32_t depth,
                                      std::uint64_t data_blocks, std::uint64_t log_blocks,
                                      std::uint32_t digest_size = 32);

    /// Throws Error(invalid_argument) if any invariant is violated.
    void validate() const;

    /// fanout^depth, the number of leaf slots in the full tree.
    std::uint64_t capacity() const;

    friend bool operator==(const GeometryConfig&, const GeometryConfig&) = default;
};

enum class Region { superblock, log, hash, data };

/// Partition of the disk: superblock at 0, then log, hash and data regions.
struct DiskLayout {
    BlockAddr superblock_at = 0;
    BlockAddr log_start = 0;
    std::uint64_t log_len = 0;
    BlockAddr hash_start = 0;
    std::uint64_t hash_len = 0;
    BlockAddr data_start = 0;
    std::uint64_t data_len = 0;
    std::uint64_t total_blocks = 0;

    Region region_of(BlockAddr addr) const;
    bool in_data(BlockAddr addr) const { return addr >= data_start && addr < data_start + data_len; }
    bool in_hash(BlockAddr addr) const { return addr >= hash_start && addr < hash_start + hash_len; }
    bool in_log(BlockAddr addr) const { return addr >= log_start && addr < log_start + log_len; }

    friend bool operator==(const DiskLayout&, const DiskLayout&) = default;
};

struct PathStep {
    BlockAddr node_block;      // hash-region block holding this node
    std::uint64_t node_index;  // index of the node within its level
    std::uint32_t child_slot;  // slot within the node that leads toward the leaf
};

/// Root (level 0) first, leaf-holding node (level depth-1) last.
using MerklePath = std::vector<PathStep>;

DiskLayout layout_for(const GeometryConfig& config);

/// Smallest d >= 1 with fanout^d >= capacity_blocks.
std::uint32_t min_depth(std::uint64_t capacity_blocks, std::uint64_t fanout);

/// Number of hash blocks stored above `level`: sum of fanout^i for i < level.
std::uint64_t level_offset(std::uint32_t level, std::uint64_t fanout);

BlockAddr node_location(std::uint32_t level, std::uint64_t node_index, const DiskLayout& layout,
                        const GeometryConfig& config);

MerklePath leaf_path(std::uint64_t data_index, const GeometryConfig& config,
                     const DiskLayout& layout);

/// Config and layout bundled; the form most code passes around.
class Geometry {
public:
    explicit Geometry(const GeometryConfig& config);

    const GeometryConfig& config() const noexcept { return config_; }
    const DiskLayout& layout() const noexcept { return layout_; }

    std::uint32_t block_size() const noexcept { return config_.block_size; }
    std::uint32_t fanout() const noexcept { return config_.fanout; }
    std::uint32_t depth() const noexcept { return config_.depth; }
    std::uint64_t data_blocks() const noexcept { return layout_.data_len; }
    std::uint64_t capacity() const noexcept { return capacity_; }

    /// Number of nodes at `level` (fanout^level).
    std::uint64_t level_width(std::uint32_t level) const;
    BlockAddr node_location(std::uint32_t level, std::uint64_t node_index) const;
    MerklePath leaf_path(std::uint64_t data_index) const;
    BlockAddr data_addr(std::uint64_t data_index) const;
    BlockAddr root_block() const noexcept { return layout_.hash_start; }

private:
    GeometryConfig config_;
    DiskLayout layout_;
    std::uint64_t capacity_;
};

} // namespace sentry
