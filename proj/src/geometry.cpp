#include "sentry/geometry.hpp"

#include <string>

#include "sentry/errors.hpp"

namespace sentry {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) {
        throw Error(Errc::invalid_argument, "geometry overflows 64-bit block addresses");
    }
    return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t out = 0;
    if (__builtin_add_overflow(a, b, &out)) {
        throw Error(Errc::invalid_argument, "geometry overflows 64-bit block addresses");
    }
    return out;
}

std::uint64_t ipow(std::uint64_t base, std::uint32_t exp) {
    std::uint64_t out = 1;
    for (std::uint32_t i = 0; i < exp; ++i) out = checked_mul(out, base);
    return out;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(Errc::invalid_argument, msg);
}

} // namespace

GeometryConfig GeometryConfig::with_fanout(std::uint32_t fanout, std::uint32_t depth,
                                           std::uint64_t data_blocks, std::uint64_t log_blocks,
                                           std::uint32_t digest_size) {
    GeometryConfig c;
    c.digest_size = digest_size;
    c.fanout = fanout;
    c.block_size = static_cast<std::uint32_t>(checked_mul(fanout, digest_size));
    c.depth = depth;
    c.data_blocks = data_blocks;
    c.log_blocks = log_blocks;
    return c;
}

void GeometryConfig::validate() const {
    require(digest_size > 0, "digest_size must be positive");
    require(block_size % digest_size == 0, "block_size must be a multiple of digest_size");
    require(fanout == block_size / digest_size, "fanout must equal block_size / digest_size");
    require(fanout >= 2, "fanout must be at least 2");
    require(depth >= 1, "depth must be at least 1");
    require(data_blocks >= 1, "data_blocks must be at least 1");
    require(log_blocks >= 2, "log_blocks must be at least 2");
    require(data_blocks <= capacity(), "data_blocks exceeds fanout^depth");
}

std::uint64_t GeometryConfig::capacity() const { return ipow(fanout, depth); }

Region DiskLayout::region_of(BlockAddr addr) const {
    if (addr == superblock_at) return Region::superblock;
    if (in_log(addr)) return Region::log;
    if (in_hash(addr)) return Region::hash;
    if (in_data(addr)) return Region::data;
    throw Error(Errc::out_of_range, "block " + std::to_string(addr) + " beyond end of disk");
}

std::uint64_t level_offset(std::uint32_t level, std::uint64_t fanout) {
    std::uint64_t sum = 0;
    std::uint64_t width = 1;
    for (std::uint32_t i = 0; i < level; ++i) {
        sum = checked_add(sum, width);
        width = checked_mul(width, fanout);
    }
    return sum;
}

DiskLayout layout_for(const GeometryConfig& config) {
    config.validate();
    DiskLayout l;
    l.superblock_at = 0;
    l.log_start = 1;
    l.log_len = config.log_blocks;
    l.hash_start = checked_add(l.log_start, l.log_len);
    l.hash_len = level_offset(config.depth, config.fanout);
    l.data_start = checked_add(l.hash_start, l.hash_len);
    l.data_len = config.data_blocks;
    l.total_blocks = checked_add(l.data_start, l.data_len);
    return l;
}

std::uint32_t min_depth(std::uint64_t capacity_blocks, std::uint64_t fanout) {
    if (fanout < 2) throw Error(Errc::invalid_argument, "fanout must be at least 2");
    std::uint32_t d = 1;
    std::uint64_t reach = fanout;
    while (reach < capacity_blocks) {
        ++d;
        if (__builtin_mul_overflow(reach, fanout, &reach)) break;
    }
    return d;
}

BlockAddr node_location(std::uint32_t level, std::uint64_t node_index, const DiskLayout& layout,
                        const GeometryConfig& config) {
    if (level >= config.depth) {
        throw Error(Errc::out_of_range, "level " + std::to_string(level) + " >= depth");
    }
    if (node_index >= ipow(config.fanout, level)) {
        throw Error(Errc::out_of_range, "node index " + std::to_string(node_index) +
                                            " beyond level " + std::to_string(level));
    }
    return layout.hash_start + level_offset(level, config.fanout) + node_index;
}

MerklePath leaf_path(std::uint64_t data_index, const GeometryConfig& config,
                     const DiskLayout& layout) {
    if (data_index >= config.capacity()) {
        throw Error(Errc::out_of_range, "data index " + std::to_string(data_index) +
                                            " beyond tree capacity");
    }
    MerklePath path;
    path.reserve(config.depth);
    for (std::uint32_t k = 0; k < config.depth; ++k) {
        const std::uint64_t node_index = data_index / ipow(config.fanout, config.depth - k);
        const auto slot =
            static_cast<std::uint32_t>(data_index / ipow(config.fanout, config.depth - 1 - k) %
                                       config.fanout);
        path.push_back({node_location(k, node_index, layout, config), node_index, slot});
    }
    return path;
}

Geometry::Geometry(const GeometryConfig& config)
    : config_(config), layout_(layout_for(config)), capacity_(config.capacity()) {}

std::uint64_t Geometry::level_width(std::uint32_t level) const { return ipow(config_.fanout, level); }

BlockAddr Geometry::node_location(std::uint32_t level, std::uint64_t node_index) const {
    return sentry::node_location(level, node_index, layout_, config_);
}

MerklePath Geometry::leaf_path(std::uint64_t data_index) const {
    return sentry::leaf_path(data_index, config_, layout_);
}

BlockAddr Geometry::data_addr(std::uint64_t data_index) const {
    if (data_index >= layout_.data_len) {
        throw Error(Errc::out_of_range, "data index " + std::to_string(data_index) +
                                            " beyond data region");
    }
    return layout_.data_start + data_index;
}

} // namespace sentry
