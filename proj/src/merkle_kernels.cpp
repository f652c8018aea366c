#include "sentry/merkle_kernels.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "sentry/errors.hpp"

namespace sentry::kernels {

namespace {

std::span<const std::uint8_t> block_at(std::span<const std::uint8_t> region, std::uint32_t bs, std::uint64_t i) {
    return region.subspan(i * bs, bs);
}

std::uint64_t div_ceil(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Number of level-`level` nodes that cover at least one real data block.
std::uint64_t occupied_width(const Geometry& geo, std::uint32_t level) {
    const std::uint64_t span = geo.level_width(geo.depth() - level); // leaves under one node
    return div_ceil(geo.data_blocks(), span);
}

struct LevelPlan {
    std::uint32_t level;
    std::uint64_t width;
    std::uint64_t occupied;
    std::uint64_t base; // first block of this level inside the hash region
};

std::vector<LevelPlan> plan(const Geometry& geo) {
    std::vector<LevelPlan> out;
    for (std::uint32_t l = 0; l < geo.depth(); ++l) {
        out.push_back({l, geo.level_width(l), occupied_width(geo, l), level_offset(l, geo.fanout())});
    }
    return out;
}

void check_leaves(const Geometry& geo, std::span<const Digest> leaves) {
    if (leaves.size() > geo.capacity()) throw Error(Errc::invalid_argument, "more leaves than tree capacity");
}

// Slot digest for child `c` of a node at `level`, given the child level's computed digests.
const Digest& child_digest(const Geometry& geo, std::uint32_t level, std::uint64_t c,
                           std::span<const Digest> children, const std::vector<Digest>& empty) {
    if (c < children.size()) return children[c];
    return empty[geo.depth() - level - 1];
}

void write_node(std::vector<std::uint8_t>& region, std::uint32_t bs, std::uint64_t block_index,
                const Block& serialized) {
    std::memcpy(region.data() + block_index * bs, serialized.data(), bs);
}

} // namespace

std::vector<Digest> empty_digests(Hasher& h, const Geometry& geo) {
    std::vector<Digest> out;
    out.reserve(geo.depth() + 1);
    out.push_back(h.digest_block(Block(geo.block_size(), 0)));
    for (std::uint32_t k = 1; k <= geo.depth(); ++k) {
        const std::vector<Digest> kids(geo.fanout(), out.back());
        out.push_back(h.digest_node(kids));
    }
    return out;
}

std::vector<Digest> hash_blocks_serial(Hasher& h, std::span<const std::uint8_t> blocks, std::uint32_t block_size) {
    const std::uint64_t n = blocks.size() / block_size;
    std::vector<Digest> out(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = h.digest_block(block_at(blocks, block_size, i));
    return out;
}

std::vector<Digest> hash_blocks_parallel(Hasher& h, std::span<const std::uint8_t> blocks, std::uint32_t block_size) {
    const auto n = static_cast<std::int64_t>(blocks.size() / block_size);
    std::vector<Digest> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = h.digest_block(block_at(blocks, block_size, static_cast<std::uint64_t>(i)));
    }
    return out;
}

TreeImage build_tree_serial(Hasher& h, const Geometry& geo, std::span<const Digest> leaves) {
    check_leaves(geo, leaves);
    const std::uint32_t bs = geo.block_size();
    const std::uint32_t f = geo.fanout();
    const auto empty = empty_digests(h, geo);
    const auto levels = plan(geo);

    TreeImage img;
    img.hash_region.assign(geo.layout().hash_len * bs, 0);
    img.node_digests.resize(geo.depth());

    std::span<const Digest> children = leaves;
    for (std::uint32_t l = geo.depth(); l-- > 0;) {
        const auto& lp = levels[l];
        auto& digests = img.node_digests[l];
        digests.assign(lp.width, empty[geo.depth() - l]);
        const Block empty_block = h.serialize_node(std::vector<Digest>(f, empty[geo.depth() - l - 1]));
        for (std::uint64_t i = 0; i < lp.width; ++i) {
            if (i >= lp.occupied) {
                write_node(img.hash_region, bs, lp.base + i, empty_block);
                continue;
            }
            std::vector<Digest> kids(f);
            for (std::uint32_t s = 0; s < f; ++s) kids[s] = child_digest(geo, l, i * f + s, children, empty);
            const Block node = h.serialize_node(kids);
            write_node(img.hash_region, bs, lp.base + i, node);
            digests[i] = h.digest_block(node);
        }
        children = digests;
    }
    img.root = img.node_digests[0][0];
    return img;
}

TreeImage build_tree_parallel(Hasher& h, const Geometry& geo, std::span<const Digest> leaves) {
    check_leaves(geo, leaves);
    const std::uint32_t bs = geo.block_size();
    const std::uint32_t f = geo.fanout();
    const auto empty = empty_digests(h, geo);
    const auto levels = plan(geo);

    TreeImage img;
    img.hash_region.assign(geo.layout().hash_len * bs, 0);
    img.node_digests.resize(geo.depth());

    std::span<const Digest> children = leaves;
    for (std::uint32_t l = geo.depth(); l-- > 0;) {
        const auto& lp = levels[l];
        auto& digests = img.node_digests[l];
        digests.assign(lp.width, empty[geo.depth() - l]);
        const Block empty_block = h.serialize_node(std::vector<Digest>(f, empty[geo.depth() - l - 1]));
        const auto width = static_cast<std::int64_t>(lp.width);
        const auto occupied = static_cast<std::int64_t>(lp.occupied);
#pragma omp parallel for schedule(static)
        for (std::int64_t si = 0; si < width; ++si) {
            const auto i = static_cast<std::uint64_t>(si);
            if (si >= occupied) {
                write_node(img.hash_region, bs, lp.base + i, empty_block);
                continue;
            }
            std::vector<Digest> kids(f);
            for (std::uint32_t s = 0; s < f; ++s) kids[s] = child_digest(geo, l, i * f + s, children, empty);
            const Block node = h.serialize_node(kids);
            write_node(img.hash_region, bs, lp.base + i, node);
            digests[i] = h.digest_block(node);
        }
        children = digests;
    }
    img.root = img.node_digests[0][0];
    return img;
}

std::string AuditFinding::line() const {
    switch (kind) {
    case Kind::ok: return "OK root=" + root.hex();
    case Kind::node_mismatch: return "NODE-MISMATCH level=" + std::to_string(level) + " idx=" + std::to_string(index);
    case Kind::leaf_mismatch: return "LEAF-MISMATCH idx=" + std::to_string(index);
    }
    return {};
}

namespace {

void check_regions(const Geometry& geo, std::span<const std::uint8_t> hash_region, std::span<const std::uint8_t> data_region) {
    if (hash_region.size() != geo.layout().hash_len * geo.block_size() ||
        data_region.size() != geo.layout().data_len * geo.block_size()) {
        throw Error(Errc::invalid_argument, "audit regions do not match the geometry");
    }
}

// Breadth-first order of every checked relation: the root first, then each node's children
// level by level, then the leaves. A violation's key is its position in that order.
struct Relation {
    std::uint32_t level; // level of the child node; depth means a leaf
    std::uint64_t index;
};

std::uint64_t relation_count(const Geometry& geo) {
    return level_offset(geo.depth(), geo.fanout()) + geo.capacity();
}

Relation relation_at(const Geometry& geo, std::uint64_t key) {
    std::uint64_t width = 1;
    for (std::uint32_t l = 0; l <= geo.depth(); ++l) {
        if (key < width) return {l, key};
        key -= width;
        width *= geo.fanout();
    }
    return {geo.depth(), 0};
}

// True when the relation holds.
bool relation_ok(const Geometry& geo, std::span<const std::uint8_t> hash_region,
                 const std::vector<Digest>& hash_digests, const std::vector<Digest>& data_digests,
                 const Digest& empty_leaf, const Digest& root, Relation r) {
    const std::uint32_t f = geo.fanout();
    const std::uint32_t bs = geo.block_size();
    if (r.level == 0) return hash_digests[0] == root;
    const std::uint64_t parent = r.index / f;
    const auto slot = static_cast<std::uint32_t>(r.index % f);
    const std::uint64_t parent_block = level_offset(r.level - 1, f) + parent;
    const auto slot_bytes = hash_region.subspan(parent_block * bs + slot * kDigestSize, kDigestSize);
    const Digest& child = r.level < geo.depth()
                              ? hash_digests[level_offset(r.level, f) + r.index]
                              : (r.index < data_digests.size() ? data_digests[r.index] : empty_leaf);
    return std::equal(slot_bytes.begin(), slot_bytes.end(), child.bytes.begin());
}

AuditFinding finding_for(const Geometry& geo, std::uint64_t key, const Digest& root) {
    AuditFinding out;
    out.root = root;
    if (key == std::numeric_limits<std::uint64_t>::max()) return out;
    const Relation r = relation_at(geo, key);
    out.kind = r.level == geo.depth() ? AuditFinding::Kind::leaf_mismatch : AuditFinding::Kind::node_mismatch;
    out.level = r.level;
    out.index = r.index;
    return out;
}

} // namespace

AuditFinding audit_serial(Hasher& h, const Geometry& geo, std::span<const std::uint8_t> hash_region,
                          std::span<const std::uint8_t> data_region, const Digest& root) {
    check_regions(geo, hash_region, data_region);
    const auto hash_digests = hash_blocks_serial(h, hash_region, geo.block_size());
    const auto data_digests = hash_blocks_serial(h, data_region, geo.block_size());
    const Digest empty_leaf = h.digest_block(Block(geo.block_size(), 0));
    const std::uint64_t n = relation_count(geo);
    for (std::uint64_t key = 0; key < n; ++key) {
        if (!relation_ok(geo, hash_region, hash_digests, data_digests, empty_leaf, root, relation_at(geo, key))) {
            return finding_for(geo, key, root);
        }
    }
    return finding_for(geo, std::numeric_limits<std::uint64_t>::max(), root);
}

AuditFinding audit_parallel(Hasher& h, const Geometry& geo, std::span<const std::uint8_t> hash_region,
                            std::span<const std::uint8_t> data_region, const Digest& root) {
    check_regions(geo, hash_region, data_region);
    const auto hash_digests = hash_blocks_parallel(h, hash_region, geo.block_size());
    const auto data_digests = hash_blocks_parallel(h, data_region, geo.block_size());
    const Digest empty_leaf = h.digest_block(Block(geo.block_size(), 0));
    const auto n = static_cast<std::int64_t>(relation_count(geo));
    std::uint64_t first_bad = std::numeric_limits<std::uint64_t>::max();
    // Walk levels in order so a shallow violation short-circuits the deeper scan.
    std::int64_t begin = 0;
    std::int64_t width = 1;
    for (std::uint32_t l = 0; l <= geo.depth() && begin < n; ++l) {
        const std::int64_t end = std::min<std::int64_t>(n, begin + width);
#pragma omp parallel for reduction(min : first_bad) schedule(static)
        for (std::int64_t key = begin; key < end; ++key) {
            const Relation r{l, static_cast<std::uint64_t>(key - begin)};
            if (!relation_ok(geo, hash_region, hash_digests, data_digests, empty_leaf, root, r)) {
                first_bad = std::min(first_bad, static_cast<std::uint64_t>(key));
            }
        }
        if (first_bad != std::numeric_limits<std::uint64_t>::max()) break;
        begin = end;
        width *= geo.fanout();
    }
    return finding_for(geo, first_bad, root);
}

} // namespace sentry::kernels
