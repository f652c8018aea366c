#include "sentry/merkle.hpp"

#include <algorithm>
#include <cstring>

#include "sentry/errors.hpp"

namespace sentry {

MerkleTree::MerkleTree(const Geometry& geo, Hasher& hasher, Log& log)
    : geo_(geo), hasher_(hasher), log_(log) {}

RootCommitment MerkleTree::build_initial(std::span<const std::uint8_t> data) {
    if (data.size() != geo_.data_blocks() * geo_.block_size()) {
        throw Error(Errc::invalid_argument, "initial data must cover the whole data region");
    }
    const auto leaves = kernels::hash_blocks_parallel(hasher_, data, geo_.block_size());
    const auto tree = kernels::build_tree_parallel(hasher_, geo_, leaves);
    const std::uint32_t bs = geo_.block_size();
    for (std::uint64_t i = 0; i < geo_.layout().hash_len; ++i) {
        const auto* p = tree.hash_region.data() + i * bs;
        log_.write_hash(geo_.layout().hash_start + i, Block(p, p + bs));
    }
    return {tree.root};
}

std::vector<Block> MerkleTree::read_path(const MerklePath& path, const RootCommitment& root) {
    std::vector<Block> blocks;
    blocks.reserve(path.size());
    Digest expected = root.digest;
    for (const auto& step : path) {
        blocks.push_back(log_.read(step.node_block, expected));
        std::memcpy(expected.bytes.data(), blocks.back().data() + step.child_slot * kDigestSize, kDigestSize);
    }
    return blocks;
}

Digest MerkleTree::get_hash_from_root(std::uint64_t data_index, const RootCommitment& root) {
    if (data_index >= geo_.data_blocks()) {
        throw Error(Errc::out_of_range, "data index " + std::to_string(data_index) + " beyond data region");
    }
    const auto path = geo_.leaf_path(data_index);
    const auto blocks = read_path(path, root);
    const auto slot = path.back().child_slot;
    return Digest::from_bytes(std::span(blocks.back()).subspan(slot * kDigestSize, kDigestSize));
}

RootCommitment MerkleTree::update_hash(std::uint64_t data_index, const Digest& new_leaf, const RootCommitment& root) {
    if (data_index >= geo_.data_blocks()) {
        throw Error(Errc::out_of_range, "data index " + std::to_string(data_index) + " beyond data region");
    }
    const auto path = geo_.leaf_path(data_index);
    auto blocks = read_path(path, root);
    Digest carry = new_leaf;
    for (std::size_t k = path.size(); k-- > 0;) {
        Block& node = blocks[k];
        std::memcpy(node.data() + path[k].child_slot * kDigestSize, carry.bytes.data(), kDigestSize);
        carry = hasher_.digest_block(node);
        log_.write_hash(path[k].node_block, std::move(node));
    }
    return {carry};
}

AuditReport MerkleTree::verify_full(BlockDevice& dev, const Geometry& geo, Hasher& hasher, const RootCommitment& root) {
    const auto& l = geo.layout();
    auto read_range = [&](BlockAddr start, std::uint64_t len) {
        std::vector<std::uint8_t> out;
        out.reserve(len * geo.block_size());
        for (std::uint64_t i = 0; i < len; ++i) {
            const Block b = dev.read(start + i);
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    };
    const auto hash_region = read_range(l.hash_start, l.hash_len);
    const auto data_region = read_range(l.data_start, l.data_len);
    return kernels::audit_parallel(hasher, geo, hash_region, data_region, root.digest);
}

} // namespace sentry
