#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "sentry/merkle_kernels.hpp"
#include "stack.hpp"

using namespace sentry;

namespace {

Digest as_digest(const oracle::Tag& t) {
    Digest d;
    d.bytes = t;
    return d;
}

oracle::Tag root_block_tag(const HmacKey& key, MemDevice& dev, const Geometry& geo) {
    return oracle::hmac(key.bytes, dev.raw_read(geo.root_block()));
}

std::vector<oracle::Bytes> data_of(MemDevice& dev, const Geometry& geo) {
    std::vector<oracle::Bytes> out;
    for (std::uint64_t i = 0; i < geo.data_blocks(); ++i) out.push_back(dev.raw_read(geo.data_addr(i)));
    return out;
}

} // namespace

TEST_CASE("initial build matches recursive recomputation, including partially filled capacity") {
    for (auto [f, d, n] : std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>>{
             {2, 3, 8}, {2, 3, 5}, {4, 2, 16}, {4, 3, 10}, {8, 2, 64}, {8, 3, 20}}) {
        Stack s(GeometryConfig::with_fanout(f, d, n, 8));
        const auto data = data_of(s.dev, s.geo);
        const oracle::TreeOracle o{s.hasher.key().bytes, f, d, s.geo.block_size(), &data};
        CHECK(s.root.digest == as_digest(o.root()));
        CHECK(s.root.digest == as_digest(root_block_tag(s.hasher.key(), s.dev, s.geo)));
        CHECK(MerkleTree::verify_full(s.dev, s.geo, s.hasher, s.root).clean());
    }
}

TEST_CASE("update_hash tracks random writes against the brute-force root") {
    std::mt19937_64 rng(17);
    Stack s(GeometryConfig::with_fanout(4, 3, 50, 64));
    RootCommitment root = s.root;
    for (int round = 0; round < 10; ++round) {
        s.log->begin();
        for (int w = 0; w < 3; ++w) {
            const std::uint64_t i = rng() % 50;
            Block b(s.geo.block_size());
            for (auto& x : b) x = static_cast<std::uint8_t>(rng());
            const auto h0 = s.hasher.hash_counter();
            s.log->write_data(s.geo.data_addr(i), b);
            root = s.tree->update_hash(i, s.hasher.digest_block(b), root);
            CHECK(s.hasher.hash_counter() - h0 >= 1 + s.geo.depth());
            CHECK(s.tree->get_hash_from_root(i, root) == s.hasher.digest_block(b));
        }
        s.log->commit();
        const auto data = data_of(s.dev, s.geo);
        const oracle::TreeOracle o{s.hasher.key().bytes, 4, 3, s.geo.block_size(), &data};
        CHECK(root.digest == as_digest(o.root()));
        CHECK(MerkleTree::verify_full(s.dev, s.geo, s.hasher, root).clean());
    }
}

TEST_CASE("audit pinpoints tampering") {
    Stack s(GeometryConfig::with_fanout(4, 2, 16, 8));
    Block b = s.dev.raw_read(s.geo.data_addr(6));
    b[0] ^= 1;
    s.dev.raw_write(s.geo.data_addr(6), b);
    auto a = MerkleTree::verify_full(s.dev, s.geo, s.hasher, s.root);
    CHECK(a.kind == kernels::AuditFinding::Kind::leaf_mismatch);
    CHECK(a.index == 6);

    Stack t(GeometryConfig::with_fanout(4, 2, 16, 8));
    Block n = t.dev.raw_read(t.geo.node_location(1, 2));
    n[5] ^= 1;
    t.dev.raw_write(t.geo.node_location(1, 2), n);
    a = MerkleTree::verify_full(t.dev, t.geo, t.hasher, t.root);
    CHECK(a.kind == kernels::AuditFinding::Kind::node_mismatch);
    CHECK(a.level == 1);
    CHECK(a.index == 2);
    CHECK_FALSE(MerkleTree::verify_full(t.dev, t.geo, t.hasher, RootCommitment{}).clean());
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
    for (auto [f, d, n] : std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>>{
             {2, 4, 16}, {4, 3, 37}, {8, 3, 300}, {16, 2, 256}}) {
        const Geometry geo(GeometryConfig::with_fanout(f, d, n, 4));
        Hasher h(HmacKey::from_seed(n), HashMode::production, geo.block_size());
        std::vector<std::uint8_t> data(n * geo.block_size());
        std::mt19937_64 rng(n);
        for (auto& x : data) x = static_cast<std::uint8_t>(rng());
        const auto ls = kernels::hash_blocks_serial(h, data, geo.block_size());
        const auto lp = kernels::hash_blocks_parallel(h, data, geo.block_size());
        CHECK(ls == lp);
        const auto ts = kernels::build_tree_serial(h, geo, ls);
        const auto tp = kernels::build_tree_parallel(h, geo, lp);
        CHECK(ts.hash_region == tp.hash_region);
        CHECK(ts.root == tp.root);
        CHECK(ts.node_digests == tp.node_digests);

        std::vector<oracle::Bytes> blocks;
        for (std::uint64_t i = 0; i < n; ++i) {
            blocks.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(i * geo.block_size()),
                                data.begin() + static_cast<std::ptrdiff_t>((i + 1) * geo.block_size()));
        }
        const oracle::TreeOracle o{h.key().bytes, f, d, geo.block_size(), &blocks};
        CHECK(ts.root == as_digest(o.root()));

        CHECK(kernels::audit_serial(h, geo, ts.hash_region, data, ts.root).clean());
        CHECK(kernels::audit_parallel(h, geo, tp.hash_region, data, tp.root).clean());
        data[geo.block_size() * (n / 2)] ^= 0x10;
        const auto as = kernels::audit_serial(h, geo, ts.hash_region, data, ts.root);
        const auto ap = kernels::audit_parallel(h, geo, tp.hash_region, data, tp.root);
        CHECK(as.kind == kernels::AuditFinding::Kind::leaf_mismatch);
        CHECK(as.index == n / 2);
        CHECK(as.line() == ap.line());
    }
}
