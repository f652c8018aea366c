#include <doctest.h>

#include <map>

#include "sentry/errors.hpp"
#include "sentry/geometry.hpp"

using namespace sentry;

namespace {

std::uint64_t ipow(std::uint64_t b, std::uint32_t e) {
    std::uint64_t r = 1;
    while (e--) r *= b;
    return r;
}

// Lays out every node breadth-first by enumeration, independent of level_offset.
std::map<std::pair<std::uint32_t, std::uint64_t>, BlockAddr> enumerate_nodes(const GeometryConfig& c,
                                                                              BlockAddr hash_start) {
    std::map<std::pair<std::uint32_t, std::uint64_t>, BlockAddr> out;
    BlockAddr next = hash_start;
    std::vector<std::uint64_t> frontier{0};
    for (std::uint32_t level = 0; level < c.depth; ++level) {
        std::vector<std::uint64_t> kids;
        for (auto idx : frontier) {
            out[{level, idx}] = next++;
            for (std::uint32_t s = 0; s < c.fanout; ++s) kids.push_back(idx * c.fanout + s);
        }
        frontier = std::move(kids);
    }
    return out;
}

} // namespace

TEST_CASE("layout regions are contiguous and ordered") {
    const auto c = GeometryConfig::with_fanout(8, 2, 64, 16);
    const auto l = layout_for(c);
    CHECK(l.superblock_at == 0);
    CHECK(l.log_start == 1);
    CHECK(l.log_len == 16);
    CHECK(l.hash_start == 17);
    CHECK(l.hash_len == 1 + 8);
    CHECK(l.data_start == 26);
    CHECK(l.data_len == 64);
    CHECK(l.total_blocks == 90);
    CHECK(l.region_of(0) == Region::superblock);
    CHECK(l.region_of(16) == Region::log);
    CHECK(l.region_of(25) == Region::hash);
    CHECK(l.region_of(89) == Region::data);
    CHECK_THROWS_AS(l.region_of(90), Error);
}

TEST_CASE("hash region size is the geometric sum of level widths") {
    for (std::uint32_t f : {2u, 3u, 8u, 16u, 128u}) {
        for (std::uint32_t d = 1; d <= 4; ++d) {
            if (ipow(f, d) > (1ULL << 32)) continue;
            const auto c = GeometryConfig::with_fanout(f, d, 1, 4);
            std::uint64_t sum = 0;
            for (std::uint32_t i = 0; i < d; ++i) sum += ipow(f, i);
            CHECK(layout_for(c).hash_len == sum);
            CHECK(level_offset(d, f) == sum);
        }
    }
}

TEST_CASE("node_location matches breadth-first enumeration") {
    for (auto [f, d] : std::vector<std::pair<std::uint32_t, std::uint32_t>>{{2, 4}, {3, 3}, {8, 2}, {4, 3}}) {
        const auto c = GeometryConfig::with_fanout(f, d, ipow(f, d), 4);
        const Geometry g(c);
        for (const auto& [key, addr] : enumerate_nodes(c, g.layout().hash_start)) {
            CHECK(g.node_location(key.first, key.second) == addr);
        }
    }
}

TEST_CASE("leaf_path walks root to leaf by repeated division") {
    const auto c = GeometryConfig::with_fanout(3, 3, 27, 4);
    const Geometry g(c);
    for (std::uint64_t leaf = 0; leaf < 27; ++leaf) {
        const auto path = g.leaf_path(leaf);
        REQUIRE(path.size() == 3);
        for (std::uint32_t level = 0; level < 3; ++level) {
            const std::uint64_t below = ipow(3, 3 - level);     // leaves under one node at this level
            const std::uint64_t node = leaf / below;
            const auto slot = static_cast<std::uint32_t>((leaf % below) / (below / 3));
            CHECK(path[level].node_index == node);
            CHECK(path[level].child_slot == slot);
            CHECK(path[level].node_block == g.node_location(level, node));
        }
    }
    CHECK_THROWS_AS(g.leaf_path(27), Error);
}

TEST_CASE("min_depth is the smallest covering depth") {
    CHECK(min_depth(1, 8) == 1);
    CHECK(min_depth(8, 8) == 1);
    CHECK(min_depth(9, 8) == 2);
    CHECK(min_depth(64, 8) == 2);
    CHECK(min_depth(65, 8) == 3);
    CHECK(min_depth(1024, 128) == 2);
    CHECK(min_depth(128ULL * 128 * 128 * 128, 128) == 4);
}

TEST_CASE("invalid geometries are rejected") {
    CHECK_THROWS_AS(GeometryConfig::with_fanout(8, 2, 65, 4).validate(), Error); // more data than leaves
    CHECK_THROWS_AS(GeometryConfig::with_fanout(8, 0, 1, 4).validate(), Error);
    CHECK_THROWS_AS(GeometryConfig::with_fanout(8, 2, 0, 4).validate(), Error);
    CHECK_THROWS_AS(GeometryConfig::with_fanout(1, 2, 1, 4).validate(), Error);
    CHECK_THROWS_AS(GeometryConfig::with_fanout(128, 10, 1, 4).validate(), Error); // capacity overflows
    GeometryConfig odd = GeometryConfig::with_fanout(8, 2, 1, 4);
    odd.fanout = 7; // inconsistent with block_size / digest_size
    CHECK_THROWS_AS(odd.validate(), Error);
}

TEST_CASE("data addresses follow the hash region") {
    const Geometry g(GeometryConfig::with_fanout(8, 2, 64, 4));
    CHECK(g.data_addr(0) == g.layout().data_start);
    CHECK(g.data_addr(63) == g.layout().data_start + 63);
    CHECK_THROWS_AS(g.data_addr(64), Error);
    CHECK(g.root_block() == g.layout().hash_start);
    CHECK(g.level_width(1) == 8);
}
