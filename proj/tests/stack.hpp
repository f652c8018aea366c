#pragma once

#include <memory>

#include "sentry/blockdev.hpp"
#include "sentry/merkle.hpp"
#include "sentry/slog.hpp"
#include "sentry/txlog.hpp"

// A formatted disk with the log, tree and safe layer wired up by hand, no file system on top.
struct Stack {
    sentry::Geometry geo;
    sentry::MemDevice dev;
    sentry::Hasher hasher;
    std::unique_ptr<sentry::Log> log;
    std::unique_ptr<sentry::MerkleTree> tree;
    sentry::RootCommitment root;

    Stack(sentry::GeometryConfig c, std::uint64_t key_seed = 1, bool cache = true)
        : geo(c), dev(c.block_size, geo.layout().total_blocks),
          hasher(sentry::HmacKey::from_seed(key_seed), sentry::HashMode::production, c.block_size) {
        {
            sentry::Log fmt(dev, geo, hasher, false);
            sentry::MerkleTree t(geo, hasher, fmt);
            fmt.begin();
            root = t.build_initial(std::vector<std::uint8_t>(geo.data_blocks() * c.block_size, 0));
            fmt.apply_unlogged();
        }
        log = std::make_unique<sentry::Log>(dev, geo, hasher, cache);
        tree = std::make_unique<sentry::MerkleTree>(geo, hasher, *log);
    }
};
