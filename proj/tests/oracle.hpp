#pragma once

// Test-side reference computations that share no code with the library.

#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <array>
#include <cstdint>
#include <vector>

namespace oracle {

using Bytes = std::vector<std::uint8_t>;
using Tag = std::array<std::uint8_t, 32>;

inline Tag hmac(const std::array<std::uint8_t, 32>& key, const Bytes& msg) {
    Tag out{};
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), 32, msg.data(), msg.size(), out.data(), &len);
    return out;
}

inline Tag sha(const Bytes& msg) {
    Tag out{};
    SHA256(msg.data(), msg.size(), out.data());
    return out;
}

// Root of a complete fanout-ary tree of the given depth over `image` data blocks, computed by
// plain recursion. A node is the HMAC of its children's tags packed into one block.
struct TreeOracle {
    std::array<std::uint8_t, 32> key;
    std::uint32_t fanout;
    std::uint32_t depth;
    std::uint32_t block_size;
    const std::vector<Bytes>* data; // data blocks in index order; shorter lists are zero-padded

    Tag leaf(std::uint64_t i) const {
        if (i < data->size()) return hmac(key, (*data)[i]);
        return hmac(key, Bytes(block_size, 0));
    }

    Tag node(std::uint32_t level, std::uint64_t index) const {
        Bytes block(block_size, 0);
        for (std::uint32_t s = 0; s < fanout; ++s) {
            const std::uint64_t child = index * fanout + s;
            const Tag t = level + 1 == depth ? leaf(child) : node(level + 1, child);
            std::copy(t.begin(), t.end(), block.begin() + static_cast<std::ptrdiff_t>(s) * 32);
        }
        return hmac(key, block);
    }

    Tag root() const { return node(0, 0); }
};

} // namespace oracle
