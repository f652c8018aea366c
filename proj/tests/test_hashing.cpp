#include <doctest.h>

#include <cstdlib>
#include <set>
#include <filesystem>
#include <unistd.h>

#include "oracle.hpp"
#include "sentry/errors.hpp"
#include "sentry/hashing.hpp"
#include "sentry/tpm.hpp"

using namespace sentry;

namespace {

Digest digest_of(const oracle::Tag& t) {
    Digest d;
    d.bytes = t;
    return d;
}

Digest make(std::uint8_t v) {
    Digest d;
    d.bytes.fill(v);
    return d;
}

std::filesystem::path scratch(const std::string& tag) {
    return std::filesystem::temp_directory_path() / ("sentry_" + tag + "_" + std::to_string(::getpid()));
}

} // namespace

TEST_CASE("hmac matches the published test vector") {
    HmacKey key;
    std::fill_n(key.bytes.begin(), 20, 0x0b); // short keys are zero-padded by HMAC itself
    Hasher h(key, HashMode::production, 64);
    const std::string msg = "Hi There";
    const auto d = h.digest_block(std::span(reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size()));
    CHECK(d.hex() == "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
    CHECK(h.hash_counter() == 1);
}

TEST_CASE("sha256 matches the published test vector") {
    const std::vector<std::uint8_t> abc{'a', 'b', 'c'};
    CHECK(sha256(abc).hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("digests agree with the independent hmac") {
    const HmacKey key = HmacKey::from_seed(3);
    Hasher h(key, HashMode::production, 128);
    oracle::Bytes blk(128);
    for (std::size_t i = 0; i < blk.size(); ++i) blk[i] = static_cast<std::uint8_t>(i * 7);
    CHECK(h.digest_block(blk) == digest_of(oracle::hmac(key.bytes, blk)));

    std::vector<Digest> kids{make(1), make(2), make(3), make(4)};
    oracle::Bytes packed(128, 0);
    for (int s = 0; s < 4; ++s) std::fill_n(packed.begin() + s * 32, 32, static_cast<std::uint8_t>(s + 1));
    CHECK(h.digest_node(kids) == digest_of(oracle::hmac(key.bytes, packed)));
    CHECK(h.serialize_node(kids) == packed);
    CHECK(Hasher::parse_node(packed, 4) == kids);
    CHECK(h.hash_counter() == 2);
    CHECK_THROWS_AS(h.digest_node(std::vector<Digest>{make(1)}), Error);
}

TEST_CASE("different keys give different digests") {
    Hasher a(HmacKey::from_seed(1), HashMode::production, 64);
    Hasher b(HmacKey::from_seed(2), HashMode::production, 64);
    const oracle::Bytes z(64, 0);
    CHECK(a.digest_block(z) != b.digest_block(z));
    CHECK(HmacKey::from_seed(9) == HmacKey::from_seed(9));
    CHECK(HmacKey::generate() != HmacKey::generate());
}

TEST_CASE("symbolic tags are stable per payload and distinct across payloads") {
    Hasher h(HmacKey::from_seed(1), HashMode::symbolic, 64);
    std::set<Digest> seen;
    for (int i = 0; i < 500; ++i) {
        oracle::Bytes blk(64, 0);
        blk[i % 64] = static_cast<std::uint8_t>(i / 64 + 1);
        const Digest d = h.digest_block(blk);
        CHECK(h.digest_block(blk) == d);
        seen.insert(d);
    }
    CHECK(seen.size() == 500);
    CHECK(h.hash_counter() == 1000);
}

TEST_CASE("hash mode comes from the environment") {
    ::unsetenv("SENTRY_HASH_MODE");
    CHECK(hash_mode_from_env() == HashMode::production);
    ::setenv("SENTRY_HASH_MODE", "symbolic", 1);
    CHECK(hash_mode_from_env() == HashMode::symbolic);
    ::setenv("SENTRY_HASH_MODE", "bogus", 1);
    CHECK_THROWS_AS(hash_mode_from_env(), Error);
    ::unsetenv("SENTRY_HASH_MODE");
}

TEST_CASE("hex round trip") {
    const std::vector<std::uint8_t> v{0x00, 0xab, 0xff};
    CHECK(to_hex(v) == "00abff");
    CHECK(from_hex("00ABff") == v);
    CHECK_THROWS_AS(from_hex("abc"), Error);
    CHECK_THROWS_AS(from_hex("zz"), Error);
}

TEST_CASE("trusted store keeps a two-slot window over a list of roots") {
    Tpm tpm = Tpm::provision(HmacKey::from_seed(1), make(0xaa), make(0));
    std::vector<Digest> history{make(0), make(0)}; // recover starts equal to current
    for (std::uint8_t i = 1; i < 30; ++i) {
        tpm.update_hash_current(make(i));
        history.push_back(make(i));
        CHECK(tpm.get_current() == history.back());
        CHECK(tpm.get_recover() == history[history.size() - 2]);
    }
    CHECK(tpm.update_count() == 29);
    CHECK(tpm.recover_old_hash() == make(28));
    CHECK(tpm.get_current() == make(28));
    CHECK(tpm.get_recover() == make(28));
    CHECK(tpm.get_sb() == make(0xaa));
}

TEST_CASE("trusted store persists atomically") {
    const auto path = scratch("tpm");
    {
        Tpm tpm = Tpm::provision(HmacKey::from_seed(4), make(1), make(2), path);
        tpm.update_hash_current(make(3));
    }
    Tpm loaded = Tpm::load(path);
    CHECK(loaded.get_current() == make(3));
    CHECK(loaded.get_recover() == make(2));
    CHECK(loaded.key() == HmacKey::from_seed(4));

    // A crash between the durable temp file and the rename leaves the old state.
    loaded.set_persist_hook([] { throw SimulatedCrash(0); });
    CHECK_THROWS_AS(loaded.update_hash_current(make(9)), SimulatedCrash);
    Tpm again = Tpm::load(path);
    CHECK(again.get_current() == make(3));

    const auto bytes = Tpm::encode(again.state());
    CHECK(bytes.size() == 8 + 4 + 32 * 4);
    CHECK(Tpm::decode(bytes) == again.state());
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(Tpm::decode(bad), Error);
    CHECK(again.detached().state() == again.state());
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".tmp");
}
