#include <doctest.h>

#include <filesystem>
#include <random>
#include <unistd.h>

#include "sentry/adversary.hpp"
#include "sentry/blockdev.hpp"
#include "sentry/errors.hpp"

using namespace sentry;

namespace {
Block filled(std::uint32_t bs, std::uint8_t v) { return Block(bs, v); }
} // namespace

TEST_CASE("memdevice reads back writes and counts them") {
    MemDevice d(64, 8);
    d.write(3, filled(64, 7));
    CHECK(d.read(3) == filled(64, 7));
    CHECK(d.read(0) == filled(64, 0));
    d.sync();
    CHECK(d.counters() == OpCounters{2, 1, 1});
    d.raw_write(4, filled(64, 1));
    CHECK(d.raw_read(4) == filled(64, 1));
    CHECK(d.counters() == OpCounters{2, 1, 1});
    CHECK_THROWS_AS(d.read(8), Error);
    CHECK_THROWS_AS(d.write(0, filled(63, 0)), Error);
}

TEST_CASE("crash drops or keeps exactly the unsynced writes") {
    MemDevice d(16, 4);
    d.write(0, filled(16, 1));
    d.sync();
    d.write(0, filled(16, 2));
    d.write(1, filled(16, 3));
    CHECK(d.unsynced_blocks() == 2);

    MemDevice keep(16, d.image());
    MemDevice drop(16, 4);
    drop.write(0, filled(16, 1));
    drop.sync();
    drop.write(0, filled(16, 2));
    drop.write(1, filled(16, 3));
    drop.crash(CrashPolicy::drop_all);
    CHECK(drop.read(0) == filled(16, 1));
    CHECK(drop.read(1) == filled(16, 0));

    d.crash(CrashPolicy::keep_all);
    CHECK(d.read(0) == filled(16, 2));
    CHECK(d.read(1) == filled(16, 3));
    CHECK(d.unsynced_blocks() == 0);
}

TEST_CASE("random-subset crash agrees with a shadow of durable and volatile values") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        MemDevice d(8, 6);
        std::vector<std::uint8_t> durable(6, 0), latest(6, 0);
        for (int step = 0; step < 20; ++step) {
            const auto a = rng() % 6;
            const auto v = static_cast<std::uint8_t>(rng() % 250 + 1);
            d.write(a, filled(8, v));
            latest[a] = v;
            if (rng() % 5 == 0) {
                d.sync();
                durable = latest;
            }
        }
        d.crash(CrashPolicy::random_subset, static_cast<std::uint64_t>(trial));
        for (BlockAddr a = 0; a < 6; ++a) {
            const auto v = d.read(a)[0];
            CHECK((v == durable[a] || v == latest[a]));
        }
    }
}

TEST_CASE("filedevice persists through reopen") {
    const auto path = std::filesystem::temp_directory_path() / ("sentry_fd_" + std::to_string(::getpid()));
    FileDevice::create(path, 32, 5);
    {
        FileDevice d(path, 32);
        CHECK(d.block_count() == 5);
        d.write(4, filled(32, 9));
        d.sync();
    }
    {
        FileDevice d(path, 32);
        CHECK(d.read(4) == filled(32, 9));
        CHECK(dump_image(d).size() == 160);
    }
    std::filesystem::remove(path);
    CHECK_THROWS(FileDevice(path, 32));
}

TEST_CASE("adversary tampering is out of band") {
    MemDevice inner(16, 4);
    AdversaryDevice adv(inner);
    adv.write(1, filled(16, 5));
    adv.tamper(1, filled(16, 6));
    CHECK(adv.counters().writes == 1);
    CHECK(adv.read(1) == filled(16, 6));
    CHECK(adv.truth(1) == filled(16, 5));
    adv.flip_bits(1, 15, {0xff});
    CHECK(adv.read(1)[15] == (6 ^ 0xff));
    CHECK_THROWS_AS(adv.flip_bits(1, 15, {1, 2}), Error);
}

TEST_CASE("adversary snapshot and rollback restore the whole disk") {
    MemDevice inner(16, 4);
    AdversaryDevice adv(inner);
    adv.write(0, filled(16, 1));
    const auto snap = adv.snapshot();
    adv.write(0, filled(16, 2));
    adv.write(3, filled(16, 3));
    adv.rollback(snap);
    CHECK(adv.read(0) == filled(16, 1));
    CHECK(adv.read(3) == filled(16, 0));
    CHECK_THROWS_AS(adv.rollback(99), Error);
}

TEST_CASE("scheduled crash fires before the n+1th write") {
    MemDevice inner(16, 8);
    AdversaryDevice adv(inner);
    adv.schedule_crash(3);
    for (BlockAddr a = 0; a < 3; ++a) adv.write(a, filled(16, 1));
    CHECK_THROWS_AS(adv.write(3, filled(16, 1)), SimulatedCrash);
    CHECK(adv.crashed());
    CHECK(inner.read(3) == filled(16, 0));
    CHECK_THROWS_AS(adv.read(0), SimulatedCrash);
}

TEST_CASE("flaky reads are seeded, never identity, and suppressed during recovery") {
    MemDevice inner(32, 4);
    AdversaryDevice a(inner), b(inner);
    a.set_flaky(0.5, 11);
    b.set_flaky(0.5, 11);
    std::vector<bool> bad_a;
    for (int i = 0; i < 200; ++i) {
        const Block ra = a.read(static_cast<BlockAddr>(i % 4));
        const Block rb = b.read(static_cast<BlockAddr>(i % 4));
        CHECK(ra == rb);
        bad_a.push_back(ra != inner.raw_read(static_cast<BlockAddr>(i % 4)));
    }
    CHECK(a.corrupted_reads().size() == static_cast<std::size_t>(std::count(bad_a.begin(), bad_a.end(), true)));
    CHECK(a.corrupted_reads().size() > 50);
    CHECK(a.reads_seen() == 200);

    AdversaryDevice c(inner);
    c.set_flaky(1.0, 1);
    c.set_recovery_window(true);
    CHECK(c.read(0) == inner.raw_read(0));
    c.set_strict(true);
    CHECK(c.read(0) != inner.raw_read(0));
    c.set_strict(false);
    c.tamper_after_recovery(2, filled(32, 4));
    CHECK(inner.raw_read(2) == filled(32, 0));
    c.set_recovery_window(false);
    CHECK(inner.raw_read(2) == filled(32, 4));
    CHECK_THROWS_AS(c.set_flaky(1.5, 0), Error);
}
