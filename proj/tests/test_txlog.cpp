#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "sentry/adversary.hpp"
#include "sentry/errors.hpp"
#include "sentry/txlog.hpp"

using namespace sentry;

namespace {

const GeometryConfig kCfg = GeometryConfig::with_fanout(4, 2, 16, 12); // 128-byte blocks

struct Fixture {
    Geometry geo{kCfg};
    Hasher hasher{HmacKey::from_seed(2), HashMode::production, kCfg.block_size};
    MemDevice dev{kCfg.block_size, geo.layout().total_blocks};
};

Block blk(std::uint8_t v) { return Block(kCfg.block_size, v); }

void stage(Log& log, const Geometry& geo) {
    log.begin();
    log.write_data(geo.data_addr(0), blk(1));
    log.write_data(geo.data_addr(5), blk(2));
    log.write_data(geo.data_addr(0), blk(3)); // replaces the first write
    log.write_hash(geo.layout().hash_start, blk(4));
    log.write_hash(geo.layout().hash_start + 2, blk(5));
}

bool all_old(MemDevice& d, const Geometry& g) {
    return d.raw_read(g.data_addr(0)) == blk(0) && d.raw_read(g.data_addr(5)) == blk(0) &&
           d.raw_read(g.layout().hash_start) == blk(0) && d.raw_read(g.layout().hash_start + 2) == blk(0);
}

bool all_new(MemDevice& d, const Geometry& g) {
    return d.raw_read(g.data_addr(0)) == blk(3) && d.raw_read(g.data_addr(5)) == blk(2) &&
           d.raw_read(g.layout().hash_start) == blk(4) && d.raw_read(g.layout().hash_start + 2) == blk(5);
}

} // namespace

TEST_CASE("commit applies buffered writes and clears the record") {
    Fixture f;
    Log log(f.dev, f.geo, f.hasher);
    stage(log, f.geo);
    CHECK(log.txn().buffered_writes == 5);
    CHECK(log.txn().entry_count() == 4);
    const auto before = f.dev.counters();
    log.commit();
    CHECK(all_new(f.dev, f.geo));
    CHECK(f.dev.raw_read(f.geo.layout().log_start) == blk(0));
    // 1 descriptor + 4 payloads, record, 4 applies, record cleared
    CHECK(f.dev.counters().writes - before.writes == 1 + 4 + 1 + 4 + 1);
    CHECK(f.dev.counters().syncs - before.syncs == 4);
    CHECK(log.stats().commit_device_writes == 11);
    CHECK(log.stats().baseline_device_writes == 1 + 2 + 1 + 2 + 1);
    CHECK_FALSE(log.active());
}

TEST_CASE("commit record format is independently checkable") {
    Fixture f;
    MemDevice& d = f.dev;
    AdversaryDevice adv(d);
    Log log(adv, f.geo, f.hasher);
    stage(log, f.geo);
    adv.schedule_crash(6); // body and record written, nothing applied
    CHECK_THROWS_AS(log.commit(), SimulatedCrash);

    const BlockAddr ls = f.geo.layout().log_start;
    const Block rec = d.raw_read(ls);
    CHECK(std::string(rec.begin(), rec.begin() + 8) == "SNTRYLOG");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= std::uint64_t(rec[8 + i]) << (8 * i);
    CHECK(n == 4);
    oracle::Bytes body;
    for (BlockAddr a = ls + 1; a < ls + 1 + 1 + n; ++a) {
        const Block b = d.raw_read(a);
        body.insert(body.end(), b.begin(), b.end());
    }
    const auto tag = oracle::sha(body);
    CHECK(std::equal(tag.begin(), tag.end(), rec.begin() + 16));

    const Block desc = d.raw_read(ls + 1);
    std::vector<std::uint64_t> targets;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t a = 0;
        for (int k = 0; k < 8; ++k) a |= std::uint64_t(desc[i * 8 + k]) << (8 * k);
        targets.push_back(a);
    }
    std::sort(targets.begin(), targets.end());
    CHECK(targets == std::vector<std::uint64_t>{f.geo.layout().hash_start, f.geo.layout().hash_start + 2,
                                                 f.geo.data_addr(0), f.geo.data_addr(5)});
}

TEST_CASE("a crash at every write recovers to all-old or all-new") {
    Fixture probe;
    std::uint64_t total = 0;
    {
        Log log(probe.dev, probe.geo, probe.hasher);
        stage(log, probe.geo);
        const auto w0 = probe.dev.counters().writes;
        log.commit();
        total = probe.dev.counters().writes - w0;
    }
    for (std::uint64_t k = 0; k <= total; ++k) {
        for (auto policy : {CrashPolicy::drop_all, CrashPolicy::keep_all, CrashPolicy::random_subset}) {
            Fixture f;
            AdversaryDevice adv(f.dev);
            {
                Log log(adv, f.geo, f.hasher);
                stage(log, f.geo);
                if (k < total) adv.schedule_crash(k);
                if (k < total) {
                    CHECK_THROWS_AS(log.commit(), SimulatedCrash);
                } else {
                    log.commit();
                }
            }
            f.dev.crash(policy, k * 31 + 7);
            Log again(f.dev, f.geo, f.hasher);
            const RecoveryOutcome out = again.recover();
            const bool old_state = all_old(f.dev, f.geo);
            const bool new_state = all_new(f.dev, f.geo);
            CAPTURE(k);
            CHECK((old_state || new_state));
            CHECK((out == RecoveryOutcome::reapplied) == (new_state && k < total && !old_state));
            CHECK(f.dev.raw_read(f.geo.layout().log_start) == blk(0));
            // Recovery is idempotent.
            Log third(f.dev, f.geo, f.hasher);
            CHECK(third.recover() == RecoveryOutcome::rolled_back);
            CHECK((all_old(f.dev, f.geo) == old_state && all_new(f.dev, f.geo) == new_state));
        }
    }
}

TEST_CASE("torn or forged log bodies are discarded") {
    Fixture f;
    AdversaryDevice adv(f.dev);
    {
        Log log(adv, f.geo, f.hasher);
        stage(log, f.geo);
        adv.schedule_crash(6);
        CHECK_THROWS_AS(log.commit(), SimulatedCrash);
    }
    // Corrupt one payload: the checksum no longer matches, so nothing is applied.
    f.dev.raw_write(f.geo.layout().log_start + 3, blk(0x77));
    Log again(f.dev, f.geo, f.hasher);
    CHECK(again.recover() == RecoveryOutcome::rolled_back);
    CHECK(all_old(f.dev, f.geo));
}

TEST_CASE("verified reads, buffer and cache") {
    Fixture f;
    Log log(f.dev, f.geo, f.hasher);
    const Digest zero = f.hasher.digest_block(blk(0));
    const BlockAddr a = f.geo.data_addr(1);
    CHECK(log.read(a, zero) == blk(0));
    CHECK(log.read(a, zero) == blk(0));
    CHECK(log.stats().verified_device_reads == 1);
    CHECK(log.stats().cache_hits == 1);
    log.begin();
    log.write_data(a, blk(8));
    CHECK(log.read(a, zero) == blk(8)); // buffer wins and is not re-verified
    CHECK(log.stats().buffer_hits == 1);
    log.abort();
    log.clear_cache();
    f.dev.raw_write(a, blk(9));
    CHECK_THROWS_AS(log.read(a, zero), IntegrityFailure);
}

TEST_CASE("log misuse is rejected") {
    Fixture f;
    Log log(f.dev, f.geo, f.hasher);
    CHECK_THROWS_AS(log.write_data(f.geo.data_addr(0), blk(1)), Error);
    CHECK_THROWS_AS(log.commit(), Error);
    log.begin();
    CHECK_THROWS_AS(log.begin(), Error);
    CHECK_THROWS_AS(log.write_data(f.geo.layout().hash_start, blk(1)), Error);
    CHECK_THROWS_AS(log.write_hash(f.geo.data_addr(0), blk(1)), Error);
    CHECK_THROWS_AS(log.write_data(f.geo.data_addr(0), Block(3, 0)), Error);
    CHECK_THROWS_AS(log.recover(), Error);
    // 12 log blocks hold one record, one descriptor and ten payloads
    CHECK(log.capacity_entries() == 10);
    for (std::uint64_t i = 0; i < 11; ++i) log.write_data(f.geo.data_addr(i), blk(1));
    CHECK_THROWS_AS(log.commit(), Error);
}
