#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>

#include "sentry/blockdev.hpp"
#include "sentry/geometry.hpp"
#include "sentry/hashing.hpp"

namespace sentry {

/// Buffered writes of the active transaction, split by region. Later writes to an address
/// replace earlier ones; buffered_writes still counts every call.
struct Txn {
    std::map<BlockAddr, Block> data_writes;
    std::map<BlockAddr, Block> hash_writes;
    std::uint64_t buffered_writes = 0;
    bool active = false;

    bool empty() const noexcept { return data_writes.empty() && hash_writes.empty(); }
    std::size_t entry_count() const noexcept { return data_writes.size() + hash_writes.size(); }
};

enum class RecoveryOutcome { rolled_back, reapplied };
const char* recovery_outcome_name(RecoveryOutcome o) noexcept;

/// Sees every device-served verified read, including the one that fails.
class ReadObserver {
public:
    virtual ~ReadObserver() = default;
    virtual void on_verified_read(BlockAddr addr, const Block& obtained, bool digest_ok) = 0;
};

struct LogStats {
    std::uint64_t commits = 0;
    std::uint64_t verified_device_reads = 0; // each costs exactly one digest
    std::uint64_t buffer_hits = 0;
    std::uint64_t cache_hits = 0;
    /// Device writes a commit would have issued had it carried only its data-region entries.
    std::uint64_t baseline_device_writes = 0;
    std::uint64_t commit_device_writes = 0;
};

/// Write-ahead log over the log region.
///
/// On-disk format, relative to log_start:
///   block 0         commit record: "SNTRYLOG" | entry count u64 LE | SHA-256 of everything
///                   below, zero-padded. All-zero when no commit is pending.
///   blocks 1..D     descriptor blocks: target addresses, u64 LE each, in entry order.
///   blocks D+1..    payload blocks, one per entry, in the same order.
///
/// commit(): write descriptors+payloads, sync, write commit record, sync, apply in place,
/// sync, zero the commit record, sync. recover() replays a valid commit record and otherwise
/// discards whatever partial log is present.
class Log {
public:
    Log(BlockDevice& dev, const Geometry& geo, Hasher& hasher, bool cache_enabled = true);

    void begin();
    bool active() const noexcept { return txn_.active; }
    const Txn& txn() const noexcept { return txn_; }

    void write_data(BlockAddr addr, Block b);
    void write_hash(BlockAddr addr, Block b);

    /// Transaction buffer, then cache, then device. Device-served blocks are returned only if
    /// their digest equals `expected`; otherwise IntegrityFailure(block_mismatch).
    Block read(BlockAddr addr, const Digest& expected);

    void commit();
    void abort();

    RecoveryOutcome recover();

    /// Formatting path: applies the active transaction straight to the home locations with no
    /// logging and no capacity limit, then syncs. Only valid on a freshly zeroed disk.
    void apply_unlogged();

    /// Largest number of distinct entries one commit can hold.
    std::size_t capacity_entries() const noexcept;

    const LogStats& stats() const noexcept { return stats_; }
    void set_observer(ReadObserver* obs) noexcept { observer_ = obs; }
    void clear_cache() { cache_.clear(); }
    bool cache_enabled() const noexcept { return cache_enabled_; }

private:
    std::size_t descriptors_for(std::size_t entries) const noexcept;
    void zero_commit_record();

    BlockDevice& dev_;
    const Geometry& geo_;
    Hasher& hasher_;
    bool cache_enabled_;
    Txn txn_;
    std::unordered_map<BlockAddr, Block> cache_;
    LogStats stats_;
    ReadObserver* observer_ = nullptr;
};

} // namespace sentry
