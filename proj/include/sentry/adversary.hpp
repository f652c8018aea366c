#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "sentry/blockdev.hpp"

namespace sentry {

using SnapshotId = std::uint64_t;

/// Everything the adversary will do that is not an immediate out-of-band edit.
struct AttackSchedule {
    double flaky_probability = 0.0;
    std::uint64_t rng_seed = 0;
    std::optional<std::uint64_t> crash_after_writes;
    /// Applied when the recovery window closes (strict-mode exploration of the gap between
    /// recovery and the first post-mount operation).
    std::vector<std::pair<BlockAddr, Block>> pending_tampers;
};

/// Byzantine disk around an honest device: out-of-band tampering, whole-disk snapshots and
/// rollback, seeded flaky reads, and crash injection at a write boundary.
///
/// It also keeps the "true" contents, i.e. what the file system last wrote at each address,
/// so the ghost-trace oracle can compare what should have been read with what was read.
class AdversaryDevice final : public BlockDevice {
public:
    explicit AdversaryDevice(BlockDevice& inner);
    /// `truth` overrides the initial true image (e.g. a copy taken before an offline attack).
    AdversaryDevice(BlockDevice& inner, std::vector<std::uint8_t> truth);

    void tamper(BlockAddr addr, const Block& b);
    void flip_bits(BlockAddr addr, std::size_t byte_offset, const std::vector<std::uint8_t>& xor_mask);
    void tamper_after_recovery(BlockAddr addr, const Block& b);

    SnapshotId snapshot();
    void rollback(SnapshotId id);

    void set_flaky(double p, std::uint64_t seed);
    void schedule_crash(std::uint64_t after_writes);
    void cancel_crash() { schedule_.crash_after_writes.reset(); }

    /// Strict mode keeps attacking during mount-time recovery.
    void set_strict(bool strict) noexcept { strict_ = strict; }
    void set_recovery_window(bool open) override;

    const AttackSchedule& schedule() const noexcept { return schedule_; }
    bool crashed() const noexcept { return crashed_; }

    /// What the file system last wrote at `addr` (or the initial image).
    Block truth(BlockAddr addr) const;

    /// Ordinals (1-based, over counted reads) of reads that returned corrupted data.
    const std::vector<std::uint64_t>& corrupted_reads() const noexcept { return corrupted_reads_; }
    std::uint64_t reads_seen() const noexcept { return reads_seen_; }

protected:
    Block do_read(BlockAddr addr) override;
    void do_write(BlockAddr addr, const Block& b) override;
    void do_sync() override;

private:
    bool attacking() const noexcept { return strict_ || !in_recovery_; }

    BlockDevice& inner_;
    std::vector<std::uint8_t> truth_;
    AttackSchedule schedule_;
    std::mt19937_64 rng_;
    std::map<SnapshotId, std::vector<std::uint8_t>> snapshots_;
    SnapshotId next_snapshot_ = 1;
    std::uint64_t writes_since_schedule_ = 0;
    std::uint64_t reads_seen_ = 0;
    std::vector<std::uint64_t> corrupted_reads_;
    bool in_recovery_ = false;
    bool strict_ = false;
    bool crashed_ = false;
};

} // namespace sentry
