#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sentry/adversary.hpp"
#include "sentry/fsys.hpp"
#include "sentry/workload.hpp"

namespace sentry {

/// A formatted image and its trusted state, held in memory so sweeps can clone it freely.
struct Instance {
    GeometryConfig config;
    std::vector<std::uint8_t> image;
    TpmState tpm;
};

Instance format_instance(const GeometryConfig& config, Hasher& hasher);
/// The small instance used throughout the checks: fanout 8, depth 2, 64 data blocks.
GeometryConfig small_config();

// Ghost trace

struct GhostEntry {
    BlockAddr addr = 0;
    Block block;
    friend bool operator==(const GhostEntry&, const GhostEntry&) = default;
};

/// expected_l from the adversary's record of what was written, read_l from what the device
/// actually handed back, both appended on every device-served verified read.
class GhostTrace final : public ReadObserver {
public:
    explicit GhostTrace(const AdversaryDevice& dev) : dev_(dev) {}

    void on_verified_read(BlockAddr addr, const Block& obtained, bool digest_ok) override;
    void reset();

    const std::vector<GhostEntry>& expected() const noexcept { return expected_; }
    const std::vector<GhostEntry>& read() const noexcept { return read_; }
    bool equal() const { return expected_ == read_; }
    /// Same length, equal everywhere but the last element, which differs.
    bool diverges_at_tail_only() const;

private:
    const AdversaryDevice& dev_;
    std::vector<GhostEntry> expected_;
    std::vector<GhostEntry> read_;
};

// Crash simulation

enum class CrashClass { pre_op, post_op, violation };
const char* crash_class_name(CrashClass c) noexcept;
const char* crash_policy_name(CrashPolicy p) noexcept;

struct CrashPoint {
    std::size_t step = 0;
    std::uint64_t write_index = 0; // writes that reached the device before the crash
    std::uint64_t op_writes = 0;
    CrashPolicy policy = CrashPolicy::drop_all;
    std::optional<RecoveryOutcome> recovery;
    std::optional<RootUsed> root;
    CrashClass cls = CrashClass::violation;
    std::string detail;

    std::string line() const;
};

struct CrashReport {
    std::vector<CrashPoint> points;
    std::size_t mutating_ops = 0;
    std::size_t violations = 0;
    /// Main-line disagreements with the model, which also fail the run.
    std::vector<std::string> notes;

    bool ok() const noexcept { return violations == 0 && notes.empty(); }
};

struct CrashSimOptions {
    std::vector<CrashPolicy> policies{CrashPolicy::drop_all, CrashPolicy::keep_all, CrashPolicy::random_subset};
    std::uint64_t seed = 0;
    bool parallel = true;
};

/// For every mutating op and every write boundary inside it: clone, crash there, remount,
/// audit and classify against the model's pre-op and post-op trees.
CrashReport crash_sim(const Instance& base, Hasher& hasher, const std::vector<WorkloadOp>& ops,
                      const CrashSimOptions& opts = {});

// Fuzzing

struct FuzzOptions {
    double p = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t ops = 1000;
    bool cold_cache = true; // drop the block cache before each op so reads reach the disk
    bool resume = false;    // after a halt, check an honest remount and carry on in a new session
};

struct FuzzResult {
    std::uint64_t seed = 0;
    std::uint64_t ops_run = 0;
    std::optional<std::uint64_t> halted_at; // op index of the first halt
    std::uint64_t halt_read = 0;            // read ordinal of the first failing read
    std::vector<std::uint64_t> halts;       // op index of every halt (resume mode)
    bool halt_at_first_corruption = true;
    std::uint64_t corrupted_reads = 0;
    std::uint64_t divergences = 0;
    bool final_state_ok = true;
    std::vector<std::string> notes;

    bool ok() const noexcept { return divergences == 0 && halt_at_first_corruption && final_state_ok; }
    std::string summary() const;
};

FuzzResult fuzz(const Instance& base, Hasher& hasher, const FuzzOptions& opts);
std::vector<FuzzResult> fuzz_sweep(const Instance& base, Hasher& hasher, FuzzOptions opts,
                                   const std::vector<std::uint64_t>& seeds);

// Counters

struct BenchRow {
    std::string op_class;
    std::uint64_t ops = 0;
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t syncs = 0;
    std::uint64_t hashes = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::uint64_t data_block_writes = 0; // data-region blocks written by commits
    std::uint64_t commit_writes = 0;   // device writes issued by commits
    std::uint64_t baseline_writes = 0; // the same commits without hash-region entries
    std::uint64_t tpm_updates = 0;
    double write_amplification = 0.0;

    std::string table() const;
};

BenchReport bench(const Instance& base, Hasher& hasher, const std::vector<WorkloadOp>& ops, bool cache = true);
/// `files` one-block files spread across directories of at most `per_dir` entries.
std::vector<WorkloadOp> smallfiles_workload(std::size_t files, std::uint32_t block_size, std::size_t per_dir = 40);

// Audit

struct ImageAudit {
    bool superblock_ok = true;
    std::optional<RootUsed> root; // which trusted root the tree matched, if any
    AuditReport current;
    AuditReport recover;

    bool clean() const noexcept { return superblock_ok && root.has_value(); }
    std::vector<std::string> lines() const;
};

ImageAudit audit_image(BlockDevice& dev, const Tpm& tpm, Hasher& hasher);

// Attacks

enum class AttackTarget { file_data, inode_table, directory, hash_node, free_bitmap };
const char* attack_target_name(AttackTarget t) noexcept;

struct AttackCase {
    AttackTarget target = AttackTarget::file_data;
    BlockAddr addr = 0;
    bool detected = false;
    bool at_mount = false;
    std::optional<IntegrityKind> kind;
    std::uint64_t ops_served = 0;           // successful probe ops after remount
    std::uint64_t wrong_bytes_returned = 0; // bytes served that differ from the model
    std::uint64_t ghost_checks = 0;
    std::uint64_t ghost_failures = 0;
    std::string detail;

    int exit_code() const noexcept { return detected ? 3 : 0; }
};

/// The fixed 20-op workload the attack matrix runs before tampering.
std::vector<WorkloadOp> attack_workload();
AttackCase run_attack_case(const GeometryConfig& config, Hasher& hasher, AttackTarget target);

struct RollbackTrial {
    std::uint64_t commits_after_snapshot = 0;
    bool mounted = false;
    std::optional<RootUsed> root;
    std::optional<IntegrityKind> failure;
    bool state_matches_snapshot = false;
    /// The later commits netted back to the snapshot's root, so the old image is still trusted.
    bool snapshot_root_trusted = false;
};

/// Commits until `commits_before`, snapshots, commits `commits_after` more, rolls the disk
/// back and remounts as if after a crash.
RollbackTrial rollback_trial(const Instance& base, Hasher& hasher, std::uint64_t seed,
                             std::uint64_t commits_before, std::uint64_t commits_after);

// Attack scripts

enum class AttackStepKind { tamper, flip, snapshot, rollback, flaky, crash_after, run };

struct AttackStep {
    AttackStepKind kind = AttackStepKind::run;
    BlockAddr addr = 0;
    std::size_t offset = 0;
    std::vector<std::uint8_t> bytes; // tamper block or flip mask
    std::string name;                // snapshot name
    double p = 0.0;
    std::uint64_t n = 0; // flaky seed or crash-after count
    std::optional<WorkloadOp> op;
};

/// `tamper A HEX`, `flip A OFF HEXMASK`, `snapshot NAME`, `rollback NAME`, `flaky P SEED`,
/// `crash-after N`, `run <workload line>`; `#` comments.
std::vector<AttackStep> parse_attack_script(std::string_view text);

} // namespace sentry
