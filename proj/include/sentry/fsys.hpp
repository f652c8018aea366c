#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentry/blockdev.hpp"
#include "sentry/errors.hpp"
#include "sentry/geometry.hpp"
#include "sentry/hashing.hpp"
#include "sentry/merkle.hpp"
#include "sentry/slog.hpp"
#include "sentry/tpm.hpp"
#include "sentry/txlog.hpp"

namespace sentry {

using Inum = std::uint32_t;

inline constexpr std::size_t kDirectRefs = 12;
inline constexpr std::size_t kInodeSize = 64;
inline constexpr std::size_t kDirEntrySize = 32;
inline constexpr std::size_t kMaxNameLen = 28;
inline constexpr Inum kRootInum = 1;

/// Block 0. Immutable after mkfs; its digest lives in the trusted store.
///
/// Layout (little-endian): "SNTRYSB1" | version u32 | block_size u32 | digest_size u32 |
/// fanout u32 | depth u32 | reserved u32 | data_blocks u64 | log_blocks u64 | root_inum u32 |
/// inode_count u32 | bitmap_start u64 | bitmap_blocks u64 | inode_start u64 | inode_blocks u64.
/// The region starts are data-region indices.
struct Superblock {
    static constexpr std::uint32_t kVersion = 1;

    GeometryConfig geometry;
    Inum root_inum = kRootInum;
    std::uint32_t inode_count = 0;
    std::uint64_t bitmap_start = 0;
    std::uint64_t bitmap_blocks = 0;
    std::uint64_t inode_start = 0;
    std::uint64_t inode_blocks = 0;

    /// Chooses bitmap and inode-table placement for `geometry`.
    static Superblock plan(const GeometryConfig& geometry);

    Block encode() const;
    static Superblock decode(std::span<const std::uint8_t> block);
    /// Reads only the block size from the head of an image file.
    static std::uint32_t peek_block_size(const std::filesystem::path& image);

    std::uint64_t first_free_data_index() const noexcept { return inode_start + inode_blocks; }
    friend bool operator==(const Superblock&, const Superblock&) = default;
};

enum class InodeKind : std::uint32_t { free = 0, file = 1, directory = 2 };

struct Inode {
    InodeKind kind = InodeKind::free;
    std::uint64_t size = 0;
    std::array<std::uint32_t, kDirectRefs> block_refs{}; // data-region indices, 0 = hole

    void encode_into(std::span<std::uint8_t> out) const;
    static Inode decode(std::span<const std::uint8_t> in);
};

struct DirEntry {
    std::string name;
    Inum inum = 0;
};

struct Stat {
    Inum inum = 0;
    InodeKind kind = InodeKind::free;
    std::uint64_t size = 0;
    std::uint32_t blocks = 0;
};

enum class FsState { running, halted, unmounted };

struct FsStatus {
    FsState state = FsState::unmounted;
    std::optional<IntegrityFailure> failure;
};

enum class RootUsed { current, recover };
const char* root_used_name(RootUsed r) noexcept;

struct MountReport {
    RecoveryOutcome recovery = RecoveryOutcome::rolled_back;
    RootUsed root_used = RootUsed::current;
};

/// Shape of the last committed transaction, for operation accounting.
struct TxnSummary {
    std::uint64_t buffered_writes = 0;
    std::size_t data_entries = 0;
    std::size_t hash_entries = 0;
};

struct MountOptions {
    bool cache = true;
    ReadObserver* observer = nullptr;
};

/// A mounted file system. Every public operation is one transaction: begin, verified reads,
/// safe writes, trusted-root update, commit. Operations that write nothing skip the last two.
class FileSystem {
public:
    /// Formats `dev` and returns the provisioned trusted store (persisted to `tpm_store` if
    /// given). The hasher must carry the key that goes into the store.
    static Tpm mkfs(BlockDevice& dev, const GeometryConfig& config, Hasher& hasher,
                    std::optional<std::filesystem::path> tpm_store = std::nullopt);

    /// Superblock check, log recovery and the two-root check, in that order.
    /// Throws IntegrityFailure(superblock_mismatch | root_mismatch) on failure.
    static std::unique_ptr<FileSystem> mount(BlockDevice& dev, Tpm& tpm, Hasher& hasher, MountOptions opts = {});

    ~FileSystem();
    FileSystem(const FileSystem&) = delete;
    FileSystem& operator=(const FileSystem&) = delete;

    Inum create(std::string_view path);
    Inum mkdir(std::string_view path);
    void unlink(std::string_view path);
    Inum lookup(std::string_view path);
    std::vector<DirEntry> readdir(std::string_view path);
    Stat stat(std::string_view path);
    std::size_t write_file(std::string_view path, std::uint64_t offset, std::span<const std::uint8_t> data);
    std::vector<std::uint8_t> read_file(std::string_view path, std::uint64_t offset, std::uint64_t len);

    void unmount();

    FsStatus status() const;
    const MountReport& mount_report() const noexcept { return report_; }
    const Superblock& superblock() const noexcept { return sb_; }
    const Geometry& geometry() const noexcept { return geo_; }
    const LogStats& log_stats() const noexcept { return log_.stats(); }
    const TxnSummary& last_txn() const noexcept { return last_txn_; }
    std::uint64_t max_file_size() const noexcept { return kDirectRefs * geo_.block_size(); }

    /// The handle's own building blocks, for tests that drive lower layers directly.
    SafeLog& slog() noexcept { return slog_; }
    Log& log() noexcept { return log_; }
    Tpm& tpm() noexcept { return tpm_; }

private:
    FileSystem(BlockDevice& dev, Tpm& tpm, Hasher& hasher, const Superblock& sb, const MountOptions& opts);

    template <class F>
    auto run(F&& body);

    class Ops;

    BlockDevice& dev_;
    Tpm& tpm_;
    Hasher& hasher_;
    Superblock sb_;
    Geometry geo_;
    Log log_;
    MerkleTree tree_;
    SafeLog slog_;
    MountReport report_;
    FsState state_ = FsState::running;
    TxnSummary last_txn_;
    mutable std::mutex mu_;
};

/// Splits an absolute path into components; rejects relative paths and bad names.
std::vector<std::string> split_path(std::string_view path);
void validate_name(std::string_view name);

} // namespace sentry
