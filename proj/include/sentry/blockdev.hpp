#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include "sentry/digest.hpp"
#include "sentry/geometry.hpp"

namespace sentry {

struct OpCounters {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t syncs = 0;

    friend bool operator==(const OpCounters&, const OpCounters&) = default;
    OpCounters operator-(const OpCounters& rhs) const {
        return {reads - rhs.reads, writes - rhs.writes, syncs - rhs.syncs};
    }
};

/// A flat array of fixed-size blocks. read/write/sync are counted; raw_read/raw_write are
/// the out-of-band path used by attackers, snapshots and offline tools.
/// Not internally synchronized: callers serialize access to one device.
class BlockDevice {
public:
    virtual ~BlockDevice() = default;
    BlockDevice(const BlockDevice&) = delete;
    BlockDevice& operator=(const BlockDevice&) = delete;

    std::uint32_t block_size() const noexcept { return block_size_; }
    std::uint64_t block_count() const noexcept { return block_count_; }

    Block read(BlockAddr addr);
    void write(BlockAddr addr, const Block& b);
    void sync();
    OpCounters counters() const noexcept { return counters_; }

    Block raw_read(BlockAddr addr);
    void raw_write(BlockAddr addr, const Block& b);

    /// Called by mount around log recovery and the root check. Adversarial devices use it to
    /// behave honestly while the file system recovers.
    virtual void set_recovery_window(bool /*open*/) {}

protected:
    BlockDevice(std::uint32_t block_size, std::uint64_t block_count);

    virtual Block do_read(BlockAddr addr) = 0;
    virtual void do_write(BlockAddr addr, const Block& b) = 0;
    virtual void do_sync() = 0;

    void check_addr(BlockAddr addr) const;
    void check_block(const Block& b) const;

private:
    std::uint32_t block_size_;
    std::uint64_t block_count_;
    OpCounters counters_;
};

enum class CrashPolicy {
    drop_all,    // every unsynced write is lost
    keep_all,    // every unsynced write reached the media
    random_subset,
};

/// In-memory disk with a volatile write cache: writes are durable only once sync() returns.
/// crash() discards some or all unsynced writes, the weakest model consistent with an
/// asynchronous bare disk.
class MemDevice final : public BlockDevice {
public:
    MemDevice(std::uint32_t block_size, std::uint64_t block_count);
    /// Wraps an existing image; the whole image is considered durable.
    MemDevice(std::uint32_t block_size, std::vector<std::uint8_t> image);

    /// Applies `policy` to unsynced writes, leaving the durable image as the visible state.
    void crash(CrashPolicy policy, std::uint64_t seed = 0);

    const std::vector<std::uint8_t>& image() const noexcept { return image_; }
    const std::vector<std::uint8_t>& durable_image() const noexcept { return durable_; }
    std::size_t unsynced_blocks() const noexcept { return dirty_.size(); }

protected:
    Block do_read(BlockAddr addr) override;
    void do_write(BlockAddr addr, const Block& b) override;
    void do_sync() override;

private:
    std::vector<std::uint8_t> image_;   // latest contents, what reads see
    std::vector<std::uint8_t> durable_; // contents that survive a crash
    std::set<BlockAddr> dirty_;
};

/// Raw image file of block_count x block_size bytes, no header.
class FileDevice final : public BlockDevice {
public:
    /// Opens an existing image. block_count is derived from the file size.
    FileDevice(const std::filesystem::path& path, std::uint32_t block_size);
    ~FileDevice() override;

    /// Creates (or truncates) an image of the given size filled with zeros.
    static void create(const std::filesystem::path& path, std::uint32_t block_size,
                       std::uint64_t block_count);

protected:
    Block do_read(BlockAddr addr) override;
    void do_write(BlockAddr addr, const Block& b) override;
    void do_sync() override;

private:
    struct OpenedFile {
        int fd;
        std::uint64_t block_count;
    };
    static OpenedFile open_image(const std::filesystem::path& path, std::uint32_t block_size);
    FileDevice(OpenedFile file, std::uint32_t block_size);

    int fd_;
};

/// Reads every block through the unaccounted path.
std::vector<std::uint8_t> dump_image(BlockDevice& dev);

} // namespace sentry
