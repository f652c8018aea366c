#include "sentry/blockdev.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <random>

#include "sentry/errors.hpp"

namespace sentry {

BlockDevice::BlockDevice(std::uint32_t block_size, std::uint64_t block_count)
    : block_size_(block_size), block_count_(block_count) {
    if (block_size == 0) throw Error(Errc::invalid_argument, "block size must be positive");
}

void BlockDevice::check_addr(BlockAddr addr) const {
    if (addr >= block_count_) {
        throw Error(Errc::out_of_range, "block " + std::to_string(addr) + " beyond device of " +
                                            std::to_string(block_count_) + " blocks");
    }
}

void BlockDevice::check_block(const Block& b) const {
    if (b.size() != block_size_) {
        throw Error(Errc::invalid_argument, "block of " + std::to_string(b.size()) +
                                                " bytes, device uses " + std::to_string(block_size_));
    }
}

Block BlockDevice::read(BlockAddr addr) {
    check_addr(addr);
    ++counters_.reads;
    return do_read(addr);
}

void BlockDevice::write(BlockAddr addr, const Block& b) {
    check_addr(addr);
    check_block(b);
    ++counters_.writes;
    do_write(addr, b);
}

void BlockDevice::sync() {
    ++counters_.syncs;
    do_sync();
}

Block BlockDevice::raw_read(BlockAddr addr) {
    check_addr(addr);
    return do_read(addr);
}

void BlockDevice::raw_write(BlockAddr addr, const Block& b) {
    check_addr(addr);
    check_block(b);
    do_write(addr, b);
}

std::vector<std::uint8_t> dump_image(BlockDevice& dev) {
    std::vector<std::uint8_t> out;
    out.reserve(dev.block_count() * dev.block_size());
    for (BlockAddr a = 0; a < dev.block_count(); ++a) {
        const Block b = dev.raw_read(a);
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

// MemDevice

MemDevice::MemDevice(std::uint32_t block_size, std::uint64_t block_count)
    : BlockDevice(block_size, block_count),
      image_(block_count * block_size, 0),
      durable_(image_) {}

MemDevice::MemDevice(std::uint32_t block_size, std::vector<std::uint8_t> image)
    : BlockDevice(block_size, image.size() / block_size), image_(std::move(image)) {
    if (image_.size() % block_size != 0) {
        throw Error(Errc::invalid_argument, "image size is not a multiple of the block size");
    }
    durable_ = image_;
}

Block MemDevice::do_read(BlockAddr addr) {
    const auto off = static_cast<std::ptrdiff_t>(addr * block_size());
    return Block(image_.begin() + off, image_.begin() + off + block_size());
}

void MemDevice::do_write(BlockAddr addr, const Block& b) {
    std::copy(b.begin(), b.end(), image_.begin() + static_cast<std::ptrdiff_t>(addr * block_size()));
    dirty_.insert(addr);
}

void MemDevice::do_sync() {
    for (BlockAddr addr : dirty_) {
        const auto off = static_cast<std::ptrdiff_t>(addr * block_size());
        std::copy_n(image_.begin() + off, block_size(), durable_.begin() + off);
    }
    dirty_.clear();
}

void MemDevice::crash(CrashPolicy policy, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (BlockAddr addr : dirty_) {
        bool survives = false;
        switch (policy) {
        case CrashPolicy::drop_all: survives = false; break;
        case CrashPolicy::keep_all: survives = true; break;
        case CrashPolicy::random_subset: survives = (rng() & 1U) != 0; break;
        }
        const auto off = static_cast<std::ptrdiff_t>(addr * block_size());
        if (survives) {
            std::copy_n(image_.begin() + off, block_size(), durable_.begin() + off);
        }
    }
    dirty_.clear();
    image_ = durable_;
}

// FileDevice

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw Error(Errc::io, what + ": " + std::strerror(errno));
}

} // namespace

FileDevice::OpenedFile FileDevice::open_image(const std::filesystem::path& path,
                                               std::uint32_t block_size) {
    const int fd = ::open(path.c_str(), O_RDWR);
    if (fd < 0) throw_errno("open " + path.string());
    struct stat st {};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw_errno("stat " + path.string());
    }
    const auto size = static_cast<std::uint64_t>(st.st_size);
    if (block_size == 0 || size % block_size != 0) {
        ::close(fd);
        throw Error(Errc::corrupt, path.string() + " is not a whole number of blocks");
    }
    return {fd, size / block_size};
}

FileDevice::FileDevice(OpenedFile file, std::uint32_t block_size)
    : BlockDevice(block_size, file.block_count), fd_(file.fd) {}

FileDevice::FileDevice(const std::filesystem::path& path, std::uint32_t block_size)
    : FileDevice(open_image(path, block_size), block_size) {}

FileDevice::~FileDevice() {
    if (fd_ >= 0) ::close(fd_);
}

void FileDevice::create(const std::filesystem::path& path, std::uint32_t block_size,
                        std::uint64_t block_count) {
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw_errno("create " + path.string());
    if (::ftruncate(fd, static_cast<off_t>(block_count * block_size)) != 0) {
        ::close(fd);
        throw_errno("truncate " + path.string());
    }
    ::close(fd);
}

Block FileDevice::do_read(BlockAddr addr) {
    Block b(block_size());
    const auto n = ::pread(fd_, b.data(), b.size(), static_cast<off_t>(addr * block_size()));
    if (n != static_cast<ssize_t>(b.size())) throw_errno("read block " + std::to_string(addr));
    return b;
}

void FileDevice::do_write(BlockAddr addr, const Block& b) {
    const auto n = ::pwrite(fd_, b.data(), b.size(), static_cast<off_t>(addr * block_size()));
    if (n != static_cast<ssize_t>(b.size())) throw_errno("write block " + std::to_string(addr));
}

void FileDevice::do_sync() {
    if (::fsync(fd_) != 0) throw_errno("fsync");
}

} // namespace sentry
