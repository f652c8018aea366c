#include "sentry/fsys.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <type_traits>

namespace sentry {

namespace {

constexpr std::uint8_t kSbMagic[8] = {'S', 'N', 'T', 'R', 'Y', 'S', 'B', '1'};

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t div_ceil(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Opens the device to honest-during-recovery behavior for the scope of mount.
class RecoveryWindow {
public:
    explicit RecoveryWindow(BlockDevice& dev) : dev_(dev) { dev_.set_recovery_window(true); }
    ~RecoveryWindow() { dev_.set_recovery_window(false); }
    RecoveryWindow(const RecoveryWindow&) = delete;
    RecoveryWindow& operator=(const RecoveryWindow&) = delete;

private:
    BlockDevice& dev_;
};

} // namespace

const char* root_used_name(RootUsed r) noexcept { return r == RootUsed::current ? "current" : "recover"; }

// Superblock

Superblock Superblock::plan(const GeometryConfig& geometry) {
    geometry.validate();
    if (geometry.digest_size != kDigestSize) {
        throw Error(Errc::invalid_argument, "digest_size must be " + std::to_string(kDigestSize));
    }
    if (geometry.block_size < kInodeSize) throw Error(Errc::invalid_argument, "block too small for an inode");
    Superblock sb;
    sb.geometry = geometry;
    const std::uint64_t bs = geometry.block_size;
    sb.bitmap_start = 0;
    sb.bitmap_blocks = div_ceil(geometry.data_blocks, bs * 8);
    const std::uint64_t per_block = bs / kInodeSize;
    const std::uint64_t wanted = std::clamp<std::uint64_t>(geometry.data_blocks / 4, 16, 65535);
    sb.inode_blocks = div_ceil(wanted, per_block);
    sb.inode_start = sb.bitmap_start + sb.bitmap_blocks;
    sb.inode_count = static_cast<std::uint32_t>(std::min<std::uint64_t>(sb.inode_blocks * per_block, 65536));
    sb.root_inum = kRootInum;
    // Metadata, the root directory block and at least one file block.
    if (sb.first_free_data_index() + 2 > geometry.data_blocks) {
        throw Error(Errc::no_space, "data region of " + std::to_string(geometry.data_blocks) +
                                        " blocks cannot hold the file-system metadata");
    }
    return sb;
}

Block Superblock::encode() const {
    Block b(geometry.block_size, 0);
    std::uint8_t* p = b.data();
    std::memcpy(p, kSbMagic, 8);
    put_u32(p + 8, kVersion);
    put_u32(p + 12, geometry.block_size);
    put_u32(p + 16, geometry.digest_size);
    put_u32(p + 20, geometry.fanout);
    put_u32(p + 24, geometry.depth);
    put_u64(p + 32, geometry.data_blocks);
    put_u64(p + 40, geometry.log_blocks);
    put_u32(p + 48, root_inum);
    put_u32(p + 52, inode_count);
    put_u64(p + 56, bitmap_start);
    put_u64(p + 64, bitmap_blocks);
    put_u64(p + 72, inode_start);
    put_u64(p + 80, inode_blocks);
    return b;
}

Superblock Superblock::decode(std::span<const std::uint8_t> block) {
    if (block.size() < 88 || std::memcmp(block.data(), kSbMagic, 8) != 0) {
        throw Error(Errc::corrupt, "not a formatted image (bad superblock magic)");
    }
    const std::uint8_t* p = block.data();
    if (get_u32(p + 8) != kVersion) throw Error(Errc::corrupt, "unsupported superblock version");
    Superblock sb;
    sb.geometry.block_size = get_u32(p + 12);
    sb.geometry.digest_size = get_u32(p + 16);
    sb.geometry.fanout = get_u32(p + 20);
    sb.geometry.depth = get_u32(p + 24);
    sb.geometry.data_blocks = get_u64(p + 32);
    sb.geometry.log_blocks = get_u64(p + 40);
    sb.root_inum = get_u32(p + 48);
    sb.inode_count = get_u32(p + 52);
    sb.bitmap_start = get_u64(p + 56);
    sb.bitmap_blocks = get_u64(p + 64);
    sb.inode_start = get_u64(p + 72);
    sb.inode_blocks = get_u64(p + 80);
    sb.geometry.validate();
    if (sb != plan(sb.geometry)) throw Error(Errc::corrupt, "superblock layout is inconsistent");
    return sb;
}

std::uint32_t Superblock::peek_block_size(const std::filesystem::path& image) {
    std::ifstream in(image, std::ios::binary);
    std::uint8_t head[16] = {};
    if (!in.read(reinterpret_cast<char*>(head), sizeof head)) {
        throw Error(Errc::not_found, "cannot read image " + image.string());
    }
    if (std::memcmp(head, kSbMagic, 8) != 0) throw Error(Errc::corrupt, "not a formatted image (bad superblock magic)");
    return get_u32(head + 12);
}

// Inode

void Inode::encode_into(std::span<std::uint8_t> out) const {
    std::fill(out.begin(), out.begin() + kInodeSize, 0);
    put_u32(out.data(), static_cast<std::uint32_t>(kind));
    put_u64(out.data() + 8, size);
    for (std::size_t i = 0; i < kDirectRefs; ++i) put_u32(out.data() + 16 + 4 * i, block_refs[i]);
}

Inode Inode::decode(std::span<const std::uint8_t> in) {
    Inode n;
    const auto kind = get_u32(in.data());
    if (kind > 2) throw Error(Errc::corrupt, "bad inode kind " + std::to_string(kind));
    n.kind = static_cast<InodeKind>(kind);
    n.size = get_u64(in.data() + 8);
    for (std::size_t i = 0; i < kDirectRefs; ++i) n.block_refs[i] = get_u32(in.data() + 16 + 4 * i);
    return n;
}

// Paths

void validate_name(std::string_view name) {
    if (name.empty() || name.size() > kMaxNameLen || name == "." || name == ".." ||
        name.find('/') != std::string_view::npos || name.find('\0') != std::string_view::npos) {
        throw Error(Errc::invalid_argument, "bad file name '" + std::string(name) + "'");
    }
}

std::vector<std::string> split_path(std::string_view path) {
    if (path.empty() || path.front() != '/') {
        throw Error(Errc::invalid_argument, "path must be absolute: '" + std::string(path) + "'");
    }
    std::vector<std::string> out;
    std::size_t i = 1;
    while (i <= path.size()) {
        const std::size_t j = std::min(path.find('/', i), path.size());
        if (j > i) {
            const auto comp = path.substr(i, j - i);
            validate_name(comp);
            out.emplace_back(comp);
        }
        i = j + 1;
    }
    return out;
}

// Operations over the active transaction.

class FileSystem::Ops {
public:
    explicit Ops(FileSystem& fs)
        : fs_(fs), sb_(fs.sb_), slog_(fs.slog_), bs_(fs.geo_.block_size()),
          inodes_per_block_(bs_ / kInodeSize), entries_per_block_(bs_ / kDirEntrySize) {}

    Inode read_inode(Inum inum) {
        check_inum(inum);
        const Block b = slog_.safe_read(inode_block(inum));
        return Inode::decode(std::span(b).subspan(inode_offset(inum), kInodeSize));
    }

    void write_inode(Inum inum, const Inode& node) {
        check_inum(inum);
        Block b = slog_.safe_read(inode_block(inum));
        node.encode_into(std::span(b).subspan(inode_offset(inum), kInodeSize));
        slog_.safe_write(inode_block(inum), std::move(b));
    }

    Inum alloc_inode() {
        for (std::uint64_t blk = 0; blk < sb_.inode_blocks; ++blk) {
            const Block b = slog_.safe_read(sb_.inode_start + blk);
            for (std::uint64_t i = 0; i < inodes_per_block_; ++i) {
                const auto inum = static_cast<Inum>(blk * inodes_per_block_ + i);
                if (inum <= kRootInum || inum >= sb_.inode_count) continue;
                if (get_u32(b.data() + i * kInodeSize) == static_cast<std::uint32_t>(InodeKind::free)) return inum;
            }
        }
        throw Error(Errc::no_space, "inode table full");
    }

    std::uint32_t alloc_block() {
        const std::uint64_t bits_per_block = static_cast<std::uint64_t>(bs_) * 8;
        for (std::uint64_t blk = 0; blk < sb_.bitmap_blocks; ++blk) {
            Block b = slog_.safe_read(sb_.bitmap_start + blk);
            for (std::uint64_t bit = 0; bit < bits_per_block; ++bit) {
                const std::uint64_t index = blk * bits_per_block + bit;
                if (index >= fs_.geo_.data_blocks()) break;
                if ((b[bit / 8] >> (bit % 8) & 1U) == 0) {
                    b[bit / 8] = static_cast<std::uint8_t>(b[bit / 8] | (1U << (bit % 8)));
                    slog_.safe_write(sb_.bitmap_start + blk, std::move(b));
                    return static_cast<std::uint32_t>(index);
                }
            }
        }
        throw Error(Errc::no_space, "no free data blocks");
    }

    void free_block(std::uint32_t index) {
        const std::uint64_t bits_per_block = static_cast<std::uint64_t>(bs_) * 8;
        const std::uint64_t blk = index / bits_per_block;
        const std::uint64_t bit = index % bits_per_block;
        Block b = slog_.safe_read(sb_.bitmap_start + blk);
        b[bit / 8] = static_cast<std::uint8_t>(b[bit / 8] & ~(1U << (bit % 8)));
        slog_.safe_write(sb_.bitmap_start + blk, std::move(b));
    }

    // Directory slots as (block ordinal, slot) with their decoded entries.
    std::vector<DirEntry> entries(const Inode& dir) {
        std::vector<DirEntry> out;
        for_each_slot(dir, [&](std::size_t, std::size_t, const Block& b, std::size_t off) {
            const Inum inum = get_u32(b.data() + off + kMaxNameLen);
            if (inum != 0) out.push_back({entry_name(b, off), inum});
            return false;
        });
        return out;
    }

    std::optional<Inum> find(const Inode& dir, std::string_view name) {
        std::optional<Inum> found;
        for_each_slot(dir, [&](std::size_t, std::size_t, const Block& b, std::size_t off) {
            const Inum inum = get_u32(b.data() + off + kMaxNameLen);
            if (inum != 0 && entry_name(b, off) == name) {
                found = inum;
                return true;
            }
            return false;
        });
        return found;
    }

    void add_entry(Inum dir_inum, Inode& dir, std::string_view name, Inum inum) {
        bool placed = false;
        for_each_slot(dir, [&](std::size_t ordinal, std::size_t, const Block& b, std::size_t off) {
            if (get_u32(b.data() + off + kMaxNameLen) != 0) return false;
            Block copy = b;
            put_entry(copy, off, name, inum);
            slog_.safe_write(dir.block_refs[ordinal], std::move(copy));
            placed = true;
            return true;
        });
        if (placed) return;
        const std::size_t nblocks = dir.size / bs_;
        if (nblocks >= kDirectRefs) throw Error(Errc::no_space, "directory is full");
        const std::uint32_t blk = alloc_block();
        Block fresh(bs_, 0);
        put_entry(fresh, 0, name, inum);
        slog_.safe_write(blk, std::move(fresh));
        dir.block_refs[nblocks] = blk;
        dir.size += bs_;
        write_inode(dir_inum, dir);
    }

    void remove_entry(const Inode& dir, std::string_view name) {
        for_each_slot(dir, [&](std::size_t ordinal, std::size_t, const Block& b, std::size_t off) {
            if (get_u32(b.data() + off + kMaxNameLen) == 0 || entry_name(b, off) != name) return false;
            Block copy = b;
            std::fill_n(copy.begin() + static_cast<std::ptrdiff_t>(off), kDirEntrySize, 0);
            slog_.safe_write(dir.block_refs[ordinal], std::move(copy));
            return true;
        });
    }

    Block dir_block(Inum self, Inum parent) {
        Block b(bs_, 0);
        put_entry(b, 0, ".", self);
        put_entry(b, kDirEntrySize, "..", parent);
        return b;
    }

    Inum resolve(const std::vector<std::string>& comps, std::size_t count) {
        Inum cur = sb_.root_inum;
        for (std::size_t i = 0; i < count; ++i) {
            const Inode node = read_inode(cur);
            if (node.kind != InodeKind::directory) throw Error(Errc::not_directory, comps[i - 1 < comps.size() ? i - 1 : 0]);
            const auto next = find(node, comps[i]);
            if (!next) throw Error(Errc::not_found, comps[i]);
            cur = *next;
        }
        return cur;
    }

    Inum resolve(std::string_view path) {
        const auto comps = split_path(path);
        return resolve(comps, comps.size());
    }

    struct Parent {
        Inum inum;
        Inode node;
        std::string name;
    };

    Parent resolve_parent(std::string_view path) {
        const auto comps = split_path(path);
        if (comps.empty()) throw Error(Errc::invalid_argument, "the root directory has no parent");
        const Inum p = resolve(comps, comps.size() - 1);
        Inode node = read_inode(p);
        if (node.kind != InodeKind::directory) throw Error(Errc::not_directory, std::string(path));
        return {p, node, comps.back()};
    }

    std::uint32_t bs() const noexcept { return bs_; }

private:
    void check_inum(Inum inum) const {
        if (inum == 0 || inum >= sb_.inode_count) throw Error(Errc::corrupt, "inode number " + std::to_string(inum) + " out of range");
    }
    std::uint64_t inode_block(Inum inum) const { return sb_.inode_start + inum / inodes_per_block_; }
    std::size_t inode_offset(Inum inum) const { return (inum % inodes_per_block_) * kInodeSize; }

    static std::string entry_name(const Block& b, std::size_t off) {
        const char* p = reinterpret_cast<const char*>(b.data() + off);
        return std::string(p, strnlen(p, kMaxNameLen));
    }

    static void put_entry(Block& b, std::size_t off, std::string_view name, Inum inum) {
        std::fill_n(b.begin() + static_cast<std::ptrdiff_t>(off), kDirEntrySize, 0);
        std::memcpy(b.data() + off, name.data(), std::min(name.size(), kMaxNameLen));
        put_u32(b.data() + off + kMaxNameLen, inum);
    }

    // fn(block ordinal, slot, block, byte offset) -> stop?
    template <class Fn>
    void for_each_slot(const Inode& dir, Fn&& fn) {
        const std::size_t nblocks = dir.size / bs_;
        for (std::size_t k = 0; k < nblocks && k < kDirectRefs; ++k) {
            if (dir.block_refs[k] == 0) continue;
            const Block b = slog_.safe_read(dir.block_refs[k]);
            for (std::size_t s = 0; s < entries_per_block_; ++s) {
                if (fn(k, s, b, s * kDirEntrySize)) return;
            }
        }
    }

    FileSystem& fs_;
    const Superblock& sb_;
    SafeLog& slog_;
    std::uint32_t bs_;
    std::uint64_t inodes_per_block_;
    std::size_t entries_per_block_;
};

// FileSystem

FileSystem::FileSystem(BlockDevice& dev, Tpm& tpm, Hasher& hasher, const Superblock& sb, const MountOptions& opts)
    : dev_(dev), tpm_(tpm), hasher_(hasher), sb_(sb), geo_(sb.geometry),
      log_(dev, geo_, hasher, opts.cache), tree_(geo_, hasher, log_),
      slog_(geo_, hasher, log_, tree_, RootCommitment{tpm.get_current()}) {
    log_.set_observer(opts.observer);
}

FileSystem::~FileSystem() = default;

Tpm FileSystem::mkfs(BlockDevice& dev, const GeometryConfig& config, Hasher& hasher,
                     std::optional<std::filesystem::path> tpm_store) {
    const Superblock sb = Superblock::plan(config);
    const Geometry geo(config);
    if (hasher.block_size() != geo.block_size()) {
        throw Error(Errc::invalid_argument, "hasher block size does not match the geometry");
    }
    if (dev.block_size() != geo.block_size()) {
        throw Error(Errc::invalid_argument, "device block size " + std::to_string(dev.block_size()) +
                                                " does not match geometry block size " + std::to_string(geo.block_size()));
    }
    if (dev.block_count() < geo.layout().total_blocks) {
        throw Error(Errc::no_space, "device has " + std::to_string(dev.block_count()) + " blocks, layout needs " +
                                        std::to_string(geo.layout().total_blocks));
    }

    const std::uint32_t bs = geo.block_size();
    std::vector<std::uint8_t> data(geo.data_blocks() * bs, 0);
    auto block_span = [&](std::uint64_t index) { return std::span(data).subspan(index * bs, bs); };

    // Bitmap: metadata blocks plus the root directory block.
    const std::uint64_t root_dir_block = sb.first_free_data_index();
    for (std::uint64_t i = 0; i <= root_dir_block; ++i) {
        data[sb.bitmap_start * bs + i / 8] = static_cast<std::uint8_t>(data[sb.bitmap_start * bs + i / 8] | (1U << (i % 8)));
    }
    // Root inode.
    Inode root;
    root.kind = InodeKind::directory;
    root.size = bs;
    root.block_refs[0] = static_cast<std::uint32_t>(root_dir_block);
    const std::uint64_t ipb = bs / kInodeSize;
    root.encode_into(block_span(sb.inode_start + kRootInum / ipb).subspan((kRootInum % ipb) * kInodeSize, kInodeSize));
    // Root directory: "." and ".." both name the root.
    auto dir = block_span(root_dir_block);
    std::memcpy(dir.data(), ".", 1);
    put_u32(dir.data() + kMaxNameLen, kRootInum);
    std::memcpy(dir.data() + kDirEntrySize, "..", 2);
    put_u32(dir.data() + kDirEntrySize + kMaxNameLen, kRootInum);

    Log log(dev, geo, hasher, false);
    MerkleTree tree(geo, hasher, log);
    log.begin();
    for (std::uint64_t i = 0; i < geo.data_blocks(); ++i) {
        const auto s = block_span(i);
        log.write_data(geo.data_addr(i), Block(s.begin(), s.end()));
    }
    const RootCommitment root_commit = tree.build_initial(data);
    log.apply_unlogged();

    const Block sb_block = sb.encode();
    dev.write(0, sb_block);
    dev.sync();

    return Tpm::provision(hasher.key(), hasher.digest_block(sb_block), root_commit.digest, std::move(tpm_store));
}

std::unique_ptr<FileSystem> FileSystem::mount(BlockDevice& dev, Tpm& tpm, Hasher& hasher, MountOptions opts) {
    if (!(hasher.key() == tpm.key())) throw Error(Errc::invalid_argument, "hasher key differs from the trusted store key");
    RecoveryWindow window(dev);

    const Block sb_block = dev.read(0);
    const Digest sb_digest = hasher.digest_block(sb_block);
    if (sb_digest != tpm.get_sb()) {
        throw IntegrityFailure(IntegrityKind::superblock_mismatch, 0, tpm.get_sb(), sb_digest);
    }
    const Superblock sb = Superblock::decode(sb_block);
    if (sb.geometry.block_size != dev.block_size() || hasher.block_size() != dev.block_size()) {
        throw Error(Errc::invalid_argument, "device block size does not match the superblock");
    }

    std::unique_ptr<FileSystem> fs(new FileSystem(dev, tpm, hasher, sb, opts));
    fs->report_.recovery = fs->log_.recover();

    const Block root_block = dev.read(fs->geo_.root_block());
    const Digest on_disk = hasher.digest_block(root_block);
    if (on_disk == tpm.get_current()) {
        fs->report_.root_used = RootUsed::current;
    } else if (tpm.recover_old_hash() == on_disk) {
        fs->report_.root_used = RootUsed::recover;
    } else {
        throw IntegrityFailure(IntegrityKind::root_mismatch, fs->geo_.root_block(), tpm.get_current(), on_disk);
    }
    fs->slog_.set_pinned_root({tpm.get_current()});
    fs->state_ = FsState::running;
    return fs;
}

template <class F>
auto FileSystem::run(F&& body) {
    std::lock_guard lock(mu_);
    if (state_ == FsState::unmounted) throw Error(Errc::bad_state, "file system is not mounted");
    if (const auto& f = slog_.failure()) {
        throw IntegrityFailure(IntegrityKind::halted, f->addr(), f->expected(), f->actual());
    }
    slog_.set_pinned_root({tpm_.get_current()});
    log_.begin();
    try {
        Ops ops(*this);
        auto finish = [&] {
            const Txn& t = log_.txn();
            if (t.empty()) {
                log_.abort();
                return;
            }
            if (t.entry_count() > log_.capacity_entries()) {
                throw Error(Errc::no_space, "operation needs " + std::to_string(t.entry_count()) +
                                                 " log entries, log holds " + std::to_string(log_.capacity_entries()));
            }
            last_txn_ = {t.buffered_writes, t.data_writes.size(), t.hash_writes.size()};
            tpm_.update_hash_current(slog_.pinned_root().digest);
            log_.commit();
        };
        if constexpr (std::is_void_v<std::invoke_result_t<F, Ops&>>) {
            body(ops);
            finish();
        } else {
            auto result = body(ops);
            finish();
            return result;
        }
    } catch (const IntegrityFailure& e) {
        slog_.halt(e);
        state_ = FsState::halted;
        throw;
    } catch (const SimulatedCrash&) {
        log_.abort();
        state_ = FsState::unmounted;
        throw;
    } catch (...) {
        log_.abort();
        throw;
    }
}

Inum FileSystem::create(std::string_view path) {
    return run([&](Ops& ops) {
        auto parent = ops.resolve_parent(path);
        if (ops.find(parent.node, parent.name)) throw Error(Errc::exists, std::string(path));
        const Inum inum = ops.alloc_inode();
        Inode node;
        node.kind = InodeKind::file;
        ops.write_inode(inum, node);
        ops.add_entry(parent.inum, parent.node, parent.name, inum);
        return inum;
    });
}

Inum FileSystem::mkdir(std::string_view path) {
    return run([&](Ops& ops) {
        auto parent = ops.resolve_parent(path);
        if (ops.find(parent.node, parent.name)) throw Error(Errc::exists, std::string(path));
        const Inum inum = ops.alloc_inode();
        const std::uint32_t blk = ops.alloc_block();
        slog_.safe_write(blk, ops.dir_block(inum, parent.inum));
        Inode node;
        node.kind = InodeKind::directory;
        node.size = ops.bs();
        node.block_refs[0] = blk;
        ops.write_inode(inum, node);
        ops.add_entry(parent.inum, parent.node, parent.name, inum);
        return inum;
    });
}

void FileSystem::unlink(std::string_view path) {
    run([&](Ops& ops) {
        auto parent = ops.resolve_parent(path);
        const auto target = ops.find(parent.node, parent.name);
        if (!target) throw Error(Errc::not_found, std::string(path));
        const Inode node = ops.read_inode(*target);
        if (node.kind == InodeKind::directory) {
            for (const auto& e : ops.entries(node)) {
                if (e.name != "." && e.name != "..") throw Error(Errc::not_empty, std::string(path));
            }
        }
        for (const auto ref : node.block_refs) {
            if (ref != 0) ops.free_block(ref);
        }
        ops.write_inode(*target, Inode{});
        ops.remove_entry(parent.node, parent.name);
    });
}

Inum FileSystem::lookup(std::string_view path) {
    return run([&](Ops& ops) { return ops.resolve(path); });
}

std::vector<DirEntry> FileSystem::readdir(std::string_view path) {
    return run([&](Ops& ops) {
        const Inode node = ops.read_inode(ops.resolve(path));
        if (node.kind != InodeKind::directory) throw Error(Errc::not_directory, std::string(path));
        return ops.entries(node);
    });
}

Stat FileSystem::stat(std::string_view path) {
    return run([&](Ops& ops) {
        const Inum inum = ops.resolve(path);
        const Inode node = ops.read_inode(inum);
        Stat st;
        st.inum = inum;
        st.kind = node.kind;
        st.size = node.size;
        st.blocks = static_cast<std::uint32_t>(std::count_if(node.block_refs.begin(), node.block_refs.end(),
                                                             [](std::uint32_t r) { return r != 0; }));
        return st;
    });
}

std::size_t FileSystem::write_file(std::string_view path, std::uint64_t offset, std::span<const std::uint8_t> data) {
    return run([&](Ops& ops) -> std::size_t {
        const Inum inum = ops.resolve(path);
        Inode node = ops.read_inode(inum);
        if (node.kind != InodeKind::file) throw Error(Errc::is_directory, std::string(path));
        if (offset > max_file_size() || data.size() > max_file_size() - offset) {
            throw Error(Errc::too_large, "write past the maximum file size of " + std::to_string(max_file_size()));
        }
        if (data.empty()) return 0;
        const std::uint32_t bs = ops.bs();
        const std::uint64_t end = offset + data.size();
        for (std::uint64_t bi = offset / bs; bi <= (end - 1) / bs; ++bi) {
            Block content;
            if (node.block_refs[bi] == 0) {
                node.block_refs[bi] = ops.alloc_block();
                content.assign(bs, 0);
            } else {
                content = slog_.safe_read(node.block_refs[bi]);
            }
            const std::uint64_t lo = std::max(offset, bi * bs);
            const std::uint64_t hi = std::min(end, (bi + 1) * bs);
            std::memcpy(content.data() + (lo - bi * bs), data.data() + (lo - offset), hi - lo);
            slog_.safe_write(node.block_refs[bi], std::move(content));
        }
        node.size = std::max(node.size, end);
        ops.write_inode(inum, node);
        return data.size();
    });
}

std::vector<std::uint8_t> FileSystem::read_file(std::string_view path, std::uint64_t offset, std::uint64_t len) {
    return run([&](Ops& ops) {
        const Inode node = ops.read_inode(ops.resolve(path));
        if (node.kind != InodeKind::file) throw Error(Errc::is_directory, std::string(path));
        std::vector<std::uint8_t> out;
        if (offset >= node.size) return out;
        const std::uint64_t end = offset + std::min(len, node.size - offset);
        const std::uint32_t bs = ops.bs();
        out.reserve(end - offset);
        for (std::uint64_t bi = offset / bs; bi < end && bi <= (end - 1) / bs; ++bi) {
            const std::uint64_t lo = std::max(offset, bi * bs);
            const std::uint64_t hi = std::min(end, (bi + 1) * bs);
            if (node.block_refs[bi] == 0) {
                out.insert(out.end(), hi - lo, 0);
            } else {
                const Block b = slog_.safe_read(node.block_refs[bi]);
                out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(lo - bi * bs),
                           b.begin() + static_cast<std::ptrdiff_t>(hi - bi * bs));
            }
        }
        return out;
    });
}

void FileSystem::unmount() {
    std::lock_guard lock(mu_);
    if (state_ == FsState::unmounted) throw Error(Errc::bad_state, "already unmounted");
    log_.abort();
    dev_.sync();
    state_ = FsState::unmounted;
}

FsStatus FileSystem::status() const {
    std::lock_guard lock(mu_);
    return {state_, slog_.failure()};
}

} // namespace sentry
