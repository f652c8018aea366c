#include "sentry/harness.hpp"

#include <algorithm>

namespace sentry {

const char* attack_target_name(AttackTarget t) noexcept {
    switch (t) {
    case AttackTarget::file_data: return "file data block";
    case AttackTarget::inode_table: return "inode table";
    case AttackTarget::directory: return "directory block";
    case AttackTarget::hash_node: return "hash block";
    case AttackTarget::free_bitmap: return "free bitmap";
    }
    return "?";
}

std::vector<WorkloadOp> attack_workload() {
    return parse_workload(R"(
mkdir /docs
mkdir /src
create /docs/readme
write /docs/readme 0 fill:r:300
create /src/main.c
write /src/main.c 0 fill:m:600
create /notes
write /notes 0 hello
mkdir /src/lib
create /src/lib/util.c
write /src/lib/util.c 0 fill:u:256
read /docs/readme 0 300
readdir /src
create /tmp1
write /tmp1 0 fill:t:100
unlink /tmp1
stat /src/main.c
write /notes 5 fill:w:40
readdir /
lookup /src/lib/util.c
)");
}

namespace {

struct Target {
    BlockAddr addr;
    std::size_t offset;
};

Target locate(BlockDevice& dev, AttackTarget target) {
    const Superblock sb = Superblock::decode(dev.raw_read(0));
    const Geometry geo(sb.geometry);
    const std::uint64_t ipb = geo.block_size() / kInodeSize;
    auto inode = [&](Inum n) {
        const Block b = dev.raw_read(geo.data_addr(sb.inode_start + n / ipb));
        return Inode::decode(std::span(b).subspan((n % ipb) * kInodeSize, kInodeSize));
    };
    switch (target) {
    case AttackTarget::file_data:
        for (Inum n = kRootInum + 1; n < sb.inode_count; ++n) {
            const Inode node = inode(n);
            if (node.kind == InodeKind::file && node.block_refs[0] != 0) return {geo.data_addr(node.block_refs[0]), 0};
        }
        throw Error(Errc::not_found, "no file with data to attack");
    case AttackTarget::inode_table:
        return {geo.data_addr(sb.inode_start + kRootInum / ipb), (kRootInum % ipb) * kInodeSize + 8};
    case AttackTarget::directory:
        return {geo.data_addr(inode(kRootInum).block_refs[0]), 2 * kDirEntrySize};
    case AttackTarget::hash_node:
        return {geo.node_location(1, 0), 0};
    case AttackTarget::free_bitmap:
        return {geo.data_addr(sb.bitmap_start), 1};
    }
    throw Error(Errc::invalid_argument, "unknown attack target");
}

std::uint64_t mismatch_size(const OpResult& got, const OpResult& want) {
    if (got == want) return 0;
    std::uint64_t n = got.bytes.size() > want.bytes.size() ? got.bytes.size() - want.bytes.size()
                                                           : want.bytes.size() - got.bytes.size();
    for (std::size_t i = 0; i < std::min(got.bytes.size(), want.bytes.size()); ++i) n += got.bytes[i] != want.bytes[i];
    return std::max<std::uint64_t>(n, 1);
}

} // namespace

AttackCase run_attack_case(const GeometryConfig& config, Hasher& hasher, AttackTarget target) {
    AttackCase c;
    c.target = target;
    const Instance base = format_instance(config, hasher);
    MemDevice dev(config.block_size, base.image);
    Tpm tpm = Tpm::restore(base.tpm);
    RefModel model(kDirectRefs * config.block_size);
    {
        AdversaryDevice honest(dev);
        GhostTrace ghost(honest);
        auto fs = FileSystem::mount(honest, tpm, hasher, {.cache = false, .observer = &ghost});
        for (const auto& op : attack_workload()) {
            ghost.reset();
            if (!(run_op(*fs, op) == model.apply(op))) throw Error(Errc::corrupt, "workload diverged before the attack: " + op.to_line());
            ++c.ghost_checks;
            if (!ghost.equal()) ++c.ghost_failures;
        }
        fs->unmount();
    }

    // Offline tamper, with the untampered image kept as the ghost trace's truth.
    const Target t = locate(dev, target);
    c.addr = t.addr;
    AdversaryDevice adv(dev, dev.image());
    adv.flip_bits(t.addr, t.offset, {0xff, 0x5a});

    GhostTrace ghost(adv);
    std::unique_ptr<FileSystem> fs;
    try {
        fs = FileSystem::mount(adv, tpm, hasher, {.cache = true, .observer = &ghost});
    } catch (const IntegrityFailure& e) {
        c.detected = true;
        c.at_mount = true;
        c.kind = e.kind();
        c.detail = e.what();
        return c;
    }

    // Re-read everything, then force an allocation so the bitmap is consulted.
    std::vector<WorkloadOp> probes;
    for (const auto& [path, content] : model.dump()) {
        if (content) {
            probes.push_back({OpKind::read, path, 0, content->size()});
        } else {
            probes.push_back({OpKind::readdir, path});
        }
    }
    probes.push_back({OpKind::readdir, "/"});
    probes.push_back({OpKind::create, "/probe"});
    WorkloadOp w{OpKind::write, "/probe"};
    w.data.assign(config.block_size, 'p');
    probes.push_back(w);
    probes.push_back({OpKind::read, "/probe", 0, config.block_size});

    for (const auto& op : probes) {
        ghost.reset();
        RefModel next = model;
        const OpResult want = next.apply(op);
        try {
            const OpResult got = run_op(*fs, op);
            ++c.ghost_checks;
            if (!ghost.equal()) ++c.ghost_failures;
            c.wrong_bytes_returned += mismatch_size(got, want);
            if (got == want) model = std::move(next);
            ++c.ops_served;
        } catch (const IntegrityFailure& e) {
            ++c.ghost_checks;
            if (!ghost.diverges_at_tail_only()) ++c.ghost_failures;
            c.detected = true;
            c.kind = e.kind();
            c.detail = e.what();
            break;
        }
    }
    if (c.detected) {
        // A halted session must refuse everything afterwards.
        try {
            const OpResult after = run_op(*fs, {OpKind::readdir, "/"});
            c.wrong_bytes_returned += std::max<std::uint64_t>(1, after.names.size());
        } catch (const IntegrityFailure&) {
        }
    }
    return c;
}

RollbackTrial rollback_trial(const Instance& base, Hasher& hasher, std::uint64_t seed,
                             std::uint64_t commits_before, std::uint64_t commits_after) {
    RollbackTrial r;
    r.commits_after_snapshot = commits_after;
    MemDevice disk(base.config.block_size, base.image);
    Tpm tpm = Tpm::restore(base.tpm);
    AdversaryDevice adv(disk);
    auto fs = FileSystem::mount(adv, tpm, hasher);
    OpGenerator gen(seed, fs->max_file_size(), base.config.block_size);

    auto commit = [&](std::uint64_t n) {
        const std::uint64_t target = tpm.update_count() + n;
        for (int guard = 0; tpm.update_count() < target; ++guard) {
            if (guard > 100000) throw Error(Errc::bad_state, "workload stopped committing");
            run_op(*fs, gen.next());
        }
    };
    commit(commits_before);
    const TreeDump at_snapshot = dump_tree(*fs);
    const SnapshotId snap = adv.snapshot();
    const Digest snap_root = tpm.get_current();
    commit(commits_after);
    r.snapshot_root_trusted = snap_root == tpm.get_current() || snap_root == tpm.get_recover();

    fs.reset(); // power loss: no unmount
    adv.rollback(snap);
    try {
        auto again = FileSystem::mount(adv, tpm, hasher);
        r.mounted = true;
        r.root = again->mount_report().root_used;
        r.state_matches_snapshot = dump_tree(*again) == at_snapshot;
    } catch (const IntegrityFailure& e) {
        r.failure = e.kind();
    }
    return r;
}

} // namespace sentry
