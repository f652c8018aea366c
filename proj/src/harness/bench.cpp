#include "sentry/harness.hpp"

#include <cstdio>

namespace sentry {

namespace {
const char* class_name(OpKind k) {
    switch (k) {
    case OpKind::create: return "create";
    case OpKind::mkdir: return "mkdir";
    case OpKind::write: return "write";
    case OpKind::read: return "read";
    case OpKind::unlink: return "unlink";
    case OpKind::readdir: return "readdir";
    case OpKind::stat: return "stat";
    case OpKind::lookup: return "lookup";
    }
    return "?";
}
} // namespace

BenchReport bench(const Instance& base, Hasher& hasher, const std::vector<WorkloadOp>& ops, bool cache) {
    BenchReport rep;
    MemDevice dev(base.config.block_size, base.image);
    Tpm tpm = Tpm::restore(base.tpm);
    auto fs = FileSystem::mount(dev, tpm, hasher, {.cache = cache, .observer = nullptr});

    std::vector<BenchRow> rows(8);
    for (int k = 0; k < 8; ++k) rows[static_cast<std::size_t>(k)].op_class = class_name(static_cast<OpKind>(k));
    const LogStats s0 = fs->log_stats();
    const auto tpm0 = tpm.update_count();

    for (const auto& op : ops) {
        const OpCounters c0 = dev.counters();
        const auto h0 = hasher.hash_counter();
        const auto commits0 = fs->log_stats().commits;
        run_op(*fs, op);
        const OpCounters d = dev.counters() - c0;
        BenchRow& row = rows[static_cast<std::size_t>(op.kind)];
        ++row.ops;
        row.reads += d.reads;
        row.writes += d.writes;
        row.syncs += d.syncs;
        row.hashes += hasher.hash_counter() - h0;
        if (fs->log_stats().commits != commits0) rep.data_block_writes += fs->last_txn().data_entries;
    }
    for (auto& r : rows) {
        if (r.ops) rep.rows.push_back(std::move(r));
    }
    const LogStats& s1 = fs->log_stats();
    rep.commit_writes = s1.commit_device_writes - s0.commit_device_writes;
    rep.baseline_writes = s1.baseline_device_writes - s0.baseline_device_writes;
    rep.tpm_updates = tpm.update_count() - tpm0;
    rep.write_amplification =
        rep.baseline_writes ? static_cast<double>(rep.commit_writes) / static_cast<double>(rep.baseline_writes) : 0.0;
    return rep;
}

std::string BenchReport::table() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %6s %8s %8s %8s %8s\n", "op", "count", "Read", "Write", "Sync", "Hash");
    out += line;
    BenchRow total{"total"};
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-8s %6llu %8llu %8llu %8llu %8llu\n", r.op_class.c_str(),
                      static_cast<unsigned long long>(r.ops), static_cast<unsigned long long>(r.reads),
                      static_cast<unsigned long long>(r.writes), static_cast<unsigned long long>(r.syncs),
                      static_cast<unsigned long long>(r.hashes));
        out += line;
        total.ops += r.ops;
        total.reads += r.reads;
        total.writes += r.writes;
        total.syncs += r.syncs;
        total.hashes += r.hashes;
    }
    std::snprintf(line, sizeof line, "%-8s %6llu %8llu %8llu %8llu %8llu\n", "total",
                  static_cast<unsigned long long>(total.ops), static_cast<unsigned long long>(total.reads),
                  static_cast<unsigned long long>(total.writes), static_cast<unsigned long long>(total.syncs),
                  static_cast<unsigned long long>(total.hashes));
    out += line;
    std::snprintf(line, sizeof line,
                  "data blocks written %llu, commit writes %llu, without hash blocks %llu, amplification %.3f, "
                  "trusted-root updates %llu\n",
                  static_cast<unsigned long long>(data_block_writes), static_cast<unsigned long long>(commit_writes),
                  static_cast<unsigned long long>(baseline_writes), write_amplification,
                  static_cast<unsigned long long>(tpm_updates));
    out += line;
    return out;
}

std::vector<WorkloadOp> smallfiles_workload(std::size_t files, std::uint32_t block_size, std::size_t per_dir) {
    std::vector<WorkloadOp> ops;
    for (std::size_t i = 0; i < files; ++i) {
        const std::string dir = "/s" + std::to_string(i / per_dir);
        if (i % per_dir == 0) ops.push_back({OpKind::mkdir, dir});
        const std::string path = dir + "/f" + std::to_string(i);
        ops.push_back({OpKind::create, path});
        WorkloadOp w{OpKind::write, path};
        w.data.assign(block_size, static_cast<std::uint8_t>('a' + i % 26));
        ops.push_back(std::move(w));
    }
    return ops;
}

} // namespace sentry
