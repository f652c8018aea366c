// sentry: format, inspect, attack and check Merkle-protected disk images.
//
// Exit codes: 0 success, 1 usage or other failure, 2 file-system error,
// 3 integrity failure detected, 4 crash-sim or fuzz violation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>

#include "sentry/harness.hpp"

namespace fs = std::filesystem;
using namespace sentry;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kFsError = 2;
constexpr int kIntegrity = 3;
constexpr int kViolation = 4;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::not_found, "cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, std::span<const std::uint8_t> bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
}

// An opened image with its trusted store and a matching hasher.
struct Session {
    Tpm tpm;
    std::uint32_t block_size;
    std::unique_ptr<FileDevice> dev;
    std::unique_ptr<Hasher> hasher;

    Session(const fs::path& image, const fs::path& tpm_path)
        : tpm(Tpm::load(tpm_path)), block_size(Superblock::peek_block_size(image)),
          dev(std::make_unique<FileDevice>(image, block_size)),
          hasher(std::make_unique<Hasher>(tpm.key(), hash_mode_from_env(), block_size)) {}

    Instance instance() {
        const Superblock sb = Superblock::decode(dev->raw_read(0));
        return {sb.geometry, dump_image(*dev), tpm.state()};
    }
};

struct Paths {
    std::string image;
    std::string tpm;
};

void add_paths(CLI::App* cmd, Paths& p) {
    cmd->add_option("--image", p.image, "disk image file")->required();
    cmd->add_option("--tpm", p.tpm, "trusted-store file")->required();
}

int cmd_mkfs(const Paths& p, std::uint32_t fanout, std::optional<std::uint32_t> depth, std::uint64_t blocks,
             std::uint64_t log_blocks, std::optional<std::uint64_t> seed) {
    const std::uint32_t d = depth.value_or(min_depth(blocks, fanout));
    const GeometryConfig cfg = GeometryConfig::with_fanout(fanout, d, blocks, log_blocks);
    const Geometry geo(cfg);
    const std::uint64_t need = geo.layout().total_blocks;
    if (fs::exists(p.image) && fs::file_size(p.image) < need * cfg.block_size) {
        std::cerr << "mkfs: " << p.image << " holds " << fs::file_size(p.image) << " bytes, the layout needs "
                  << need * cfg.block_size << "\n";
        return kFailure;
    }
    FileDevice::create(p.image, cfg.block_size, need);
    FileDevice dev(p.image, cfg.block_size);
    Hasher hasher(seed ? HmacKey::from_seed(*seed) : HmacKey::generate(), hash_mode_from_env(), cfg.block_size);
    const Tpm tpm = FileSystem::mkfs(dev, cfg, hasher, fs::path(p.tpm));
    const auto& l = geo.layout();
    std::printf("block_size=%u fanout=%u depth=%u\n", cfg.block_size, cfg.fanout, cfg.depth);
    std::printf("superblock=0 log=[%llu,+%llu) hash=[%llu,+%llu) data=[%llu,+%llu) total=%llu\n",
                static_cast<unsigned long long>(l.log_start), static_cast<unsigned long long>(l.log_len),
                static_cast<unsigned long long>(l.hash_start), static_cast<unsigned long long>(l.hash_len),
                static_cast<unsigned long long>(l.data_start), static_cast<unsigned long long>(l.data_len),
                static_cast<unsigned long long>(l.total_blocks));
    std::printf("hash fraction of capacity %.6f%%\n",
                100.0 * static_cast<double>(l.hash_len) / static_cast<double>(geo.capacity()));
    std::printf("hash_mode=%s root=%s\n", hash_mode_name(hasher.mode()), tpm.get_current().hex().c_str());
    return kOk;
}

int cmd_mount_check(const Paths& p) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    std::printf("recovery=%s root=%s\n", recovery_outcome_name(f->mount_report().recovery),
                root_used_name(f->mount_report().root_used));
    f->unmount();
    return kOk;
}

int cmd_ls(const Paths& p, const std::string& path) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    for (const auto& e : f->readdir(path)) {
        const bool dot = e.name == "." || e.name == "..";
        const Stat st = dot ? Stat{e.inum, InodeKind::directory, 0, 0} : f->stat((path == "/" ? "" : path) + "/" + e.name);
        std::printf("%s%s\t%u\t%llu\n", e.name.c_str(), st.kind == InodeKind::directory ? "/" : "", e.inum,
                    static_cast<unsigned long long>(st.kind == InodeKind::file ? st.size : 0));
    }
    f->unmount();
    return kOk;
}

int cmd_cat(const Paths& p, const std::string& path) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    const auto bytes = f->read_file(path, 0, f->stat(path).size);
    std::fwrite(bytes.data(), 1, bytes.size(), stdout);
    f->unmount();
    return kOk;
}

void ensure_file(FileSystem& f, const std::string& path) {
    try {
        f.lookup(path);
    } catch (const Error& e) {
        if (e.code() != Errc::not_found) throw;
        f.create(path);
    }
}

int cmd_write(const Paths& p, const std::string& path, std::uint64_t offset, const std::string& payload) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    ensure_file(*f, path);
    std::printf("%zu\n", f->write_file(path, offset, parse_payload(payload)));
    f->unmount();
    return kOk;
}

int cmd_cp_in(const Paths& p, const std::string& host, const std::string& path) {
    const std::string content = slurp(host);
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    if (content.size() > f->max_file_size()) {
        throw Error(Errc::too_large, host + " is " + std::to_string(content.size()) + " bytes, the limit is " +
                                         std::to_string(f->max_file_size()));
    }
    try {
        f->unlink(path);
    } catch (const Error& e) {
        if (e.code() != Errc::not_found) throw;
    }
    f->create(path);
    f->write_file(path, 0, std::span(reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
    f->unmount();
    return kOk;
}

int cmd_cp_out(const Paths& p, const std::string& path, const std::string& host) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    spit(host, f->read_file(path, 0, f->stat(path).size));
    f->unmount();
    return kOk;
}

int cmd_rm(const Paths& p, const std::string& path) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    f->unlink(path);
    f->unmount();
    return kOk;
}

int cmd_mkdir(const Paths& p, const std::string& path) {
    Session s(p.image, p.tpm);
    auto f = FileSystem::mount(*s.dev, s.tpm, *s.hasher);
    f->mkdir(path);
    f->unmount();
    return kOk;
}

int cmd_attack(const Paths& p, const std::string& script, bool strict) {
    const auto steps = parse_attack_script(slurp(script));
    Session s(p.image, p.tpm);
    AdversaryDevice adv(*s.dev);
    adv.set_strict(strict);
    std::unique_ptr<FileSystem> f;
    int rc = kOk;
    auto offline = [&] {
        if (f) f->unmount();
        f.reset();
    };
    for (const auto& st : steps) {
        switch (st.kind) {
        case AttackStepKind::tamper:
            offline();
            adv.tamper(st.addr, st.bytes);
            std::printf("tamper %llu\n", static_cast<unsigned long long>(st.addr));
            break;
        case AttackStepKind::flip:
            offline();
            adv.flip_bits(st.addr, st.offset, st.bytes);
            std::printf("flip %llu+%zu\n", static_cast<unsigned long long>(st.addr), st.offset);
            break;
        case AttackStepKind::snapshot:
            offline();
            spit(p.image + ".snap." + st.name, dump_image(*s.dev));
            std::printf("snapshot %s\n", st.name.c_str());
            break;
        case AttackStepKind::rollback: {
            offline();
            const std::string img = slurp(p.image + ".snap." + st.name);
            const std::uint32_t bs = s.block_size;
            if (img.size() != s.dev->block_count() * bs) throw Error(Errc::invalid_argument, "snapshot size differs from the image");
            for (BlockAddr a = 0; a < s.dev->block_count(); ++a) {
                adv.tamper(a, Block(img.begin() + static_cast<std::ptrdiff_t>(a * bs),
                                    img.begin() + static_cast<std::ptrdiff_t>((a + 1) * bs)));
            }
            std::printf("rollback %s\n", st.name.c_str());
            break;
        }
        case AttackStepKind::flaky:
            adv.set_flaky(st.p, st.n);
            std::printf("flaky p=%g seed=%llu\n", st.p, static_cast<unsigned long long>(st.n));
            break;
        case AttackStepKind::crash_after:
            adv.schedule_crash(st.n);
            std::printf("crash-after %llu\n", static_cast<unsigned long long>(st.n));
            break;
        case AttackStepKind::run: {
            try {
                if (!f) {
                    f = FileSystem::mount(adv, s.tpm, *s.hasher);
                    std::printf("mount recovery=%s root=%s\n", recovery_outcome_name(f->mount_report().recovery),
                                root_used_name(f->mount_report().root_used));
                }
                const OpResult r = run_op(*f, *st.op);
                std::printf("run %s -> %s\n", st.op->to_line().c_str(), r.describe().c_str());
                if (!r.ok()) rc = std::max(rc, kFsError);
            } catch (const SimulatedCrash& e) {
                std::printf("run %s -> crashed (%s)\n", st.op->to_line().c_str(), e.what());
                f.reset();
                return rc;
            } catch (const IntegrityFailure& e) {
                std::printf("run %s -> %s\n", st.op->to_line().c_str(), e.what());
                return kIntegrity;
            }
            break;
        }
        }
    }
    offline();
    return rc;
}

int cmd_crashsim(const Paths& p, const std::string& script, std::uint64_t seed, bool quiet) {
    const auto ops = parse_workload(slurp(script));
    Session s(p.image, p.tpm);
    CrashSimOptions opts;
    opts.seed = seed;
    const CrashReport rep = crash_sim(s.instance(), *s.hasher, ops, opts);
    for (const auto& pt : rep.points) {
        if (!quiet || pt.cls == CrashClass::violation) std::printf("%s\n", pt.line().c_str());
    }
    for (const auto& n : rep.notes) std::printf("model: %s\n", n.c_str());
    std::printf("ops=%zu mutating=%zu crash_points=%zu violations=%zu\n", ops.size(), rep.mutating_ops,
                rep.points.size(), rep.violations);
    return rep.ok() ? kOk : kViolation;
}

int cmd_fuzz(const Paths& p, double prob, std::uint64_t seed, std::uint64_t ops, bool resume, bool warm) {
    Session s(p.image, p.tpm);
    FuzzOptions o;
    o.p = prob;
    o.seed = seed;
    o.ops = ops;
    o.resume = resume;
    o.cold_cache = !warm;
    const FuzzResult r = fuzz(s.instance(), *s.hasher, o);
    std::printf("%s\n", r.summary().c_str());
    for (const auto& n : r.notes) std::printf("  %s\n", n.c_str());
    return r.ok() ? kOk : kViolation;
}

int cmd_bench(const Paths& p, const std::string& script, bool no_cache) {
    const auto ops = parse_workload(slurp(script));
    Session s(p.image, p.tpm);
    std::fputs(bench(s.instance(), *s.hasher, ops, !no_cache).table().c_str(), stdout);
    return kOk;
}

int cmd_audit(const Paths& p) {
    Session s(p.image, p.tpm);
    const ImageAudit a = audit_image(*s.dev, s.tpm, *s.hasher);
    for (const auto& l : a.lines()) std::printf("%s\n", l.c_str());
    return a.clean() ? kOk : kIntegrity;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Merkle-protected file-system images: format, inspect, attack, check"};
    app.require_subcommand(1);
    Paths paths;
    std::function<int()> action;

    std::uint32_t fanout = 128;
    std::optional<std::uint32_t> depth;
    std::uint64_t blocks = 1024;
    std::uint64_t log_blocks = 64;
    std::optional<std::uint64_t> key_seed;
    auto* mkfs = app.add_subcommand("mkfs", "create an image and its trusted store");
    add_paths(mkfs, paths);
    mkfs->add_option("--fanout", fanout, "digests per hash block (block size = 32 x fanout)")->capture_default_str();
    mkfs->add_option("--depth", depth, "tree depth (default: smallest depth covering --blocks)");
    mkfs->add_option("--blocks", blocks, "data blocks")->capture_default_str();
    mkfs->add_option("--log-blocks", log_blocks, "log region blocks")->capture_default_str();
    mkfs->add_option("--seed", key_seed, "derive the key from a seed instead of the system RNG");
    mkfs->callback([&] { action = [&] { return cmd_mkfs(paths, fanout, depth, blocks, log_blocks, key_seed); }; });

    auto* mc = app.add_subcommand("mount-check", "mount (recovering if needed) and unmount");
    add_paths(mc, paths);
    mc->callback([&] { action = [&] { return cmd_mount_check(paths); }; });

    std::string path = "/";
    std::string host;
    std::string payload;
    std::uint64_t offset = 0;

    auto* ls = app.add_subcommand("ls", "list a directory");
    add_paths(ls, paths);
    ls->add_option("path", path)->capture_default_str();
    ls->callback([&] { action = [&] { return cmd_ls(paths, path); }; });

    auto* cat = app.add_subcommand("cat", "print a file");
    add_paths(cat, paths);
    cat->add_option("path", path)->required();
    cat->callback([&] { action = [&] { return cmd_cat(paths, path); }; });

    auto* write = app.add_subcommand("write", "write bytes into a file, creating it if missing");
    add_paths(write, paths);
    write->add_option("path", path)->required();
    write->add_option("payload", payload, "hex:<bytes>, fill:<char>:<n> or literal text")->required();
    write->add_option("--offset", offset)->capture_default_str();
    write->callback([&] { action = [&] { return cmd_write(paths, path, offset, payload); }; });

    auto* cpin = app.add_subcommand("cp-in", "copy a host file into the image");
    add_paths(cpin, paths);
    cpin->add_option("host", host)->required();
    cpin->add_option("path", path)->required();
    cpin->callback([&] { action = [&] { return cmd_cp_in(paths, host, path); }; });

    auto* cpout = app.add_subcommand("cp-out", "copy a file out of the image");
    add_paths(cpout, paths);
    cpout->add_option("path", path)->required();
    cpout->add_option("host", host)->required();
    cpout->callback([&] { action = [&] { return cmd_cp_out(paths, path, host); }; });

    auto* rm = app.add_subcommand("rm", "remove a file or empty directory");
    add_paths(rm, paths);
    rm->add_option("path", path)->required();
    rm->callback([&] { action = [&] { return cmd_rm(paths, path); }; });

    auto* md = app.add_subcommand("mkdir", "create a directory");
    add_paths(md, paths);
    md->add_option("path", path)->required();
    md->callback([&] { action = [&] { return cmd_mkdir(paths, path); }; });

    std::string script;
    bool strict = false;
    auto* attack = app.add_subcommand("attack", "apply an attack script to an unmounted image");
    add_paths(attack, paths);
    attack->add_option("--script", script)->required();
    attack->add_flag("--strict", strict, "keep attacking during mount-time recovery");
    attack->callback([&] { action = [&] { return cmd_attack(paths, script, strict); }; });

    std::uint64_t seed = 0;
    bool quiet = false;
    auto* cs = app.add_subcommand("crashsim", "crash at every write of every op in a workload");
    add_paths(cs, paths);
    cs->add_option("--script", script)->required();
    cs->add_option("--seed", seed, "seed for the random-subset crash policy")->capture_default_str();
    cs->add_flag("--quiet", quiet, "print only violations and the summary");
    cs->callback([&] { action = [&] { return cmd_crashsim(paths, script, seed, quiet); }; });

    double prob = 0.0;
    std::uint64_t ops = 1000;
    bool resume = false;
    bool warm = false;
    auto* fz = app.add_subcommand("fuzz", "random ops on a flaky disk, checked against a model");
    add_paths(fz, paths);
    fz->add_option("--p", prob, "probability that a read is corrupted")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    fz->add_option("--seed", seed)->capture_default_str();
    fz->add_option("--ops", ops)->capture_default_str();
    fz->add_flag("--resume", resume, "continue in a fresh session after each halt");
    fz->add_flag("--warm", warm, "keep the block cache between ops");
    fz->callback([&] { action = [&] { return cmd_fuzz(paths, prob, seed, ops, resume, warm); }; });

    bool no_cache = false;
    auto* bn = app.add_subcommand("bench", "count device operations and digests per op class");
    add_paths(bn, paths);
    bn->add_option("--script", script)->required();
    bn->add_flag("--no-cache", no_cache);
    bn->callback([&] { action = [&] { return cmd_bench(paths, script, no_cache); }; });

    auto* au = app.add_subcommand("audit", "offline full-tree audit against the trusted roots");
    add_paths(au, paths);
    au->callback([&] { action = [&] { return cmd_audit(paths); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kFailure;
    }
    try {
        return action();
    } catch (const IntegrityFailure& e) {
        std::fflush(stdout);
        std::cerr << e.what() << "\n";
        return kIntegrity;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kFsError;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kFailure;
    }
}
