#include <doctest.h>

#include "sentry/harness.hpp"

using namespace sentry;

TEST_CASE("workload lines parse and round trip") {
    const auto ops = parse_workload("# comment\nmkdir /d\ncreate /d/f\nwrite /d/f 4 hex:6162\n"
                                    "write /d/f 0 fill:z:3\nread /d/f 0 10\nreaddir /d\nstat /d/f\n"
                                    "lookup /d\nunlink /d/f\n\n");
    REQUIRE(ops.size() == 9);
    CHECK(ops[2].kind == OpKind::write);
    CHECK(ops[2].offset == 4);
    CHECK(ops[2].data == std::vector<std::uint8_t>{'a', 'b'});
    CHECK(ops[3].data == std::vector<std::uint8_t>{'z', 'z', 'z'});
    CHECK(ops[4].len == 10);
    for (const auto& op : ops) CHECK(parse_op(op.to_line()).to_line() == op.to_line());
    CHECK(ops[0].mutating());
    CHECK_FALSE(ops[4].mutating());
    CHECK_THROWS_AS(parse_op("frobnicate /x"), Error);
    CHECK_THROWS_AS(parse_op("read /x 1"), Error);
    CHECK_THROWS_AS(parse_op("write /x 0 hex:abc"), Error);
    CHECK(parse_payload("plain") == std::vector<std::uint8_t>{'p', 'l', 'a', 'i', 'n'});
}

TEST_CASE("reference model follows plain file system semantics") {
    RefModel m(100);
    CHECK(m.apply(parse_op("create /a")).ok());
    CHECK(m.apply(parse_op("create /a")).error == Errc::exists);
    CHECK(m.apply(parse_op("write /a 2 hex:ff")).count == 1);
    const OpResult r = m.apply(parse_op("read /a 0 10"));
    CHECK(r.bytes == std::vector<std::uint8_t>{0, 0, 0xff});
    CHECK(m.apply(parse_op("write /a 100 hex:ff")).error == Errc::too_large);
    CHECK(m.apply(parse_op("mkdir /d")).ok());
    CHECK(m.apply(parse_op("create /d/e")).ok());
    CHECK(m.apply(parse_op("unlink /d")).error == Errc::not_empty);
    CHECK(m.apply(parse_op("readdir /d")).names == std::vector<std::string>{".", "..", "e"});
    CHECK(m.apply(parse_op("create /a/x")).error == Errc::not_directory);
    CHECK(m.apply(parse_op("stat /d")).size == 0);
    const TreeDump d = m.dump();
    CHECK(d.size() == 3);
    CHECK(d.at("/a") == std::vector<std::uint8_t>{0, 0, 0xff});
    CHECK_FALSE(d.at("/d").has_value());
    RefModel copy(100, d);
    CHECK(copy.dump() == d);
}

TEST_CASE("file system agrees with the model on generated ops") {
    const auto cfg = small_config();
    Hasher h(HmacKey::from_seed(3), HashMode::production, cfg.block_size);
    MemDevice dev(cfg.block_size, Geometry(cfg).layout().total_blocks);
    Tpm tpm = FileSystem::mkfs(dev, cfg, h);
    auto fs = FileSystem::mount(dev, tpm, h);
    RefModel model(fs->max_file_size());
    OpGenerator gen(21, fs->max_file_size(), cfg.block_size);
    int mismatches = 0;
    for (int i = 0; i < 400; ++i) {
        const WorkloadOp op = gen.next();
        RefModel next = model;
        const OpResult want = next.apply(op);
        const OpResult got = run_op(*fs, op);
        if (got.error == Errc::no_space && want.ok()) continue;
        if (!(got == want)) {
            ++mismatches;
            MESSAGE(op.to_line() << ": " << want.describe() << " vs " << got.describe());
        } else {
            model = std::move(next);
        }
    }
    CHECK(mismatches == 0);
    CHECK(dump_tree(*fs) == model.dump());
}

TEST_CASE("generator is a pure function of its seed") {
    OpGenerator a(5, 1000, 256), b(5, 1000, 256), c(6, 1000, 256);
    bool differs = false;
    for (int i = 0; i < 200; ++i) {
        const auto x = a.next();
        CHECK(x.to_line() == b.next().to_line());
        differs = differs || x.to_line() != c.next().to_line();
    }
    CHECK(differs);
}

TEST_CASE("crash simulation of an empty or read-only workload has no points") {
    const auto cfg = small_config();
    Hasher h(HmacKey::from_seed(3), HashMode::production, cfg.block_size);
    const Instance inst = format_instance(cfg, h);
    CHECK(crash_sim(inst, h, {}).points.empty());
    const auto r = crash_sim(inst, h, parse_workload("readdir /\nstat /\n"));
    CHECK(r.points.empty());
    CHECK(r.mutating_ops == 0);
    CHECK(r.ok());
}

TEST_CASE("crash simulation of a short workload classifies every point") {
    const auto cfg = small_config();
    Hasher h(HmacKey::from_seed(3), HashMode::production, cfg.block_size);
    const Instance inst = format_instance(cfg, h);
    const auto r = crash_sim(inst, h, parse_workload("mkdir /d\ncreate /d/f\nwrite /d/f 0 fill:q:300\n"));
    CHECK(r.ok());
    CHECK(r.mutating_ops == 3);
    std::size_t pre = 0, post = 0;
    for (const auto& p : r.points) {
        if (p.cls == CrashClass::pre_op) ++pre;
        if (p.cls == CrashClass::post_op) ++post;
    }
    CHECK(pre > 0);
    CHECK(post > 0);
    CHECK(pre + post == r.points.size());
}

TEST_CASE("ghost trace ignores cached reads and records device reads") {
    const auto cfg = small_config();
    Hasher h(HmacKey::from_seed(3), HashMode::production, cfg.block_size);
    const Instance inst = format_instance(cfg, h);
    MemDevice dev(cfg.block_size, inst.image);
    Tpm tpm = Tpm::restore(inst.tpm);
    AdversaryDevice adv(dev);
    GhostTrace ghost(adv);
    auto fs = FileSystem::mount(adv, tpm, h, {.cache = true, .observer = &ghost});
    fs->readdir("/");
    const auto n = ghost.read().size();
    CHECK(n > 0);
    fs->readdir("/");
    CHECK(ghost.read().size() == n);
    CHECK(ghost.equal());

    fs->log().clear_cache();
    adv.flip_bits(Geometry(cfg).data_addr(Superblock::plan(cfg).first_free_data_index()), 0, {0x01});
    ghost.reset();
    CHECK_THROWS_AS(fs->readdir("/"), IntegrityFailure);
    CHECK(ghost.diverges_at_tail_only());
}

TEST_CASE("attack scripts parse") {
    const auto steps = parse_attack_script("snapshot s\nrun create /a\nflip 40 3 ff\ntamper 41 00ff\n"
                                           "rollback s\nflaky 0.5 9\ncrash-after 4\n# x\n");
    REQUIRE(steps.size() == 7);
    CHECK(steps[0].kind == AttackStepKind::snapshot);
    CHECK(steps[1].op->path == "/a");
    CHECK(steps[2].offset == 3);
    CHECK(steps[2].bytes == std::vector<std::uint8_t>{0xff});
    CHECK(steps[5].p == 0.5);
    CHECK(steps[6].n == 4);
    CHECK_THROWS_AS(parse_attack_script("smash 3"), Error);
}

TEST_CASE("bench counters are consistent") {
    const auto cfg = GeometryConfig::with_fanout(8, 3, 512, 64);
    Hasher h(HmacKey::from_seed(3), HashMode::production, cfg.block_size);
    const Instance inst = format_instance(cfg, h);
    const auto rep = bench(inst, h, smallfiles_workload(20, cfg.block_size));
    CHECK(rep.baseline_writes > 0);
    CHECK(rep.commit_writes > rep.baseline_writes);
    CHECK(rep.write_amplification == doctest::Approx(double(rep.commit_writes) / double(rep.baseline_writes)));
    CHECK(rep.tpm_updates > 0);
    CHECK_FALSE(rep.table().empty());
}
