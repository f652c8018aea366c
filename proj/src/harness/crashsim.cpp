#include "sentry/harness.hpp"

#include <sstream>

namespace sentry {

const char* crash_class_name(CrashClass c) noexcept {
    switch (c) {
    case CrashClass::pre_op: return "pre-op";
    case CrashClass::post_op: return "post-op";
    case CrashClass::violation: return "VIOLATION";
    }
    return "?";
}

const char* crash_policy_name(CrashPolicy p) noexcept {
    switch (p) {
    case CrashPolicy::drop_all: return "drop";
    case CrashPolicy::keep_all: return "keep";
    case CrashPolicy::random_subset: return "random";
    }
    return "?";
}

std::string CrashPoint::line() const {
    std::ostringstream os;
    os << "step=" << step << " crash=" << write_index << "/" << op_writes << " policy=" << crash_policy_name(policy)
       << " recovery=" << (recovery ? recovery_outcome_name(*recovery) : "-")
       << " root=" << (root ? root_used_name(*root) : "-") << " class=" << crash_class_name(cls);
    if (!detail.empty()) os << " (" << detail << ")";
    return os.str();
}

namespace {

struct StepContext {
    std::size_t step;
    const WorkloadOp* op;
    const std::vector<std::uint8_t>* pre_image;
    TpmState pre_tpm;
    TpmState post_tpm;
    TreeDump pre;
    TreeDump post;
    std::uint64_t op_writes;
};

CrashPoint run_point(const StepContext& ctx, const Geometry& geo, Hasher& hasher, std::uint64_t k,
                     CrashPolicy policy, std::uint64_t seed) {
    CrashPoint p;
    p.step = ctx.step;
    p.write_index = k;
    p.op_writes = ctx.op_writes;
    p.policy = policy;
    try {
        MemDevice dev(geo.block_size(), *ctx.pre_image);
        Tpm tpm = Tpm::restore(ctx.pre_tpm);
        {
            AdversaryDevice adv(dev);
            auto fs = FileSystem::mount(adv, tpm, hasher);
            if (k < ctx.op_writes) adv.schedule_crash(k);
            bool crashed = false;
            try {
                run_op(*fs, *ctx.op);
            } catch (const SimulatedCrash&) {
                crashed = true;
            }
            if (crashed != (k < ctx.op_writes)) {
                p.detail = "crash schedule not reproduced";
                return p;
            }
        }
        dev.crash(policy, seed);
        auto fs = FileSystem::mount(dev, tpm, hasher);
        p.recovery = fs->mount_report().recovery;
        p.root = fs->mount_report().root_used;
        const Digest root = tpm.get_current();
        const auto audit = MerkleTree::verify_full(dev, geo, hasher, {root});
        if (!audit.clean()) {
            p.detail = "audit " + audit.line();
            return p;
        }
        const TreeDump now = dump_tree(*fs);
        if (root == ctx.pre_tpm.hash_current && now == ctx.pre) {
            p.cls = CrashClass::pre_op;
        } else if (root == ctx.post_tpm.hash_current && now == ctx.post) {
            p.cls = CrashClass::post_op;
        } else {
            p.detail = now == ctx.pre ? "pre-op tree under the wrong root"
                       : now == ctx.post ? "post-op tree under the wrong root"
                                         : "tree matches neither pre-op nor post-op";
        }
    } catch (const std::exception& e) {
        p.detail = e.what();
    }
    return p;
}

} // namespace

CrashReport crash_sim(const Instance& base, Hasher& hasher, const std::vector<WorkloadOp>& ops,
                      const CrashSimOptions& opts) {
    CrashReport report;
    const Geometry geo(base.config);
    MemDevice main(base.config.block_size, base.image);
    Tpm tpm = Tpm::restore(base.tpm);
    auto fs = FileSystem::mount(main, tpm, hasher);
    RefModel model(fs->max_file_size(), dump_tree(*fs));

    for (std::size_t i = 0; i < ops.size(); ++i) {
        const WorkloadOp& op = ops[i];
        RefModel next = model;
        const OpResult expect = next.apply(op);
        const std::vector<std::uint8_t> pre_image = main.image();
        StepContext ctx{i, &op, &pre_image, tpm.state(), {}, model.dump(), {}, 0};

        const auto before = main.counters().writes;
        const OpResult got = run_op(*fs, op);
        ctx.op_writes = main.counters().writes - before;

        if (got.error == Errc::no_space && expect.ok()) {
            // Resource exhaustion the model does not track; the op must have left no trace.
        } else if (!(got == expect)) {
            report.notes.push_back("step " + std::to_string(i) + " `" + op.to_line() + "`: model " +
                                   expect.describe() + ", file system " + got.describe());
        } else {
            model = std::move(next);
        }
        if (!op.mutating()) continue;
        ++report.mutating_ops;
        if (ctx.op_writes == 0) continue;
        ctx.post_tpm = tpm.state();
        ctx.post = model.dump();

        const std::size_t np = opts.policies.size();
        const auto jobs = static_cast<std::int64_t>((ctx.op_writes + 1) * np);
        std::vector<CrashPoint> points(static_cast<std::size_t>(jobs));
#pragma omp parallel for schedule(dynamic) if (opts.parallel)
        for (std::int64_t j = 0; j < jobs; ++j) {
            const auto k = static_cast<std::uint64_t>(j) / np;
            const CrashPolicy policy = opts.policies[static_cast<std::size_t>(j) % np];
            const std::uint64_t seed = opts.seed ^ (i * 0x9E3779B97F4A7C15ULL) ^ (k * 0xBF58476D1CE4E5B9ULL);
            points[static_cast<std::size_t>(j)] = run_point(ctx, geo, hasher, k, policy, seed);
        }
        for (auto& p : points) {
            if (p.cls == CrashClass::violation) ++report.violations;
            report.points.push_back(std::move(p));
        }
    }
    return report;
}

} // namespace sentry
