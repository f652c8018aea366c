#include "sentry/harness.hpp"

#include <sstream>

namespace sentry {

std::string FuzzResult::summary() const {
    std::ostringstream os;
    os << "seed=" << seed << " ops=" << ops_run;
    if (halted_at) {
        os << " halted_at=" << *halted_at << " read=" << halt_read;
        if (halts.size() > 1) os << " halts=" << halts.size();
        os << (halt_at_first_corruption ? " first-corruption" : " NOT-FIRST-CORRUPTION");
    } else {
        os << " completed";
    }
    os << " corrupted_reads=" << corrupted_reads << " divergences=" << divergences
       << " final=" << (final_state_ok ? "ok" : "MISMATCH");
    return os.str();
}

namespace {

// An honest mount straight on the disk must show exactly the model's committed state.
bool honest_state_matches(MemDevice& disk, Tpm& tpm, Hasher& hasher, const Geometry& geo, const RefModel& model,
                          std::vector<std::string>& notes) {
    try {
        auto fs = FileSystem::mount(disk, tpm, hasher);
        const auto audit = MerkleTree::verify_full(disk, geo, hasher, {tpm.get_current()});
        if (audit.clean() && dump_tree(*fs) == model.dump()) return true;
        notes.push_back("honest remount differs from the model");
    } catch (const std::exception& e) {
        notes.push_back(std::string("honest remount failed: ") + e.what());
    }
    return false;
}

} // namespace

FuzzResult fuzz(const Instance& base, Hasher& hasher, const FuzzOptions& opts) {
    FuzzResult res;
    res.seed = opts.seed;
    const Geometry geo(base.config);
    MemDevice disk(base.config.block_size, base.image);
    Tpm tpm = Tpm::restore(base.tpm);
    AdversaryDevice adv(disk);
    auto fs = FileSystem::mount(adv, tpm, hasher);
    RefModel model(fs->max_file_size(), dump_tree(*fs));
    adv.set_flaky(opts.p, opts.seed);
    OpGenerator gen(opts.seed, fs->max_file_size(), geo.block_size());
    std::vector<std::uint64_t> halt_reads;

    for (std::uint64_t i = 0; i < opts.ops; ++i) {
        const WorkloadOp op = gen.next();
        if (opts.cold_cache) fs->log().clear_cache();
        RefModel next = model;
        const OpResult expect = next.apply(op);
        try {
            const OpResult got = run_op(*fs, op);
            if (got.error == Errc::no_space && expect.ok()) {
                // model does not track space
            } else if (!(got == expect)) {
                ++res.divergences;
                if (res.notes.size() < 8) {
                    res.notes.push_back("op " + std::to_string(i) + " `" + op.to_line().substr(0, 80) + "`: model " +
                                        expect.describe() + ", file system " + got.describe());
                }
            } else {
                model = std::move(next);
            }
            ++res.ops_run;
        } catch (const IntegrityFailure&) {
            if (!res.halted_at) {
                res.halted_at = i;
                res.halt_read = adv.reads_seen();
            }
            res.halts.push_back(i);
            halt_reads.push_back(adv.reads_seen());
            if (!opts.resume) break;
            fs.reset();
            res.final_state_ok = honest_state_matches(disk, tpm, hasher, geo, model, res.notes) && res.final_state_ok;
            fs = FileSystem::mount(adv, tpm, hasher);
        }
    }
    res.corrupted_reads = adv.corrupted_reads().size();
    // Every corrupted read must be exactly a halting read, and vice versa.
    res.halt_at_first_corruption = adv.corrupted_reads() == halt_reads;
    if (!res.halt_at_first_corruption) res.notes.push_back("corrupted reads and halting reads differ");

    fs.reset();
    res.final_state_ok = honest_state_matches(disk, tpm, hasher, geo, model, res.notes) && res.final_state_ok;
    return res;
}

std::vector<FuzzResult> fuzz_sweep(const Instance& base, Hasher& hasher, FuzzOptions opts,
                                   const std::vector<std::uint64_t>& seeds) {
    std::vector<FuzzResult> out(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(seeds.size()); ++i) {
        FuzzOptions o = opts;
        o.seed = seeds[static_cast<std::size_t>(i)];
        try {
            out[static_cast<std::size_t>(i)] = fuzz(base, hasher, o);
        } catch (const std::exception& e) {
            FuzzResult r;
            r.seed = o.seed;
            r.final_state_ok = false;
            r.notes.push_back(e.what());
            out[static_cast<std::size_t>(i)] = std::move(r);
        }
    }
    return out;
}

} // namespace sentry
