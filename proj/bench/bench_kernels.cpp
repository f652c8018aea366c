// Serial vs OpenMP whole-tree kernels: bulk hashing, tree build, full audit.
// Usage: bench_kernels [data_blocks] [fanout] [depth]

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <random>

#include "sentry/merkle_kernels.hpp"

using namespace sentry;

namespace {

template <class F>
double seconds(F&& f) {
    const double t0 = omp_get_wtime();
    f();
    return omp_get_wtime() - t0;
}

} // namespace

int main(int argc, char** argv) {
    const std::uint64_t blocks = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 8192;
    const std::uint32_t fanout = argc > 2 ? static_cast<std::uint32_t>(std::strtoul(argv[2], nullptr, 10)) : 128;
    const std::uint32_t depth = argc > 3 ? static_cast<std::uint32_t>(std::strtoul(argv[3], nullptr, 10))
                                         : min_depth(blocks, fanout);
    const Geometry geo(GeometryConfig::with_fanout(fanout, depth, blocks, 64));
    Hasher h(HmacKey::from_seed(42), HashMode::production, geo.block_size());

    std::vector<std::uint8_t> data(blocks * geo.block_size());
    std::mt19937_64 rng(1);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());

    std::printf("data blocks %llu, block size %u, fanout %u, depth %u, threads %d\n",
                static_cast<unsigned long long>(blocks), geo.block_size(), fanout, depth, omp_get_max_threads());

    std::vector<Digest> ls, lp;
    const double hs = seconds([&] { ls = kernels::hash_blocks_serial(h, data, geo.block_size()); });
    const double hp = seconds([&] { lp = kernels::hash_blocks_parallel(h, data, geo.block_size()); });

    kernels::TreeImage ts, tp;
    const double bs = seconds([&] { ts = kernels::build_tree_serial(h, geo, ls); });
    const double bp = seconds([&] { tp = kernels::build_tree_parallel(h, geo, lp); });

    kernels::AuditFinding as, ap;
    const double xs = seconds([&] { as = kernels::audit_serial(h, geo, ts.hash_region, data, ts.root); });
    const double xp = seconds([&] { ap = kernels::audit_parallel(h, geo, tp.hash_region, data, tp.root); });

    const bool same = ls == lp && ts.hash_region == tp.hash_region && ts.root == tp.root && as.clean() && ap.clean();

    std::printf("%-12s %10s %10s %8s\n", "kernel", "serial s", "omp s", "speedup");
    std::printf("%-12s %10.4f %10.4f %8.2f\n", "hash_blocks", hs, hp, hs / hp);
    std::printf("%-12s %10.4f %10.4f %8.2f\n", "build_tree", bs, bp, bs / bp);
    std::printf("%-12s %10.4f %10.4f %8.2f\n", "audit", xs, xp, xs / xp);
    std::printf("outputs %s\n", same ? "identical" : "DIFFER");
    return same ? 0 : 1;
}
