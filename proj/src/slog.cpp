#include "sentry/slog.hpp"

namespace sentry {

SafeLog::SafeLog(const Geometry& geo, Hasher& hasher, Log& log, MerkleTree& tree, const RootCommitment& root)
    : geo_(geo), hasher_(hasher), log_(log), tree_(tree), pinned_(root) {}

void SafeLog::check_running() const {
    if (failure_) throw IntegrityFailure(IntegrityKind::halted, failure_->addr(), failure_->expected(), failure_->actual());
}

void SafeLog::halt(const IntegrityFailure& f) {
    if (!failure_) failure_ = f;
    log_.abort();
}

template <class F>
auto SafeLog::guarded(F&& f) {
    check_running();
    try {
        return f();
    } catch (const IntegrityFailure& e) {
        halt(e);
        throw;
    }
}

Block SafeLog::safe_read(std::uint64_t data_index) {
    return guarded([&] {
        const Digest leaf = tree_.get_hash_from_root(data_index, pinned_);
        return log_.read(geo_.data_addr(data_index), leaf);
    });
}

RootCommitment SafeLog::safe_write(std::uint64_t data_index, Block v) {
    return guarded([&] {
        const BlockAddr addr = geo_.data_addr(data_index);
        const Digest leaf = hasher_.digest_block(v);
        log_.write_data(addr, std::move(v));
        pinned_ = tree_.update_hash(data_index, leaf, pinned_);
        return pinned_;
    });
}

} // namespace sentry
