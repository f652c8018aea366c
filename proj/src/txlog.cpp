#include "sentry/txlog.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "sentry/errors.hpp"

namespace sentry {

namespace {

constexpr std::uint8_t kRecordMagic[8] = {'S', 'N', 'T', 'R', 'Y', 'L', 'O', 'G'};

void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

bool all_zero(const Block& b) {
    return std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; });
}

} // namespace

const char* recovery_outcome_name(RecoveryOutcome o) noexcept {
    return o == RecoveryOutcome::reapplied ? "reapplied" : "rolled-back";
}

Log::Log(BlockDevice& dev, const Geometry& geo, Hasher& hasher, bool cache_enabled)
    : dev_(dev), geo_(geo), hasher_(hasher), cache_enabled_(cache_enabled) {
    if (dev.block_size() != geo.block_size()) {
        throw Error(Errc::invalid_argument, "device block size does not match geometry");
    }
    if (dev.block_count() < geo.layout().total_blocks) {
        throw Error(Errc::invalid_argument, "device smaller than the disk layout");
    }
}

void Log::begin() {
    if (txn_.active) throw Error(Errc::bad_state, "transaction already active");
    txn_ = Txn{};
    txn_.active = true;
}

void Log::write_data(BlockAddr addr, Block b) {
    if (!txn_.active) throw Error(Errc::bad_state, "write_data outside a transaction");
    if (!geo_.layout().in_data(addr)) {
        throw Error(Errc::invalid_argument, "write_data to block " + std::to_string(addr) + " outside the data region");
    }
    if (b.size() != geo_.block_size()) throw Error(Errc::invalid_argument, "write_data: wrong block length");
    txn_.data_writes.insert_or_assign(addr, std::move(b));
    ++txn_.buffered_writes;
}

void Log::write_hash(BlockAddr addr, Block b) {
    if (!txn_.active) throw Error(Errc::bad_state, "write_hash outside a transaction");
    if (!geo_.layout().in_hash(addr)) {
        throw Error(Errc::invalid_argument, "write_hash to block " + std::to_string(addr) + " outside the hash region");
    }
    if (b.size() != geo_.block_size()) throw Error(Errc::invalid_argument, "write_hash: wrong block length");
    txn_.hash_writes.insert_or_assign(addr, std::move(b));
    ++txn_.buffered_writes;
}

Block Log::read(BlockAddr addr, const Digest& expected) {
    if (txn_.active) {
        const auto& buf = geo_.layout().in_hash(addr) ? txn_.hash_writes : txn_.data_writes;
        if (const auto it = buf.find(addr); it != buf.end()) {
            ++stats_.buffer_hits;
            return it->second;
        }
    }
    if (cache_enabled_) {
        if (const auto it = cache_.find(addr); it != cache_.end()) {
            ++stats_.cache_hits;
            return it->second;
        }
    }
    Block b = dev_.read(addr);
    ++stats_.verified_device_reads;
    const Digest actual = hasher_.digest_block(b);
    const bool ok = actual == expected;
    if (observer_ != nullptr) observer_->on_verified_read(addr, b, ok);
    if (!ok) throw IntegrityFailure(IntegrityKind::block_mismatch, addr, expected, actual);
    if (cache_enabled_) cache_.insert_or_assign(addr, b);
    return b;
}

std::size_t Log::descriptors_for(std::size_t entries) const noexcept {
    const std::size_t per_block = geo_.block_size() / 8;
    return (entries + per_block - 1) / per_block;
}

std::size_t Log::capacity_entries() const noexcept {
    // Largest n with 1 + descriptors_for(n) + n <= log_len.
    const std::size_t log_len = geo_.layout().log_len;
    std::size_t n = log_len > 2 ? log_len - 2 : 0;
    while (n > 0 && 1 + descriptors_for(n) + n > log_len) --n;
    return n;
}

void Log::zero_commit_record() {
    dev_.write(geo_.layout().log_start, Block(geo_.block_size(), 0));
}

void Log::commit() {
    if (!txn_.active) throw Error(Errc::bad_state, "commit without an active transaction");
    const std::size_t n = txn_.entry_count();
    if (n == 0) {
        txn_ = Txn{};
        return;
    }
    if (n > capacity_entries()) {
        throw Error(Errc::too_large, "transaction of " + std::to_string(n) + " blocks exceeds log capacity of " +
                                         std::to_string(capacity_entries()));
    }

    const std::uint32_t bs = geo_.block_size();
    const BlockAddr log_start = geo_.layout().log_start;
    const std::size_t ndesc = descriptors_for(n);

    std::vector<std::pair<BlockAddr, const Block*>> entries;
    entries.reserve(n);
    for (const auto& [a, b] : txn_.data_writes) entries.emplace_back(a, &b);
    for (const auto& [a, b] : txn_.hash_writes) entries.emplace_back(a, &b);

    std::vector<std::uint8_t> body(ndesc * bs + n * bs, 0);
    for (std::size_t i = 0; i < n; ++i) put_u64(body.data() + i * 8, entries[i].first);
    for (std::size_t i = 0; i < n; ++i) {
        std::memcpy(body.data() + (ndesc + i) * bs, entries[i].second->data(), bs);
    }

    const auto writes_before = dev_.counters().writes;

    // (1) log body, (2) sync
    for (std::size_t i = 0; i < ndesc + n; ++i) {
        const auto* p = body.data() + i * bs;
        dev_.write(log_start + 1 + i, Block(p, p + bs));
    }
    dev_.sync();

    // (3) commit record, (4) sync
    Block record(bs, 0);
    std::memcpy(record.data(), kRecordMagic, 8);
    put_u64(record.data() + 8, n);
    const Digest body_digest = sha256(body);
    std::memcpy(record.data() + 16, body_digest.bytes.data(), kDigestSize);
    dev_.write(log_start, record);
    dev_.sync();

    // (5) apply in place, (6) sync
    for (const auto& [addr, b] : entries) dev_.write(addr, *b);
    dev_.sync();

    // (7) retire the record, (8) sync
    zero_commit_record();
    dev_.sync();

    const std::size_t data_n = txn_.data_writes.size();
    if (data_n > 0) stats_.baseline_device_writes += descriptors_for(data_n) + 2 * data_n + 2;
    stats_.commit_device_writes += dev_.counters().writes - writes_before;
    ++stats_.commits;

    if (cache_enabled_) {
        for (auto& [a, b] : txn_.data_writes) cache_.insert_or_assign(a, std::move(b));
        for (auto& [a, b] : txn_.hash_writes) cache_.insert_or_assign(a, std::move(b));
    }
    txn_ = Txn{};
}

void Log::abort() { txn_ = Txn{}; }

RecoveryOutcome Log::recover() {
    if (txn_.active) throw Error(Errc::bad_state, "recover with an active transaction");
    cache_.clear();
    const std::uint32_t bs = geo_.block_size();
    const BlockAddr log_start = geo_.layout().log_start;
    const Block record = dev_.read(log_start);

    const bool magic_ok = std::memcmp(record.data(), kRecordMagic, 8) == 0;
    const std::uint64_t n = get_u64(record.data() + 8);
    if (magic_ok && n > 0 && n <= capacity_entries()) {
        const std::size_t ndesc = descriptors_for(n);
        std::vector<std::uint8_t> body;
        body.reserve((ndesc + n) * bs);
        for (std::size_t i = 0; i < ndesc + n; ++i) {
            const Block b = dev_.read(log_start + 1 + i);
            body.insert(body.end(), b.begin(), b.end());
        }
        const Digest body_digest = sha256(body);
        if (std::memcmp(body_digest.bytes.data(), record.data() + 16, kDigestSize) == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                const BlockAddr addr = get_u64(body.data() + i * 8);
                const auto region = addr < geo_.layout().total_blocks ? geo_.layout().region_of(addr) : Region::log;
                if (region != Region::data && region != Region::hash) {
                    throw Error(Errc::corrupt, "log entry targets block " + std::to_string(addr) +
                                                   " outside the data and hash regions");
                }
                const auto* p = body.data() + (ndesc + i) * bs;
                dev_.write(addr, Block(p, p + bs));
            }
            dev_.sync();
            zero_commit_record();
            dev_.sync();
            return RecoveryOutcome::reapplied;
        }
    }
    if (!all_zero(record)) {
        zero_commit_record();
        dev_.sync();
    }
    return RecoveryOutcome::rolled_back;
}

void Log::apply_unlogged() {
    if (!txn_.active) throw Error(Errc::bad_state, "apply without an active transaction");
    for (const auto& [a, b] : txn_.data_writes) dev_.write(a, b);
    for (const auto& [a, b] : txn_.hash_writes) dev_.write(a, b);
    zero_commit_record();
    dev_.sync();
    txn_ = Txn{};
}

} // namespace sentry
