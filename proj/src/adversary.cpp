#include "sentry/adversary.hpp"

#include <algorithm>

#include "sentry/errors.hpp"

namespace sentry {

AdversaryDevice::AdversaryDevice(BlockDevice& inner)
    : AdversaryDevice(inner, dump_image(inner)) {}

AdversaryDevice::AdversaryDevice(BlockDevice& inner, std::vector<std::uint8_t> truth)
    : BlockDevice(inner.block_size(), inner.block_count()), inner_(inner), truth_(std::move(truth)) {
    if (truth_.size() != inner.block_count() * inner.block_size()) {
        throw Error(Errc::invalid_argument, "truth image does not match the device size");
    }
}

void AdversaryDevice::tamper(BlockAddr addr, const Block& b) { inner_.raw_write(addr, b); }

void AdversaryDevice::flip_bits(BlockAddr addr, std::size_t byte_offset,
                                const std::vector<std::uint8_t>& xor_mask) {
    if (byte_offset > block_size() || xor_mask.size() > block_size() - byte_offset) {
        throw Error(Errc::out_of_range, "bit flip mask runs past the end of the block");
    }
    Block b = inner_.raw_read(addr);
    for (std::size_t i = 0; i < xor_mask.size(); ++i) b[byte_offset + i] ^= xor_mask[i];
    inner_.raw_write(addr, b);
}

void AdversaryDevice::tamper_after_recovery(BlockAddr addr, const Block& b) {
    check_addr(addr);
    check_block(b);
    schedule_.pending_tampers.emplace_back(addr, b);
}

SnapshotId AdversaryDevice::snapshot() {
    const SnapshotId id = next_snapshot_++;
    snapshots_.emplace(id, dump_image(inner_));
    return id;
}

void AdversaryDevice::rollback(SnapshotId id) {
    const auto it = snapshots_.find(id);
    if (it == snapshots_.end()) {
        throw Error(Errc::not_found, "unknown snapshot " + std::to_string(id));
    }
    const auto& image = it->second;
    for (BlockAddr a = 0; a < block_count(); ++a) {
        const auto off = static_cast<std::ptrdiff_t>(a * block_size());
        inner_.raw_write(a, Block(image.begin() + off, image.begin() + off + block_size()));
    }
}

void AdversaryDevice::set_flaky(double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "flaky probability outside [0,1]");
    schedule_.flaky_probability = p;
    schedule_.rng_seed = seed;
    rng_.seed(seed);
}

void AdversaryDevice::schedule_crash(std::uint64_t after_writes) {
    schedule_.crash_after_writes = after_writes;
    writes_since_schedule_ = 0;
}

void AdversaryDevice::set_recovery_window(bool open) {
    const bool closing = in_recovery_ && !open;
    in_recovery_ = open;
    if (closing) {
        for (const auto& [addr, b] : schedule_.pending_tampers) inner_.raw_write(addr, b);
        schedule_.pending_tampers.clear();
    }
}

Block AdversaryDevice::truth(BlockAddr addr) const {
    check_addr(addr);
    const auto off = static_cast<std::ptrdiff_t>(addr * block_size());
    return Block(truth_.begin() + off, truth_.begin() + off + block_size());
}

Block AdversaryDevice::do_read(BlockAddr addr) {
    if (crashed_) throw SimulatedCrash(writes_since_schedule_);
    Block b = inner_.read(addr);
    ++reads_seen_;
    const double p = schedule_.flaky_probability;
    if (p > 0.0 && attacking()) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(rng_) < p) {
            bool nonzero = false;
            for (auto& byte : b) {
                const auto mask = static_cast<std::uint8_t>(rng_());
                nonzero = nonzero || mask != 0;
                byte ^= mask;
            }
            if (!nonzero) b[0] ^= 0x01;
            corrupted_reads_.push_back(reads_seen_);
        }
    }
    return b;
}

void AdversaryDevice::do_write(BlockAddr addr, const Block& b) {
    if (crashed_) throw SimulatedCrash(writes_since_schedule_);
    if (schedule_.crash_after_writes && writes_since_schedule_ >= *schedule_.crash_after_writes) {
        crashed_ = true;
        throw SimulatedCrash(writes_since_schedule_);
    }
    ++writes_since_schedule_;
    inner_.write(addr, b);
    std::copy(b.begin(), b.end(), truth_.begin() + static_cast<std::ptrdiff_t>(addr * block_size()));
}

void AdversaryDevice::do_sync() {
    if (crashed_) throw SimulatedCrash(writes_since_schedule_);
    inner_.sync();
}

} // namespace sentry
