#include "sentry/harness.hpp"

#include <charconv>
#include <sstream>

namespace sentry {

Instance format_instance(const GeometryConfig& config, Hasher& hasher) {
    const Geometry geo(config);
    MemDevice dev(config.block_size, geo.layout().total_blocks);
    const Tpm tpm = FileSystem::mkfs(dev, config, hasher);
    return {config, dev.image(), tpm.state()};
}

GeometryConfig small_config() { return GeometryConfig::with_fanout(8, 2, 64, 64); }

// Ghost trace

void GhostTrace::on_verified_read(BlockAddr addr, const Block& obtained, bool) {
    expected_.push_back({addr, dev_.truth(addr)});
    read_.push_back({addr, obtained});
}

void GhostTrace::reset() {
    expected_.clear();
    read_.clear();
}

bool GhostTrace::diverges_at_tail_only() const {
    if (expected_.empty() || expected_.size() != read_.size()) return false;
    const std::size_t last = expected_.size() - 1;
    for (std::size_t i = 0; i < last; ++i) {
        if (!(expected_[i] == read_[i])) return false;
    }
    return !(expected_[last] == read_[last]);
}

// Audit

ImageAudit audit_image(BlockDevice& dev, const Tpm& tpm, Hasher& hasher) {
    ImageAudit out;
    const Block sb_block = dev.read(0);
    if (hasher.digest_block(sb_block) != tpm.get_sb()) {
        out.superblock_ok = false;
        return out;
    }
    const Geometry geo(Superblock::decode(sb_block).geometry);
    out.current = MerkleTree::verify_full(dev, geo, hasher, {tpm.get_current()});
    if (out.current.clean()) {
        out.root = RootUsed::current;
        return out;
    }
    out.recover = MerkleTree::verify_full(dev, geo, hasher, {tpm.get_recover()});
    if (out.recover.clean()) out.root = RootUsed::recover;
    return out;
}

std::vector<std::string> ImageAudit::lines() const {
    if (!superblock_ok) return {"SUPERBLOCK-MISMATCH"};
    if (root == RootUsed::current) return {current.line() + " trusted=current"};
    if (root == RootUsed::recover) return {recover.line() + " trusted=recover"};
    return {current.line() + " trusted=current", recover.line() + " trusted=recover"};
}

// Attack scripts

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t j = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > j) out.push_back(line.substr(j, i - j));
    }
    return out;
}

template <class T>
T number(std::string_view tok) {
    T v{};
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) {
        throw Error(Errc::invalid_argument, "bad number '" + std::string(tok) + "'");
    }
    return v;
}

AttackStep parse_step(std::string_view line) {
    const auto t = split_ws(line);
    AttackStep s;
    auto need = [&](std::size_t n) {
        if (t.size() != n) throw Error(Errc::invalid_argument, "'" + std::string(t[0]) + "' takes " + std::to_string(n - 1) + " argument(s)");
    };
    if (t[0] == "tamper") {
        need(3);
        s.kind = AttackStepKind::tamper;
        s.addr = number<BlockAddr>(t[1]);
        s.bytes = from_hex(std::string(t[2]));
    } else if (t[0] == "flip") {
        need(4);
        s.kind = AttackStepKind::flip;
        s.addr = number<BlockAddr>(t[1]);
        s.offset = number<std::size_t>(t[2]);
        s.bytes = from_hex(std::string(t[3]));
    } else if (t[0] == "snapshot" || t[0] == "rollback") {
        need(2);
        s.kind = t[0] == "snapshot" ? AttackStepKind::snapshot : AttackStepKind::rollback;
        s.name = std::string(t[1]);
        if (s.name.find('/') != std::string::npos) throw Error(Errc::invalid_argument, "snapshot names cannot contain '/'");
    } else if (t[0] == "flaky") {
        need(3);
        s.kind = AttackStepKind::flaky;
        s.p = number<double>(t[1]);
        s.n = number<std::uint64_t>(t[2]);
    } else if (t[0] == "crash-after") {
        need(2);
        s.kind = AttackStepKind::crash_after;
        s.n = number<std::uint64_t>(t[1]);
    } else if (t[0] == "run") {
        s.kind = AttackStepKind::run;
        s.op = parse_op(line.substr(line.find("run") + 3));
    } else {
        throw Error(Errc::invalid_argument, "unknown attack step '" + std::string(t[0]) + "'");
    }
    return s;
}

} // namespace

std::vector<AttackStep> parse_attack_script(std::string_view text) {
    std::vector<AttackStep> steps;
    std::size_t start = 0;
    std::size_t lineno = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        ++lineno;
        if (const auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
        if (!split_ws(line).empty()) {
            try {
                steps.push_back(parse_step(line));
            } catch (const Error& e) {
                throw Error(Errc::invalid_argument, "line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        start = end + 1;
    }
    return steps;
}

} // namespace sentry
