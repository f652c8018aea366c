#include "sentry/errors.hpp"

#include <algorithm>
#include <cctype>

namespace sentry {

const char* errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::not_found: return "not found";
    case Errc::exists: return "already exists";
    case Errc::not_empty: return "directory not empty";
    case Errc::no_space: return "no space";
    case Errc::not_directory: return "not a directory";
    case Errc::is_directory: return "is a directory";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::out_of_range: return "out of range";
    case Errc::too_large: return "too large";
    case Errc::bad_state: return "bad state";
    case Errc::corrupt: return "corrupt";
    case Errc::io: return "i/o error";
    }
    return "unknown";
}

const char* integrity_kind_name(IntegrityKind kind) noexcept {
    switch (kind) {
    case IntegrityKind::block_mismatch: return "block digest mismatch";
    case IntegrityKind::superblock_mismatch: return "superblock digest mismatch";
    case IntegrityKind::root_mismatch: return "merkle root mismatch";
    case IntegrityKind::halted: return "file system halted";
    }
    return "unknown";
}

IntegrityFailure::IntegrityFailure(IntegrityKind kind, std::uint64_t addr, const Digest& expected,
                                   const Digest& actual)
    : std::runtime_error(std::string("integrity failure: ") + integrity_kind_name(kind) +
                         " at block " + std::to_string(addr)),
      kind_(kind), addr_(addr), expected_(expected), actual_(actual) {}

std::string Digest::hex() const { return to_hex(bytes); }

Digest Digest::from_bytes(std::span<const std::uint8_t> src) {
    if (src.size() != kDigestSize) {
        throw Error(Errc::invalid_argument, "digest must be " + std::to_string(kDigestSize) + " bytes");
    }
    Digest d;
    std::copy(src.begin(), src.end(), d.bytes.begin());
    return d;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& text) {
    auto nibble = [&](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        throw Error(Errc::invalid_argument, "bad hex digit in '" + text + "'");
    };
    if (text.size() % 2 != 0) throw Error(Errc::invalid_argument, "odd-length hex string");
    std::vector<std::uint8_t> out(text.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(nibble(text[2 * i]) << 4 | nibble(text[2 * i + 1]));
    }
    return out;
}

} // namespace sentry
