#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sentry {

inline constexpr std::size_t kDigestSize = 32;

/// Raw block payload. Devices enforce the length; everything above treats it as opaque bytes.
using Block = std::vector<std::uint8_t>;

struct Digest {
    std::array<std::uint8_t, kDigestSize> bytes{};

    friend bool operator==(const Digest&, const Digest&) = default;
    friend auto operator<=>(const Digest&, const Digest&) = default;

    std::string hex() const;
    static Digest from_bytes(std::span<const std::uint8_t> src);
};

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Throws Error(invalid_argument) on odd length or non-hex characters.
std::vector<std::uint8_t> from_hex(const std::string& text);

} // namespace sentry
