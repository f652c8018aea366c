#include "sentry/tpm.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sentry/errors.hpp"

namespace sentry {

namespace {

constexpr char kMagic[8] = {'S', 'N', 'T', 'R', 'Y', 'T', 'P', 'M'};
constexpr std::size_t kEncodedSize = 8 + 4 + 32 + 3 * kDigestSize;

void write_file_durably(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (fd < 0) throw Error(Errc::io, "open " + path.string() + ": " + std::strerror(errno));
    const auto n = ::write(fd, bytes.data(), bytes.size());
    const bool ok = n == static_cast<ssize_t>(bytes.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error(Errc::io, "write " + path.string() + ": " + std::strerror(errno));
}

} // namespace

std::vector<std::uint8_t> Tpm::encode(const TpmState& s) {
    std::vector<std::uint8_t> out;
    out.reserve(kEncodedSize);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(kFormatVersion >> (8 * i)));
    out.insert(out.end(), s.key.bytes.begin(), s.key.bytes.end());
    for (const Digest* d : {&s.hash_sb, &s.hash_current, &s.hash_recover}) {
        out.insert(out.end(), d->bytes.begin(), d->bytes.end());
    }
    return out;
}

TpmState Tpm::decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kEncodedSize || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw Error(Errc::corrupt, "not a trusted-store file");
    }
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(bytes[8 + i]) << (8 * i);
    if (version != kFormatVersion) {
        throw Error(Errc::corrupt, "unsupported trusted-store version " + std::to_string(version));
    }
    TpmState s;
    std::size_t off = 12;
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(off), 32, s.key.bytes.begin());
    off += 32;
    for (Digest* d : {&s.hash_sb, &s.hash_current, &s.hash_recover}) {
        *d = Digest::from_bytes(bytes.subspan(off, kDigestSize));
        off += kDigestSize;
    }
    return s;
}

Tpm Tpm::provision(const HmacKey& key, const Digest& hash_sb, const Digest& initial_root,
                   std::optional<std::filesystem::path> store) {
    Tpm tpm(TpmState{key, hash_sb, initial_root, initial_root}, std::move(store));
    tpm.commit(tpm.state_);
    tpm.updates_ = 0;
    return tpm;
}

Tpm Tpm::load(const std::filesystem::path& store) {
    std::ifstream in(store, std::ios::binary);
    if (!in) throw Error(Errc::not_found, "trusted store " + store.string() + " not readable");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Tpm(decode(bytes), store);
}

void Tpm::commit(const TpmState& next) {
    if (store_) {
        auto tmp = *store_;
        tmp += ".tmp";
        write_file_durably(tmp, encode(next));
        if (persist_hook_) persist_hook_();
        std::error_code ec;
        std::filesystem::rename(tmp, *store_, ec);
        if (ec) throw Error(Errc::io, "rename trusted store: " + ec.message());
    }
    state_ = next;
    ++updates_;
}

void Tpm::update_hash_current(const Digest& new_root) {
    TpmState next = state_;
    next.hash_recover = state_.hash_current;
    next.hash_current = new_root;
    commit(next);
}

Digest Tpm::recover_old_hash() {
    TpmState next = state_;
    next.hash_current = state_.hash_recover;
    commit(next);
    return state_.hash_current;
}

Tpm Tpm::detached() const {
    Tpm copy(state_, std::nullopt);
    copy.updates_ = updates_;
    return copy;
}

} // namespace sentry
