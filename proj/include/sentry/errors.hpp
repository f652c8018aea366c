#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "sentry/digest.hpp"

namespace sentry {

enum class Errc {
    not_found,
    exists,
    not_empty,
    no_space,
    not_directory,
    is_directory,
    invalid_argument,
    out_of_range,
    too_large,
    bad_state,
    corrupt,
    io,
};

const char* errc_name(Errc code) noexcept;

/// Ordinary, recoverable file-system and API errors.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

enum class IntegrityKind {
    block_mismatch,      // verified read returned a block whose digest differs
    superblock_mismatch, // block 0 does not match the trusted superblock digest
    root_mismatch,       // on-disk root matches neither trusted root
    halted,              // session already failed; nothing more is served
};

const char* integrity_kind_name(IntegrityKind kind) noexcept;

/// A detected integrity violation. Distinct from Error and from SimulatedCrash:
/// once raised by a verified read the owning session refuses all further work.
class IntegrityFailure : public std::runtime_error {
public:
    IntegrityFailure(IntegrityKind kind, std::uint64_t addr, const Digest& expected,
                     const Digest& actual);

    IntegrityKind kind() const noexcept { return kind_; }
    std::uint64_t addr() const noexcept { return addr_; }
    const Digest& expected() const noexcept { return expected_; }
    const Digest& actual() const noexcept { return actual_; }

private:
    IntegrityKind kind_;
    std::uint64_t addr_;
    Digest expected_;
    Digest actual_;
};

/// Raised by fault-injecting devices to model power loss at a write boundary.
class SimulatedCrash : public std::runtime_error {
public:
    explicit SimulatedCrash(std::uint64_t writes_done)
        : std::runtime_error("simulated crash after " + std::to_string(writes_done) + " writes"),
          writes_done_(writes_done) {}

    std::uint64_t writes_done() const noexcept { return writes_done_; }

private:
    std::uint64_t writes_done_;
};

} // namespace sentry
