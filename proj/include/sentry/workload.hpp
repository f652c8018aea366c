#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sentry/errors.hpp"
#include "sentry/fsys.hpp"

namespace sentry {

enum class OpKind { create, mkdir, write, read, unlink, readdir, stat, lookup };

struct WorkloadOp {
    OpKind kind = OpKind::lookup;
    std::string path;
    std::uint64_t offset = 0;
    std::uint64_t len = 0;          // read length
    std::vector<std::uint8_t> data; // write payload

    bool mutating() const noexcept {
        return kind == OpKind::create || kind == OpKind::mkdir || kind == OpKind::write || kind == OpKind::unlink;
    }
    /// Canonical script line; parse_workload(to_line()) round-trips.
    std::string to_line() const;
};

/// One op per line: `create P`, `mkdir P`, `unlink P`, `readdir P`, `stat P`, `lookup P`,
/// `read P OFF LEN`, `write P OFF PAYLOAD` where PAYLOAD is `hex:<bytes>`, `fill:<char>:<n>`
/// or a literal token. `#` starts a comment.
std::vector<WorkloadOp> parse_workload(std::string_view text);
WorkloadOp parse_op(std::string_view line);
std::vector<std::uint8_t> parse_payload(std::string_view token);

/// Observable outcome of one operation; inode numbers are deliberately not part of it.
struct OpResult {
    std::optional<Errc> error;
    std::uint64_t count = 0;
    std::vector<std::uint8_t> bytes;
    std::vector<std::string> names; // sorted, dot entries included
    InodeKind kind = InodeKind::free;
    std::uint64_t size = 0;

    bool ok() const noexcept { return !error.has_value(); }
    friend bool operator==(const OpResult&, const OpResult&) = default;
    std::string describe() const;
};

/// Path -> file bytes, or nullopt for a directory. The root is not listed.
using TreeDump = std::map<std::string, std::optional<std::vector<std::uint8_t>>>;

/// Trivially correct in-memory file system used as the oracle.
class RefModel {
public:
    explicit RefModel(std::uint64_t max_file_size) : max_file_size_(max_file_size) {}

    /// Starts from an existing tree instead of an empty root.
    RefModel(std::uint64_t max_file_size, const TreeDump& tree);

    OpResult apply(const WorkloadOp& op);
    TreeDump dump() const;

private:
    struct Node {
        bool dir = false;
        std::map<std::string, Node> kids;
        std::vector<std::uint8_t> data;
    };

    // Parent directory and final name; throws Error.
    std::pair<Node*, std::string> parent_of(const std::vector<std::string>& comps);
    Node* walk(const std::vector<std::string>& comps, std::size_t count);
    static void dump_into(const Node& n, const std::string& prefix, TreeDump& out);

    std::uint64_t max_file_size_;
    Node root_{true, {}, {}};
};

/// Runs `op` against the real file system. Errors become OpResult::error; IntegrityFailure
/// and SimulatedCrash propagate.
OpResult run_op(FileSystem& fs, const WorkloadOp& op);

/// Full tree listing through verified reads.
TreeDump dump_tree(FileSystem& fs);

/// Seeded random operations over a small namespace, biased toward collisions.
class OpGenerator {
public:
    OpGenerator(std::uint64_t seed, std::uint64_t max_file_size, std::uint32_t block_size);
    WorkloadOp next();

private:
    std::string random_path();

    std::mt19937_64 rng_;
    std::uint64_t max_file_size_;
    std::uint32_t block_size_;
};

} // namespace sentry
