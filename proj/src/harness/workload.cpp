#include "sentry/workload.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace sentry {

namespace {

const std::map<std::string, OpKind, std::less<>>& op_names() {
    static const std::map<std::string, OpKind, std::less<>> names = {
        {"create", OpKind::create}, {"mkdir", OpKind::mkdir},     {"write", OpKind::write},
        {"read", OpKind::read},     {"unlink", OpKind::unlink},   {"readdir", OpKind::readdir},
        {"stat", OpKind::stat},     {"lookup", OpKind::lookup},
    };
    return names;
}

const char* op_name(OpKind k) {
    for (const auto& [name, kind] : op_names()) {
        if (kind == k) return name.c_str();
    }
    return "?";
}

std::uint64_t parse_u64(std::string_view tok, std::string_view what) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) {
        throw Error(Errc::invalid_argument, "bad " + std::string(what) + " '" + std::string(tok) + "'");
    }
    return v;
}

std::vector<std::string_view> tokens(std::string_view line) {
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

// Model-side path parsing, written independently of split_path.
std::vector<std::string> components(std::string_view path) {
    if (path.empty() || path[0] != '/') throw Error(Errc::invalid_argument, "relative path");
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 1; i <= path.size(); ++i) {
        if (i == path.size() || path[i] == '/') {
            if (!cur.empty()) {
                if (cur == "." || cur == ".." || cur.size() > kMaxNameLen) throw Error(Errc::invalid_argument, cur);
                out.push_back(cur);
            }
            cur.clear();
        } else {
            if (path[i] == '\0') throw Error(Errc::invalid_argument, "NUL in path");
            cur.push_back(path[i]);
        }
    }
    return out;
}

} // namespace

std::string WorkloadOp::to_line() const {
    std::string s = std::string(op_name(kind)) + " " + path;
    if (kind == OpKind::read) s += " " + std::to_string(offset) + " " + std::to_string(len);
    if (kind == OpKind::write) s += " " + std::to_string(offset) + " hex:" + to_hex(data);
    return s;
}

std::vector<std::uint8_t> parse_payload(std::string_view tok) {
    if (tok.starts_with("hex:")) return from_hex(std::string(tok.substr(4)));
    if (tok.starts_with("fill:")) {
        const auto rest = tok.substr(5);
        if (rest.size() < 3 || rest[1] != ':') throw Error(Errc::invalid_argument, "fill payload is fill:<char>:<n>");
        return std::vector<std::uint8_t>(parse_u64(rest.substr(2), "fill length"), static_cast<std::uint8_t>(rest[0]));
    }
    return {tok.begin(), tok.end()};
}

WorkloadOp parse_op(std::string_view line) {
    const auto toks = tokens(line);
    if (toks.empty()) throw Error(Errc::invalid_argument, "empty workload line");
    const auto it = op_names().find(toks[0]);
    if (it == op_names().end()) throw Error(Errc::invalid_argument, "unknown op '" + std::string(toks[0]) + "'");
    WorkloadOp op;
    op.kind = it->second;
    const std::size_t want = op.kind == OpKind::read || op.kind == OpKind::write ? 4 : 2;
    if (toks.size() != want) {
        throw Error(Errc::invalid_argument, "'" + std::string(toks[0]) + "' takes " + std::to_string(want - 1) + " argument(s)");
    }
    op.path = std::string(toks[1]);
    if (op.kind == OpKind::read) {
        op.offset = parse_u64(toks[2], "offset");
        op.len = parse_u64(toks[3], "length");
    } else if (op.kind == OpKind::write) {
        op.offset = parse_u64(toks[2], "offset");
        op.data = parse_payload(toks[3]);
    }
    return op;
}

std::vector<WorkloadOp> parse_workload(std::string_view text) {
    std::vector<WorkloadOp> ops;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (!tokens(line).empty()) {
            try {
                ops.push_back(parse_op(line));
            } catch (const Error& e) {
                throw Error(Errc::invalid_argument, "line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        start = end + 1;
    }
    return ops;
}

std::string OpResult::describe() const {
    if (error) return std::string("error ") + errc_name(*error);
    std::ostringstream os;
    os << "ok";
    if (count) os << " count=" << count;
    if (!bytes.empty()) os << " bytes=" << bytes.size();
    if (!names.empty()) {
        os << " names=";
        for (const auto& n : names) os << n << ',';
    }
    if (kind != InodeKind::free) os << " kind=" << static_cast<int>(kind) << " size=" << size;
    return os.str();
}

// RefModel

RefModel::RefModel(std::uint64_t max_file_size, const TreeDump& tree) : max_file_size_(max_file_size) {
    // Parents sort before their children, so one pass suffices.
    for (const auto& [path, content] : tree) {
        const auto comps = components(path);
        auto [parent, name] = parent_of(comps);
        parent->kids[name] = Node{!content.has_value(), {}, content.value_or(std::vector<std::uint8_t>{})};
    }
}

RefModel::Node* RefModel::walk(const std::vector<std::string>& comps, std::size_t count) {
    Node* n = &root_;
    for (std::size_t i = 0; i < count; ++i) {
        if (!n->dir) throw Error(Errc::not_directory, comps[i]);
        const auto it = n->kids.find(comps[i]);
        if (it == n->kids.end()) throw Error(Errc::not_found, comps[i]);
        n = &it->second;
    }
    return n;
}

std::pair<RefModel::Node*, std::string> RefModel::parent_of(const std::vector<std::string>& comps) {
    if (comps.empty()) throw Error(Errc::invalid_argument, "root has no parent");
    Node* p = walk(comps, comps.size() - 1);
    if (!p->dir) throw Error(Errc::not_directory, comps.back());
    return {p, comps.back()};
}

OpResult RefModel::apply(const WorkloadOp& op) {
    OpResult r;
    try {
        const auto comps = components(op.path);
        switch (op.kind) {
        case OpKind::create:
        case OpKind::mkdir: {
            auto [p, name] = parent_of(comps);
            if (p->kids.contains(name)) throw Error(Errc::exists, name);
            p->kids[name] = Node{op.kind == OpKind::mkdir, {}, {}};
            break;
        }
        case OpKind::unlink: {
            auto [p, name] = parent_of(comps);
            const auto it = p->kids.find(name);
            if (it == p->kids.end()) throw Error(Errc::not_found, name);
            if (it->second.dir && !it->second.kids.empty()) throw Error(Errc::not_empty, name);
            p->kids.erase(it);
            break;
        }
        case OpKind::lookup:
            walk(comps, comps.size());
            break;
        case OpKind::readdir: {
            const Node* n = walk(comps, comps.size());
            if (!n->dir) throw Error(Errc::not_directory, op.path);
            r.names = {".", ".."};
            for (const auto& [name, _] : n->kids) r.names.push_back(name);
            std::sort(r.names.begin(), r.names.end());
            break;
        }
        case OpKind::stat: {
            const Node* n = walk(comps, comps.size());
            r.kind = n->dir ? InodeKind::directory : InodeKind::file;
            r.size = n->dir ? 0 : n->data.size();
            break;
        }
        case OpKind::write: {
            Node* n = walk(comps, comps.size());
            if (n->dir) throw Error(Errc::is_directory, op.path);
            if (op.offset > max_file_size_ || op.data.size() > max_file_size_ - op.offset) {
                throw Error(Errc::too_large, op.path);
            }
            if (!op.data.empty()) {
                const std::uint64_t end = op.offset + op.data.size();
                if (n->data.size() < end) n->data.resize(end, 0);
                std::copy(op.data.begin(), op.data.end(), n->data.begin() + static_cast<std::ptrdiff_t>(op.offset));
            }
            r.count = op.data.size();
            break;
        }
        case OpKind::read: {
            const Node* n = walk(comps, comps.size());
            if (n->dir) throw Error(Errc::is_directory, op.path);
            if (op.offset < n->data.size()) {
                const std::uint64_t end = op.offset + std::min<std::uint64_t>(op.len, n->data.size() - op.offset);
                r.bytes.assign(n->data.begin() + static_cast<std::ptrdiff_t>(op.offset),
                               n->data.begin() + static_cast<std::ptrdiff_t>(end));
            }
            break;
        }
        }
    } catch (const Error& e) {
        return OpResult{.error = e.code()};
    }
    return r;
}

void RefModel::dump_into(const Node& n, const std::string& prefix, TreeDump& out) {
    for (const auto& [name, kid] : n.kids) {
        const std::string path = prefix + "/" + name;
        if (kid.dir) {
            out[path] = std::nullopt;
            dump_into(kid, path, out);
        } else {
            out[path] = kid.data;
        }
    }
}

TreeDump RefModel::dump() const {
    TreeDump out;
    dump_into(root_, "", out);
    return out;
}

// Real file system

OpResult run_op(FileSystem& fs, const WorkloadOp& op) {
    OpResult r;
    try {
        switch (op.kind) {
        case OpKind::create: fs.create(op.path); break;
        case OpKind::mkdir: fs.mkdir(op.path); break;
        case OpKind::unlink: fs.unlink(op.path); break;
        case OpKind::lookup: fs.lookup(op.path); break;
        case OpKind::readdir:
            for (auto& e : fs.readdir(op.path)) r.names.push_back(std::move(e.name));
            std::sort(r.names.begin(), r.names.end());
            break;
        case OpKind::stat: {
            const Stat st = fs.stat(op.path);
            r.kind = st.kind;
            r.size = st.kind == InodeKind::directory ? 0 : st.size;
            break;
        }
        case OpKind::write: r.count = fs.write_file(op.path, op.offset, op.data); break;
        case OpKind::read: r.bytes = fs.read_file(op.path, op.offset, op.len); break;
        }
    } catch (const Error& e) {
        return OpResult{.error = e.code()};
    }
    return r;
}

namespace {
void dump_dir(FileSystem& fs, const std::string& path, TreeDump& out) {
    for (const auto& e : fs.readdir(path.empty() ? "/" : path)) {
        if (e.name == "." || e.name == "..") continue;
        const std::string child = path + "/" + e.name;
        const Stat st = fs.stat(child);
        if (st.kind == InodeKind::directory) {
            out[child] = std::nullopt;
            dump_dir(fs, child, out);
        } else {
            out[child] = fs.read_file(child, 0, st.size);
        }
    }
}
} // namespace

TreeDump dump_tree(FileSystem& fs) {
    TreeDump out;
    dump_dir(fs, "", out);
    return out;
}

// Generator

OpGenerator::OpGenerator(std::uint64_t seed, std::uint64_t max_file_size, std::uint32_t block_size)
    : rng_(seed), max_file_size_(max_file_size), block_size_(block_size) {}

std::string OpGenerator::random_path() {
    static constexpr const char* kNames[] = {"a", "b", "c", "d"};
    std::uniform_int_distribution<int> name(0, 3);
    std::uniform_int_distribution<int> depth(1, 10);
    std::string p = std::string("/") + kNames[name(rng_)];
    if (depth(rng_) > 6) p += std::string("/") + kNames[name(rng_)];
    return p;
}

WorkloadOp OpGenerator::next() {
    std::uniform_int_distribution<int> pick(0, 99);
    const int r = pick(rng_);
    WorkloadOp op;
    op.path = random_path();
    if (r < 20) {
        op.kind = OpKind::create;
    } else if (r < 30) {
        op.kind = OpKind::mkdir;
    } else if (r < 55) {
        op.kind = OpKind::write;
        const std::uint64_t blocks = max_file_size_ / block_size_;
        std::uniform_int_distribution<std::uint64_t> blk(0, std::min<std::uint64_t>(blocks - 1, 3));
        std::uniform_int_distribution<std::uint64_t> within(0, block_size_ - 1);
        std::uniform_int_distribution<std::uint64_t> len(1, 2ULL * block_size_);
        op.offset = blk(rng_) * block_size_ + within(rng_);
        if (pick(rng_) < 2) op.offset = max_file_size_ - 1;
        op.data.resize(len(rng_));
        for (auto& b : op.data) b = static_cast<std::uint8_t>(rng_());
    } else if (r < 75) {
        op.kind = OpKind::read;
        std::uniform_int_distribution<std::uint64_t> off(0, 2ULL * block_size_);
        std::uniform_int_distribution<std::uint64_t> len(0, 3ULL * block_size_);
        op.offset = off(rng_);
        op.len = len(rng_);
    } else if (r < 85) {
        op.kind = OpKind::unlink;
    } else if (r < 93) {
        op.kind = OpKind::readdir;
        if (pick(rng_) < 30) op.path = "/";
    } else {
        op.kind = OpKind::stat;
    }
    return op;
}

} // namespace sentry
