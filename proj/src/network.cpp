#include "dlmp/network.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "dlmp/error.hpp"

namespace dlmp {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return "io-error";
        case ErrorKind::schema: return "schema-error";
        case ErrorKind::cycle: return "cycle";
        case ErrorKind::multiple_roots: return "multiple-roots";
        case ErrorKind::missing_root: return "missing-root";
        case ErrorKind::dangling_ancestor: return "dangling-ancestor";
        case ErrorKind::unreachable_bus: return "unreachable-bus";
        case ErrorKind::unknown_bus: return "unknown-bus";
        case ErrorKind::index_out_of_range: return "index-out-of-range";
        case ErrorKind::negative_quadratic: return "negative-quadratic";
        case ErrorKind::invalid_base_load: return "invalid-base-load";
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::infeasible: return "infeasible";
        case ErrorKind::solver_failure: return "solver-failure";
    }
    return "unknown";
}

void validate_radial(const std::vector<Bus>& buses) {
    const int n = static_cast<int>(buses.size());
    if (n == 0) throw Error(ErrorKind::missing_root, "network has no buses");
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        int id = buses[i].id;
        if (id < 0 || id >= n)
            throw Error(ErrorKind::schema, fmt::format("bus id {} outside 0..{}", id, n - 1), id);
        if (pos[id] >= 0) throw Error(ErrorKind::schema, fmt::format("duplicate bus id {}", id), id);
        pos[id] = i;
    }
    int root = -1;
    for (const Bus& b : buses) {
        if (b.ancestor < 0) {
            if (root >= 0)
                throw Error(ErrorKind::multiple_roots,
                            fmt::format("buses {} and {} both lack an ancestor", root, b.id), b.id);
            root = b.id;
        } else if (b.ancestor >= n) {
            throw Error(ErrorKind::dangling_ancestor,
                        fmt::format("bus {} points to missing ancestor {}", b.id, b.ancestor), b.id);
        } else if (b.ancestor == b.id) {
            throw Error(ErrorKind::cycle, fmt::format("bus {} is its own ancestor", b.id), b.id);
        }
    }
    if (root < 0) throw Error(ErrorKind::missing_root, "no bus without ancestor");
    // 0 = unvisited, 1 = on current walk, 2 = reaches root
    std::vector<int> state(static_cast<std::size_t>(n), 0);
    state[root] = 2;
    for (int start = 0; start < n; ++start) {
        std::vector<int> walk;
        int cur = start;
        while (state[cur] == 0) {
            state[cur] = 1;
            walk.push_back(cur);
            cur = buses[pos[cur]].ancestor;
        }
        if (state[cur] == 1)
            throw Error(ErrorKind::cycle, fmt::format("bus {} lies on a cycle", cur), cur);
        for (int w : walk) state[w] = 2;
    }
    for (const Bus& b : buses) {
        if (b.r < 0 || b.x < 0 || b.s_max < 0)
            throw Error(ErrorKind::schema, fmt::format("bus {}: negative line parameter", b.id), b.id);
        if (b.v_min > b.v_max)
            throw Error(ErrorKind::schema, fmt::format("bus {}: Vmin exceeds Vmax", b.id), b.id);
    }
}

Network::Network(std::vector<Bus> buses, double v0) : v0_(v0) {
    validate_radial(buses);
    const std::size_t n = buses.size();
    buses_.resize(n);
    for (const Bus& b : buses) buses_[static_cast<std::size_t>(b.id)] = b;
    children_.assign(n, {});
    for (const Bus& b : buses_) {
        if (b.ancestor < 0)
            root_ = b.id;
        else
            children_[static_cast<std::size_t>(b.ancestor)].push_back(b.id);
    }
    order_.clear();
    order_.push_back(root_);
    for (std::size_t k = 0; k < order_.size(); ++k)
        for (int c : children_[static_cast<std::size_t>(order_[k])]) order_.push_back(c);
    if (order_.size() != n) throw Error(ErrorKind::unreachable_bus, "bus not reachable from root");
}

std::vector<int> Network::path_to_root(int n) const {
    if (n < 0 || n >= size()) throw Error(ErrorKind::unknown_bus, fmt::format("unknown bus {}", n), n);
    std::vector<int> path;
    for (int cur = n; cur >= 0; cur = ancestor(cur)) path.push_back(cur);
    return path;
}

std::vector<int> Network::leaves() const {
    std::vector<int> out;
    for (int n = 0; n < size(); ++n)
        if (n != root_ && children(n).empty()) out.push_back(n);
    return out;
}

bool Network::has_line(int n) const {
    if (n == root_) return false;
    const Bus& b = bus(n);
    return !(b.r == 0.0 && b.x == 0.0 && b.s_max == 0.0);
}

namespace {

double get_number(const nlohmann::json& obj, const char* key, int bus) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number())
        throw Error(ErrorKind::schema, fmt::format("bus {}: missing numeric field '{}'", bus, key), bus);
    return it->get<double>();
}

}  // namespace

Network network_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("buses") || !j["buses"].is_array())
        throw Error(ErrorKind::schema, "network: expected object with 'buses' array");
    double v0 = j.value("v0", 1.0);
    std::vector<Bus> buses;
    for (const auto& jb : j["buses"]) {
        if (!jb.is_object() || !jb.contains("id") || !jb["id"].is_number_integer())
            throw Error(ErrorKind::schema, "network: bus entry needs integer 'id'");
        Bus b;
        b.id = jb["id"].get<int>();
        const auto& anc = jb.contains("ancestor") ? jb["ancestor"] : nlohmann::json();
        if (anc.is_null())
            b.ancestor = -1;
        else if (anc.is_number_integer())
            b.ancestor = anc.get<int>();
        else
            throw Error(ErrorKind::schema, fmt::format("bus {}: 'ancestor' must be integer or null", b.id), b.id);
        b.r = get_number(jb, "r", b.id);
        b.x = get_number(jb, "x", b.id);
        b.g = get_number(jb, "g", b.id);
        b.b = get_number(jb, "b", b.id);
        b.s_max = get_number(jb, "s_max", b.id);
        b.v_min = get_number(jb, "v_min", b.id);
        b.v_max = get_number(jb, "v_max", b.id);
        buses.push_back(b);
    }
    return Network(std::move(buses), v0);
}

nlohmann::json network_to_json(const Network& net) {
    nlohmann::json j;
    j["format"] = "dlmp-network";
    j["version"] = 1;
    j["v0"] = net.v0();
    nlohmann::json arr = nlohmann::json::array();
    for (const Bus& b : net.buses()) {
        nlohmann::json jb;
        jb["id"] = b.id;
        jb["ancestor"] = b.ancestor < 0 ? nlohmann::json() : nlohmann::json(b.ancestor);
        jb["r"] = b.r;
        jb["x"] = b.x;
        jb["g"] = b.g;
        jb["b"] = b.b;
        jb["s_max"] = b.s_max;
        jb["v_min"] = b.v_min;
        jb["v_max"] = b.v_max;
        arr.push_back(jb);
    }
    j["buses"] = arr;
    return j;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, fmt::format("cannot open {}", path));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::schema, fmt::format("{}: {}", path, e.what()));
    }
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path));
    out << j.dump(2) << '\n';
}

Network load_network(const std::string& path) { return network_from_json(read_json_file(path)); }

void save_network(const Network& net, const std::string& path) { write_json_file(network_to_json(net), path); }

}  // namespace dlmp
