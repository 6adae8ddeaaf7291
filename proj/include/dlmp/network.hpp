#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace dlmp {

// Line data is stored on the downstream bus: bus n carries the line (n, ancestor(n)).
struct Bus {
    int id = 0;
    int ancestor = -1;  // -1 for the substation bus
    double r = 0.0;
    double x = 0.0;
    double g = 0.0;  // shunt conductance
    double b = 0.0;  // shunt susceptance
    double s_max = 0.0;
    double v_min = 0.0;  // squared magnitude bounds
    double v_max = 0.0;
};

class Network {
public:
    Network() = default;
    // Throws Error on any structural problem. Buses are reindexed so that
    // bus i sits at position i; ids must be 0..N.
    explicit Network(std::vector<Bus> buses, double v0 = 1.0);

    int size() const { return static_cast<int>(buses_.size()); }
    int root() const { return root_; }
    double v0() const { return v0_; }
    const Bus& bus(int n) const { return buses_.at(static_cast<std::size_t>(n)); }
    const std::vector<Bus>& buses() const { return buses_; }

    int ancestor(int n) const { return bus(n).ancestor; }
    const std::vector<int>& children(int n) const { return children_.at(static_cast<std::size_t>(n)); }
    // n, ancestor(n), ..., root
    std::vector<int> path_to_root(int n) const;
    // Buses ordered so every bus appears after its ancestor.
    const std::vector<int>& topological_order() const { return order_; }
    std::vector<int> leaves() const;
    // A line exists on bus n unless n is the root or the line is degenerate
    // (R = X = S = 0).
    bool has_line(int n) const;

private:
    std::vector<Bus> buses_;
    std::vector<std::vector<int>> children_;
    std::vector<int> order_;
    int root_ = 0;
    double v0_ = 1.0;
};

// Checks a bus list for radiality. Throws Error with the offending bus.
void validate_radial(const std::vector<Bus>& buses);

Network network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const Network& net);
Network load_network(const std::string& path);
void save_network(const Network& net, const std::string& path);

}  // namespace dlmp

namespace dlmp {

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace dlmp
