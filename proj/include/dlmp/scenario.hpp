#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dlmp/network.hpp"

namespace dlmp {

struct LoadSpec {
    int bus = 0;
    std::vector<double> p_min;  // per period
    std::vector<double> p_max;
    double energy = 0.0;  // sum over periods of consumption must reach this
    double tau = 0.0;     // reactive consumption = tau * active consumption
    // Optional box on net reactive injection q.
    std::optional<std::vector<double>> q_min;
    std::optional<std::vector<double>> q_max;
};

struct DerSpec {
    int bus = 0;
    std::vector<double> p_avail;
    double rho_min = 0.0;
    double rho_max = 0.0;
};

struct LaCost {
    enum class Kind { zero, preferred_profile };
    Kind kind = Kind::zero;
    double weight = 0.0;
    // bus -> preferred net consumption per period
    std::map<int, std::vector<double>> profile;
};

struct Aggregator {
    int id = 0;
    std::vector<int> buses;
    LaCost cost;
};

// Period cost of substation supply x = -p0: alpha_t x + beta_t x^2, plus
// alpha_loss * sum R l over all lines and periods.
struct CostModel {
    std::vector<double> alpha;
    std::vector<double> beta;
    double alpha_loss = 0.0;
};

// Net injections per bus and period; the root row is unused.
struct Profile {
    Eigen::MatrixXd p;
    Eigen::MatrixXd q;

    static Profile zeros(int buses, int horizon) {
        return {Eigen::MatrixXd::Zero(buses, horizon), Eigen::MatrixXd::Zero(buses, horizon)};
    }
};

struct Scenario {
    std::string name;
    Network network;
    int horizon = 1;
    std::vector<LoadSpec> loads;  // one per non-root bus
    std::vector<DerSpec> ders;
    std::vector<Aggregator> aggregators;
    CostModel cost;
    std::optional<std::uint64_t> seed;

    const LoadSpec* load_at(int bus) const;
    const DerSpec* der_at(int bus) const;
    // Index into aggregators, -1 for the root.
    int aggregator_of(int bus) const;
    // Throws Error(schema) on inconsistent dimensions or a non-partition.
    void validate() const;
};

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

nlohmann::json profile_to_json(const Profile& p);
Profile profile_from_json(const nlohmann::json& j);

struct GenerationOptions {
    int horizon = 2;
    std::vector<double> base_p;  // expected active consumption per bus
    std::vector<double> base_q;
    std::vector<int> der_buses;
    double der_avail_max = 0.6;
    double rho_min = 0.0;
    double rho_max = 0.0;
    std::vector<Aggregator> aggregators;
    CostModel cost;
};

// Draws consumption bounds, energy targets and DER availability from a
// mt19937_64 stream. Same seed, same scenario.
Scenario generate_scenario(const Network& net, const GenerationOptions& opt, std::uint64_t seed);

// Uniform draw on [a, b] using the top 53 bits of one mt19937_64 output, so the
// stream does not depend on the standard library's distribution code.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
    double operator()(double a, double b) {
        double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return a + (b - a) * u;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dlmp
