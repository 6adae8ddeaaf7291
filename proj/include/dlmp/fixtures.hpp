#pragma once

#include <cstdint>
#include <vector>

#include "dlmp/scenario.hpp"

namespace dlmp {

// Two-bus, two-period example with one flexible consumer. The literal variant
// reads the second period's quadratic term as squaring the first period's supply.
Scenario fixture_toy(bool literal_cost = false);
// The toy with a different announced upper consumption bound.
Scenario fixture_toy_with_pmax(std::vector<double> p_max, bool literal_cost = false);

Network network_15bus();
std::vector<double> base_p_15bus();
std::vector<double> base_q_15bus();
std::vector<Aggregator> aggregators_15bus();
CostModel cost_15bus();
Scenario fixture_15bus(std::uint64_t seed);

// Reference two-period net load profile for the 15-bus feeder, with the
// DER output at bus 11 already netted out.
Profile fixture_15bus_table2_profiles();
// Reference consumption column and DER output, kept separately for reporting.
Eigen::MatrixXd table2_consumption();
std::vector<double> table2_der_output();

// Random radial feeder of the given size for property checks.
struct RandomNetworkOptions {
    double r_max = 0.05;
    double x_max = 0.05;
    double s_min = 0.5;
    double s_max = 1.5;
    double shunt_max = 2e-3;
    double v_min = 0.81;
    double v_max = 1.21;
    bool zero_impedance = false;
};
Network random_network(int buses, std::uint64_t seed, const RandomNetworkOptions& opt = {});
// Random scenario on a random feeder, with zero LA costs and one DER.
Scenario random_scenario(int buses, int horizon, std::uint64_t seed, const RandomNetworkOptions& opt = {});

}  // namespace dlmp
