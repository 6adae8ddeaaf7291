#include "dlmp/fixtures.hpp"

#include <algorithm>
#include <numeric>

#include "dlmp/error.hpp"

namespace dlmp {

Scenario fixture_toy_with_pmax(std::vector<double> p_max, bool literal_cost) {
    std::vector<Bus> buses(2);
    buses[0] = Bus{0, -1, 0, 0, 0, 0, 0, 1.0, 1.0};
    buses[1] = Bus{1, 0, 0.001, 0.12, 0.0, 0.0011, 5.0, 0.7, 1.3};
    Scenario s;
    s.name = literal_cost ? "toy-literal" : "toy";
    s.network = Network(buses, 1.0);
    s.horizon = 2;
    LoadSpec l;
    l.bus = 1;
    l.p_min = {0.3, 0.2};
    l.p_max = std::move(p_max);
    l.energy = 1.0;
    l.tau = 0.3;
    l.q_min = std::vector<double>{-0.5, -0.5};
    l.q_max = std::vector<double>{1.0, 1.0};
    s.loads.push_back(l);
    Aggregator a;
    a.id = 1;
    a.buses = {1};
    a.cost.kind = LaCost::Kind::preferred_profile;
    a.cost.weight = 10.0;
    a.cost.profile[1] = {1.5, 1.5};
    s.aggregators.push_back(a);
    s.cost.alpha = {10.0, 3.0};
    // Literal reading: 10x0 + 10x0^2 + 3x1 + 2x0^2, regrouped per period.
    s.cost.beta = literal_cost ? std::vector<double>{12.0, 0.0} : std::vector<double>{10.0, 2.0};
    s.validate();
    return s;
}

Scenario fixture_toy(bool literal_cost) { return fixture_toy_with_pmax({1.5, 2.0}, literal_cost); }

Network network_15bus() {
    const int anc[15] = {-1, 0, 1, 2, 3, 4, 5, 8, 3, 8, 9, 10, 0, 12, 13};
    const double r[15] = {0, .001, .0883, .1384, .0191, .0175, .0482, .0523, .0407, .01, .0241, .0103, .001, .1559, .0953};
    const double x[15] = {0, .12, .1262, .1978, .0273, .0251, .0689, .0747, .0582, .0143, .0345, .0148, .12, .1119, .0684};
    const double smax[15] = {0, 2, .256, .256, .256, .256, .256, .256, .256, .256, .256, .256, 1, .204, .204};
    const double b_milli[15] = {0, 1.1, 2.8, 2.4, .4, .8, .6, .6, 1.2, .4, .4, .1, .1, .2, .1};
    std::vector<Bus> buses;
    for (int n = 0; n < 15; ++n) {
        Bus b;
        b.id = n;
        b.ancestor = anc[n];
        b.r = r[n];
        b.x = x[n];
        b.s_max = smax[n];
        b.b = b_milli[n] * 1e-3;
        b.v_min = n == 0 ? 1.0 : 0.81;
        b.v_max = n == 0 ? 1.0 : 1.21;
        buses.push_back(b);
    }
    return Network(buses, 1.0);
}

std::vector<double> base_p_15bus() {
    return {0, .7936, 0, .0201, .0173, .0291, .0219, -.1969, .0235, .0229, .0217, .0132, .6219, .0014, .0224};
}

std::vector<double> base_q_15bus() {
    return {0, .1855, 0, .0084, .0043, .0073, .0055, 0, .0059, .0142, .0065, .0033, .1291, .0008, .0083};
}

std::vector<Aggregator> aggregators_15bus() {
    const std::vector<std::vector<int>> groups = {{1, 2, 3}, {4, 5, 6, 12, 13}, {8, 7, 14}, {9, 10}, {11}};
    std::vector<Aggregator> out;
    for (std::size_t a = 0; a < groups.size(); ++a) {
        Aggregator agg;
        agg.id = static_cast<int>(a) + 1;
        agg.buses = groups[a];
        out.push_back(agg);
    }
    return out;
}

CostModel cost_15bus() { return CostModel{{1.0, 1.0}, {1.0, 0.0}, 0.0}; }

Scenario fixture_15bus(std::uint64_t seed) {
    GenerationOptions opt;
    opt.horizon = 2;
    opt.base_p = base_p_15bus();
    opt.base_q = base_q_15bus();
    opt.der_buses = {11};
    opt.der_avail_max = 0.6;
    opt.rho_min = 0.0;
    opt.rho_max = 0.0;
    opt.aggregators = aggregators_15bus();
    opt.cost = cost_15bus();
    Scenario s = generate_scenario(network_15bus(), opt, seed);
    s.name = "15bus";
    return s;
}

namespace {

// Rows are buses 0..14; columns are (consumption, net reactive) for t = 0, 1.
const double kReferenceProfile[15][4] = {
    {-0.56, -0.249, -1.299, -0.549},
    {0.623, 0.146, 1.05, 0.245},
    {0.0, 0.0, 0.0, 0.0},
    {0.028, 0.012, 0.037, 0.015},
    {0.005, 0.001, 0.027, 0.007},
    {0.001, 0.0, 0.031, 0.008},
    {0.013, 0.003, 0.026, 0.006},
    {-0.131, 0.0, -0.143, 0.0},
    {0.023, 0.006, 0.006, 0.001},
    {0.002, 0.001, 0.036, 0.022},
    {0.014, 0.004, 0.015, 0.004},
    {0.02, 0.005, 0.026, 0.006},
    {0.107, 0.022, 0.342, 0.071},
    {0.003, 0.002, 0.002, 0.001},
    {0.022, 0.008, 0.03, 0.011},
};

}  // namespace

Eigen::MatrixXd table2_consumption() {
    Eigen::MatrixXd pc = Eigen::MatrixXd::Zero(15, 2);
    for (int n = 1; n < 15; ++n) {
        pc(n, 0) = kReferenceProfile[n][0];
        pc(n, 1) = kReferenceProfile[n][2];
    }
    return pc;
}

std::vector<double> table2_der_output() { return {0.185, 0.194}; }

Profile fixture_15bus_table2_profiles() {
    Profile pr = Profile::zeros(15, 2);
    pr.p = table2_consumption();
    for (int n = 1; n < 15; ++n) {
        pr.q(n, 0) = kReferenceProfile[n][1];
        pr.q(n, 1) = kReferenceProfile[n][3];
    }
    auto pg = table2_der_output();
    pr.p(11, 0) -= pg[0];
    pr.p(11, 1) -= pg[1];
    return pr;
}

Network random_network(int buses, std::uint64_t seed, const RandomNetworkOptions& opt) {
    if (buses < 2) throw Error(ErrorKind::invalid_argument, "random network needs at least two buses");
    UniformStream draw(seed);
    std::vector<Bus> out;
    out.push_back(Bus{0, -1, 0, 0, 0, 0, 0, 1.0, 1.0});
    for (int n = 1; n < buses; ++n) {
        Bus b;
        b.id = n;
        b.ancestor = static_cast<int>(draw(0.0, static_cast<double>(n) - 1e-9));
        b.r = draw(0.2 * opt.r_max, opt.r_max);
        b.x = draw(0.2 * opt.x_max, opt.x_max);
        b.s_max = draw(opt.s_min, opt.s_max);
        b.b = draw(0.0, opt.shunt_max);
        b.g = 0.0;
        if (opt.zero_impedance) {
            b.r = b.x = b.b = b.g = 0.0;
        }
        b.v_min = opt.v_min;
        b.v_max = opt.v_max;
        out.push_back(b);
    }
    return Network(out, 1.0);
}

Scenario random_scenario(int buses, int horizon, std::uint64_t seed, const RandomNetworkOptions& opt) {
    Network net = random_network(buses, seed, opt);
    UniformStream draw(seed ^ 0x9e3779b97f4a7c15ULL);
    GenerationOptions g;
    g.horizon = horizon;
    g.base_p.assign(buses, 0.0);
    g.base_q.assign(buses, 0.0);
    // Total consumption stays below the smallest default line rating even at
    // twice the base load, so every draw is feasible.
    const double p_top = 0.2 / std::max(1, buses - 1);
    for (int n = 1; n < buses; ++n) {
        g.base_p[n] = draw(0.1 * p_top, p_top);
        g.base_q[n] = g.base_p[n] * draw(0.1, 0.4);
    }
    g.der_buses = {buses - 1};
    g.der_avail_max = 0.1;
    g.rho_min = -0.2;
    g.rho_max = 0.2;
    // Two aggregators: odd and even buses.
    Aggregator odd, even;
    odd.id = 1;
    even.id = 2;
    for (int n = 1; n < buses; ++n) (n % 2 ? odd : even).buses.push_back(n);
    g.aggregators.push_back(odd);
    if (!even.buses.empty()) g.aggregators.push_back(even);
    g.cost.alpha.assign(horizon, 0.0);
    g.cost.beta.assign(horizon, 0.0);
    for (int t = 0; t < horizon; ++t) {
        g.cost.alpha[t] = draw(0.5, 2.0);
        g.cost.beta[t] = draw(0.0, 1.0);
    }
    g.cost.alpha_loss = 0.0;
    Scenario s = generate_scenario(net, g, seed);
    s.name = "random";
    return s;
}

}  // namespace dlmp
