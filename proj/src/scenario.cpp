#include "dlmp/scenario.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "dlmp/error.hpp"

namespace dlmp {

const LoadSpec* Scenario::load_at(int bus) const {
    for (const LoadSpec& l : loads)
        if (l.bus == bus) return &l;
    return nullptr;
}

const DerSpec* Scenario::der_at(int bus) const {
    for (const DerSpec& d : ders)
        if (d.bus == bus) return &d;
    return nullptr;
}

int Scenario::aggregator_of(int bus) const {
    for (std::size_t a = 0; a < aggregators.size(); ++a)
        for (int n : aggregators[a].buses)
            if (n == bus) return static_cast<int>(a);
    return -1;
}

namespace {

[[noreturn]] void schema(const std::string& msg, int bus = -1) { throw Error(ErrorKind::schema, msg, bus); }

void check_len(const std::vector<double>& v, int T, const char* what, int bus) {
    if (static_cast<int>(v.size()) != T)
        schema(fmt::format("bus {}: '{}' has {} entries, horizon is {}", bus, what, v.size(), T), bus);
}

}  // namespace

void Scenario::validate() const {
    const int T = horizon;
    const int N = network.size();
    if (T < 1) schema("horizon must be positive");
    if (N < 1) schema("empty network");
    if (static_cast<int>(cost.alpha.size()) != T || static_cast<int>(cost.beta.size()) != T)
        schema("cost coefficients must have one entry per period");
    for (double b : cost.beta)
        if (b < 0) throw Error(ErrorKind::negative_quadratic, "negative quadratic cost coefficient");
    std::vector<int> seen(static_cast<std::size_t>(N), 0);
    for (const LoadSpec& l : loads) {
        if (l.bus <= 0 || l.bus >= N || l.bus == network.root()) schema(fmt::format("load on invalid bus {}", l.bus), l.bus);
        if (seen[l.bus]++) schema(fmt::format("bus {} has two loads", l.bus), l.bus);
        check_len(l.p_min, T, "p_min", l.bus);
        check_len(l.p_max, T, "p_max", l.bus);
        for (int t = 0; t < T; ++t)
            if (l.p_min[t] > l.p_max[t]) schema(fmt::format("bus {}: p_min exceeds p_max", l.bus), l.bus);
        if (l.q_min.has_value() != l.q_max.has_value()) schema(fmt::format("bus {}: q box needs both sides", l.bus), l.bus);
        if (l.q_min) {
            check_len(*l.q_min, T, "q_min", l.bus);
            check_len(*l.q_max, T, "q_max", l.bus);
        }
    }
    for (int n = 0; n < N; ++n)
        if (n != network.root() && !seen[n]) schema(fmt::format("bus {} has no load entry", n), n);
    std::set<int> der_buses;
    for (const DerSpec& d : ders) {
        if (d.bus < 0 || d.bus >= N || d.bus == network.root()) schema(fmt::format("DER on invalid bus {}", d.bus), d.bus);
        if (!der_buses.insert(d.bus).second) schema(fmt::format("bus {} has two DERs", d.bus), d.bus);
        check_len(d.p_avail, T, "p_avail", d.bus);
        if (d.rho_min > d.rho_max) schema(fmt::format("bus {}: rho_min exceeds rho_max", d.bus), d.bus);
        for (double a : d.p_avail)
            if (a < 0) schema(fmt::format("bus {}: negative DER availability", d.bus), d.bus);
    }
    std::vector<int> owner(static_cast<std::size_t>(N), -1);
    for (std::size_t a = 0; a < aggregators.size(); ++a) {
        const Aggregator& agg = aggregators[a];
        if (agg.buses.empty()) schema(fmt::format("aggregator {} has no buses", agg.id));
        for (int n : agg.buses) {
            if (n < 0 || n >= N) throw Error(ErrorKind::unknown_bus, fmt::format("aggregator {}: unknown bus {}", agg.id, n), n);
            if (n == network.root()) schema(fmt::format("aggregator {} contains the root", agg.id), n);
            if (owner[n] >= 0) schema(fmt::format("bus {} belongs to two aggregators", n), n);
            owner[n] = static_cast<int>(a);
        }
        if (agg.cost.kind == LaCost::Kind::preferred_profile) {
            if (agg.cost.weight < 0) throw Error(ErrorKind::negative_quadratic, "negative profile weight");
            for (const auto& [bus, prof] : agg.cost.profile) {
                if (std::find(agg.buses.begin(), agg.buses.end(), bus) == agg.buses.end())
                    schema(fmt::format("aggregator {}: profile for foreign bus {}", agg.id, bus), bus);
                check_len(prof, T, "profile", bus);
            }
        }
    }
    for (int n = 0; n < N; ++n)
        if (n != network.root() && owner[n] < 0) schema(fmt::format("bus {} belongs to no aggregator", n), n);
}

namespace {

std::vector<double> num_array(const nlohmann::json& j, const char* key, int bus) {
    if (!j.contains(key) || !j[key].is_array()) schema(fmt::format("bus {}: missing array '{}'", bus, key), bus);
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) schema(fmt::format("bus {}: non-numeric entry in '{}'", bus, key), bus);
        out.push_back(v.get<double>());
    }
    return out;
}

double num(const nlohmann::json& j, const char* key, int bus) {
    if (!j.contains(key) || !j[key].is_number()) schema(fmt::format("bus {}: missing number '{}'", bus, key), bus);
    return j[key].get<double>();
}

int integer(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) schema(fmt::format("missing integer '{}'", key));
    return j[key].get<int>();
}

}  // namespace

nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["format"] = "dlmp-scenario";
    j["version"] = 1;
    j["name"] = s.name;
    if (s.seed) j["seed"] = *s.seed;
    j["horizon"] = s.horizon;
    j["network"] = network_to_json(s.network);
    j["cost"] = {{"alpha", s.cost.alpha}, {"beta", s.cost.beta}, {"alpha_loss", s.cost.alpha_loss}};
    auto loads = nlohmann::json::array();
    for (const LoadSpec& l : s.loads) {
        nlohmann::json jl = {{"bus", l.bus}, {"p_min", l.p_min}, {"p_max", l.p_max}, {"energy", l.energy}, {"tau", l.tau}};
        if (l.q_min) {
            jl["q_min"] = *l.q_min;
            jl["q_max"] = *l.q_max;
        }
        loads.push_back(jl);
    }
    j["loads"] = loads;
    auto ders = nlohmann::json::array();
    for (const DerSpec& d : s.ders)
        ders.push_back({{"bus", d.bus}, {"p_avail", d.p_avail}, {"rho_min", d.rho_min}, {"rho_max", d.rho_max}});
    j["ders"] = ders;
    auto aggs = nlohmann::json::array();
    for (const Aggregator& a : s.aggregators) {
        nlohmann::json ja = {{"id", a.id}, {"buses", a.buses}};
        if (a.cost.kind == LaCost::Kind::zero) {
            ja["cost"] = {{"kind", "zero"}};
        } else {
            nlohmann::json prof = nlohmann::json::object();
            for (const auto& [bus, v] : a.cost.profile) prof[std::to_string(bus)] = v;
            ja["cost"] = {{"kind", "preferred_profile"}, {"weight", a.cost.weight}, {"profile", prof}};
        }
        aggs.push_back(ja);
    }
    j["aggregators"] = aggs;
    return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) schema("scenario: expected object");
    if (!j.contains("network")) schema("scenario: missing 'network'");
    Scenario s;
    s.name = j.value("name", std::string());
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) schema("scenario: 'seed' must be an integer");
        s.seed = j["seed"].get<std::uint64_t>();
    }
    s.horizon = integer(j, "horizon");
    s.network = network_from_json(j["network"]);
    if (!j.contains("cost") || !j["cost"].is_object()) schema("scenario: missing 'cost'");
    s.cost.alpha = num_array(j["cost"], "alpha", -1);
    s.cost.beta = num_array(j["cost"], "beta", -1);
    s.cost.alpha_loss = j["cost"].value("alpha_loss", 0.0);
    if (!j.contains("loads") || !j["loads"].is_array()) schema("scenario: missing 'loads' array");
    for (const auto& jl : j["loads"]) {
        LoadSpec l;
        l.bus = integer(jl, "bus");
        l.p_min = num_array(jl, "p_min", l.bus);
        l.p_max = num_array(jl, "p_max", l.bus);
        l.energy = num(jl, "energy", l.bus);
        l.tau = num(jl, "tau", l.bus);
        if (jl.contains("q_min")) l.q_min = num_array(jl, "q_min", l.bus);
        if (jl.contains("q_max")) l.q_max = num_array(jl, "q_max", l.bus);
        s.loads.push_back(std::move(l));
    }
    if (j.contains("ders")) {
        if (!j["ders"].is_array()) schema("scenario: 'ders' must be an array");
        for (const auto& jd : j["ders"]) {
            DerSpec d;
            d.bus = integer(jd, "bus");
            d.p_avail = num_array(jd, "p_avail", d.bus);
            d.rho_min = num(jd, "rho_min", d.bus);
            d.rho_max = num(jd, "rho_max", d.bus);
            s.ders.push_back(std::move(d));
        }
    }
    if (!j.contains("aggregators") || !j["aggregators"].is_array()) schema("scenario: missing 'aggregators' array");
    for (const auto& ja : j["aggregators"]) {
        Aggregator a;
        a.id = integer(ja, "id");
        if (!ja.contains("buses") || !ja["buses"].is_array()) schema(fmt::format("aggregator {}: missing 'buses'", a.id));
        for (const auto& b : ja["buses"]) {
            if (!b.is_number_integer()) schema(fmt::format("aggregator {}: bus ids must be integers", a.id));
            a.buses.push_back(b.get<int>());
        }
        if (ja.contains("cost")) {
            const auto& jc = ja["cost"];
            std::string kind = jc.value("kind", std::string("zero"));
            if (kind == "preferred_profile") {
                a.cost.kind = LaCost::Kind::preferred_profile;
                a.cost.weight = num(jc, "weight", -1);
                if (!jc.contains("profile") || !jc["profile"].is_object())
                    schema(fmt::format("aggregator {}: profile must be an object", a.id));
                for (const auto& [key, val] : jc["profile"].items()) {
                    int bus = 0;
                    try {
                        bus = std::stoi(key);
                    } catch (const std::exception&) {
                        schema(fmt::format("aggregator {}: bad profile key '{}'", a.id, key));
                    }
                    std::vector<double> v;
                    for (const auto& x : val) v.push_back(x.get<double>());
                    a.cost.profile[bus] = v;
                }
            } else if (kind != "zero") {
                schema(fmt::format("aggregator {}: unknown cost kind '{}'", a.id, kind));
            }
        }
        s.aggregators.push_back(std::move(a));
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

void save_scenario(const Scenario& s, const std::string& path) { write_json_file(scenario_to_json(s), path); }

nlohmann::json profile_to_json(const Profile& p) {
    auto rows = [](const Eigen::MatrixXd& m) {
        auto out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<double> r(m.cols());
            for (Eigen::Index t = 0; t < m.cols(); ++t) r[t] = m(i, t);
            out.push_back(r);
        }
        return out;
    };
    return {{"p", rows(p.p)}, {"q", rows(p.q)}};
}

Profile profile_from_json(const nlohmann::json& j) {
    auto mat = [](const nlohmann::json& a) {
        if (!a.is_array() || a.empty()) schema("profile: expected non-empty array of rows");
        Eigen::MatrixXd m(a.size(), a[0].size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].size() != a[0].size()) schema("profile: ragged rows");
            for (std::size_t t = 0; t < a[i].size(); ++t) m(i, t) = a[i][t].get<double>();
        }
        return m;
    };
    if (!j.contains("p") || !j.contains("q")) schema("profile: needs 'p' and 'q'");
    Profile p{mat(j["p"]), mat(j["q"])};
    if (p.p.rows() != p.q.rows() || p.p.cols() != p.q.cols()) schema("profile: p and q shapes differ");
    return p;
}

Scenario generate_scenario(const Network& net, const GenerationOptions& opt, std::uint64_t seed) {
    const int N = net.size();
    const int T = opt.horizon;
    if (static_cast<int>(opt.base_p.size()) != N || static_cast<int>(opt.base_q.size()) != N)
        throw Error(ErrorKind::invalid_argument, "base loads must have one entry per bus");
    UniformStream draw(seed);
    Scenario s;
    s.network = net;
    s.horizon = T;
    s.seed = seed;
    s.cost = opt.cost;
    s.aggregators = opt.aggregators;
    for (int n = 0; n < N; ++n) {
        if (n == net.root()) continue;
        double ph = opt.base_p[n];
        double qh = opt.base_q[n];
        if (ph == 0.0 && qh != 0.0)
            throw Error(ErrorKind::invalid_base_load,
                        fmt::format("bus {}: zero active base load with reactive base load {}", n, qh), n);
        LoadSpec l;
        l.bus = n;
        l.p_min.resize(T);
        l.p_max.resize(T);
        // A negative base load is a net producer; its consumption range sits
        // on the negative side mirrored around the base value.
        for (int t = 0; t < T; ++t) l.p_min[t] = ph >= 0 ? draw(0.0, ph) : draw(2 * ph, ph);
        for (int t = 0; t < T; ++t) l.p_max[t] = ph >= 0 ? draw(ph, 2 * ph) : draw(ph, 0.0);
        double lo = 0, hi = 0;
        for (int t = 0; t < T; ++t) {
            lo += l.p_min[t];
            hi += l.p_max[t];
        }
        l.energy = draw(lo, hi);
        l.tau = ph != 0.0 ? qh / ph : 0.0;
        s.loads.push_back(std::move(l));
    }
    for (int bus : opt.der_buses) {
        DerSpec d;
        d.bus = bus;
        d.rho_min = opt.rho_min;
        d.rho_max = opt.rho_max;
        for (int t = 0; t < T; ++t) d.p_avail.push_back(draw(0.0, opt.der_avail_max));
        s.ders.push_back(std::move(d));
    }
    s.validate();
    return s;
}

}  // namespace dlmp
