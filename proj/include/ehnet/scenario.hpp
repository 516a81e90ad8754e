#ifndef EHNET_SCENARIO_HPP
#define EHNET_SCENARIO_HPP

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ehnet/bs_model.hpp"
#include "ehnet/errors.hpp"
#include "ehnet/network_model.hpp"
#include "ehnet/solver.hpp"

namespace ehnet {

struct SimSettings {
    int n_t = 10000;
    int trials = 20;
    std::uint64_t seed = 1;
    std::string policy = "pomdp";
    int threads = 0;  ///< 0: one per hardware thread
};

/// Everything a run needs: the stations, the solver and the simulation knobs.
struct Scenario {
    std::vector<BsConfig> stations{BsConfig{}};
    SolverConfig solver;
    SimSettings sim;

    void validate() const;

    std::string canonical() const {
        std::string out = NetworkModel::canonical_of(stations);
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "solver gamma=%.17g bellman_eps=%.17g max_iters=%d prune_eps=%.17g max_states=%d "
                      "max_alphas=%d\nsim n_t=%d trials=%d seed=%llu policy=%s\n",
                      solver.gamma, solver.bellman_eps, solver.max_iters, solver.prune_eps, solver.max_states,
                      solver.max_alphas, sim.n_t, sim.trials, static_cast<unsigned long long>(sim.seed),
                      sim.policy.c_str());
        return out + buf;
    }
    std::uint64_t hash() const { return fnv1a(canonical()); }
};

inline constexpr std::string_view kPolicyNames[] = {"pomdp", "eb", "csma_cd", "csma_ca", "random"};

inline bool is_policy_name(std::string_view name) {
    for (std::string_view p : kPolicyNames)
        if (p == name) return true;
    return false;
}

inline void Scenario::validate() const {
    if (stations.empty()) throw ConfigError("at least one station required", "bs");
    for (std::size_t i = 0; i < stations.size(); ++i) {
        try {
            stations[i].validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (station " + std::to_string(i) + ")", e.path());
        }
    }
    solver.validate();
    if (sim.n_t < 1) throw ConfigError("must be >= 1", "sim.n_t");
    if (sim.trials < 1) throw ConfigError("must be >= 1", "sim.trials");
    if (sim.threads < 0) throw ConfigError("must be >= 0", "sim.threads");
    if (!is_policy_name(sim.policy)) throw ConfigError("unknown policy '" + sim.policy + "'", "sim.policy");
}

namespace detail {

using boost::property_tree::ptree;

inline ptree::path_type flat(const std::string& key) { return ptree::path_type(key, '/'); }

template <class T>
T parse_number(const std::string& text, const std::string& path) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last)
        throw ConfigError("expected a number, got '" + text + "'", path);
    return value;
}

struct SectionReader {
    const ptree& section;
    std::string name;
    std::set<std::string> used;

    template <class T>
    void read(const std::string& key, T& out) {
        if (auto v = section.get_optional<std::string>(flat(key))) {
            used.insert(key);
            if constexpr (std::is_same_v<T, std::string>)
                out = *v;
            else
                out = parse_number<T>(*v, name + "." + key);
        }
    }

    void reject_unknown() const {
        for (const auto& [key, child] : section) {
            if (!child.empty()) throw ConfigError("nested keys are not allowed", name + "." + key);
            if (!used.contains(key)) throw ConfigError("unknown key", name + "." + key);
        }
    }
};

inline void read_solar(SectionReader& r, SolarModel& s) {
    r.read("mu_s", s.mu_s);
    r.read("sigma_s", s.sigma_s);
    r.read("p_h_watts", s.p_h);
    r.read("omega_s", s.omega_s);
    r.read("eta", s.eta_h);
    r.read("t_l_seconds", s.t_l);
}

inline void read_station(SectionReader& r, BsConfig& c) {
    r.read("n_u", c.n_u);
    r.read("n_b", c.n_b);
    r.read("p_t_watts", c.p_t);
    r.read("lambda", c.lambda);
    r.read("mu", c.mu);
    r.read("reserve_levels", c.reserve_levels);
    read_solar(r, c.solar);
}

inline void apply_override(ptree& pt, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like section.key=value, got '" + assignment + "'", "--set");
    const std::string dotted = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    const auto dot = dotted.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
        throw ConfigError("override key must be section.key", dotted);
    const std::string section = dotted.substr(0, dot);
    const std::string key = dotted.substr(dot + 1);
    auto child = pt.get_child_optional(flat(section));
    if (!child) child = pt.put_child(flat(section), ptree{});
    child->put(flat(key), value);
}

} // namespace detail

/// Reads a scenario from INI-style text.
///
/// Sections: [solver], [sim], [solar] (defaults for every station), [bs]
/// (defaults for every station, plus `count`), and [bs.N] for per-station
/// overrides. Overrides use `section.key=value`, e.g. `bs.1.lambda=0.3`.
inline Scenario parse_scenario(std::istream& in, const std::vector<std::string>& overrides = {},
                               const std::string& source = "<input>") {
    using detail::ptree;
    ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(e.message() + " (line " + std::to_string(e.line()) + ")", source);
    }
    for (const std::string& o : overrides) detail::apply_override(pt, o);

    Scenario sc;
    const ptree empty;
    auto section = [&](const std::string& name) -> const ptree& {
        auto c = pt.get_child_optional(detail::flat(name));
        return c ? *c : empty;
    };

    detail::SectionReader solver{section("solver"), "solver", {}};
    solver.read("gamma", sc.solver.gamma);
    solver.read("bellman_eps", sc.solver.bellman_eps);
    solver.read("max_iters", sc.solver.max_iters);
    solver.read("prune_eps", sc.solver.prune_eps);
    solver.read("max_states", sc.solver.max_states);
    solver.read("max_alphas", sc.solver.max_alphas);
    solver.reject_unknown();

    detail::SectionReader sim{section("sim"), "sim", {}};
    sim.read("n_t", sc.sim.n_t);
    sim.read("trials", sc.sim.trials);
    sim.read("seed", sc.sim.seed);
    sim.read("policy", sc.sim.policy);
    sim.read("threads", sc.sim.threads);
    sim.reject_unknown();

    BsConfig base;
    detail::SectionReader solar{section("solar"), "solar", {}};
    detail::read_solar(solar, base.solar);
    solar.reject_unknown();

    int count = 1;
    detail::SectionReader bs{section("bs"), "bs", {}};
    bs.read("count", count);
    detail::read_station(bs, base);
    bs.reject_unknown();
    if (count < 1 || count > 64) throw ConfigError("must be in [1, 64]", "bs.count");

    sc.stations.assign(static_cast<std::size_t>(count), base);
    for (const auto& [name, child] : pt) {
        if (name == "solver" || name == "sim" || name == "solar" || name == "bs") continue;
        if (name.rfind("bs.", 0) != 0) throw ConfigError("unknown section", name);
        const int idx = detail::parse_number<int>(name.substr(3), name);
        if (idx < 0 || idx >= count) throw ConfigError("station index outside bs.count", name);
        detail::SectionReader r{child, name, {}};
        detail::read_station(r, sc.stations[static_cast<std::size_t>(idx)]);
        r.reject_unknown();
    }

    sc.validate();
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
    std::istringstream in(text);
    return parse_scenario(in, overrides);
}

inline Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file", path.string());
    return parse_scenario(in, overrides, path.string());
}

} // namespace ehnet

#endif // EHNET_SCENARIO_HPP
