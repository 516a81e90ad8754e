#ifndef EHNET_FLAT_POMDP_HPP
#define EHNET_FLAT_POMDP_HPP

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ehnet/errors.hpp"
#include "ehnet/network_model.hpp"

namespace ehnet {

/// Dense tensors of a POMDP in the flat text format used by common solvers.
struct FlatPomdp {
    double discount = 0.0;
    int n_states = 0;
    int n_observations = 0;
    std::vector<std::string> actions;
    std::vector<Eigen::MatrixXd> T;  ///< per action, rows s, columns s'
    std::vector<Eigen::MatrixXd> O;  ///< per action, rows s', columns o
    std::vector<Eigen::VectorXd> R;  ///< per action, indexed by s
};

inline FlatPomdp to_flat(const NetworkModel& model, double discount) {
    FlatPomdp f;
    f.discount = discount;
    f.n_states = model.num_states();
    f.n_observations = model.max_observations();
    for (int a = 0; a < model.num_actions(); ++a) {
        f.actions.push_back(model.action(a).name());
        f.T.push_back(model.transition(a));
        Eigen::MatrixXd o = Eigen::MatrixXd::Zero(f.n_states, f.n_observations);
        for (int sn = 0; sn < f.n_states; ++sn) o(sn, model.observation_index(a, sn)) = 1.0;
        f.O.push_back(std::move(o));
        f.R.push_back(model.rewards(a));
    }
    return f;
}

/// Writes every nonzero entry; values use 17 significant digits so a parse
/// reproduces the tensors exactly.
inline void write_flat_pomdp(std::ostream& os, const FlatPomdp& f, const std::string& header = {}) {
    if (!header.empty()) os << "# " << header << '\n';
    char buf[128];
    std::snprintf(buf, sizeof buf, "discount: %.17g\n", f.discount);
    os << buf << "values: reward\nstates: " << f.n_states << "\nactions:";
    for (const std::string& a : f.actions) os << ' ' << a;
    os << "\nobservations: " << f.n_observations << "\nstart: uniform\n\n";

    for (std::size_t a = 0; a < f.actions.size(); ++a)
        for (int s = 0; s < f.n_states; ++s)
            for (int sn = 0; sn < f.n_states; ++sn)
                if (const double p = f.T[a](s, sn); p != 0.0) {
                    std::snprintf(buf, sizeof buf, "T: %s : %d : %d %.17g\n", f.actions[a].c_str(), s, sn, p);
                    os << buf;
                }
    os << '\n';
    for (std::size_t a = 0; a < f.actions.size(); ++a)
        for (int sn = 0; sn < f.n_states; ++sn)
            for (int o = 0; o < f.n_observations; ++o)
                if (const double p = f.O[a](sn, o); p != 0.0) {
                    std::snprintf(buf, sizeof buf, "O: %s : %d : %d %.17g\n", f.actions[a].c_str(), sn, o, p);
                    os << buf;
                }
    os << '\n';
    for (std::size_t a = 0; a < f.actions.size(); ++a)
        for (int s = 0; s < f.n_states; ++s)
            if (const double r = f.R[a](s); r != 0.0) {
                std::snprintf(buf, sizeof buf, "R: %s : %d : * : * %.17g\n", f.actions[a].c_str(), s, r);
                os << buf;
            }
}

inline void export_flat_pomdp(std::ostream& os, const NetworkModel& model, double discount,
                              const std::string& header = {}) {
    write_flat_pomdp(os, to_flat(model, discount), header);
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

/// Expands an index token: `*` means every index, otherwise a number or name.
inline std::vector<int> expand_index(const std::string& tok, int n, const std::vector<std::string>& names,
                                     int line) {
    std::vector<int> out;
    if (tok == "*") {
        for (int i = 0; i < n; ++i) out.push_back(i);
        return out;
    }
    for (int i = 0; i < static_cast<int>(names.size()); ++i)
        if (names[static_cast<std::size_t>(i)] == tok) return {i};
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used == tok.size() && v >= 0 && v < n) return {v};
    } catch (const std::exception&) {
    }
    throw ConfigError("bad index '" + tok + "' on line " + std::to_string(line), "pomdp");
}

} // namespace detail

/// Reads the subset of the flat format this library writes, plus `*`
/// wildcards in any index position.
inline FlatPomdp parse_flat_pomdp(std::istream& in) {
    FlatPomdp f;
    std::vector<std::string> no_names;
    bool sized = false;
    auto ensure_sized = [&](int line) {
        if (sized) return;
        if (f.n_states <= 0 || f.n_observations <= 0 || f.actions.empty())
            throw ConfigError("states, actions and observations must precede entries (line " +
                                  std::to_string(line) + ")",
                              "pomdp");
        const std::size_t na = f.actions.size();
        f.T.assign(na, Eigen::MatrixXd::Zero(f.n_states, f.n_states));
        f.O.assign(na, Eigen::MatrixXd::Zero(f.n_states, f.n_observations));
        f.R.assign(na, Eigen::VectorXd::Zero(f.n_states));
        sized = true;
    };
    auto number = [](const std::string& tok, int line) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used == tok.size()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("bad number '" + tok + "' on line " + std::to_string(line), "pomdp");
    };

    std::string raw;
    for (int line = 1; std::getline(in, raw); ++line) {
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const auto colon = raw.find(':');
        if (colon == std::string::npos) {
            if (!detail::split_ws(raw).empty())
                throw ConfigError("unexpected text on line " + std::to_string(line), "pomdp");
            continue;
        }
        const auto head = detail::split_ws(raw.substr(0, colon));
        if (head.size() != 1) throw ConfigError("malformed line " + std::to_string(line), "pomdp");
        const std::string& key = head[0];
        const std::string rest = raw.substr(colon + 1);

        if (key == "discount") {
            f.discount = number(detail::split_ws(rest).at(0), line);
        } else if (key == "values") {
            if (detail::split_ws(rest) != std::vector<std::string>{"reward"})
                throw ConfigError("only 'values: reward' is supported", "pomdp");
        } else if (key == "states") {
            f.n_states = static_cast<int>(number(detail::split_ws(rest).at(0), line));
        } else if (key == "observations") {
            f.n_observations = static_cast<int>(number(detail::split_ws(rest).at(0), line));
        } else if (key == "actions") {
            f.actions = detail::split_ws(rest);
        } else if (key == "start") {
            // Start distributions do not enter the tensors.
        } else if (key == "T" || key == "O" || key == "R") {
            ensure_sized(line);
            std::vector<std::string> parts;
            std::string field;
            std::istringstream fields(rest);
            while (std::getline(fields, field, ':')) parts.push_back(field);
            const std::size_t want = key == "R" ? 4 : 3;
            if (parts.size() != want) throw ConfigError("malformed entry on line " + std::to_string(line), "pomdp");
            auto tail = detail::split_ws(parts.back());
            if (tail.size() != 2) throw ConfigError("malformed entry on line " + std::to_string(line), "pomdp");
            const double value = number(tail[1], line);
            const int na = static_cast<int>(f.actions.size());
            const auto tok = [&](std::size_t i) {
                auto t = detail::split_ws(parts[i]);
                if (t.size() != 1) throw ConfigError("malformed entry on line " + std::to_string(line), "pomdp");
                return t[0];
            };
            for (int a : detail::expand_index(tok(0), na, f.actions, line)) {
                if (key == "T") {
                    for (int s : detail::expand_index(tok(1), f.n_states, no_names, line))
                        for (int sn : detail::expand_index(tail[0], f.n_states, no_names, line))
                            f.T[static_cast<std::size_t>(a)](s, sn) = value;
                } else if (key == "O") {
                    for (int sn : detail::expand_index(tok(1), f.n_states, no_names, line))
                        for (int o : detail::expand_index(tail[0], f.n_observations, no_names, line))
                            f.O[static_cast<std::size_t>(a)](sn, o) = value;
                } else {
                    if (tok(2) != "*" || tail[0] != "*")
                        throw ConfigError("rewards must not depend on s' or o (line " + std::to_string(line) + ")",
                                          "pomdp");
                    for (int s : detail::expand_index(tok(1), f.n_states, no_names, line))
                        f.R[static_cast<std::size_t>(a)](s) = value;
                }
            }
        } else {
            throw ConfigError("unknown key '" + key + "' on line " + std::to_string(line), "pomdp");
        }
    }
    ensure_sized(0);
    return f;
}

} // namespace ehnet

#endif // EHNET_FLAT_POMDP_HPP
