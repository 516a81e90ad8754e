#ifndef EHNET_NETWORK_MODEL_HPP
#define EHNET_NETWORK_MODEL_HPP

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ehnet/bs_model.hpp"
#include "ehnet/errors.hpp"

namespace ehnet {

/// Joint state of every station the user can reach.
struct SystemState {
    std::vector<BsState> per_bs;
    friend bool operator==(const SystemState&, const SystemState&) = default;
};

struct ActionChoice {
    enum class Kind : std::uint8_t { Access, Sense };
    Kind kind = Kind::Sense;
    int target = 0;

    static ActionChoice access(int bs) { return {Kind::Access, bs}; }
    static ActionChoice sense(int bs) { return {Kind::Sense, bs}; }
    bool is_access() const { return kind == Kind::Access; }

    friend bool operator==(const ActionChoice&, const ActionChoice&) = default;

    std::string name() const { return (is_access() ? "access" : "sense") + std::to_string(target); }
};

/// The short message from the target station: its next-slot state.
struct ObservationMsg {
    int s_u_o = 0;
    int s_b_o = 0;
    bool granted = false;
};

/// 64-bit FNV-1a, used for config and model fingerprints.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct ModelLimits {
    /// Dense transition tables are N_S x N_S per action.
    int max_states = 2048;
};

/// Kronecker product, left factor most significant.
inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// The discrete POMDP of a multi-station network: states, actions,
/// transition and observation structure, and rewards.
///
/// State index is mixed radix with station 0 least significant; each digit is
/// that station's local index s_u + n_u * s_b. Action ordinals list every
/// Access action first, then every Sense action. The observation for an
/// action is the target station's local index in the next state.
///
/// Immutable after construction.
class NetworkModel {
public:
    explicit NetworkModel(std::vector<BsConfig> stations, const QuadratureOptions& quad = {},
                          ModelLimits limits = {})
        : stations_(std::move(stations)) {
        if (stations_.empty()) throw ConfigError("at least one station required", "bs");
        std::int64_t n = 1;
        for (const BsConfig& cfg : stations_) {
            cfg.validate();
            strides_.push_back(static_cast<int>(n));
            n *= cfg.local_states();
            if (n > limits.max_states)
                throw SolverRefusal("state space exceeds " + std::to_string(limits.max_states) +
                                    " joint states; use the energy-based policy instead");
        }
        n_states_ = static_cast<int>(n);
        for (const BsConfig& cfg : stations_) kernels_.emplace_back(cfg, quad);

        const int na = num_actions();
        transitions_.reserve(static_cast<std::size_t>(na));
        rewards_.reserve(static_cast<std::size_t>(na));
        for (int a = 0; a < na; ++a) {
            const ActionChoice act = action(a);
            Eigen::MatrixXd t = station_matrix(0, act);
            for (int i = 1; i < num_stations(); ++i) t = kron(station_matrix(i, act), t);
            transitions_.push_back(std::move(t));

            Eigen::VectorXd r(n_states_);
            for (int s = 0; s < n_states_; ++s) r(s) = reward(s, act);
            rewards_.push_back(std::move(r));
        }
    }

    int num_stations() const { return static_cast<int>(stations_.size()); }
    int num_states() const { return n_states_; }
    int num_actions() const { return 2 * num_stations(); }
    const BsConfig& station(int i) const { return stations_.at(static_cast<std::size_t>(i)); }
    const std::vector<BsConfig>& stations() const { return stations_; }
    const BsKernel& kernel(int i) const { return kernels_.at(static_cast<std::size_t>(i)); }

    ActionChoice action(int ordinal) const {
        if (ordinal < 0 || ordinal >= num_actions()) throw std::out_of_range("action ordinal");
        const int n = num_stations();
        return ordinal < n ? ActionChoice::access(ordinal) : ActionChoice::sense(ordinal - n);
    }
    int ordinal(const ActionChoice& a) const {
        if (a.target < 0 || a.target >= num_stations()) throw std::out_of_range("action target");
        return a.is_access() ? a.target : num_stations() + a.target;
    }

    int encode(const SystemState& s) const {
        if (static_cast<int>(s.per_bs.size()) != num_stations())
            throw std::domain_error("encode_state: wrong station count");
        int idx = 0;
        for (int i = 0; i < num_stations(); ++i) {
            const BsState& b = s.per_bs[static_cast<std::size_t>(i)];
            if (!b.valid_for(station(i))) throw std::domain_error("encode_state: component out of range");
            idx += strides_[static_cast<std::size_t>(i)] * b.local_index(station(i));
        }
        return idx;
    }

    SystemState decode(int index) const {
        if (index < 0 || index >= n_states_) throw std::domain_error("decode_state: index out of range");
        SystemState s;
        s.per_bs.reserve(stations_.size());
        for (int i = 0; i < num_stations(); ++i)
            s.per_bs.push_back(BsState::from_local(local_index(index, i), station(i)));
        return s;
    }

    /// Local index of station `bs` inside joint state `index`.
    int local_index(int index, int bs) const {
        return (index / strides_[static_cast<std::size_t>(bs)]) % station(bs).local_states();
    }
    BsState component(int index, int bs) const {
        return BsState::from_local(local_index(index, bs), station(bs));
    }

    /// Dense T(s' | s, a), rows s, columns s'.
    const Eigen::MatrixXd& transition(int a) const { return transitions_.at(static_cast<std::size_t>(a)); }
    const Eigen::VectorXd& rewards(int a) const { return rewards_.at(static_cast<std::size_t>(a)); }

    int num_observations(int a) const { return station(action(a).target).local_states(); }
    int max_observations() const {
        int m = 0;
        for (const BsConfig& c : stations_) m = std::max(m, c.local_states());
        return m;
    }
    /// Observation index emitted when the next state is `s_next` under action `a`.
    int observation_index(int a, int s_next) const { return local_index(s_next, action(a).target); }

    double reward(int s, const ActionChoice& a) const {
        return a.is_access() && access_feasible(component(s, a.target), station(a.target)) ? 1.0 : 0.0;
    }

    /// Product of per-station kernels; only the target station feels the action.
    double system_transition(int s_next, int s, const ActionChoice& a) const {
        double p = 1.0;
        for (int i = 0; i < num_stations(); ++i) {
            p *= station_matrix(i, a)(local_index(s, i), local_index(s_next, i));
            if (p == 0.0) break;
        }
        return p;
    }

    double observation_prob(const ObservationMsg& o, int s_next, const ActionChoice& a) const {
        const BsState t = component(s_next, a.target);
        return (t.s_u == o.s_u_o && t.s_b == o.s_b_o) ? 1.0 : 0.0;
    }

    /// Canonical text of every parameter that shapes the tables.
    std::string canonical() const { return canonical_of(stations_); }
    std::uint64_t hash() const { return fnv1a(canonical()); }

    static std::string canonical_of(const std::vector<BsConfig>& stations) {
        std::string out;
        char buf[512];
        for (const BsConfig& c : stations) {
            std::snprintf(buf, sizeof buf,
                          "bs n_u=%d n_b=%d p_t=%.17g lambda=%.17g mu=%.17g reserve=%d "
                          "mu_s=%.17g sigma_s=%.17g p_h=%.17g omega_s=%d eta=%.17g t_l=%.17g\n",
                          c.n_u, c.n_b, c.p_t, c.lambda, c.mu, c.reserve_levels, c.solar.mu_s,
                          c.solar.sigma_s, c.solar.p_h, c.solar.omega_s, c.solar.eta_h, c.solar.t_l);
            out += buf;
        }
        return out;
    }

private:
    const Eigen::MatrixXd& station_matrix(int i, const ActionChoice& a) const {
        const BsAction act = a.target != i ? BsAction::None
                             : a.is_access() ? BsAction::Access
                                             : BsAction::Sense;
        return kernel(i).matrix(act);
    }

    std::vector<BsConfig> stations_;
    std::vector<BsKernel> kernels_;
    std::vector<int> strides_;
    int n_states_ = 0;
    std::vector<Eigen::MatrixXd> transitions_;
    std::vector<Eigen::VectorXd> rewards_;
};

} // namespace ehnet

#endif // EHNET_NETWORK_MODEL_HPP
