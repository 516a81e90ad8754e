#ifndef EHNET_POLICIES_HPP
#define EHNET_POLICIES_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ehnet/harvest.hpp"
#include "ehnet/network_model.hpp"
#include "ehnet/solver.hpp"

namespace ehnet {

enum class PolicyKind { Pomdp, EnergyBased, CsmaCd, CsmaCa, Random };

inline std::string_view to_string(PolicyKind k) {
    switch (k) {
    case PolicyKind::Pomdp: return "pomdp";
    case PolicyKind::EnergyBased: return "eb";
    case PolicyKind::CsmaCd: return "csma_cd";
    case PolicyKind::CsmaCa: return "csma_ca";
    case PolicyKind::Random: return "random";
    }
    return "?";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
    for (PolicyKind k : {PolicyKind::Pomdp, PolicyKind::EnergyBased, PolicyKind::CsmaCd, PolicyKind::CsmaCa,
                         PolicyKind::Random})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

/// Cap on the binary exponential backoff exponent.
inline constexpr int kMaxBackoffExponent = 10;

/// Per-user decision state shared by every policy.
struct PolicyContext {
    Belief belief;
    std::vector<std::int64_t> last_sensed_slot;  ///< -1 when never observed
    std::vector<bool> last_known_feasible;
    int backoff_count = 0;    ///< consecutive access failures (CSMA/CD)
    int sleep_remaining = 0;  ///< slots left before requests resume (CSMA/CD)
    int next_sense = 0;       ///< round-robin cursor for sensing baselines
    std::optional<ActionChoice> last_action;
    bool last_observation_feasible = false;
    std::int64_t slot = 0;
    int belief_resets = 0;
    std::mt19937_64 rng;

    static PolicyContext fresh(const NetworkModel& model, std::uint64_t seed) {
        PolicyContext ctx;
        ctx.belief = Belief::uniform(model.num_states());
        ctx.last_sensed_slot.assign(static_cast<std::size_t>(model.num_stations()), -1);
        ctx.last_known_feasible.assign(static_cast<std::size_t>(model.num_stations()), false);
        ctx.rng.seed(seed);
        return ctx;
    }
};

// ---------------------------------------------------------------------------
// Energy-based policy
// ---------------------------------------------------------------------------

/// Representative charge of a level under a uniform intra-level residue. The
/// top level is a full battery exactly, so the midpoint is capped there.
inline double level_charge(int s_b, const BsConfig& cfg) {
    return std::min((s_b + 0.5) * cfg.energy_quantum(), cfg.capacity());
}

/// Expected harvest actually stored by each station in state `s` under action
/// `a`: E[min(E_H, E_T + B_M - Q_B)] per station.
inline std::vector<double> eb_energy_terms(int s, const ActionChoice& a, const NetworkModel& model) {
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(model.num_stations()));
    for (int i = 0; i < model.num_stations(); ++i) {
        const BsConfig& cfg = model.station(i);
        const BsState st = model.component(s, i);
        const bool granted = a.is_access() && a.target == i && access_feasible(st, cfg);
        const double e_t = transmit_levels(st, granted) * cfg.energy_quantum();
        const double cap = e_t + cfg.capacity() - level_charge(st.s_b, cfg);
        terms.push_back(HarvestDistribution(cfg.solar).expected_min(cap));
    }
    return terms;
}

/// H(b, a): belief-weighted expected stored harvest summed over stations.
inline double eb_expected_harvest(const Belief& b, const ActionChoice& a, const NetworkModel& model) {
    double h = 0.0;
    for (int s = 0; s < model.num_states(); ++s) {
        if (b.probs(s) == 0.0) continue;
        double sum = 0.0;
        for (double t : eb_energy_terms(s, a, model)) sum += t;
        h += b.probs(s) * sum;
    }
    return h;
}

/// Per-action tables of the stored-harvest sum, so H(b, a) = b . table[a].
class EbTables {
public:
    explicit EbTables(const NetworkModel& model) {
        for (int a = 0; a < model.num_actions(); ++a) {
            Eigen::VectorXd h(model.num_states());
            for (int s = 0; s < model.num_states(); ++s) {
                double sum = 0.0;
                for (double t : eb_energy_terms(s, model.action(a), model)) sum += t;
                h(s) = sum;
            }
            tables_.push_back(std::move(h));
        }
    }
    const Eigen::VectorXd& operator[](int a) const { return tables_.at(static_cast<std::size_t>(a)); }

private:
    std::vector<Eigen::VectorXd> tables_;
};

/// E over observations of H(b', a), where b' is the belief after acting with
/// `a` and receiving each possible observation.
inline double eb_lookahead(const Belief& b, int a, const NetworkModel& model, const EbTables& tables) {
    const Eigen::VectorXd pred = predict(b, a, model);
    const Eigen::VectorXd& h = tables[a];
    // For each observation o: Pr(o) * H(b'_o, a) = sum over s' emitting o of pred(s') * h(s').
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(model.num_observations(a));
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(model.num_observations(a));
    for (int s = 0; s < model.num_states(); ++s) {
        const int o = model.observation_index(a, s);
        mass(o) += pred(s);
        weighted(o) += pred(s) * h(s);
    }
    double total = 0.0;
    for (Eigen::Index o = 0; o < mass.size(); ++o) {
        if (mass(o) <= 0.0) continue;
        total += mass(o) * (weighted(o) / mass(o));
    }
    return total;
}

/// Station whose state was observed longest ago; never-observed first, ties to the lowest index.
inline int stalest_station(const PolicyContext& ctx) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(ctx.last_sensed_slot.size()); ++i)
        if (ctx.last_sensed_slot[static_cast<std::size_t>(i)] <
            ctx.last_sensed_slot[static_cast<std::size_t>(best)])
            best = i;
    return best;
}

inline ActionChoice eb_action(const PolicyContext& ctx, const NetworkModel& model, const EbTables& tables) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < model.num_actions(); ++a) {
        const double score = eb_lookahead(ctx.belief, a, model, tables);
        if (score > best_score + 1e-15 * std::max(1.0, std::abs(best_score))) {
            best_score = score;
            best = a;
        }
    }
    ActionChoice choice = model.action(best);
    if (!choice.is_access()) choice.target = stalest_station(ctx);
    return choice;
}

inline ActionChoice eb_action(const PolicyContext& ctx, const NetworkModel& model) {
    return eb_action(ctx, model, EbTables(model));
}

// ---------------------------------------------------------------------------
// Sensing baselines
// ---------------------------------------------------------------------------

inline ActionChoice sense_round_robin(PolicyContext& ctx, int n_stations) {
    const ActionChoice a = ActionChoice::sense(ctx.next_sense);
    ctx.next_sense = (ctx.next_sense + 1) % n_stations;
    return a;
}

/// Access a station only right after sensing it and seeing room; otherwise
/// keep sensing round-robin. After a failed access, sleep a random number of
/// slots in [0, 2^c - 1] (c = consecutive failures), sensing meanwhile.
inline ActionChoice csma_cd_action(PolicyContext& ctx, int n_stations) {
    if (ctx.sleep_remaining > 0) {
        --ctx.sleep_remaining;
        return sense_round_robin(ctx, n_stations);
    }
    if (ctx.last_action && !ctx.last_action->is_access() && ctx.last_observation_feasible)
        return ActionChoice::access(ctx.last_action->target);
    return sense_round_robin(ctx, n_stations);
}

/// Backoff bookkeeping once the outcome of a CSMA/CD slot is known.
inline void csma_cd_feedback(PolicyContext& ctx, const ActionChoice& a, bool granted) {
    if (!a.is_access()) return;
    if (granted) {
        ctx.backoff_count = 0;
        return;
    }
    ctx.backoff_count = std::min(ctx.backoff_count + 1, kMaxBackoffExponent);
    std::uniform_int_distribution<int> sleep(0, (1 << ctx.backoff_count) - 1);
    ctx.sleep_remaining = sleep(ctx.rng);
}

/// Sense, then access on a feasible reading; no backoff.
inline ActionChoice csma_ca_action(PolicyContext& ctx, int n_stations) {
    if (ctx.last_action && !ctx.last_action->is_access() && ctx.last_observation_feasible)
        return ActionChoice::access(ctx.last_action->target);
    return sense_round_robin(ctx, n_stations);
}

inline ActionChoice random_action(PolicyContext& ctx, const NetworkModel& model) {
    std::uniform_int_distribution<int> pick(0, model.num_actions() - 1);
    return model.action(pick(ctx.rng));
}

// ---------------------------------------------------------------------------
// Uniform per-slot interface
// ---------------------------------------------------------------------------

/// One rational user running a named policy: `act` each slot, then `observe`
/// the short message that comes back.
class Agent {
public:
    Agent(PolicyKind kind, const NetworkModel& model, const PolicySet* alphas, std::uint64_t seed)
        : kind_(kind), model_(&model), alphas_(alphas), ctx_(PolicyContext::fresh(model, seed)) {
        if (kind_ == PolicyKind::Pomdp && (alphas_ == nullptr || alphas_->alphas.empty()))
            throw std::invalid_argument("Agent: pomdp policy needs a solved alpha set");
        if (kind_ == PolicyKind::EnergyBased) eb_.emplace(model);
    }

    PolicyKind kind() const { return kind_; }
    const PolicyContext& context() const { return ctx_; }
    PolicyContext& context() { return ctx_; }
    bool tracks_belief() const { return kind_ == PolicyKind::Pomdp || kind_ == PolicyKind::EnergyBased; }

    ActionChoice act() {
        switch (kind_) {
        case PolicyKind::Pomdp: return best_action(ctx_.belief, *alphas_);
        case PolicyKind::EnergyBased: return eb_action(ctx_, *model_, *eb_);
        case PolicyKind::CsmaCd: return csma_cd_action(ctx_, model_->num_stations());
        case PolicyKind::CsmaCa: return csma_ca_action(ctx_, model_->num_stations());
        case PolicyKind::Random: return random_action(ctx_, *model_);
        }
        throw std::logic_error("Agent::act: unknown policy");
    }

    void observe(const ActionChoice& a, const ObservationMsg& o) {
        const auto t = static_cast<std::size_t>(a.target);
        const bool feasible = access_feasible({o.s_u_o, o.s_b_o}, model_->station(a.target));
        ctx_.last_sensed_slot[t] = ctx_.slot;
        ctx_.last_known_feasible[t] = feasible;
        ctx_.last_action = a;
        ctx_.last_observation_feasible = feasible;
        if (kind_ == PolicyKind::CsmaCd) csma_cd_feedback(ctx_, a, o.granted);
        if (tracks_belief()) update_belief(a, o);
        ++ctx_.slot;
    }

private:
    // The continuous environment can produce a level change the trimmed model
    // tables assign zero probability. Then the belief is rebuilt from the
    // observed target state and the predicted marginal of the other stations.
    void update_belief(const ActionChoice& a, const ObservationMsg& o) {
        try {
            ctx_.belief = belief_update(ctx_.belief, a, o, *model_);
        } catch (const BeliefInconsistency&) {
            ctx_.belief = reanchor(a, o);
            ++ctx_.belief_resets;
        }
    }

    Belief reanchor(const ActionChoice& a, const ObservationMsg& o) const {
        const NetworkModel& m = *model_;
        const int act = m.ordinal(a);
        const Eigen::VectorXd pred = predict(ctx_.belief, act, m);
        const int seen = BsState{o.s_u_o, o.s_b_o}.local_index(m.station(a.target));
        // Marginal over the other stations: fold every state onto its
        // representative with the target digit replaced by the observation.
        Belief out{Eigen::VectorXd::Zero(m.num_states())};
        for (int s = 0; s < m.num_states(); ++s) {
            SystemState st = m.decode(s);
            st.per_bs[static_cast<std::size_t>(a.target)] = BsState::from_local(seen, m.station(a.target));
            out.probs(m.encode(st)) += pred(s);
        }
        out.probs /= out.probs.sum();
        return out;
    }

    PolicyKind kind_;
    const NetworkModel* model_;
    const PolicySet* alphas_;
    PolicyContext ctx_;
    std::optional<EbTables> eb_;
};

} // namespace ehnet

#endif // EHNET_POLICIES_HPP
