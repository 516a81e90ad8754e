#ifndef EHNET_SOLVER_HPP
#define EHNET_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ehnet/errors.hpp"
#include "ehnet/lp.hpp"
#include "ehnet/network_model.hpp"

namespace ehnet {

/// A value hyperplane over joint states, tagged with the action whose
/// backup produced it.
struct AlphaVector {
    Eigen::VectorXd values;
    ActionChoice action;
    int ordinal = 0;  ///< action ordinal in the owning model
};

/// Probability distribution over joint states.
struct Belief {
    Eigen::VectorXd probs;

    static Belief uniform(int n) { return {Eigen::VectorXd::Constant(n, 1.0 / n)}; }
    static Belief point(int n, int s) {
        Belief b{Eigen::VectorXd::Zero(n)};
        b.probs(s) = 1.0;
        return b;
    }
    int size() const { return static_cast<int>(probs.size()); }
    bool on_simplex(double tol = 1e-9) const {
        return probs.size() > 0 && probs.minCoeff() >= -tol && std::abs(probs.sum() - 1.0) <= tol;
    }
};

struct SolverConfig {
    double gamma = 0.9;
    double bellman_eps = 1e-6;
    int max_iters = 500;
    double prune_eps = 1e-9;
    /// Largest joint state space the exact solver accepts.
    int max_states = 512;
    /// Largest surviving alpha set before the solve is abandoned.
    int max_alphas = 5000;
    /// Random beliefs (besides the simplex corners) used to measure the residual.
    int residual_samples = 512;
    std::uint64_t sample_seed = 0x5eed;

    void validate() const {
        // gamma = 0 is accepted: a myopic solve is exact after one backup.
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("must be in [0, 1)", "solver.gamma");
        if (!(bellman_eps > 0.0)) throw ConfigError("must be > 0", "solver.bellman_eps");
        if (!(prune_eps > 0.0)) throw ConfigError("must be > 0", "solver.prune_eps");
        if (max_iters < 1) throw ConfigError("must be >= 1", "solver.max_iters");
        if (residual_samples < 0) throw ConfigError("must be >= 0", "solver.residual_samples");
    }
};

/// Alpha vectors surviving pruning; the value function is their upper envelope.
struct PolicySet {
    std::vector<AlphaVector> alphas;

    double value(const Belief& b) const {
        double best = -std::numeric_limits<double>::infinity();
        for (const AlphaVector& a : alphas) best = std::max(best, b.probs.dot(a.values));
        return best;
    }
};

namespace detail {

struct Witness {
    Eigen::VectorXd belief;
    double margin = 0.0;
};

// Belief at which `w` beats every vector in `others` by the largest margin.
// nullopt when the LP could not be solved; callers keep the vector then.
inline std::optional<Witness> find_witness(const Eigen::VectorXd& w,
                                           const std::vector<const Eigen::VectorXd*>& others) {
    const Eigen::Index n = w.size();
    if (others.empty()) return Witness{Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)),
                                       std::numeric_limits<double>::infinity()};
    if (n == 1) {
        double margin = std::numeric_limits<double>::infinity();
        for (const auto* d : others) margin = std::min(margin, w(0) - (*d)(0));
        return Witness{Eigen::VectorXd::Ones(1), margin};
    }

    // Eliminate the last belief coordinate (b_last = 1 - sum of the rest) and
    // shift the free margin by K so the origin is feasible:
    //   max t  s.t.  sum_s b_s[(d_s - w_s) - (d_L - w_L)] + t <= (w_L - d_L) + K   for all d
    //                sum_s b_s <= 1,  b >= 0, t >= 0,  margin = t - K.
    const Eigen::Index last = n - 1;
    const auto m = static_cast<Eigen::Index>(others.size());
    double shift = 0.0;
    for (const auto* d : others) shift = std::max(shift, (*d)(last) - w(last));

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, n);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::VectorXd& d = *others[static_cast<std::size_t>(r)];
        const double tail = d(last) - w(last);
        A.row(r).head(last) = (d.head(last) - w.head(last)).array() - tail;
        A(r, last) = 1.0;
        rhs(r) = -tail + shift;
    }
    A.row(m).head(last).setOnes();
    rhs(m) = 1.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    c(last) = 1.0;

    const lp::Result res = lp::maximize(A, rhs, c);
    if (res.status != lp::Status::Optimal) return std::nullopt;

    Witness out;
    out.belief.resize(n);
    out.belief.head(last) = res.x.head(last).cwiseMax(0.0);
    out.belief(last) = std::max(0.0, 1.0 - out.belief.head(last).sum());
    out.belief /= out.belief.sum();
    out.margin = res.x(last) - shift;
    return out;
}

inline bool dominates(const Eigen::VectorXd& v, const Eigen::VectorXd& u, double eps) {
    return (v.array() >= u.array() - eps).all();
}

// Prefer larger value at b, then lexicographically larger vector, then lower ordinal.
inline bool better_at(const AlphaVector& x, const AlphaVector& y, const Eigen::VectorXd& b) {
    const double vx = b.dot(x.values);
    const double vy = b.dot(y.values);
    if (vx != vy) return vx > vy;
    for (Eigen::Index i = 0; i < x.values.size(); ++i)
        if (x.values(i) != y.values(i)) return x.values(i) > y.values(i);
    return x.ordinal < y.ordinal;
}

} // namespace detail

/// Removes vectors that are pointwise dominated (within eps) by another vector.
inline std::vector<AlphaVector> pointwise_filter(std::vector<AlphaVector> in, double eps) {
    std::vector<AlphaVector> kept;
    kept.reserve(in.size());
    for (AlphaVector& u : in) {
        bool dominated = false;
        for (const AlphaVector& v : kept) {
            if (detail::dominates(v.values, u.values, eps)) {
                dominated = true;
                break;
            }
        }
        if (dominated) continue;
        std::erase_if(kept, [&](const AlphaVector& v) { return detail::dominates(u.values, v.values, eps); });
        kept.push_back(std::move(u));
    }
    return kept;
}

/// Minimal subset with the same upper envelope (within eps).
///
/// Pointwise filtering first, then each candidate is tested for a witness
/// belief where it beats the vectors kept so far; the best candidate at that
/// witness joins the kept set. Candidates with no witness are dropped.
inline PolicySet prune_dominated(std::vector<AlphaVector> in, double eps) {
    if (in.empty()) throw std::invalid_argument("prune_dominated: empty input");
    std::vector<AlphaVector> work = pointwise_filter(std::move(in), eps);
    if (work.size() <= 1) return {std::move(work)};

    std::vector<AlphaVector> kept;
    std::vector<const Eigen::VectorXd*> kept_values;
    while (!work.empty()) {
        // kept may reallocate below; refresh the pointer list every round.
        kept_values.clear();
        for (const AlphaVector& k : kept) kept_values.push_back(&k.values);

        const auto witness = detail::find_witness(work.back().values, kept_values);
        if (!witness) {
            kept.push_back(std::move(work.back()));
            work.pop_back();
            continue;
        }
        if (witness->margin <= eps) {
            work.pop_back();
            continue;
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < work.size(); ++i)
            if (detail::better_at(work[i], work[best], witness->belief)) best = i;
        kept.push_back(std::move(work[best]));
        work.erase(work.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return {std::move(kept)};
}

// The solver templates accept any model with num_states(), num_actions(),
// action(a), transition(a) (rows s, columns s'), rewards(a),
// num_observations(a) and observation_index(a, s_next), where the
// observation is a deterministic function of the next state.

/// R(s, a): one when the access request would be granted.
inline double reward(const NetworkModel& model, int s, const ActionChoice& a) { return model.reward(s, a); }

namespace detail {

// Next states grouped by the observation they emit, per action.
template <class Model>
inline std::vector<std::vector<std::vector<int>>> observation_groups(const Model& model) {
    std::vector<std::vector<std::vector<int>>> groups(static_cast<std::size_t>(model.num_actions()));
    for (int a = 0; a < model.num_actions(); ++a) {
        auto& g = groups[static_cast<std::size_t>(a)];
        g.resize(static_cast<std::size_t>(model.num_observations(a)));
        for (int s = 0; s < model.num_states(); ++s)
            g[static_cast<std::size_t>(model.observation_index(a, s))].push_back(s);
    }
    return groups;
}

inline std::vector<AlphaVector> cross_sum(const std::vector<AlphaVector>& x, const std::vector<AlphaVector>& y) {
    std::vector<AlphaVector> out;
    out.reserve(x.size() * y.size());
    for (const AlphaVector& a : x)
        for (const AlphaVector& b : y) out.push_back({a.values + b.values, a.action, a.ordinal});
    return out;
}

} // namespace detail

/// One exact dynamic-programming backup with incremental pruning.
///
/// For every action the reward vector is cross-summed with, for each
/// observation, the discounted projections of every previous vector; each
/// partial cross-sum is pruned before the next observation is folded in.
template <class Model>
inline PolicySet backup(const PolicySet& prev, const Model& model, const SolverConfig& cfg) {
    if (prev.alphas.empty()) throw std::invalid_argument("backup: empty previous set");
    if (model.num_states() > cfg.max_states)
        throw SolverRefusal("exact solve refused: " + std::to_string(model.num_states()) +
                            " states exceeds the enumeration limit of " + std::to_string(cfg.max_states) +
                            "; use the energy-based policy instead");

    const int n = model.num_states();
    const auto groups = detail::observation_groups(model);

    std::vector<AlphaVector> all;
    for (int a = 0; a < model.num_actions(); ++a) {
        const ActionChoice act = model.action(a);
        const Eigen::MatrixXd& T = model.transition(a);
        std::vector<AlphaVector> acc{{model.rewards(a), act, a}};

        for (const std::vector<int>& next_states : groups[static_cast<std::size_t>(a)]) {
            if (next_states.empty()) continue;
            const auto k = static_cast<Eigen::Index>(next_states.size());
            Eigen::MatrixXd t_o(n, k);
            Eigen::MatrixXd alpha_o(k, static_cast<Eigen::Index>(prev.alphas.size()));
            for (Eigen::Index j = 0; j < k; ++j) {
                const int sp = next_states[static_cast<std::size_t>(j)];
                t_o.col(j) = T.col(sp);
                for (std::size_t v = 0; v < prev.alphas.size(); ++v)
                    alpha_o(j, static_cast<Eigen::Index>(v)) = prev.alphas[v].values(sp);
            }
            if (t_o.isZero(0.0)) continue;
            const Eigen::MatrixXd proj = cfg.gamma * (t_o * alpha_o);

            std::vector<AlphaVector> projections;
            projections.reserve(prev.alphas.size());
            for (Eigen::Index v = 0; v < proj.cols(); ++v) projections.push_back({proj.col(v), act, a});
            projections = pointwise_filter(std::move(projections), 0.0);

            if (acc.size() * projections.size() > static_cast<std::size_t>(cfg.max_alphas) * 64)
                throw SolverRefusal("exact solve refused: cross-sum of " +
                                    std::to_string(acc.size() * projections.size()) +
                                    " vectors is beyond the enumeration limit");
            acc = prune_dominated(detail::cross_sum(acc, projections), cfg.prune_eps).alphas;
        }
        for (AlphaVector& v : acc) all.push_back(std::move(v));
    }

    PolicySet out = prune_dominated(std::move(all), cfg.prune_eps);
    if (static_cast<int>(out.alphas.size()) > cfg.max_alphas)
        throw SolverRefusal("exact solve refused: " + std::to_string(out.alphas.size()) +
                            " alpha vectors exceeds the limit of " + std::to_string(cfg.max_alphas));
    return out;
}

struct IterationRecord {
    int iteration = 0;
    double residual = 0.0;
    int alpha_count = 0;
    double wall_ms = 0.0;  ///< elapsed since the solve started
};

struct SolveResult {
    PolicySet policy;
    std::vector<IterationRecord> log;
    bool converged = false;
};

/// Fixed random beliefs (uniform on the simplex) used to measure residuals.
inline Eigen::MatrixXd residual_beliefs(int n_states, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0);
    Eigen::MatrixXd out(samples, n_states);
    for (int r = 0; r < samples; ++r) {
        for (int s = 0; s < n_states; ++s) out(r, s) = e(rng);
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

namespace detail {

// Upper envelope at each sample row followed by each simplex corner.
inline Eigen::VectorXd envelope(const PolicySet& set, const Eigen::MatrixXd& samples) {
    const Eigen::Index n = samples.cols();
    Eigen::VectorXd v = Eigen::VectorXd::Constant(samples.rows() + n, -std::numeric_limits<double>::infinity());
    for (const AlphaVector& a : set.alphas) {
        v.head(samples.rows()) = v.head(samples.rows()).cwiseMax(samples * a.values);
        v.tail(n) = v.tail(n).cwiseMax(a.values);
    }
    return v;
}

} // namespace detail

/// Discounted infinite-horizon value iteration from the zero value function.
///
/// Stops when the largest change of the value function over the simplex
/// corners and a fixed belief sample is at most `bellman_eps`, or after
/// `max_iters` backups (then `converged` is false and the last set is kept).
template <class Model>
inline SolveResult value_iterate(const Model& model, const SolverConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const int n = model.num_states();
    const Eigen::MatrixXd samples = residual_beliefs(n, cfg.residual_samples, cfg.sample_seed);

    PolicySet current;
    for (int a = 0; a < model.num_actions(); ++a)
        current.alphas.push_back({Eigen::VectorXd::Zero(n), model.action(a), a});
    Eigen::VectorXd values = detail::envelope(current, samples);

    SolveResult out;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        PolicySet next = backup(current, model, cfg);
        const Eigen::VectorXd next_values = detail::envelope(next, samples);
        const double residual = (next_values - values).cwiseAbs().maxCoeff();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out.log.push_back({it, residual, static_cast<int>(next.alphas.size()), ms});
        current = std::move(next);
        values = next_values;
        if (residual <= cfg.bellman_eps || cfg.gamma == 0.0) {
            out.converged = true;
            break;
        }
    }
    out.policy = std::move(current);
    return out;
}

/// Action of the alpha vector with the largest inner product; ties go to the
/// lowest action ordinal.
inline ActionChoice best_action(const Belief& b, const PolicySet& policy) {
    if (policy.alphas.empty()) throw std::invalid_argument("best_action: empty policy");
    const AlphaVector* best = &policy.alphas.front();
    double best_value = b.probs.dot(best->values);
    for (const AlphaVector& a : policy.alphas) {
        const double v = b.probs.dot(a.values);
        const double tol = 1e-12 * std::max(1.0, std::abs(best_value));
        if (v > best_value + tol || (v >= best_value - tol && a.ordinal < best->ordinal)) {
            best_value = std::max(v, best_value);
            best = &a;
        }
    }
    return best->action;
}

/// Next-state distribution after acting, before the observation arrives.
template <class Model>
inline Eigen::VectorXd predict(const Belief& b, int action, const Model& model) {
    return model.transition(action).transpose() * b.probs;
}

/// Pr(o | b, a) for every observation index of action `a`.
template <class Model>
inline Eigen::VectorXd observation_distribution(const Belief& b, int action, const Model& model) {
    const Eigen::VectorXd pred = predict(b, action, model);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(model.num_observations(action));
    for (int s = 0; s < model.num_states(); ++s) out(model.observation_index(action, s)) += pred(s);
    return out;
}

/// Bayes filter step: condition the predicted belief on the observation.
template <class Model>
inline Belief belief_update(const Belief& b, int action, int observation, const Model& model) {
    const Eigen::VectorXd pred = predict(b, action, model);
    Belief out{Eigen::VectorXd::Zero(model.num_states())};
    for (int s = 0; s < model.num_states(); ++s)
        if (model.observation_index(action, s) == observation) out.probs(s) = pred(s);
    const double z = out.probs.sum();
    if (!(z > 0.0))
        throw BeliefInconsistency("belief_update: observation " + std::to_string(observation) + " after " +
                                  model.action(action).name() + " has zero probability");
    out.probs /= z;
    return out;
}

inline Belief belief_update(const Belief& b, const ActionChoice& a, const ObservationMsg& o,
                            const NetworkModel& model) {
    const BsState seen{o.s_u_o, o.s_b_o};
    return belief_update(b, model.ordinal(a), seen.local_index(model.station(a.target)), model);
}

} // namespace ehnet

#endif // EHNET_SOLVER_HPP
