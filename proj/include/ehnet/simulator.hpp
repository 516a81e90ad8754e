#ifndef EHNET_SIMULATOR_HPP
#define EHNET_SIMULATOR_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "ehnet/errors.hpp"
#include "ehnet/harvest.hpp"
#include "ehnet/network_model.hpp"
#include "ehnet/policies.hpp"
#include "ehnet/scenario.hpp"
#include "ehnet/solver.hpp"

namespace ehnet {

// ---------------------------------------------------------------------------
// Ground-truth environment
// ---------------------------------------------------------------------------

/// True state of one station. Charge is continuous and measured in energy
/// quanta (one quantum serves one user for one slot).
struct PhysicalBs {
    double charge = 0.0;
    int s_u = 0;
};

struct EnvState {
    std::vector<PhysicalBs> per_bs;
};

struct StepOutcome {
    EnvState next;
    ObservationMsg observation;
    double reward = 0.0;
    std::vector<double> harvest;   ///< quanta harvested per station
    std::vector<double> consumed;  ///< quanta spent on transmission
    std::vector<double> spill;     ///< quanta discarded at the full-battery clamp
    std::vector<bool> forced_leave;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of trial `trial` under master seed `seed`.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
    return splitmix64(splitmix64(seed) ^ (trial + 1) * 0xd1342543de82ef95ULL);
}

/// Stations with continuous batteries, stepped slot by slot.
///
/// The battery follows Q' = min(Q + E_H - E_T, B_M) with Gaussian harvest
/// censored at zero; users arrive and leave per the birth-death law and all
/// leave when the stored charge cannot cover them. The agent's model only
/// sees the levels floor(Q / quantum).
class Environment {
public:
    explicit Environment(std::vector<BsConfig> stations) : stations_(std::move(stations)) {
        for (const BsConfig& c : stations_) {
            c.validate();
            const auto [m, s] = harvest_moments(c.solar);
            harvest_.emplace_back(m / c.energy_quantum(), s / c.energy_quantum());
        }
    }

    int num_stations() const { return static_cast<int>(stations_.size()); }
    const BsConfig& station(int i) const { return stations_.at(static_cast<std::size_t>(i)); }

    int level(const PhysicalBs& b, int i) const {
        return std::clamp(static_cast<int>(std::floor(b.charge)), 0, station(i).n_b - 1);
    }
    BsState discrete(const PhysicalBs& b, int i) const { return {b.s_u, level(b, i)}; }
    SystemState discrete(const EnvState& e) const {
        SystemState s;
        for (int i = 0; i < num_stations(); ++i) s.per_bs.push_back(discrete(e.per_bs[static_cast<std::size_t>(i)], i));
        return s;
    }

    /// Uniform over discrete states; charge uniform inside the chosen level.
    template <class Rng>
    EnvState random_initial(Rng& rng) const {
        EnvState e;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (const BsConfig& c : stations_) {
            std::uniform_int_distribution<int> u(0, c.n_u - 1);
            std::uniform_int_distribution<int> b(0, c.n_b - 1);
            PhysicalBs p;
            p.s_u = u(rng);
            const int lvl = b(rng);
            const double frac = unit(rng);
            p.charge = lvl == c.n_b - 1 ? static_cast<double>(lvl) : lvl + frac;
            e.per_bs.push_back(p);
        }
        return e;
    }

    /// Charge after one slot, in quanta. Returns {next charge, spilled}.
    static std::pair<double, double> battery_step(double charge, double harvest, double consumed, double top) {
        const double raw = std::max(0.0, charge + harvest - consumed);
        const double next = std::min(raw, top);
        return {next, raw - next};
    }

    template <class Rng>
    StepOutcome step(const EnvState& state, const ActionChoice& a, Rng& rng) const {
        if (a.target < 0 || a.target >= num_stations()) throw std::out_of_range("step_environment: bad target");
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        StepOutcome out;
        out.next.per_bs.reserve(stations_.size());
        for (int i = 0; i < num_stations(); ++i) {
            const BsConfig& c = station(i);
            const PhysicalBs& cur = state.per_bs[static_cast<std::size_t>(i)];
            const BsState seen = discrete(cur, i);

            const bool granted = a.is_access() && a.target == i && access_feasible(seen, c);
            const double consumed = transmit_levels(seen, granted);
            const double harvest = harvest_[static_cast<std::size_t>(i)].sample(rng);
            const auto [charge, spill] = battery_step(cur.charge, harvest, consumed, c.n_b - 1);

            PhysicalBs next{charge, cur.s_u};
            const bool depleted = cur.charge < cur.s_u;
            const double u = unit(rng);
            if (depleted) {
                next.s_u = 0;
            } else {
                const double up = cur.s_u < c.n_u - 1 ? c.lambda : 0.0;
                const double down = c.mu * cur.s_u;
                if (u < up)
                    next.s_u = cur.s_u + 1;
                else if (u < up + down)
                    next.s_u = cur.s_u - 1;
            }

            out.harvest.push_back(harvest);
            out.consumed.push_back(consumed);
            out.spill.push_back(spill);
            out.forced_leave.push_back(depleted && cur.s_u > 0);
            out.next.per_bs.push_back(next);
            if (granted) out.reward = 1.0;
        }
        const BsState obs = discrete(out.next.per_bs[static_cast<std::size_t>(a.target)], a.target);
        out.observation = {obs.s_u, obs.s_b, out.reward > 0.0};
        return out;
    }

private:
    std::vector<BsConfig> stations_;
    std::vector<HarvestDistribution> harvest_;  // in quanta
};

template <class Rng>
StepOutcome step_environment(const Environment& env, const EnvState& state, const ActionChoice& a, Rng& rng) {
    return env.step(state, a, rng);
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TraceRow {
    std::int64_t slot = 0;
    int state_index = 0;
    std::vector<double> charge_joules;
    std::vector<int> users;
    double belief_max = 0.0;  ///< largest belief entry; 0 for belief-free policies
    ActionChoice action;
    ObservationMsg observation;
    double reward = 0.0;
    std::vector<double> harvest_joules;
    bool any_feasible = false;
};

struct TrialResult {
    std::int64_t n_success = 0;
    std::int64_t n_t = 0;
    double eta_a = 0.0;
    std::int64_t feasible_slots = 0;  ///< slots where some station would grant
    int belief_resets = 0;
    std::vector<TraceRow> trace;
};

struct TrialOptions {
    int n_t = 10000;
    std::uint64_t seed = 1;
    bool record_trace = false;
    std::optional<EnvState> initial_state;
    std::optional<Belief> initial_belief;
};

/// Runs one rational user for `n_t` slots against the continuous environment.
inline TrialResult run_trial(const NetworkModel& model, PolicyKind kind, const PolicySet* alphas,
                             const TrialOptions& opt) {
    if (opt.n_t < 1) throw ConfigError("must be >= 1", "sim.n_t");
    const Environment env(model.stations());
    std::mt19937_64 env_rng(opt.seed);
    Agent agent(kind, model, alphas, splitmix64(opt.seed ^ 0xa5a5a5a5a5a5a5a5ULL));
    if (opt.initial_belief) agent.context().belief = *opt.initial_belief;

    EnvState state = opt.initial_state ? *opt.initial_state : env.random_initial(env_rng);
    TrialResult res;
    res.n_t = opt.n_t;
    if (opt.record_trace) res.trace.reserve(static_cast<std::size_t>(opt.n_t));

    for (std::int64_t t = 0; t < opt.n_t; ++t) {
        const SystemState now = env.discrete(state);
        bool any_feasible = false;
        for (int i = 0; i < model.num_stations(); ++i)
            any_feasible = any_feasible || access_feasible(now.per_bs[static_cast<std::size_t>(i)], model.station(i));
        if (any_feasible) ++res.feasible_slots;

        const ActionChoice a = agent.act();
        StepOutcome step = env.step(state, a, env_rng);
        agent.observe(a, step.observation);
        if (step.reward > 0.0) ++res.n_success;

        if (opt.record_trace) {
            TraceRow row;
            row.slot = t;
            row.state_index = model.encode(now);
            for (int i = 0; i < model.num_stations(); ++i) {
                const auto& p = state.per_bs[static_cast<std::size_t>(i)];
                const double q = model.station(i).energy_quantum();
                row.charge_joules.push_back(p.charge * q);
                row.users.push_back(p.s_u);
                row.harvest_joules.push_back(step.harvest[static_cast<std::size_t>(i)] * q);
            }
            row.belief_max = agent.tracks_belief() ? agent.context().belief.probs.maxCoeff() : 0.0;
            row.action = a;
            row.observation = step.observation;
            row.reward = step.reward;
            row.any_feasible = any_feasible;
            res.trace.push_back(std::move(row));
        }
        state = std::move(step.next);
    }
    res.eta_a = static_cast<double>(res.n_success) / static_cast<double>(res.n_t);
    res.belief_resets = agent.context().belief_resets;
    return res;
}

/// One CSV row per slot.
inline void write_trace_csv(std::ostream& os, const TrialResult& r, int n_stations) {
    os << "slot,state,action,obs_s_u,obs_s_b,granted,reward,belief_max,any_feasible";
    for (int i = 0; i < n_stations; ++i) os << ",charge_j" << i << ",users" << i << ",harvest_j" << i;
    os << '\n';
    char buf[64];
    for (const TraceRow& row : r.trace) {
        os << row.slot << ',' << row.state_index << ',' << row.action.name() << ',' << row.observation.s_u_o << ','
           << row.observation.s_b_o << ',' << (row.observation.granted ? 1 : 0) << ',' << row.reward << ',';
        std::snprintf(buf, sizeof buf, "%.9g", row.belief_max);
        os << buf << ',' << (row.any_feasible ? 1 : 0);
        for (int i = 0; i < n_stations; ++i) {
            const auto k = static_cast<std::size_t>(i);
            std::snprintf(buf, sizeof buf, ",%.9g,%d,%.9g", row.charge_joules[k], row.users[k], row.harvest_joules[k]);
            os << buf;
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// MDP oracle
// ---------------------------------------------------------------------------

/// Fully observable value iteration over the model's states.
inline Eigen::VectorXd mdp_oracle_value(const NetworkModel& model, double gamma, double tol = 1e-9) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(model.num_states());
    for (int it = 0; it < 1000000; ++it) {
        Eigen::VectorXd next = Eigen::VectorXd::Constant(model.num_states(), -std::numeric_limits<double>::infinity());
        for (int a = 0; a < model.num_actions(); ++a)
            next = next.cwiseMax(model.rewards(a) + gamma * model.transition(a) * v);
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        // Stop once the remaining distance to the fixed point is below tol.
        if (diff * gamma <= tol * (1.0 - gamma)) break;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct PolicyStats {
    double mean_eta_a = 0.0;
    double std_eta_a = 0.0;  ///< sample standard deviation across trials
    double mean_sim_ms = 0.0;
    int trials = 0;

    double standard_error() const { return trials > 0 ? std_eta_a / std::sqrt(static_cast<double>(trials)) : 0.0; }
};

/// Runs `trials` seeded trials, possibly concurrently. Trial k always uses
/// trial_seed(seed, k), so results do not depend on the thread count.
inline std::vector<TrialResult> run_trials(const NetworkModel& model, PolicyKind kind, const PolicySet* alphas,
                                           int n_t, int trials, std::uint64_t seed, int threads = 0,
                                           const std::atomic<bool>* cancel = nullptr,
                                           std::vector<double>* sim_ms = nullptr) {
    std::vector<TrialResult> results(static_cast<std::size_t>(trials));
    std::vector<double> ms(static_cast<std::size_t>(trials), 0.0);
    std::vector<char> done(static_cast<std::size_t>(trials), 0);
    std::atomic<int> next{0};

    auto worker = [&] {
        for (int k = next++; k < trials; k = next++) {
            if (cancel && cancel->load()) return;
            const auto t0 = std::chrono::steady_clock::now();
            TrialOptions opt;
            opt.n_t = n_t;
            opt.seed = trial_seed(seed, static_cast<std::uint64_t>(k));
            results[static_cast<std::size_t>(k)] = run_trial(model, kind, alphas, opt);
            ms[static_cast<std::size_t>(k)] =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            done[static_cast<std::size_t>(k)] = 1;
        }
    };

    int n_threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min(n_threads, trials);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }

    std::vector<TrialResult> finished;
    for (int k = 0; k < trials; ++k) {
        if (!done[static_cast<std::size_t>(k)]) continue;
        finished.push_back(std::move(results[static_cast<std::size_t>(k)]));
        if (sim_ms) sim_ms->push_back(ms[static_cast<std::size_t>(k)]);
    }
    return finished;
}

inline PolicyStats summarize(const std::vector<TrialResult>& results, const std::vector<double>& sim_ms = {}) {
    PolicyStats st;
    st.trials = static_cast<int>(results.size());
    if (results.empty()) return st;
    double sum = 0.0;
    for (const TrialResult& r : results) sum += r.eta_a;
    st.mean_eta_a = sum / st.trials;
    if (st.trials > 1) {
        double ss = 0.0;
        for (const TrialResult& r : results) ss += (r.eta_a - st.mean_eta_a) * (r.eta_a - st.mean_eta_a);
        st.std_eta_a = std::sqrt(ss / (st.trials - 1));
    }
    if (!sim_ms.empty()) {
        double t = 0.0;
        for (double m : sim_ms) t += m;
        st.mean_sim_ms = t / static_cast<double>(sim_ms.size());
    }
    return st;
}

struct SweepRow {
    std::string param;
    double value = 0.0;
    std::string policy;
    int trials = 0;
    double mean_eta_a = 0.0;
    double std_eta_a = 0.0;
    double mean_solve_ms = 0.0;
    double mean_sim_ms = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> notices;
    bool truncated = false;
};

inline constexpr std::string_view kSweepParams[] = {"lambda", "mu_s"};

/// Sets a sweepable parameter on every station.
inline void apply_sweep_value(Scenario& sc, const std::string& param, double value) {
    for (BsConfig& c : sc.stations) {
        if (param == "lambda")
            c.lambda = value;
        else if (param == "mu_s")
            c.solar.mu_s = value;
        else
            throw ConfigError("sweep parameter must be lambda or mu_s, got '" + param + "'", "--param");
    }
}

struct SweepOptions {
    const std::atomic<bool>* cancel = nullptr;
    /// Called after each completed row, e.g. to stream CSV.
    std::function<void(const SweepRow&)> on_row;
};

/// Grid of (value x policy) cells, each averaged over `base.sim.trials`
/// trials. The model (and, for pomdp, the policy) is rebuilt per value. A
/// refused exact solve skips the pomdp cell with a notice.
inline SweepResult run_sweep(const Scenario& base, const std::string& param, const std::vector<double>& values,
                             const std::vector<PolicyKind>& policies, const SweepOptions& opt = {}) {
    if (values.empty()) throw ConfigError("value list is empty", "--values");
    if (policies.empty()) throw ConfigError("policy list is empty", "--policies");
    SweepResult out;
    auto cancelled = [&] { return opt.cancel && opt.cancel->load(); };

    for (double value : values) {
        if (!std::isfinite(value)) throw ConfigError("sweep values must be finite", "--values");
        Scenario sc = base;
        apply_sweep_value(sc, param, value);
        sc.validate();

        const auto build0 = std::chrono::steady_clock::now();
        const NetworkModel model(sc.stations);
        const double build_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - build0).count();

        for (PolicyKind kind : policies) {
            if (cancelled()) {
                out.truncated = true;
                return out;
            }
            double solve_ms = kind == PolicyKind::EnergyBased ? build_ms : 0.0;
            std::optional<PolicySet> alphas;
            if (kind == PolicyKind::Pomdp) {
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    SolveResult solved = value_iterate(model, sc.solver);
                    if (!solved.converged)
                        out.notices.push_back(param + "=" + std::to_string(value) +
                                              ": solver hit max_iters before converging");
                    alphas = std::move(solved.policy);
                } catch (const SolverRefusal& e) {
                    out.notices.push_back(param + "=" + std::to_string(value) + ": pomdp skipped: " + e.what());
                    continue;
                }
                solve_ms = build_ms +
                           std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            }

            std::vector<double> sim_ms;
            const auto results = run_trials(model, kind, alphas ? &*alphas : nullptr, sc.sim.n_t, sc.sim.trials,
                                            sc.sim.seed, sc.sim.threads, opt.cancel, &sim_ms);
            if (static_cast<int>(results.size()) < sc.sim.trials) {
                out.truncated = true;
                return out;
            }
            const PolicyStats st = summarize(results, sim_ms);
            SweepRow row{param, value, std::string(to_string(kind)), st.trials, st.mean_eta_a, st.std_eta_a,
                         solve_ms, st.mean_sim_ms};
            if (opt.on_row) opt.on_row(row);
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

inline void write_sweep_header(std::ostream& os, const Scenario& sc) {
    os << "# ehnet sweep config_hash=" << hex64(sc.hash()) << " seed=" << sc.sim.seed << '\n';
    os << "sweep_param,value,policy,trials,mean_eta_a,std_eta_a,mean_solve_ms,mean_sim_ms\n";
}

inline void write_sweep_row(std::ostream& os, const SweepRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.10g,%s,%d,%.10g,%.10g,%.3f,%.3f\n", r.param.c_str(), r.value,
                  r.policy.c_str(), r.trials, r.mean_eta_a, r.std_eta_a, r.mean_solve_ms, r.mean_sim_ms);
    os << buf;
}

} // namespace ehnet

#endif // EHNET_SIMULATOR_HPP
