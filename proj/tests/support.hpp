// Scenarios, independent oracles and invariant checks shared by the unit
// tests and the acceptance runner.
#ifndef EHNET_TESTS_SUPPORT_HPP
#define EHNET_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ehnet/ehnet.hpp"

namespace support {

using namespace ehnet;

/// One station, four user counts, eight levels.
inline BsConfig single_station(double lambda = 0.4, double mu_s = 1.0) {
    BsConfig c;
    c.lambda = lambda;
    c.solar.mu_s = mu_s;
    return c;
}

/// Two identical stations, two user counts, three levels each.
inline std::vector<BsConfig> two_stations(double lambda = 0.4, double mu_s = 1.0) {
    BsConfig c;
    c.n_u = 2;
    c.n_b = 3;
    c.lambda = lambda;
    c.solar.mu_s = mu_s;
    return {c, c};
}

/// Total-variation distance between two distributions keyed by integer.
inline double tv_distance(const std::map<int, double>& p, const std::map<int, double>& q) {
    std::map<int, double> diff = p;
    for (const auto& [k, v] : q) diff[k] -= v;
    double s = 0.0;
    for (const auto& [k, v] : diff) s += std::abs(v);
    return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Oracles built without NetworkModel's tables
// ---------------------------------------------------------------------------

/// Joint transition of a station list by direct per-station products.
inline Eigen::MatrixXd brute_force_transition(const std::vector<BsConfig>& stations, int target, bool access) {
    std::vector<int> sizes;
    int n = 1;
    for (const BsConfig& c : stations) {
        sizes.push_back(c.local_states());
        n *= c.local_states();
    }
    auto digit = [&](int s, std::size_t i) {
        for (std::size_t j = 0; j < i; ++j) s /= sizes[j];
        return s % sizes[i];
    };
    Eigen::MatrixXd t(n, n);
    for (int s = 0; s < n; ++s)
        for (int sn = 0; sn < n; ++sn) {
            double p = 1.0;
            for (std::size_t i = 0; i < stations.size(); ++i) {
                const BsConfig& c = stations[i];
                const BsState from{digit(s, i) % c.n_u, digit(s, i) / c.n_u};
                const BsState to{digit(sn, i) % c.n_u, digit(sn, i) / c.n_u};
                const BsAction act = static_cast<int>(i) != target ? BsAction::None
                                     : access                     ? BsAction::Access
                                                                  : BsAction::Sense;
                p *= bs_joint_transition(to, from, act, c);
            }
            t(s, sn) = p;
        }
    return t;
}

/// Fully observable value iteration on one station, from the per-station
/// transition law directly.
inline Eigen::VectorXd mdp_values_single(const BsConfig& c, double gamma, double tol = 1e-11) {
    const int n = c.local_states();
    Eigen::MatrixXd t_idle = brute_force_transition({c}, 0, false);
    Eigen::MatrixXd t_access = brute_force_transition({c}, 0, true);
    Eigen::VectorXd r_access(n);
    for (int l = 0; l < n; ++l) r_access(l) = access_feasible({l % c.n_u, l / c.n_u}, c) ? 1.0 : 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int it = 0; it < 100000; ++it) {
        const Eigen::VectorXd next = (r_access + gamma * t_access * v).cwiseMax(gamma * t_idle * v);
        const double d = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (d < tol) break;
    }
    return v;
}

/// Value of the alpha set at every simplex corner.
inline Eigen::VectorXd corner_values(const PolicySet& p, int n) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, -1e300);
    for (const AlphaVector& a : p.alphas) v = v.cwiseMax(a.values);
    return v;
}

/// Least-squares slope of log(residual) against iteration over the tail.
inline double log_residual_slope(const std::vector<IterationRecord>& log, std::size_t skip) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = skip; i < log.size(); ++i) {
        if (!(log[i].residual > 0.0)) continue;
        const double x = log[i].iteration;
        const double y = std::log(log[i].residual);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) return 0.0;
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Invariant checks
// ---------------------------------------------------------------------------

struct Check {
    bool ok = true;
    std::string detail;
};

inline Check rows_stochastic(const NetworkModel& m, double tol = 1e-8) {
    double worst = 0.0;
    for (int a = 0; a < m.num_actions(); ++a) {
        const Eigen::MatrixXd& t = m.transition(a);
        worst = std::max(worst, (t.rowwise().sum().array() - 1.0).abs().maxCoeff());
        if (t.minCoeff() < 0.0) return {false, "negative transition entry"};
    }
    std::ostringstream d;
    d << "max |row sum - 1| = " << worst;
    return {worst <= tol, d.str()};
}

/// Random actions with observations drawn from the model's own predictive law.
inline Check belief_stays_on_simplex(const NetworkModel& m, int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Belief b = Belief::uniform(m.num_states());
    double worst = 0.0;
    for (int k = 0; k < steps; ++k) {
        const int a = std::uniform_int_distribution<int>(0, m.num_actions() - 1)(rng);
        const Eigen::VectorXd po = observation_distribution(b, a, m);
        const int o = std::discrete_distribution<int>(po.data(), po.data() + po.size())(rng);
        b = belief_update(b, a, o, m);
        worst = std::max(worst, std::abs(b.probs.sum() - 1.0));
        if (b.probs.minCoeff() < 0.0) return {false, "negative belief entry at step " + std::to_string(k)};
    }
    std::ostringstream d;
    d << steps << " updates, max |sum - 1| = " << worst;
    return {worst <= 1e-9, d.str()};
}

inline Check prune_preserves_max(int dim, int count, int beliefs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::exponential_distribution<double> e(1.0);
    std::vector<AlphaVector> in;
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd v(dim);
        for (int s = 0; s < dim; ++s) v(s) = u(rng);
        in.push_back({v, ActionChoice::sense(0), 0});
    }
    const PolicySet pruned = prune_dominated(in, 1e-12);
    double worst = 0.0;
    for (int k = 0; k < beliefs; ++k) {
        Belief b{Eigen::VectorXd(dim)};
        for (int s = 0; s < dim; ++s) b.probs(s) = e(rng);
        b.probs /= b.probs.sum();
        double before = -1e300;
        for (const AlphaVector& a : in) before = std::max(before, b.probs.dot(a.values));
        worst = std::max(worst, std::abs(before - pruned.value(b)));
    }
    std::ostringstream d;
    d << count << " -> " << pruned.alphas.size() << " vectors, max envelope change " << worst;
    return {worst <= 1e-9, d.str()};
}

inline Check encode_decode_bijection(const NetworkModel& m, int samples, std::uint64_t seed) {
    for (int s = 0; s < m.num_states(); ++s)
        if (m.encode(m.decode(s)) != s) return {false, "encode(decode(" + std::to_string(s) + ")) differs"};
    std::mt19937_64 rng(seed);
    for (int k = 0; k < samples; ++k) {
        SystemState st;
        for (int i = 0; i < m.num_stations(); ++i) {
            const BsConfig& c = m.station(i);
            st.per_bs.push_back({std::uniform_int_distribution<int>(0, c.n_u - 1)(rng),
                                 std::uniform_int_distribution<int>(0, c.n_b - 1)(rng)});
        }
        if (!(m.decode(m.encode(st)) == st)) return {false, "decode(encode(x)) differs at sample " + std::to_string(k)};
    }
    return {true, std::to_string(m.num_states()) + " indices and " + std::to_string(samples) + " random states"};
}

/// Chi-square test of sleep draws after the third consecutive failure.
inline Check backoff_uniform_at_c3(int draws, std::uint64_t seed) {
    std::vector<int> counts(8, 0);
    PolicyContext ctx;
    ctx.rng.seed(seed);
    for (int k = 0; k < draws; ++k) {
        ctx.backoff_count = 2;
        csma_cd_feedback(ctx, ActionChoice::access(0), false);
        if (ctx.backoff_count != 3 || ctx.sleep_remaining < 0 || ctx.sleep_remaining > 7)
            return {false, "sleep outside {0..7}"};
        ++counts[static_cast<std::size_t>(ctx.sleep_remaining)];
    }
    const double expect = draws / 8.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    std::ostringstream d;
    d << "chi2 = " << chi2 << " (7 dof, 0.1% critical 24.32)";
    return {chi2 < 24.32, d.str()};
}

inline std::string trace_text(const NetworkModel& m, PolicyKind kind, const PolicySet* alphas, std::uint64_t seed,
                              int n_t) {
    TrialOptions opt;
    opt.n_t = n_t;
    opt.seed = seed;
    opt.record_trace = true;
    const TrialResult r = run_trial(m, kind, alphas, opt);
    std::ostringstream os;
    write_trace_csv(os, r, m.num_stations());
    os << "n_success=" << r.n_success << '\n';
    return os.str();
}

inline Check seed_replay_identical(const NetworkModel& m, const PolicySet& alphas, std::uint64_t seed) {
    for (PolicyKind k : {PolicyKind::Pomdp, PolicyKind::EnergyBased, PolicyKind::CsmaCd, PolicyKind::CsmaCa,
                         PolicyKind::Random}) {
        const PolicySet* p = k == PolicyKind::Pomdp ? &alphas : nullptr;
        if (trace_text(m, k, p, seed, 2000) != trace_text(m, k, p, seed, 2000))
            return {false, std::string(to_string(k)) + " trace differs between replays"};
    }
    return {true, "5 policies x 2000 slots replayed byte-identically"};
}

// ---------------------------------------------------------------------------
// Quasi-static check
// ---------------------------------------------------------------------------

/// Level changes seen by the continuous environment with the user count held
/// at `s_u` and no grant. Only starting levels whose whole change range fits
/// inside the battery are recorded, so no clamp is involved.
inline std::map<int, double> empirical_level_deltas(const BsConfig& c, int s_u, int steps, std::uint64_t seed,
                                                    int max_up) {
    const Environment env({c});
    std::mt19937_64 rng(seed);
    EnvState st = env.random_initial(rng);
    std::map<int, double> counts;
    int recorded = 0;
    const int lo = s_u;
    const int hi = c.n_b - 1 - max_up;
    for (int k = 0; recorded < steps && k < 100 * steps; ++k) {
        st.per_bs[0].s_u = s_u;
        const int before = env.level(st.per_bs[0], 0);
        const StepOutcome out = env.step(st, ActionChoice::sense(0), rng);
        const int after = env.level(out.next.per_bs[0], 0);
        if (before >= lo && before <= hi) {
            counts[after - before] += 1.0;
            ++recorded;
        }
        st = out.next;
    }
    for (auto& [k, v] : counts) v /= recorded;
    return counts;
}

inline std::map<int, double> as_map(const DeltaDistribution& d) {
    std::map<int, double> out;
    for (int k = d.min_delta; k <= d.max_delta(); ++k) out[k] = d(k);
    return out;
}

} // namespace support

#endif // EHNET_TESTS_SUPPORT_HPP
