#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"

using namespace ehnet;
using Catch::Approx;

namespace {

// Two states, two actions. Action 0 is blind (a single observation), action
// 1 reveals the next state.
struct ToyModel {
    Eigen::MatrixXd t0{{0.9, 0.1}, {0.2, 0.8}};
    Eigen::MatrixXd t1{{0.6, 0.4}, {0.3, 0.7}};
    Eigen::VectorXd r0{{1.0, 0.0}};
    Eigen::VectorXd r1{{0.0, 0.5}};

    int num_states() const { return 2; }
    int num_actions() const { return 2; }
    ActionChoice action(int a) const { return a == 0 ? ActionChoice::access(0) : ActionChoice::sense(0); }
    const Eigen::MatrixXd& transition(int a) const { return a == 0 ? t0 : t1; }
    const Eigen::VectorXd& rewards(int a) const { return a == 0 ? r0 : r1; }
    int num_observations(int a) const { return a == 0 ? 1 : 2; }
    int observation_index(int a, int s_next) const { return a == 0 ? 0 : s_next; }
};

PolicySet zeros(int n, int actions) {
    PolicySet p;
    for (int a = 0; a < actions; ++a) p.alphas.push_back({Eigen::VectorXd::Zero(n), ActionChoice::sense(0), a});
    return p;
}

bool has_vector(const PolicySet& p, std::initializer_list<double> v, int ordinal) {
    for (const AlphaVector& a : p.alphas) {
        if (a.ordinal != ordinal || a.values.size() != static_cast<Eigen::Index>(v.size())) continue;
        Eigen::Index i = 0;
        bool same = true;
        for (double x : v) same = same && std::abs(a.values(i++) - x) <= 1e-12;
        if (same) return true;
    }
    return false;
}

AlphaVector vec(std::initializer_list<double> v, int ordinal = 0) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) e(i++) = x;
    return {e, ActionChoice::sense(0), ordinal};
}

} // namespace

TEST_CASE("simplex LP solves a small bounded program", "[solver]") {
    // max x + y  s.t.  x <= 1, y <= 2, x + y <= 2.5
    Eigen::MatrixXd A{{1, 0}, {0, 1}, {1, 1}};
    Eigen::VectorXd b{{1, 2, 2.5}};
    Eigen::VectorXd c{{1, 1}};
    const auto r = lp::maximize(A, b, c);
    REQUIRE(r.status == lp::Status::Optimal);
    CHECK(r.value == Approx(2.5));
    Eigen::MatrixXd open{{1, -1}};
    Eigen::VectorXd rhs{{1}};
    CHECK(lp::maximize(open, rhs, c).status == lp::Status::Unbounded);
}

TEST_CASE("prune_dominated examples", "[solver]") {
    CHECK(prune_dominated({vec({1, 1}), vec({0.5, 0.9})}, 1e-9).alphas.size() == 1);
    CHECK(prune_dominated({vec({1, 0}), vec({0, 1})}, 1e-9).alphas.size() == 2);
    const PolicySet p = prune_dominated({vec({1, 0}), vec({0, 1}), vec({0.4, 0.4})}, 1e-9);
    REQUIRE(p.alphas.size() == 2);
    CHECK_FALSE(has_vector(p, {0.4, 0.4}, 0));
    // A vector that wins in the middle survives.
    CHECK(prune_dominated({vec({1, 0}), vec({0, 1}), vec({0.6, 0.6})}, 1e-9).alphas.size() == 3);
    // Duplicates collapse.
    CHECK(prune_dominated({vec({1, 2}), vec({1, 2})}, 1e-9).alphas.size() == 1);
}

TEST_CASE("pruning preserves the upper envelope", "[solver]") {
    for (int dim : {2, 4, 8}) {
        const auto check = support::prune_preserves_max(dim, 60, 1000, 11 + static_cast<std::uint64_t>(dim));
        INFO(check.detail);
        CHECK(check.ok);
    }
}

TEST_CASE("first backup from zero gives the reward vectors", "[solver]") {
    const NetworkModel m({support::single_station()});
    SolverConfig cfg;
    const PolicySet p = backup(zeros(m.num_states(), m.num_actions()), m, cfg);
    for (const AlphaVector& a : p.alphas) CHECK((a.values - m.rewards(a.ordinal)).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd best = Eigen::VectorXd::Zero(m.num_states());
    for (int a = 0; a < m.num_actions(); ++a) best = best.cwiseMax(m.rewards(a));
    CHECK((support::corner_values(p, m.num_states()) - best).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-state toy backups match hand computation", "[solver]") {
    const ToyModel toy;
    SolverConfig cfg;
    cfg.gamma = 0.5;
    const PolicySet v1 = backup(zeros(2, 2), toy, cfg);
    REQUIRE(v1.alphas.size() == 2);
    CHECK(has_vector(v1, {1.0, 0.0}, 0));
    CHECK(has_vector(v1, {0.0, 0.5}, 1));

    // Blind action: R0 + 0.5 * T0 * alpha for each alpha in v1 gives
    // (1.45, 0.1) and (1.025, 0.2). Revealing action: R1 plus the best
    // projection per observation gives (0.4, 0.825). (1.025, 0.2) never tops
    // the other two on the segment, so it is pruned.
    const PolicySet v2 = backup(v1, toy, cfg);
    REQUIRE(v2.alphas.size() == 2);
    CHECK(has_vector(v2, {1.45, 0.1}, 0));
    CHECK(has_vector(v2, {0.4, 0.825}, 1));
}

TEST_CASE("zero-reward model converges at once", "[solver]") {
    ToyModel toy;
    toy.r0.setZero();
    toy.r1.setZero();
    const SolveResult r = value_iterate(toy, SolverConfig{});
    CHECK(r.converged);
    CHECK(r.log.size() == 1);
    for (const AlphaVector& a : r.policy.alphas) CHECK(a.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gamma zero is a one-step myopic solve", "[solver]") {
    const NetworkModel m({support::single_station()});
    SolverConfig cfg;
    cfg.gamma = 0.0;
    const SolveResult r = value_iterate(m, cfg);
    CHECK(r.converged);
    CHECK(r.log.size() == 1);
}

TEST_CASE("single-station values equal the MDP oracle", "[solver]") {
    for (auto [lambda, mu_s] : {std::pair{0.4, 1.0}, std::pair{0.2, 2.0}, std::pair{0.6, 0.5}}) {
        const BsConfig c = support::single_station(lambda, mu_s);
        const NetworkModel m({c});
        const SolveResult r = value_iterate(m, SolverConfig{});
        REQUIRE(r.converged);
        const Eigen::VectorXd oracle = support::mdp_values_single(c, 0.9);
        const double gap = (support::corner_values(r.policy, m.num_states()) - oracle).cwiseAbs().maxCoeff();
        INFO("lambda=" << lambda << " mu_s=" << mu_s << " gap=" << gap);
        CHECK(gap <= 10 * SolverConfig{}.bellman_eps);
        CHECK((mdp_oracle_value(m, 0.9) - oracle).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("mdp_oracle_value on trivial models", "[solver]") {
    // A station with no room for a newcomer never grants: zero values.
    BsConfig c;
    c.n_u = 1;
    c.n_b = 2;
    CHECK(mdp_oracle_value(NetworkModel({c}), 0.9).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residuals shrink geometrically", "[solver]") {
    const SolveResult r = value_iterate(NetworkModel({support::single_station()}), SolverConfig{});
    REQUIRE(r.converged);
    for (std::size_t i = 2; i < r.log.size(); ++i) CHECK(r.log[i].residual <= r.log[i - 1].residual + 1e-12);
    CHECK(support::log_residual_slope(r.log, r.log.size() / 2) <= std::log(0.9) + 0.05);
}

TEST_CASE("best_action picks the top vector with lowest-ordinal ties", "[solver]") {
    PolicySet p;
    p.alphas.push_back({Eigen::Vector2d(1, 0), ActionChoice::access(0), 0});
    p.alphas.push_back({Eigen::Vector2d(0, 1), ActionChoice::sense(0), 1});
    CHECK(best_action({Eigen::Vector2d(0.3, 0.7)}, p) == ActionChoice::sense(0));
    CHECK(best_action(Belief::point(2, 0), p) == ActionChoice::access(0));
    CHECK(best_action({Eigen::Vector2d(0.5, 0.5)}, p) == ActionChoice::access(0));

    PolicySet one;
    one.alphas.push_back({Eigen::Vector2d(3, 4), ActionChoice::sense(1), 3});
    CHECK(best_action({Eigen::Vector2d(0.9, 0.1)}, one) == ActionChoice::sense(1));

    // Scaling every vector by the same positive constant keeps the choice.
    std::mt19937_64 rng(5);
    const SolveResult r = value_iterate(NetworkModel(support::two_stations()), SolverConfig{});
    PolicySet scaled = r.policy;
    for (AlphaVector& a : scaled.alphas) a.values *= 3.7;
    std::exponential_distribution<double> e(1.0);
    for (int k = 0; k < 200; ++k) {
        Belief b{Eigen::VectorXd(36)};
        for (int s = 0; s < 36; ++s) b.probs(s) = e(rng);
        b.probs /= b.probs.sum();
        CHECK(best_action(b, r.policy) == best_action(b, scaled));
    }
}

TEST_CASE("belief update on a single station reveals the state", "[solver]") {
    const NetworkModel m({support::single_station()});
    const Belief b = belief_update(Belief::uniform(32), ActionChoice::sense(0), ObservationMsg{1, 4, false}, m);
    CHECK(b.probs(BsState{1, 4}.local_index(m.station(0))) == Approx(1.0));
}

TEST_CASE("two-station posterior factorizes", "[solver]") {
    const auto stations = support::two_stations();
    const NetworkModel m(stations);
    const ObservationMsg o{0, 2, false};
    const Belief post = belief_update(Belief::uniform(36), ActionChoice::sense(0), o, m);
    // Non-target marginal: uniform prior pushed through station 1's idle kernel.
    const Eigen::VectorXd prior = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
    const Eigen::VectorXd pushed = m.kernel(1).idle().transpose() * prior;
    for (int s = 0; s < 36; ++s) {
        const int l0 = m.local_index(s, 0);
        const int l1 = m.local_index(s, 1);
        const double expect = l0 == BsState{0, 2}.local_index(stations[0]) ? pushed(l1) : 0.0;
        CHECK(post.probs(s) == Approx(expect).margin(1e-14));
    }
}

TEST_CASE("belief updates stay on the simplex", "[solver]") {
    const NetworkModel m(support::two_stations());
    const auto check = support::belief_stays_on_simplex(m, 10000, 3);
    INFO(check.detail);
    CHECK(check.ok);
    // Observation probabilities from the normalizer sum to one.
    const Eigen::VectorXd po = observation_distribution(Belief::uniform(36), 2, m);
    CHECK(po.sum() == Approx(1.0).margin(1e-12));
}

TEST_CASE("impossible observation is an inconsistency", "[solver]") {
    BsConfig c = support::single_station();
    c.solar.mu_s = 0.0;
    const NetworkModel m({c});
    // No sun: a full battery cannot be seen after starting empty.
    CHECK_THROWS_AS(belief_update(Belief::point(32, 0), ActionChoice::sense(0), ObservationMsg{0, 7, false}, m),
                    BeliefInconsistency);
}

TEST_CASE("solver refuses oversized state spaces", "[solver]") {
    const NetworkModel m({support::single_station()});
    SolverConfig cfg;
    cfg.max_states = 16;
    CHECK_THROWS_AS(value_iterate(m, cfg), SolverRefusal);
}
