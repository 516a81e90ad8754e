#ifndef EHNET_BS_MODEL_HPP
#define EHNET_BS_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "ehnet/errors.hpp"
#include "ehnet/harvest.hpp"

namespace ehnet {

/// Static parameters of one solar-powered base station.
///
/// Battery charge is quantized into `n_b` levels of one energy quantum each,
/// where a quantum is what one user consumes in one slot (p_t * t_l). Users
/// being served range over 0..n_u-1.
struct BsConfig {
    int n_u = 4;
    int n_b = 8;
    double p_t = 0.04;  ///< per-user transmit power, W
    double lambda = 0.4;
    double mu = 0.05;
    SolarModel solar;
    int reserve_levels = 1;

    double energy_quantum() const { return p_t * solar.t_l; }
    double capacity() const { return (n_b - 1) * energy_quantum(); }
    int local_states() const { return n_u * n_b; }

    void validate() const {
        if (n_u < 1) throw ConfigError("must be >= 1", "bs.n_u");
        if (n_b < 2) throw ConfigError("must be >= 2", "bs.n_b");
        if (!(p_t > 0.0)) throw ConfigError("must be > 0", "bs.p_t_watts");
        if (!(lambda >= 0.0)) throw ConfigError("must be >= 0", "bs.lambda");
        if (!(mu >= 0.0)) throw ConfigError("must be >= 0", "bs.mu");
        if (lambda + mu * (n_u - 1) > 1.0 + 1e-12)
            throw ConfigError("lambda + mu*(n_u-1) must not exceed 1", "bs.lambda");
        if (reserve_levels < 0) throw ConfigError("must be >= 0", "bs.reserve_levels");
        solar.validate();
    }
};

struct BsState {
    int s_u = 0;  ///< users being served
    int s_b = 0;  ///< battery level

    friend bool operator==(const BsState&, const BsState&) = default;

    /// Position inside the station's own (s_u, s_b) grid.
    int local_index(const BsConfig& cfg) const { return s_u + cfg.n_u * s_b; }
    static BsState from_local(int l, const BsConfig& cfg) { return {l % cfg.n_u, l / cfg.n_u}; }
    bool valid_for(const BsConfig& cfg) const {
        return s_u >= 0 && s_u < cfg.n_u && s_b >= 0 && s_b < cfg.n_b;
    }
};

/// What the rational user does to one station in a slot. Grants are resolved
/// from the station's state, never chosen.
enum class BsAction : std::uint8_t { None, Sense, Access };

/// Battery level of a charge in joules: floor(q / quantum), capped at the top level.
inline int discretize_battery(double q_b, const BsConfig& cfg) {
    const double cap = cfg.capacity();
    // Tolerate representation error at the upper bound.
    if (q_b < 0.0 || q_b > cap * (1.0 + 1e-12))
        throw std::domain_error("discretize_battery: charge outside [0, capacity]");
    const double levels = q_b / cfg.energy_quantum();
    const int level = static_cast<int>(std::floor(levels + 1e-9));
    return std::clamp(level, 0, cfg.n_b - 1);
}

/// Whether a new request would be granted in state `s`.
///
/// Needs spare user capacity and enough battery for one more user this slot.
/// An idle station at or below the reserve refuses newcomers so it keeps the
/// last quantum for itself.
inline bool access_feasible(const BsState& s, const BsConfig& cfg) {
    if (s.s_u >= cfg.n_u - 1) return false;
    if (s.s_b < s.s_u + 1) return false;
    if (s.s_u == 0 && s.s_b <= cfg.reserve_levels) return false;
    return true;
}

/// Battery levels drained this slot. Best effort: never more than what is stored.
inline int transmit_levels(const BsState& s, bool granted) {
    return std::min(s.s_u + (granted ? 1 : 0), s.s_b);
}

/// Birth-death user dynamics with forced leaving on a depleted battery.
inline double user_transition(int s_u_next, const BsState& s, const BsConfig& cfg) {
    if (s_u_next < 0 || s_u_next >= cfg.n_u) return 0.0;
    if (s.s_b < s.s_u) return s_u_next == 0 ? 1.0 : 0.0;
    const double up = s.s_u < cfg.n_u - 1 ? cfg.lambda : 0.0;
    const double down = cfg.mu * s.s_u;
    if (s_u_next == s.s_u + 1) return up;
    if (s_u_next == s.s_u - 1) return down;
    if (s_u_next == s.s_u) return 1.0 - up - down;
    return 0.0;
}

/// Linear interpolation weight of level change `delta` for a real change of
/// `x` quanta under a uniformly distributed intra-level residue.
inline double level_tent(double x, int delta) {
    return std::max(0.0, 1.0 - std::abs(x - delta));
}

/// Pr(level change = delta | harvest e_h, consumption e_t), both in joules.
inline double battery_delta_given_harvest(int delta, double e_h, double e_t, const BsConfig& cfg) {
    return level_tent((e_h - e_t) / cfg.energy_quantum(), delta);
}

inline constexpr double kDeltaTailThreshold = 1e-4;

/// Distribution of the one-slot battery level change on an unbounded battery.
struct DeltaDistribution {
    int min_delta = 0;
    std::vector<double> probs;

    int max_delta() const { return min_delta + static_cast<int>(probs.size()) - 1; }
    double operator()(int delta) const {
        if (delta < min_delta || delta > max_delta()) return 0.0;
        return probs[static_cast<std::size_t>(delta - min_delta)];
    }
};

struct QuadratureOptions {
    /// Fixed panel count per band; 0 refines adaptively until `tolerance`.
    int panels = 0;
    double tolerance = 1e-13;
    int max_panels = 1 << 12;
    /// Tail entries below this are dropped and the rest renormalized.
    double tail_threshold = kDeltaTailThreshold;
};

namespace detail {

// Integrates f(h) * N(h; mean, sd) over [lo, hi] (quanta units), clipped to
// the region where the density is numerically nonzero.
template <class F>
double gaussian_band(F f, double lo, double hi, double mean, double sd, const QuadratureOptions& opt) {
    constexpr double kSpan = 12.0;
    lo = std::max({lo, 0.0, mean - kSpan * sd});
    hi = std::min(hi, mean + kSpan * sd);
    if (!(hi > lo)) return 0.0;

    auto integrand = [&](double h) { return f(h) * normal_pdf((h - mean) / sd) / sd; };
    auto composite = [&](int panels) {
        const double w = (hi - lo) / panels;
        double sum = 0.0;
        for (int p = 0; p < panels; ++p) {
            const double a = lo + p * w;
            sum += boost::math::quadrature::gauss<double, 20>::integrate(integrand, a, a + w);
        }
        return sum;
    };

    if (opt.panels > 0) return composite(opt.panels);

    int panels = 2;
    double prev = composite(panels);
    while (panels < opt.max_panels) {
        panels *= 2;
        const double next = composite(panels);
        if (std::abs(next - prev) <= opt.tolerance) return next;
        prev = next;
    }
    std::ostringstream msg;
    msg << "battery_delta_dist: quadrature did not converge on [" << lo << ", " << hi
        << "] (mean " << mean << ", sd " << sd << ") with " << panels << " panels";
    throw QuadratureError(msg.str());
}

} // namespace detail

/// Level-change distribution when `e_t_levels` quanta are consumed this slot.
///
/// Integrates the residue-interpolated change probability against the censored
/// Gaussian harvest density band by band, then trims both tails.
inline DeltaDistribution battery_delta_dist(int e_t_levels, const BsConfig& cfg,
                                            const QuadratureOptions& opt = {}) {
    if (e_t_levels < 0) throw std::domain_error("battery_delta_dist: negative consumption");
    const HarvestDistribution harvest(cfg.solar);
    const int k = e_t_levels;
    if (harvest.dark()) return {-k, {1.0}};

    const double eps = cfg.energy_quantum();
    const double mean = harvest.mean_param() / eps;
    const double sd = harvest.sd_param() / eps;
    const double atom = harvest.prob_zero();

    // Harvest in quanta is h >= 0, so the change x = h - k is at least -k.
    const int hi_delta = static_cast<int>(std::ceil(mean + 12.0 * sd)) - k + 1;

    DeltaDistribution raw{-k, {}};
    for (int i = -k; i <= hi_delta; ++i) {
        const double centre = k + i;  // harvest at which the change is exactly i
        double p = (i == -k) ? atom : 0.0;
        p += detail::gaussian_band([&](double h) { return h - centre + 1.0; }, centre - 1.0, centre,
                                   mean, sd, opt);
        p += detail::gaussian_band([&](double h) { return centre + 1.0 - h; }, centre, centre + 1.0,
                                   mean, sd, opt);
        raw.probs.push_back(p);
    }

    std::size_t first = 0;
    std::size_t last = raw.probs.size();
    while (first < last && raw.probs[first] < opt.tail_threshold) ++first;
    while (last > first && raw.probs[last - 1] < opt.tail_threshold) --last;
    if (first == last) {
        first = 0;
        last = raw.probs.size();
    }

    DeltaDistribution out{raw.min_delta + static_cast<int>(first),
                          std::vector<double>(raw.probs.begin() + first, raw.probs.begin() + last)};
    double total = 0.0;
    for (double p : out.probs) total += p;
    for (double& p : out.probs) p /= total;
    return out;
}

/// Next-level probability given a precomputed change distribution. Changes
/// that would overflow saturate at the top level; underflow sits at level 0.
inline double battery_transition(int s_b_next, const BsState& s, const DeltaDistribution& dist,
                                 const BsConfig& cfg) {
    if (s_b_next < 0 || s_b_next >= cfg.n_b) return 0.0;
    double p = 0.0;
    for (int d = dist.min_delta; d <= dist.max_delta(); ++d) {
        const int target = std::clamp(s.s_b + d, 0, cfg.n_b - 1);
        if (target == s_b_next) p += dist(d);
    }
    return p;
}

inline double battery_transition(int s_b_next, const BsState& s, bool granted, const BsConfig& cfg) {
    return battery_transition(s_b_next, s, battery_delta_dist(transmit_levels(s, granted), cfg), cfg);
}

/// One station's joint (users, battery) transition; users and battery move
/// independently given the current state.
inline double bs_joint_transition(const BsState& next, const BsState& s, BsAction action,
                                  const BsConfig& cfg) {
    const bool granted = action == BsAction::Access && access_feasible(s, cfg);
    return user_transition(next.s_u, s, cfg) * battery_transition(next.s_b, s, granted, cfg);
}

/// Dense local transition matrices of one station, rows indexed by
/// BsState::local_index. Built once per configuration.
class BsKernel {
public:
    BsKernel() = default;
    explicit BsKernel(const BsConfig& cfg, const QuadratureOptions& opt = {}) : cfg_(cfg) {
        cfg.validate();
        for (int k = 0; k < cfg.n_b; ++k) deltas_.push_back(battery_delta_dist(k, cfg, opt));
        idle_ = build(false);
        access_ = build(true);
    }

    const BsConfig& config() const { return cfg_; }
    const DeltaDistribution& delta_dist(int e_t_levels) const {
        return deltas_.at(static_cast<std::size_t>(e_t_levels));
    }

    /// Matrix for a station the user leaves alone or only senses.
    const Eigen::MatrixXd& idle() const { return idle_; }
    /// Matrix for a station the user requests access from.
    const Eigen::MatrixXd& access() const { return access_; }
    const Eigen::MatrixXd& matrix(BsAction a) const { return a == BsAction::Access ? access_ : idle_; }

private:
    Eigen::MatrixXd build(bool request) const {
        const int n = cfg_.local_states();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (int l = 0; l < n; ++l) {
            const BsState s = BsState::from_local(l, cfg_);
            const bool granted = request && access_feasible(s, cfg_);
            const DeltaDistribution& dist = delta_dist(transmit_levels(s, granted));
            for (int u = 0; u < cfg_.n_u; ++u) {
                const double pu = user_transition(u, s, cfg_);
                if (pu == 0.0) continue;
                for (int b = 0; b < cfg_.n_b; ++b) {
                    const double pb = battery_transition(b, s, dist, cfg_);
                    if (pb != 0.0) m(l, BsState{u, b}.local_index(cfg_)) += pu * pb;
                }
            }
        }
        return m;
    }

    BsConfig cfg_;
    std::vector<DeltaDistribution> deltas_;
    Eigen::MatrixXd idle_;
    Eigen::MatrixXd access_;
};

} // namespace ehnet

#endif // EHNET_BS_MODEL_HPP
