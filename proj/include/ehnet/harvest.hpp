#ifndef EHNET_HARVEST_HPP
#define EHNET_HARVEST_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>
#include <utility>

#include "ehnet/errors.hpp"

namespace ehnet {

/// Solar panel and irradiance statistics for one base station.
///
/// Intensities are multiples of the 1 kW/m^2 reference. `p_h` is the harvest
/// power of a single cell at the reference intensity (J_op * V_op).
struct SolarModel {
    double mu_s = 1.0;     ///< mean intensity
    double sigma_s = 0.5;  ///< intensity standard deviation
    double p_h = 1.32e-3;  ///< W per cell per reference intensity
    int omega_s = 40;      ///< cell count
    double eta_h = 0.75;   ///< harvesting efficiency
    double t_l = 0.2;      ///< slot length, seconds

    void validate() const {
        if (!(sigma_s > 0.0)) throw ConfigError("must be > 0", "solar.sigma_s");
        if (!(eta_h > 0.0 && eta_h <= 1.0)) throw ConfigError("must be in (0, 1]", "solar.eta");
        if (omega_s < 1) throw ConfigError("must be >= 1", "solar.omega_s");
        if (!(t_l > 0.0)) throw ConfigError("must be > 0", "solar.t_l_seconds");
        if (!(mu_s >= 0.0)) throw ConfigError("must be >= 0", "solar.mu_s");
        if (!(p_h > 0.0)) throw ConfigError("must be > 0", "solar.p_h_watts");
    }

    /// Joules harvested per slot per unit of intensity.
    double scale() const { return p_h * omega_s * eta_h * t_l; }
};

/// Mean and standard deviation of the per-slot harvest in joules.
inline std::pair<double, double> harvest_moments(const SolarModel& solar) {
    const double k = solar.scale();
    return {solar.mu_s * k, solar.sigma_s * k};
}

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Per-slot harvested energy: a Gaussian censored at zero.
///
/// Negative draws are reported as zero harvest, so the sub-zero mass sits as an
/// atom at E_H = 0. A zero mean intensity is treated as darkness (no harvest
/// at all) rather than as a half-Gaussian.
class HarvestDistribution {
public:
    HarvestDistribution() = default;
    HarvestDistribution(double mean, double sd) : mean_(mean), sd_(sd) {}
    explicit HarvestDistribution(const SolarModel& solar) {
        std::tie(mean_, sd_) = harvest_moments(solar);
    }

    double mean_param() const { return mean_; }
    double sd_param() const { return sd_; }
    bool dark() const { return mean_ <= 0.0; }

    /// Mass of the atom at zero.
    double prob_zero() const { return dark() ? 1.0 : normal_cdf(-mean_ / sd_); }

    template <class Rng>
    double sample(Rng& rng) const {
        if (dark()) return 0.0;
        std::normal_distribution<double> n(mean_, sd_);
        return std::max(0.0, n(rng));
    }

    /// E[min(E_H, cap)] for cap >= 0; negative caps are treated as zero.
    ///
    /// E[min(X+, c)] = integral_0^c P(X > x) dx, which has a closed form through
    /// the antiderivative of the normal cdf: int Phi(z) dz = z Phi(z) + phi(z).
    double expected_min(double cap) const {
        if (dark() || cap <= 0.0) return 0.0;
        const double z0 = -mean_ / sd_;
        const double zc = (cap - mean_) / sd_;
        auto anti = [](double z) { return z * normal_cdf(z) + normal_pdf(z); };
        return sd_ * ((zc - z0) - anti(zc) + anti(z0));
    }

private:
    double mean_ = 0.0;
    double sd_ = 1.0;
};

} // namespace ehnet

#endif // EHNET_HARVEST_HPP
