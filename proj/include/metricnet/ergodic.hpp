#ifndef METRICNET_ERGODIC_HPP
#define METRICNET_ERGODIC_HPP

/**
 * @file ergodic.hpp
 *
 * @brief Compositions of stationary sequences of layer maps and estimators of
 * their asymptotic rates.
 *
 * Two composition orders are supported. Append order applies each new map to
 * the latest state, x_n = T_n ... T_1 x_0. Insert order composes each new map
 * innermost, x_n = T_1 ... T_n x_0, which has to be recomputed from x_0 for
 * every prefix and so costs O(n^2) layer applications.
 *
 * Rates are extracted from (1/n)-normalized series by averaging the last 10%
 * of the series, discarding the early transient.
 */

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metricnet/layers.hpp"
#include "metricnet/metrics.hpp"
#include "metricnet/types.hpp"

namespace metricnet::ergodic {

using layers::LayerMap;

/// Bias distribution of IID layers.
struct BiasSpec {
    enum class Kind { Zero, Fixed, Uniform };

    Kind kind = Kind::Zero;
    Vector value;     ///< Fixed
    double lo = 0.0;  ///< Uniform
    double hi = 0.0;

    static BiasSpec zero() { return {}; }
    static BiasSpec fixed(Vector b) { return {Kind::Fixed, std::move(b), 0.0, 0.0}; }
    static BiasSpec uniform(double lo, double hi) { return {Kind::Uniform, Vector(), lo, hi}; }
};

/**
 * @brief Reproducible source of layer maps T_1, T_2, ...
 *
 * IID layers are drawn from a per-index stream, FixedCycle repeats a list,
 * Markov switches between two maps with probability p at each step (starting
 * from the first).
 */
class SequenceGenerator {
public:
    enum class Mode { IID, FixedCycle, Markov };

    struct IIDParams {
        layers::LayerForm form = layers::LayerForm::Affine;
        layers::Activation activation = layers::Activation::TanH;
        layers::WeightSpec weights;
        BiasSpec bias;
    };

    static SequenceGenerator iid(IIDParams params, std::uint64_t seed);
    static SequenceGenerator fixed_cycle(std::vector<LayerMap> cycle);
    static SequenceGenerator constant(LayerMap map);
    static SequenceGenerator markov(LayerMap first, LayerMap second, double switch_prob, std::uint64_t seed);

    /// Streams the sequence from T_1.
    class Cursor {
    public:
        LayerMap next();

    private:
        friend class SequenceGenerator;
        explicit Cursor(const SequenceGenerator& gen);

        const SequenceGenerator* gen_;
        std::size_t index_ = 0;
        Rng rng_;
        bool markov_second_ = false;
    };

    Cursor cursor() const { return Cursor(*this); }

    /// T_1 .. T_n.
    std::vector<LayerMap> realize(std::size_t n) const;

    Mode mode() const { return mode_; }
    Eigen::Index dim() const;
    std::uint64_t seed() const { return seed_; }
    SequenceGenerator with_seed(std::uint64_t seed) const;
    std::string describe() const;

    /// Every map the generator can produce is positively homogeneous.
    bool positively_homogeneous() const;

private:
    SequenceGenerator() = default;

    Mode mode_ = Mode::FixedCycle;
    std::uint64_t seed_ = 0;
    IIDParams iid_{};
    std::vector<LayerMap> maps_;
    double switch_prob_ = 0.0;
};

enum class Order { Append, Insert };

/**
 * @brief An orbit x_0 .. x_n.
 *
 * Point k is exp(log_scale[k]) * points[k]. The log-scale stays zero unless
 * the layers are positively homogeneous, in which case states are
 * renormalized to keep exponentially growing orbits representable.
 */
struct Trajectory {
    std::vector<Vector> points;
    std::vector<double> log_scale;
    Order order = Order::Append;
    std::string generator;
    std::uint64_t seed = 0;
    bool overflowed = false; ///< Terminated early because a coordinate passed 1e300.

    std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
    /// Unscaled point k (may overflow to infinity when the log-scale is large).
    Vector point(std::size_t k) const;
};

inline constexpr double overflow_limit = 1e300;
inline constexpr double tail_fraction = 0.1;

/// Applies the maps in append order: T_n(...T_1(x0)).
Vector compose_append(std::span<const LayerMap> maps, const Vector& x0);

/// @throws ConfigError if n = 0; DimensionError if dim(x0) differs from the generator's.
Trajectory run_append(const SequenceGenerator& gen, const Vector& x0, std::size_t n);
Trajectory run_insert(const SequenceGenerator& gen, const Vector& x0, std::size_t n);

struct ExponentEstimate {
    double lambda = 0.0;
    std::vector<std::pair<std::size_t, double>> series;
    std::optional<std::size_t> leading_coordinate;
    bool tie = false;         ///< Several coordinates attained the final maximum.
    double half_width = 0.0;  ///< Half the range of the series over the tail window.
    bool overflowed = false;
};

/// Averages the last 10% (at least one entry) of a series.
double tail_average(std::span<const std::pair<std::size_t, double>> series);
std::size_t tail_length(std::size_t series_length);

enum class RateScale {
    Linear, ///< (1/n) d(x_0, x_n)
    Log     ///< (1/n) log d(x_0, x_n)
};

/// @throws DomainError if a point is outside the metric's domain (or a zero
/// distance meets the log scale).
ExponentEstimate subadditive_rate(const Trajectory& traj, const metrics::MetricKind& metric,
                                  RateScale scale = RateScale::Linear);

/// (1/n) log sup_i |x_n(i)| and the leading coordinate, which is reported only
/// when the same index attains the maximum over the whole tail window. Ties
/// go to the lowest index and set `tie`.
/// @throws DomainError if the final state is zero.
ExponentEstimate top_exponent(const Trajectory& traj);

struct DriftEstimate {
    Vector v;                                          ///< x_n / n at the final n.
    std::vector<std::pair<std::size_t, Vector>> series; ///< x_k / k for k >= 1.
    double norm = 0.0;
    double tail_std = 0.0; ///< Sample std of ||x_k / k|| over the tail window.
    bool overflowed = false;
};

DriftEstimate drift(const Trajectory& traj);

struct ExpansionEstimate {
    ExponentEstimate rate;
    std::size_t max_pair_index = 0;
    Vector max_pair_x; ///< Initial pair attaining the largest ratio at the final n.
    Vector max_pair_y;
};

/**
 * Evolves all pairs under one realized append-order sequence and reports
 * (1/n) log max_i ||x_i^n - y_i^n|| / ||x_i - y_i||.
 *
 * @throws DomainError if a map sends a sampled point out of the sampling box,
 * or every pair has collapsed below 1e-300. Collapsed pairs drop out of the max.
 */
ExpansionEstimate lipschitz_expansion_rate(const SequenceGenerator& gen, const metrics::PairSample& pairs, std::size_t n);

/**
 * Growth rate of the Jacobian distortion of f_n = f o T_n o ... o T_1:
 * (1/n) max over point pairs |log|J_{f_n}(x)| - log|J_{f_n}(y)||. The
 * decision function defaults to the identity.
 *
 * @throws DomainError on a singular Jacobian, naming the step and point.
 */
ExponentEstimate jacobian_distortion_rate(const SequenceGenerator& gen, std::size_t n, std::span<const Vector> points,
                                          const metrics::JacobianFn& decision_jacobian = {});

} // namespace metricnet::ergodic

#endif
