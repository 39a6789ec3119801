#ifndef METRICNET_METRICS_HPP
#define METRICNET_METRICS_HPP

/**
 * @file metrics.hpp
 *
 * @brief Distance functions on cones, normed spaces and spaces of maps, plus
 * evaluators for metric functionals (horofunctions).
 *
 * Every "sup over x != y" quantity here is evaluated on an explicit finite
 * sample and is therefore a lower bound on the true supremum.
 */

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "metricnet/types.hpp"

namespace metricnet::metrics {

/**
 * @brief A point of the open positive cone: every coordinate strictly positive.
 */
class PositivePoint {
public:
    /// @throws DomainError if empty or any coordinate is not a finite positive number.
    explicit PositivePoint(Vector coords);

    const Vector& coords() const { return coords_; }
    Eigen::Index size() const { return coords_.size(); }

private:
    Vector coords_;
};

/**
 * @brief Which norm a norm-induced metric uses.
 */
struct NormSpec {
    enum class Kind { Euclidean, PNorm, Max };

    Kind kind = Kind::Euclidean;
    double p = 2.0; ///< Only used for Kind::PNorm; must be >= 1.

    static NormSpec euclidean() { return {Kind::Euclidean, 2.0}; }
    static NormSpec max() { return {Kind::Max, 0.0}; }
    /// @throws ConfigError if p < 1.
    static NormSpec pnorm(double p);

    bool operator==(const NormSpec&) const = default;
};

double norm(const Vector& x, const NormSpec& spec);

/**
 * @brief Tagged description of which distance function is in play.
 *
 * Only Thompson, Hilbert and Norm are point metrics usable with
 * `point_distance()`; the remaining tags name the distances between maps or
 * distance functions, which have dedicated evaluators below.
 */
struct MetricKind {
    enum class Tag { Thompson, Hilbert, Norm, Distortion1D, JacobianDistortion, DistanceFunctionD };

    Tag tag = Tag::Thompson;
    NormSpec norm{};

    static MetricKind thompson() { return {Tag::Thompson, {}}; }
    static MetricKind hilbert() { return {Tag::Hilbert, {}}; }
    static MetricKind of_norm(NormSpec spec) { return {Tag::Norm, spec}; }
    static MetricKind euclidean() { return of_norm(NormSpec::euclidean()); }

    bool is_point_metric() const { return tag == Tag::Thompson || tag == Tag::Hilbert || tag == Tag::Norm; }
    bool needs_positive_cone() const { return tag == Tag::Thompson || tag == Tag::Hilbert; }
};

double thompson_distance(const PositivePoint& x, const PositivePoint& y);
double hilbert_distance(const PositivePoint& x, const PositivePoint& y);
double norm_distance(const Vector& x, const Vector& y, const NormSpec& spec);

/// Dispatches on a point metric. Cone metrics validate positivity.
/// @throws ConfigError if `kind` is not a point metric.
double point_distance(const MetricKind& kind, const Vector& x, const Vector& y);

/**
 * log d(x0, e^log_scale * u) for a point stored in scaled form, without
 * forming the possibly unrepresentable product. Returns -infinity for a
 * zero distance.
 */
double log_point_distance_scaled(const MetricKind& kind, const Vector& x0, double log_scale, const Vector& u);

/**
 * @brief Finite set of distinct pairs drawn from an axis-aligned box.
 *
 * Pairs closer than `min_separation` (Euclidean) are rejected to keep
 * distance ratios away from the diagonal blow-up.
 */
class PairSample {
public:
    static constexpr double min_separation = 1e-9;

    PairSample(Vector lower, Vector upper);

    /// Independent uniform pairs in the box.
    static PairSample uniform(Vector lower, Vector upper, std::size_t count, std::uint64_t seed);

    /// Pairs (x, x + r*u) with x uniform in the box, u a random unit direction
    /// and r log-uniform in [radius*1e-3, radius]; both points clipped to the box.
    static PairSample near_diagonal(Vector lower, Vector upper, std::size_t count, double radius, std::uint64_t seed);

    /// @return false (and does not insert) if the pair is degenerate.
    /// @throws DimensionError / DomainError for points outside the box.
    bool add(Vector x, Vector y);

    const std::vector<std::pair<Vector, Vector>>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    Eigen::Index dim() const { return lower_.size(); }

private:
    Vector lower_;
    Vector upper_;
    std::vector<std::pair<Vector, Vector>> pairs_;
};

using DistanceFn = std::function<double(const Vector&, const Vector&)>;
using ScalarFn = std::function<double(double)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/**
 * Sampled version of D(d1, d2) = log max{sup d2/d1, sup d1/d2}. The result is
 * a lower bound on the supremum over all pairs.
 *
 * @throws DomainError if either evaluator returns a nonpositive or non-finite value.
 * @throws ConfigError if the sample is empty.
 */
double empirical_distance_metric_D(const DistanceFn& d1, const DistanceFn& d2, const PairSample& sample);

/// max over grid pairs of |log |g'(x)/f'(x) * f'(y)/g'(y)||.
double distortion_distance_1d(const ScalarFn& fprime, const ScalarFn& gprime, std::span<const double> grid);

/// log |det J| through an LU factorization.
/// @throws DomainError for a singular (or non-square) matrix.
double log_abs_det(const Matrix& jacobian);

/// max over point pairs of |log(|Jf(x)|/|Jg(x)| * |Jg(y)|/|Jf(y)|)|.
double jacobian_distortion_distance(const JacobianFn& jf, const JacobianFn& jg, std::span<const Vector> points);

/**
 * @brief Closed-form metric functionals.
 *
 * SmoothNormDirectional: h(x) = -<x, grad||.||(w)>, the limit of
 * ||y_n - x|| - ||y_n|| along y_n / ||y_n|| -> w. Only norms that are C^2 on
 * the unit sphere qualify (Euclidean and p-norms with p > 1).
 *
 * ThompsonHoro: h(x) = max{ max_{u_i>0} log(x_i u_i), max_{v_i>0} log(v_i / x_i) }.
 */
class MetricFunctional {
public:
    struct SmoothNormDirectional {
        Vector w;
        NormSpec norm;
    };
    struct ThompsonHoro {
        Vector u;
        Vector v;
    };

    /// @throws ConfigError if ||w|| != 1 (tol 1e-12) or the norm is not C^2.
    static MetricFunctional smooth_norm_directional(Vector w, NormSpec spec = NormSpec::euclidean());
    /// @throws ConfigError unless u, v >= 0, u_i v_i = 0 and max_i max{u_i, v_i} = 1.
    static MetricFunctional thompson_horo(Vector u, Vector v);

    const std::variant<SmoothNormDirectional, ThompsonHoro>& kind() const { return kind_; }

private:
    explicit MetricFunctional(std::variant<SmoothNormDirectional, ThompsonHoro> kind) : kind_(std::move(kind)) {}

    std::variant<SmoothNormDirectional, ThompsonHoro> kind_;
};

/// Gradient of the norm at a point on its unit sphere (Euclidean, p > 1).
Vector norm_gradient(const Vector& w, const NormSpec& spec);

double eval_metric_functional(const MetricFunctional& h, const Vector& x);

/**
 * h_{y_n}(x) = d(x, y_n) - d(basepoint, y_n) for every y_n in the sequence.
 */
std::vector<double> empirical_horofunction(const MetricKind& kind, const Vector& basepoint,
                                           std::span<const Vector> y_sequence, const Vector& x);

} // namespace metricnet::metrics

#endif
