#ifndef METRICNET_LAYERS_HPP
#define METRICNET_LAYERS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "metricnet/metrics.hpp"
#include "metricnet/random.hpp"
#include "metricnet/types.hpp"

namespace metricnet::layers {

enum class Activation { ReLU, TanH, Sigmoid, SiLU, HardSigmoid, Identity };

double activate(Activation act, double t);
/// Derivative; at kinks (ReLU at 0, HardSigmoid at 0 and 1) the value 0 is used.
double activate_derivative(Activation act, double t);
Vector activate(Activation act, const Vector& t);

std::string_view to_string(Activation act);
/// Case-insensitive; accepts relu, tanh, sigmoid, silu (or swish), hardsigmoid, identity.
/// @throws ConfigError for an unknown name.
Activation activation_from_string(std::string_view name);

enum class LayerForm {
    Affine,        ///< sigma(Wx + b)
    Sandwich,      ///< W^T sigma(Wx + b)
    Residual,      ///< x + sigma(Wx + b)
    ScaledResidual ///< x + (1/n) sigma(Wx + b)
};

std::string_view to_string(LayerForm form);
LayerForm layer_form_from_string(std::string_view name);

/**
 * @brief A single layer map T.
 */
struct LayerMap {
    LayerForm form = LayerForm::Affine;
    Matrix W;
    Vector b;
    Activation activation = Activation::Identity;
    double residual_steps = 1.0; ///< n of ScaledResidual; ignored by other forms.

    /// @throws ConfigError unless W is square, dim(b) = dim(W) and residual_steps >= 1.
    static LayerMap make(LayerForm form, Matrix W, Vector b, Activation act, double residual_steps = 1.0);

    Eigen::Index dim() const { return W.rows(); }

    /// T(c x) = c T(x) for c > 0: zero bias, ReLU/Identity, Affine or Sandwich.
    bool is_positively_homogeneous() const;
};

/// @throws DimensionError if dim(x) != dim(W).
Vector apply_layer(const LayerMap& T, const Vector& x);

/// Chain-rule Jacobian of T at x.
Matrix exact_jacobian(const LayerMap& T, const Vector& x);

/**
 * @brief Distribution of a square weight matrix.
 */
struct WeightSpec {
    enum class Kind { UniformBox, XavierUniform, PositiveUniform };

    Kind kind = Kind::UniformBox;
    std::size_t dim = 1;
    double scale = 1.0; ///< UniformBox half-width.
    double lo = 0.0;    ///< PositiveUniform bounds.
    double hi = 1.0;
    bool spectral_cap = false; ///< Rescale the draw so ||W||_2 <= 1.

    static WeightSpec uniform_box(std::size_t dim, double scale);
    /// UniformBox(1/sqrt(N)).
    static WeightSpec inverse_sqrt(std::size_t dim);
    /// UniformBox(sqrt(3)/sqrt(N)).
    static WeightSpec xavier(std::size_t dim);
    static WeightSpec positive_uniform(std::size_t dim, double lo, double hi);
    WeightSpec capped() const;

    /// Half-width of the entry distribution for the box kinds.
    double box_scale() const;
    /// @throws ConfigError for dim = 0, scale < 0, lo < 0 or hi < lo.
    void validate() const;
};

Matrix sample_weights(const WeightSpec& spec, Rng& rng);
Matrix sample_weights(const WeightSpec& spec, std::uint64_t seed);

/// Largest singular value (exact, via SVD).
double operator_norm(const Matrix& W);

/// Sampling domain used by the property checkers.
struct SamplingDomain {
    enum class Kind { PositiveCone, Box };

    Kind kind = Kind::PositiveCone;
    double lo = 1e-3; ///< PositiveCone: coordinates log-uniform in [lo, hi]; Box: uniform in [lo, hi].
    double hi = 1e3;

    static SamplingDomain positive_cone() { return {}; }
    static SamplingDomain box(double lo, double hi) { return {Kind::Box, lo, hi}; }
};

struct CheckOptions {
    std::size_t trials = 10000;
    std::uint64_t seed = 0;
    double tolerance = 1e-9;
    std::optional<SamplingDomain> domain; ///< Defaults per check / metric.
    std::size_t retry_cap = 100;          ///< Redraws allowed per trial when a point leaves the metric domain.
};

struct Witness {
    Vector x;
    Vector y;              ///< Second point (order / non-expansive checks).
    double lambda = 0.0;   ///< Scaling factor (subhomogeneity check).
    double violation = 0.0;
    double ratio = 0.0;    ///< d(Tx, Ty) / d(x, y) for the non-expansive check.
};

struct PropertyVerdict {
    bool passed = true;
    std::optional<Witness> witness; ///< Worst violation; present iff !passed.
    std::size_t trials = 0;
    double tolerance = 0.0;
    std::size_t redraws = 0;
};

using VectorMap = std::function<Vector(const Vector&)>;

/// Samples x <= y in the domain and checks T(x) <= T(y) componentwise.
PropertyVerdict check_order_preserving(const VectorMap& T, Eigen::Index dim, const CheckOptions& opts = {});
PropertyVerdict check_order_preserving(const LayerMap& T, const CheckOptions& opts = {});

/// Samples x in the domain and lambda in (0,1), checks lambda T(x) <= T(lambda x).
PropertyVerdict check_subhomogeneous(const VectorMap& T, Eigen::Index dim, const CheckOptions& opts = {});
PropertyVerdict check_subhomogeneous(const LayerMap& T, const CheckOptions& opts = {});

/// Checks d(Tx, Ty) <= d(x, y) + tolerance on sampled pairs. Cone metrics
/// sample the positive cone by default, norm metrics the box [-10, 10]^N.
/// @throws DomainError if a trial cannot produce valid images within the retry cap.
PropertyVerdict check_nonexpansive(const VectorMap& T, Eigen::Index dim, const metrics::MetricKind& metric,
                                   const CheckOptions& opts = {});
PropertyVerdict check_nonexpansive(const LayerMap& T, const metrics::MetricKind& metric, const CheckOptions& opts = {});

struct ScalarCriterionReport {
    PropertyVerdict verdict;
    double max_value = 0.0;
    double argmax = 0.0;
};

/// Checks x (1 - sigmoid(x + b)) < 1 on every grid point.
ScalarCriterionReport check_scalar_criterion_b(double b, std::span<const double> grid);

} // namespace metricnet::layers

#endif
