#include "metricnet/layers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace metricnet::layers {

namespace {

double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

} // namespace

double activate(Activation act, double t) {
    switch (act) {
    case Activation::ReLU:
        return t > 0.0 ? t : 0.0;
    case Activation::TanH:
        return std::tanh(t);
    case Activation::Sigmoid:
        return sigmoid(t);
    case Activation::SiLU:
        return t * sigmoid(t);
    case Activation::HardSigmoid:
        return std::min(1.0, std::max(0.0, t));
    case Activation::Identity:
        return t;
    }
    return t;
}

double activate_derivative(Activation act, double t) {
    switch (act) {
    case Activation::ReLU:
        return t > 0.0 ? 1.0 : 0.0;
    case Activation::TanH: {
        const double th = std::tanh(t);
        return 1.0 - th * th;
    }
    case Activation::Sigmoid: {
        const double s = sigmoid(t);
        return s * (1.0 - s);
    }
    case Activation::SiLU: {
        const double s = sigmoid(t);
        return s + t * s * (1.0 - s);
    }
    case Activation::HardSigmoid:
        return (t > 0.0 && t < 1.0) ? 1.0 : 0.0;
    case Activation::Identity:
        return 1.0;
    }
    return 1.0;
}

Vector activate(Activation act, const Vector& t) {
    return t.unaryExpr([act](double v) { return activate(act, v); });
}

std::string_view to_string(Activation act) {
    switch (act) {
    case Activation::ReLU: return "relu";
    case Activation::TanH: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::SiLU: return "silu";
    case Activation::HardSigmoid: return "hardsigmoid";
    case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    const std::string n = lower(name);
    if (n == "relu") return Activation::ReLU;
    if (n == "tanh") return Activation::TanH;
    if (n == "sigmoid") return Activation::Sigmoid;
    if (n == "silu" || n == "swish") return Activation::SiLU;
    if (n == "hardsigmoid") return Activation::HardSigmoid;
    if (n == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(LayerForm form) {
    switch (form) {
    case LayerForm::Affine: return "affine";
    case LayerForm::Sandwich: return "sandwich";
    case LayerForm::Residual: return "residual";
    case LayerForm::ScaledResidual: return "scaled_residual";
    }
    return "affine";
}

LayerForm layer_form_from_string(std::string_view name) {
    const std::string n = lower(name);
    if (n == "affine") return LayerForm::Affine;
    if (n == "sandwich") return LayerForm::Sandwich;
    if (n == "residual") return LayerForm::Residual;
    if (n == "scaled_residual") return LayerForm::ScaledResidual;
    throw ConfigError("unknown layer form '" + std::string(name) + "'");
}

LayerMap LayerMap::make(LayerForm form, Matrix W, Vector b, Activation act, double residual_steps) {
    if (W.rows() != W.cols() || W.rows() == 0) {
        throw ConfigError("LayerMap: W must be a nonempty square matrix");
    }
    if (b.size() != W.rows()) {
        throw ConfigError("LayerMap: bias dimension must match W");
    }
    if (form == LayerForm::ScaledResidual && !(residual_steps >= 1.0)) {
        throw ConfigError("LayerMap: scaled residual requires n >= 1");
    }
    return LayerMap{form, std::move(W), std::move(b), act, residual_steps};
}

bool LayerMap::is_positively_homogeneous() const {
    const bool homogeneous_act = activation == Activation::Identity || activation == Activation::ReLU;
    const bool linear_form = form == LayerForm::Affine || form == LayerForm::Sandwich;
    return homogeneous_act && linear_form && (b.array() == 0.0).all();
}

Vector apply_layer(const LayerMap& T, const Vector& x) {
    if (x.size() != T.dim()) {
        throw DimensionError("apply_layer: input dimension " + std::to_string(x.size()) + " does not match layer dimension " +
                             std::to_string(T.dim()));
    }
    const Vector s = activate(T.activation, T.W * x + T.b);
    switch (T.form) {
    case LayerForm::Affine:
        return s;
    case LayerForm::Sandwich:
        return T.W.transpose() * s;
    case LayerForm::Residual:
        return x + s;
    case LayerForm::ScaledResidual:
        return x + s / T.residual_steps;
    }
    return s;
}

Matrix exact_jacobian(const LayerMap& T, const Vector& x) {
    require_same_dim(x, T.b, "exact_jacobian");
    const Vector z = T.W * x + T.b;
    const Vector d = z.unaryExpr([&](double t) { return activate_derivative(T.activation, t); });
    const Matrix DW = d.asDiagonal() * T.W;
    const auto I = Matrix::Identity(T.dim(), T.dim());
    switch (T.form) {
    case LayerForm::Affine:
        return DW;
    case LayerForm::Sandwich:
        return T.W.transpose() * DW;
    case LayerForm::Residual:
        return I + DW;
    case LayerForm::ScaledResidual:
        return I + DW / T.residual_steps;
    }
    return DW;
}

WeightSpec WeightSpec::uniform_box(std::size_t dim, double scale) {
    WeightSpec s;
    s.kind = Kind::UniformBox;
    s.dim = dim;
    s.scale = scale;
    return s;
}

WeightSpec WeightSpec::inverse_sqrt(std::size_t dim) {
    return uniform_box(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
}

WeightSpec WeightSpec::xavier(std::size_t dim) {
    WeightSpec s;
    s.kind = Kind::XavierUniform;
    s.dim = dim;
    return s;
}

WeightSpec WeightSpec::positive_uniform(std::size_t dim, double lo, double hi) {
    WeightSpec s;
    s.kind = Kind::PositiveUniform;
    s.dim = dim;
    s.lo = lo;
    s.hi = hi;
    return s;
}

WeightSpec WeightSpec::capped() const {
    WeightSpec s = *this;
    s.spectral_cap = true;
    return s;
}

double WeightSpec::box_scale() const {
    switch (kind) {
    case Kind::UniformBox:
        return scale;
    case Kind::XavierUniform:
        return std::sqrt(3.0) / std::sqrt(static_cast<double>(dim));
    case Kind::PositiveUniform:
        return hi;
    }
    return scale;
}

void WeightSpec::validate() const {
    if (dim == 0) {
        throw ConfigError("WeightSpec: dimension must be >= 1");
    }
    if (kind == Kind::UniformBox && !(scale >= 0.0 && std::isfinite(scale))) {
        throw ConfigError("WeightSpec: scale must be finite and nonnegative");
    }
    if (kind == Kind::PositiveUniform && !(lo >= 0.0 && hi >= lo && std::isfinite(hi))) {
        throw ConfigError("WeightSpec: positive uniform requires 0 <= lo <= hi");
    }
}

double operator_norm(const Matrix& W) {
    if (W.size() == 0) {
        return 0.0;
    }
    const Eigen::JacobiSVD<Matrix> svd(W);
    return svd.singularValues()(0);
}

Matrix sample_weights(const WeightSpec& spec, Rng& rng) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.dim);
    double lo = -spec.box_scale();
    double hi = spec.box_scale();
    if (spec.kind == WeightSpec::Kind::PositiveUniform) {
        lo = spec.lo;
        hi = spec.hi;
    }
    Matrix W(n, n);
    if (lo == hi) {
        W.setConstant(lo);
    } else {
        std::uniform_real_distribution<double> entry(lo, hi);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                W(i, j) = entry(rng);
            }
        }
    }
    if (spec.spectral_cap) {
        const double top = operator_norm(W);
        if (top > 1.0) {
            W /= top;
        }
    }
    return W;
}

Matrix sample_weights(const WeightSpec& spec, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0));
    return sample_weights(spec, rng);
}

namespace {

Vector draw_point(const SamplingDomain& domain, Eigen::Index dim, Rng& rng) {
    Vector x(dim);
    if (domain.kind == SamplingDomain::Kind::PositiveCone) {
        std::uniform_real_distribution<double> exponent(std::log(domain.lo), std::log(domain.hi));
        for (auto& c : x) {
            c = std::exp(exponent(rng));
        }
    } else {
        std::uniform_real_distribution<double> coord(domain.lo, domain.hi);
        for (auto& c : x) {
            c = coord(rng);
        }
    }
    return x;
}

void check_trials(const CheckOptions& opts) {
    if (opts.trials == 0) {
        throw ConfigError("property check requires at least one trial");
    }
}

void record(PropertyVerdict& verdict, double tolerance, Witness w) {
    if (w.violation > tolerance && (!verdict.witness || w.violation > verdict.witness->violation)) {
        verdict.passed = false;
        verdict.witness = std::move(w);
    }
}

VectorMap as_map(const LayerMap& T) {
    return [&T](const Vector& x) { return apply_layer(T, x); };
}

bool strictly_positive(const Vector& x) {
    return (x.array() > 0.0).all() && x.allFinite();
}

} // namespace

PropertyVerdict check_order_preserving(const VectorMap& T, Eigen::Index dim, const CheckOptions& opts) {
    check_trials(opts);
    const SamplingDomain domain = opts.domain.value_or(SamplingDomain::positive_cone());
    PropertyVerdict verdict{true, std::nullopt, opts.trials, opts.tolerance, 0};
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        Rng rng = make_rng(opts.seed, trial);
        const Vector a = draw_point(domain, dim, rng);
        const Vector b = draw_point(domain, dim, rng);
        Vector x = a.cwiseMin(b);
        Vector y = a.cwiseMax(b);
        const double violation = (T(x) - T(y)).maxCoeff();
        record(verdict, opts.tolerance, Witness{std::move(x), std::move(y), 0.0, violation, 0.0});
    }
    return verdict;
}

PropertyVerdict check_order_preserving(const LayerMap& T, const CheckOptions& opts) {
    return check_order_preserving(as_map(T), T.dim(), opts);
}

PropertyVerdict check_subhomogeneous(const VectorMap& T, Eigen::Index dim, const CheckOptions& opts) {
    check_trials(opts);
    const SamplingDomain domain = opts.domain.value_or(SamplingDomain::positive_cone());
    PropertyVerdict verdict{true, std::nullopt, opts.trials, opts.tolerance, 0};
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        Rng rng = make_rng(opts.seed, trial);
        Vector x = draw_point(domain, dim, rng);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double lambda = 0.0;
        while (lambda <= 0.0) {
            lambda = unit(rng);
        }
        const double violation = (lambda * T(x) - T(lambda * x)).maxCoeff();
        record(verdict, opts.tolerance, Witness{std::move(x), Vector(), lambda, violation, 0.0});
    }
    return verdict;
}

PropertyVerdict check_subhomogeneous(const LayerMap& T, const CheckOptions& opts) {
    return check_subhomogeneous(as_map(T), T.dim(), opts);
}

PropertyVerdict check_nonexpansive(const VectorMap& T, Eigen::Index dim, const metrics::MetricKind& metric,
                                   const CheckOptions& opts) {
    check_trials(opts);
    if (!metric.is_point_metric()) {
        throw ConfigError("check_nonexpansive: metric must be a point metric");
    }
    const bool cone = metric.needs_positive_cone();
    const SamplingDomain domain = opts.domain.value_or(cone ? SamplingDomain::positive_cone() : SamplingDomain::box(-10.0, 10.0));
    PropertyVerdict verdict{true, std::nullopt, opts.trials, opts.tolerance, 0};
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        Rng rng = make_rng(opts.seed, trial);
        std::size_t attempts = 0;
        while (true) {
            Vector x = draw_point(domain, dim, rng);
            Vector y = draw_point(domain, dim, rng);
            const Vector tx = T(x);
            const Vector ty = T(y);
            bool valid = !cone || (strictly_positive(tx) && strictly_positive(ty));
            double before = 0.0;
            if (valid) {
                before = metrics::point_distance(metric, x, y);
                valid = before > 0.0;
            }
            if (valid) {
                const double after = metrics::point_distance(metric, tx, ty);
                record(verdict, opts.tolerance, Witness{std::move(x), std::move(y), 0.0, after - before, after / before});
                break;
            }
            ++verdict.redraws;
            if (++attempts > opts.retry_cap) {
                throw DomainError("check_nonexpansive: trial " + std::to_string(trial) +
                                  " left the metric domain more than the retry cap allows");
            }
        }
    }
    return verdict;
}

PropertyVerdict check_nonexpansive(const LayerMap& T, const metrics::MetricKind& metric, const CheckOptions& opts) {
    return check_nonexpansive(as_map(T), T.dim(), metric, opts);
}

ScalarCriterionReport check_scalar_criterion_b(double b, std::span<const double> grid) {
    if (grid.empty()) {
        throw ConfigError("check_scalar_criterion_b: empty grid");
    }
    ScalarCriterionReport report;
    report.max_value = -std::numeric_limits<double>::infinity();
    for (double x : grid) {
        if (!(x > 0.0)) {
            throw ConfigError("check_scalar_criterion_b: grid points must be positive");
        }
        const double value = x * (1.0 - sigmoid(x + b));
        if (value > report.max_value) {
            report.max_value = value;
            report.argmax = x;
        }
    }
    report.verdict.trials = grid.size();
    report.verdict.tolerance = 0.0;
    report.verdict.passed = report.max_value < 1.0;
    if (!report.verdict.passed) {
        Witness w;
        w.x = Vector::Constant(1, report.argmax);
        w.violation = report.max_value - 1.0;
        report.verdict.witness = std::move(w);
    }
    return report;
}

} // namespace metricnet::layers
