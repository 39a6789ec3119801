#include "metricnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "metricnet/random.hpp"

namespace metricnet::metrics {

namespace {

void require_positive(const Vector& x, const char* what) {
    if (x.size() == 0) {
        throw DomainError(std::string(what) + ": empty point");
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !std::isfinite(x[i])) {
            throw DomainError(std::string(what) + ": coordinate " + std::to_string(i) + " is not a finite positive number");
        }
    }
}

// Largest ratio max_i a_i / b_i.
double max_ratio(const Vector& a, const Vector& b) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        best = std::max(best, a[i] / b[i]);
    }
    return best;
}

void check_finite_distance(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw DomainError(std::string(what) + ": non-finite result");
    }
}

} // namespace

PositivePoint::PositivePoint(Vector coords) : coords_(std::move(coords)) {
    require_positive(coords_, "PositivePoint");
}

NormSpec NormSpec::pnorm(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) {
        throw ConfigError("NormSpec: p-norm requires finite p >= 1");
    }
    return {Kind::PNorm, p};
}

double norm(const Vector& x, const NormSpec& spec) {
    switch (spec.kind) {
    case NormSpec::Kind::Euclidean:
        return x.norm();
    case NormSpec::Kind::Max:
        return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
    case NormSpec::Kind::PNorm: {
        double sum = 0.0;
        for (double c : x) {
            sum += std::pow(std::abs(c), spec.p);
        }
        return std::pow(sum, 1.0 / spec.p);
    }
    }
    return 0.0;
}

double thompson_distance(const PositivePoint& x, const PositivePoint& y) {
    require_same_dim(x.coords(), y.coords(), "thompson_distance");
    const double ratio = std::max(max_ratio(x.coords(), y.coords()), max_ratio(y.coords(), x.coords()));
    const double d = std::log(ratio);
    check_finite_distance(d, "thompson_distance");
    return d;
}

double hilbert_distance(const PositivePoint& x, const PositivePoint& y) {
    require_same_dim(x.coords(), y.coords(), "hilbert_distance");
    const double product = max_ratio(x.coords(), y.coords()) * max_ratio(y.coords(), x.coords());
    check_finite_distance(std::log(product), "hilbert_distance");
    // Points on a common ray produce products within a few ulps of 1 once the
    // scaled coordinates are rounded; that is the rounding floor, not distance.
    if (product - 1.0 <= 16.0 * std::numeric_limits<double>::epsilon()) {
        return 0.0;
    }
    return std::log(product);
}

double norm_distance(const Vector& x, const Vector& y, const NormSpec& spec) {
    require_same_dim(x, y, "norm_distance");
    return norm(x - y, spec);
}

double point_distance(const MetricKind& kind, const Vector& x, const Vector& y) {
    switch (kind.tag) {
    case MetricKind::Tag::Thompson:
        return thompson_distance(PositivePoint(x), PositivePoint(y));
    case MetricKind::Tag::Hilbert:
        return hilbert_distance(PositivePoint(x), PositivePoint(y));
    case MetricKind::Tag::Norm:
        return norm_distance(x, y, kind.norm);
    default:
        throw ConfigError("point_distance: metric kind is not a point metric");
    }
}

double log_point_distance_scaled(const MetricKind& kind, const Vector& x0, double log_scale, const Vector& u) {
    require_same_dim(x0, u, "log_point_distance_scaled");
    switch (kind.tag) {
    case MetricKind::Tag::Norm: {
        if (log_scale > 0.0) {
            const Vector diff = u - std::exp(-log_scale) * x0;
            return log_scale + std::log(norm(diff, kind.norm));
        }
        return std::log(norm(x0 - std::exp(log_scale) * u, kind.norm));
    }
    case MetricKind::Tag::Thompson: {
        require_positive(x0, "log_point_distance_scaled");
        require_positive(u, "log_point_distance_scaled");
        double d = 0.0;
        for (Eigen::Index i = 0; i < x0.size(); ++i) {
            d = std::max(d, std::abs(std::log(x0[i]) - log_scale - std::log(u[i])));
        }
        return std::log(d);
    }
    case MetricKind::Tag::Hilbert: {
        require_positive(x0, "log_point_distance_scaled");
        require_positive(u, "log_point_distance_scaled");
        return std::log(hilbert_distance(PositivePoint(x0), PositivePoint(u)));
    }
    default:
        throw ConfigError("log_point_distance_scaled: metric kind is not a point metric");
    }
}

PairSample::PairSample(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    require_same_dim(lower_, upper_, "PairSample");
    if (lower_.size() == 0) {
        throw ConfigError("PairSample: zero-dimensional box");
    }
    if ((upper_.array() < lower_.array()).any()) {
        throw ConfigError("PairSample: upper bound below lower bound");
    }
}

bool PairSample::add(Vector x, Vector y) {
    require_same_dim(x, lower_, "PairSample::add");
    require_same_dim(y, lower_, "PairSample::add");
    for (const Vector* p : {&x, &y}) {
        if ((p->array() < lower_.array()).any() || (p->array() > upper_.array()).any()) {
            throw DomainError("PairSample::add: point outside the sampling box");
        }
    }
    if ((x - y).norm() < min_separation) {
        return false;
    }
    pairs_.emplace_back(std::move(x), std::move(y));
    return true;
}

namespace {

Vector uniform_in_box(const Vector& lower, const Vector& upper, Rng& rng) {
    Vector x(lower.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x[i] = lower[i] + unit(rng) * (upper[i] - lower[i]);
    }
    return x;
}

} // namespace

PairSample PairSample::uniform(Vector lower, Vector upper, std::size_t count, std::uint64_t seed) {
    PairSample sample(std::move(lower), std::move(upper));
    Rng rng(derive_seed(seed, 0));
    while (sample.size() < count) {
        Vector x = uniform_in_box(sample.lower_, sample.upper_, rng);
        Vector y = uniform_in_box(sample.lower_, sample.upper_, rng);
        sample.add(std::move(x), std::move(y));
    }
    return sample;
}

PairSample PairSample::near_diagonal(Vector lower, Vector upper, std::size_t count, double radius, std::uint64_t seed) {
    if (!(radius > 0.0)) {
        throw ConfigError("PairSample::near_diagonal: radius must be positive");
    }
    PairSample sample(std::move(lower), std::move(upper));
    Rng rng(derive_seed(seed, 1));
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (sample.size() < count) {
        Vector x = uniform_in_box(sample.lower_, sample.upper_, rng);
        Vector dir(x.size());
        for (auto& c : dir) {
            c = gauss(rng);
        }
        if (dir.norm() == 0.0) {
            continue;
        }
        dir.normalize();
        const double r = radius * std::pow(10.0, -3.0 * unit(rng));
        Vector y = (x + r * dir).cwiseMax(sample.lower_).cwiseMin(sample.upper_);
        sample.add(std::move(x), std::move(y));
    }
    return sample;
}

double empirical_distance_metric_D(const DistanceFn& d1, const DistanceFn& d2, const PairSample& sample) {
    if (sample.empty()) {
        throw ConfigError("empirical_distance_metric_D: empty pair sample");
    }
    double worst = 0.0;
    for (const auto& [x, y] : sample.pairs()) {
        const double a = d1(x, y);
        const double b = d2(x, y);
        if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
            throw DomainError("empirical_distance_metric_D: distance is zero or non-finite on a sampled pair");
        }
        worst = std::max({worst, b / a, a / b});
    }
    return std::log(worst);
}

double distortion_distance_1d(const ScalarFn& fprime, const ScalarFn& gprime, std::span<const double> grid) {
    if (grid.empty()) {
        throw ConfigError("distortion_distance_1d: empty grid");
    }
    // |log(r(x)/r(y))| with r = g'/f' is maximized by the extremes of log|r|.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double t : grid) {
        const double f = std::abs(fprime(t));
        const double g = std::abs(gprime(t));
        if (!(f > 0.0) || !(g > 0.0) || !std::isfinite(f) || !std::isfinite(g)) {
            throw DomainError("distortion_distance_1d: zero or non-finite derivative at t = " + std::to_string(t));
        }
        const double l = std::log(g) - std::log(f);
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    return hi - lo;
}

double log_abs_det(const Matrix& jacobian) {
    if (jacobian.rows() != jacobian.cols() || jacobian.rows() == 0) {
        throw DomainError("log_abs_det: Jacobian must be a nonempty square matrix");
    }
    const Eigen::PartialPivLU<Matrix> lu(jacobian);
    const Matrix& packed = lu.matrixLU();
    double total = 0.0;
    for (Eigen::Index i = 0; i < packed.rows(); ++i) {
        const double pivot = std::abs(packed(i, i));
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
            throw DomainError("log_abs_det: singular Jacobian");
        }
        total += std::log(pivot);
    }
    return total;
}

double jacobian_distortion_distance(const JacobianFn& jf, const JacobianFn& jg, std::span<const Vector> points) {
    if (points.empty()) {
        throw ConfigError("jacobian_distortion_distance: no sample points");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Vector& x : points) {
        const double l = log_abs_det(jf(x)) - log_abs_det(jg(x));
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    return hi - lo;
}

Vector norm_gradient(const Vector& w, const NormSpec& spec) {
    switch (spec.kind) {
    case NormSpec::Kind::Euclidean:
        return w / w.norm();
    case NormSpec::Kind::PNorm: {
        if (!(spec.p > 1.0)) {
            throw ConfigError("norm_gradient: the 1-norm is not differentiable on its unit sphere");
        }
        const double scale = std::pow(norm(w, spec), spec.p - 1.0);
        Vector g(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double sign = w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0);
            g[i] = sign * std::pow(std::abs(w[i]), spec.p - 1.0) / scale;
        }
        return g;
    }
    case NormSpec::Kind::Max:
        break;
    }
    throw ConfigError("norm_gradient: the max norm is not C^2 on its unit sphere");
}

MetricFunctional MetricFunctional::smooth_norm_directional(Vector w, NormSpec spec) {
    if (spec.kind == NormSpec::Kind::Max || (spec.kind == NormSpec::Kind::PNorm && !(spec.p > 1.0))) {
        throw ConfigError("smooth_norm_directional: norm must be C^2 on the unit sphere");
    }
    if (w.size() == 0 || std::abs(norm(w, spec) - 1.0) > 1e-12) {
        throw ConfigError("smooth_norm_directional: direction must have unit norm");
    }
    return MetricFunctional(SmoothNormDirectional{std::move(w), spec});
}

MetricFunctional MetricFunctional::thompson_horo(Vector u, Vector v) {
    require_same_dim(u, v, "thompson_horo");
    if (u.size() == 0) {
        throw ConfigError("thompson_horo: empty weights");
    }
    double top = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] < 0.0 || v[i] < 0.0) {
            throw ConfigError("thompson_horo: weights must be nonnegative");
        }
        if (u[i] * v[i] != 0.0) {
            throw ConfigError("thompson_horo: u and v must have disjoint supports");
        }
        top = std::max({top, u[i], v[i]});
    }
    if (std::abs(top - 1.0) > 1e-12) {
        throw ConfigError("thompson_horo: max over components of max{u, v} must equal 1");
    }
    return MetricFunctional(ThompsonHoro{std::move(u), std::move(v)});
}

double eval_metric_functional(const MetricFunctional& h, const Vector& x) {
    if (const auto* s = std::get_if<MetricFunctional::SmoothNormDirectional>(&h.kind())) {
        require_same_dim(s->w, x, "eval_metric_functional");
        return -x.dot(norm_gradient(s->w, s->norm));
    }
    const auto& t = std::get<MetricFunctional::ThompsonHoro>(h.kind());
    require_same_dim(t.u, x, "eval_metric_functional");
    require_positive(x, "eval_metric_functional");
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (t.u[i] > 0.0) {
            best = std::max(best, std::log(x[i] * t.u[i]));
        }
        if (t.v[i] > 0.0) {
            best = std::max(best, std::log(t.v[i] / x[i]));
        }
    }
    return best;
}

std::vector<double> empirical_horofunction(const MetricKind& kind, const Vector& basepoint,
                                           std::span<const Vector> y_sequence, const Vector& x) {
    std::vector<double> values;
    values.reserve(y_sequence.size());
    for (const Vector& y : y_sequence) {
        values.push_back(point_distance(kind, x, y) - point_distance(kind, basepoint, y));
    }
    return values;
}

} // namespace metricnet::metrics
