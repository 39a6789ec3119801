#include "metricnet/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace metricnet::ergodic {

using layers::apply_layer;

namespace {

double max_abs(const Vector& x) {
    return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

// Rescales a homogeneous orbit state to unit max-norm once it drifts far
// from 1, folding the factor into the log-scale.
void renormalize(Vector& x, double& log_scale) {
    const double m = max_abs(x);
    if (m > 1e100 || (m > 0.0 && m < 1e-100)) {
        x /= m;
        log_scale += std::log(m);
    }
}

bool overflowed(const Vector& x) {
    return !x.allFinite() || max_abs(x) > overflow_limit;
}

void check_run_args(const SequenceGenerator& gen, const Vector& x0, std::size_t n, const char* what) {
    if (n == 0) {
        throw ConfigError(std::string(what) + ": n must be >= 1");
    }
    if (x0.size() != gen.dim()) {
        throw DimensionError(std::string(what) + ": x0 has dimension " + std::to_string(x0.size()) +
                             " but the generator produces " + std::to_string(gen.dim()) + "-dimensional maps");
    }
}

std::string describe_weights(const layers::WeightSpec& w) {
    std::ostringstream os;
    switch (w.kind) {
    case layers::WeightSpec::Kind::UniformBox:
        os << "uniform_box(" << w.scale << ")";
        break;
    case layers::WeightSpec::Kind::XavierUniform:
        os << "xavier";
        break;
    case layers::WeightSpec::Kind::PositiveUniform:
        os << "positive_uniform(" << w.lo << ", " << w.hi << ")";
        break;
    }
    if (w.spectral_cap) {
        os << "+spectral_cap";
    }
    return os.str();
}

} // namespace

SequenceGenerator SequenceGenerator::iid(IIDParams params, std::uint64_t seed) {
    params.weights.validate();
    const auto n = static_cast<Eigen::Index>(params.weights.dim);
    if (params.bias.kind == BiasSpec::Kind::Fixed && params.bias.value.size() != n) {
        throw ConfigError("SequenceGenerator: fixed bias dimension must match the weight dimension");
    }
    if (params.bias.kind == BiasSpec::Kind::Uniform && !(params.bias.hi >= params.bias.lo)) {
        throw ConfigError("SequenceGenerator: uniform bias requires lo <= hi");
    }
    SequenceGenerator gen;
    gen.mode_ = Mode::IID;
    gen.seed_ = seed;
    gen.iid_ = std::move(params);
    return gen;
}

SequenceGenerator SequenceGenerator::fixed_cycle(std::vector<LayerMap> cycle) {
    if (cycle.empty()) {
        throw ConfigError("SequenceGenerator: empty cycle");
    }
    for (const auto& m : cycle) {
        if (m.dim() != cycle.front().dim()) {
            throw ConfigError("SequenceGenerator: cycle maps must share one dimension");
        }
    }
    SequenceGenerator gen;
    gen.mode_ = Mode::FixedCycle;
    gen.maps_ = std::move(cycle);
    return gen;
}

SequenceGenerator SequenceGenerator::constant(LayerMap map) {
    return fixed_cycle({std::move(map)});
}

SequenceGenerator SequenceGenerator::markov(LayerMap first, LayerMap second, double switch_prob, std::uint64_t seed) {
    if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) {
        throw ConfigError("SequenceGenerator: switch probability must lie in [0, 1]");
    }
    if (first.dim() != second.dim()) {
        throw ConfigError("SequenceGenerator: Markov maps must share one dimension");
    }
    SequenceGenerator gen;
    gen.mode_ = Mode::Markov;
    gen.seed_ = seed;
    gen.maps_ = {std::move(first), std::move(second)};
    gen.switch_prob_ = switch_prob;
    return gen;
}

SequenceGenerator::Cursor::Cursor(const SequenceGenerator& gen) : gen_(&gen), rng_(make_rng(gen.seed_, 0)) {}

LayerMap SequenceGenerator::Cursor::next() {
    const SequenceGenerator& g = *gen_;
    const std::size_t k = ++index_;
    switch (g.mode_) {
    case Mode::IID: {
        Rng rng = make_rng(g.seed_, k);
        Matrix W = layers::sample_weights(g.iid_.weights, rng);
        Vector b = Vector::Zero(W.rows());
        if (g.iid_.bias.kind == BiasSpec::Kind::Fixed) {
            b = g.iid_.bias.value;
        } else if (g.iid_.bias.kind == BiasSpec::Kind::Uniform && g.iid_.bias.hi > g.iid_.bias.lo) {
            std::uniform_real_distribution<double> entry(g.iid_.bias.lo, g.iid_.bias.hi);
            for (auto& c : b) {
                c = entry(rng);
            }
        } else if (g.iid_.bias.kind == BiasSpec::Kind::Uniform) {
            b.setConstant(g.iid_.bias.lo);
        }
        return LayerMap::make(g.iid_.form, std::move(W), std::move(b), g.iid_.activation);
    }
    case Mode::FixedCycle:
        return g.maps_[(k - 1) % g.maps_.size()];
    case Mode::Markov: {
        if (k > 1) {
            std::bernoulli_distribution flip(g.switch_prob_);
            if (flip(rng_)) {
                markov_second_ = !markov_second_;
            }
        }
        return g.maps_[markov_second_ ? 1 : 0];
    }
    }
    return g.maps_.front();
}

std::vector<LayerMap> SequenceGenerator::realize(std::size_t n) const {
    std::vector<LayerMap> maps;
    maps.reserve(n);
    Cursor c = cursor();
    for (std::size_t k = 0; k < n; ++k) {
        maps.push_back(c.next());
    }
    return maps;
}

Eigen::Index SequenceGenerator::dim() const {
    if (mode_ == Mode::IID) {
        return static_cast<Eigen::Index>(iid_.weights.dim);
    }
    return maps_.front().dim();
}

SequenceGenerator SequenceGenerator::with_seed(std::uint64_t seed) const {
    SequenceGenerator g = *this;
    g.seed_ = seed;
    return g;
}

std::string SequenceGenerator::describe() const {
    std::ostringstream os;
    switch (mode_) {
    case Mode::IID: {
        os << "iid(form=" << layers::to_string(iid_.form) << ", activation=" << layers::to_string(iid_.activation)
           << ", weights=" << describe_weights(iid_.weights) << ", bias=";
        switch (iid_.bias.kind) {
        case BiasSpec::Kind::Zero: os << "zero"; break;
        case BiasSpec::Kind::Fixed: os << "fixed"; break;
        case BiasSpec::Kind::Uniform: os << "uniform(" << iid_.bias.lo << ", " << iid_.bias.hi << ")"; break;
        }
        os << ", dim=" << iid_.weights.dim << ")";
        break;
    }
    case Mode::FixedCycle:
        os << "fixed_cycle(length=" << maps_.size() << ", dim=" << dim() << ")";
        break;
    case Mode::Markov:
        os << "markov(p=" << switch_prob_ << ", dim=" << dim() << ")";
        break;
    }
    return os.str();
}

bool SequenceGenerator::positively_homogeneous() const {
    if (mode_ == Mode::IID) {
        const bool act = iid_.activation == layers::Activation::Identity || iid_.activation == layers::Activation::ReLU;
        const bool form = iid_.form == layers::LayerForm::Affine || iid_.form == layers::LayerForm::Sandwich;
        const bool bias = iid_.bias.kind == BiasSpec::Kind::Zero ||
                          (iid_.bias.kind == BiasSpec::Kind::Fixed && (iid_.bias.value.array() == 0.0).all()) ||
                          (iid_.bias.kind == BiasSpec::Kind::Uniform && iid_.bias.lo == 0.0 && iid_.bias.hi == 0.0);
        return act && form && bias;
    }
    return std::all_of(maps_.begin(), maps_.end(), [](const LayerMap& m) { return m.is_positively_homogeneous(); });
}

Vector Trajectory::point(std::size_t k) const {
    return std::exp(log_scale.at(k)) * points.at(k);
}

Vector compose_append(std::span<const LayerMap> maps, const Vector& x0) {
    Vector x = x0;
    for (const auto& T : maps) {
        x = apply_layer(T, x);
    }
    return x;
}

Trajectory run_append(const SequenceGenerator& gen, const Vector& x0, std::size_t n) {
    check_run_args(gen, x0, n, "run_append");
    const bool homogeneous = gen.positively_homogeneous();
    Trajectory traj;
    traj.order = Order::Append;
    traj.generator = gen.describe();
    traj.seed = gen.seed();
    traj.points.reserve(n + 1);
    traj.log_scale.reserve(n + 1);
    traj.points.push_back(x0);
    traj.log_scale.push_back(0.0);

    auto cursor = gen.cursor();
    Vector x = x0;
    double scale = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        x = apply_layer(cursor.next(), x);
        if (overflowed(x)) {
            traj.overflowed = true;
            break;
        }
        if (homogeneous) {
            renormalize(x, scale);
        }
        traj.points.push_back(x);
        traj.log_scale.push_back(scale);
    }
    return traj;
}

Trajectory run_insert(const SequenceGenerator& gen, const Vector& x0, std::size_t n) {
    check_run_args(gen, x0, n, "run_insert");
    const bool homogeneous = gen.positively_homogeneous();
    const std::vector<LayerMap> maps = gen.realize(n);
    Trajectory traj;
    traj.order = Order::Insert;
    traj.generator = gen.describe();
    traj.seed = gen.seed();
    traj.points.push_back(x0);
    traj.log_scale.push_back(0.0);

    for (std::size_t k = 1; k <= n && !traj.overflowed; ++k) {
        // T_1 T_2 ... T_k x0: the newest map acts first.
        Vector x = x0;
        double scale = 0.0;
        for (std::size_t j = k; j-- > 0;) {
            x = apply_layer(maps[j], x);
            if (overflowed(x)) {
                traj.overflowed = true;
                break;
            }
            if (homogeneous) {
                renormalize(x, scale);
            }
        }
        if (!traj.overflowed) {
            traj.points.push_back(std::move(x));
            traj.log_scale.push_back(scale);
        }
    }
    return traj;
}

std::size_t tail_length(std::size_t series_length) {
    return std::max<std::size_t>(1, (series_length + 9) / 10);
}

double tail_average(std::span<const std::pair<std::size_t, double>> series) {
    if (series.empty()) {
        throw DomainError("tail_average: empty series");
    }
    const std::size_t count = tail_length(series.size());
    double sum = 0.0;
    for (std::size_t i = series.size() - count; i < series.size(); ++i) {
        sum += series[i].second;
    }
    return sum / static_cast<double>(count);
}

namespace {

void finish_estimate(ExponentEstimate& est) {
    if (est.series.empty()) {
        throw DomainError("rate estimate: trajectory has no usable steps");
    }
    est.lambda = tail_average(est.series);
    const std::size_t count = tail_length(est.series.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = est.series.size() - count; i < est.series.size(); ++i) {
        lo = std::min(lo, est.series[i].second);
        hi = std::max(hi, est.series[i].second);
    }
    est.half_width = 0.5 * (hi - lo);
}

// Lowest index attaining max |x_i|, and whether another index ties it.
std::pair<Eigen::Index, bool> leading_index(const Vector& x) {
    Eigen::Index best = 0;
    bool tie = false;
    for (Eigen::Index i = 1; i < x.size(); ++i) {
        const double a = std::abs(x[i]);
        const double b = std::abs(x[best]);
        if (a > b) {
            best = i;
            tie = false;
        } else if (a == b) {
            tie = true;
        }
    }
    return {best, tie};
}

} // namespace

ExponentEstimate subadditive_rate(const Trajectory& traj, const metrics::MetricKind& metric, RateScale scale) {
    ExponentEstimate est;
    est.overflowed = traj.overflowed;
    const Vector& x0 = traj.points.front();
    for (std::size_t k = 1; k <= traj.steps(); ++k) {
        const auto n = static_cast<double>(k);
        double value = 0.0;
        if (traj.log_scale[k] == 0.0) {
            const double d = metrics::point_distance(metric, x0, traj.points[k]);
            if (scale == RateScale::Log && !(d > 0.0)) {
                throw DomainError("subadditive_rate: zero distance at step " + std::to_string(k) + " on the log scale");
            }
            value = scale == RateScale::Linear ? d / n : std::log(d) / n;
        } else {
            const double log_d = metrics::log_point_distance_scaled(metric, x0, traj.log_scale[k], traj.points[k]);
            if (scale == RateScale::Log && !std::isfinite(log_d)) {
                throw DomainError("subadditive_rate: zero distance at step " + std::to_string(k) + " on the log scale");
            }
            value = scale == RateScale::Linear ? std::exp(log_d) / n : log_d / n;
            if (!std::isfinite(value)) {
                throw DomainError("subadditive_rate: distance not representable at step " + std::to_string(k) +
                                  "; use the log scale");
            }
        }
        est.series.emplace_back(k, value);
    }
    finish_estimate(est);
    return est;
}

ExponentEstimate top_exponent(const Trajectory& traj) {
    const std::size_t steps = traj.steps();
    if (steps == 0) {
        throw DomainError("top_exponent: trajectory has no steps");
    }
    if (max_abs(traj.points.back()) == 0.0) {
        throw DomainError("top_exponent: final state is zero");
    }
    ExponentEstimate est;
    est.overflowed = traj.overflowed;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double m = max_abs(traj.points[k]);
        if (m > 0.0) {
            est.series.emplace_back(k, (traj.log_scale[k] + std::log(m)) / static_cast<double>(k));
        }
    }
    finish_estimate(est);

    const auto [leader, tie] = leading_index(traj.points.back());
    est.tie = tie;
    bool stable = true;
    for (std::size_t k = steps + 1 - tail_length(steps); k <= steps; ++k) {
        if (leading_index(traj.points[k]).first != leader) {
            stable = false;
            break;
        }
    }
    if (stable) {
        est.leading_coordinate = static_cast<std::size_t>(leader);
    }
    return est;
}

DriftEstimate drift(const Trajectory& traj) {
    const std::size_t steps = traj.steps();
    if (steps == 0) {
        throw DomainError("drift: trajectory has no steps");
    }
    DriftEstimate est;
    est.overflowed = traj.overflowed;
    est.series.reserve(steps);
    std::vector<double> norms;
    norms.reserve(steps);
    for (std::size_t k = 1; k <= steps; ++k) {
        Vector v = traj.point(k) / static_cast<double>(k);
        norms.push_back(v.norm());
        est.series.emplace_back(k, std::move(v));
    }
    est.v = est.series.back().second;
    est.norm = est.v.norm();

    const std::size_t count = tail_length(norms.size());
    if (count > 1) {
        double mean = 0.0;
        for (std::size_t i = norms.size() - count; i < norms.size(); ++i) {
            mean += norms[i];
        }
        mean /= static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = norms.size() - count; i < norms.size(); ++i) {
            ss += (norms[i] - mean) * (norms[i] - mean);
        }
        est.tail_std = std::sqrt(ss / static_cast<double>(count - 1));
    }
    return est;
}

ExpansionEstimate lipschitz_expansion_rate(const SequenceGenerator& gen, const metrics::PairSample& pairs, std::size_t n) {
    if (n == 0) {
        throw ConfigError("lipschitz_expansion_rate: n must be >= 1");
    }
    if (pairs.empty()) {
        throw ConfigError("lipschitz_expansion_rate: empty pair sample");
    }
    if (pairs.dim() != gen.dim()) {
        throw DimensionError("lipschitz_expansion_rate: pair dimension does not match the generator");
    }
    const Vector& lower = pairs.lower();
    const Vector& upper = pairs.upper();
    auto inside = [&](const Vector& p) {
        return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
    };

    std::vector<Vector> xs;
    std::vector<Vector> ys;
    std::vector<double> initial;
    for (const auto& [x, y] : pairs.pairs()) {
        xs.push_back(x);
        ys.push_back(y);
        initial.push_back((x - y).norm());
    }

    ExpansionEstimate result;
    auto cursor = gen.cursor();
    for (std::size_t k = 1; k <= n; ++k) {
        const LayerMap T = cursor.next();
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_index = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xs[i] = apply_layer(T, xs[i]);
            ys[i] = apply_layer(T, ys[i]);
            if (!inside(xs[i]) || !inside(ys[i])) {
                throw DomainError("lipschitz_expansion_rate: map " + std::to_string(k) + " sends pair " +
                                  std::to_string(i) + " outside the sampling box");
            }
            const double d = (xs[i] - ys[i]).norm();
            if (d < 1e-300) {
                continue;
            }
            const double log_ratio = std::log(d) - std::log(initial[i]);
            if (log_ratio > best) {
                best = log_ratio;
                best_index = i;
            }
        }
        if (!std::isfinite(best)) {
            throw DomainError("lipschitz_expansion_rate: every pair collapsed by step " + std::to_string(k));
        }
        result.rate.series.emplace_back(k, best / static_cast<double>(k));
        result.max_pair_index = best_index;
    }
    finish_estimate(result.rate);
    result.max_pair_x = pairs.pairs()[result.max_pair_index].first;
    result.max_pair_y = pairs.pairs()[result.max_pair_index].second;
    return result;
}

ExponentEstimate jacobian_distortion_rate(const SequenceGenerator& gen, std::size_t n, std::span<const Vector> points,
                                          const metrics::JacobianFn& decision_jacobian) {
    if (n == 0) {
        throw ConfigError("jacobian_distortion_rate: n must be >= 1");
    }
    if (points.empty()) {
        throw ConfigError("jacobian_distortion_rate: no sample points");
    }
    std::vector<Vector> xs(points.begin(), points.end());
    for (const auto& x : xs) {
        if (x.size() != gen.dim()) {
            throw DimensionError("jacobian_distortion_rate: point dimension does not match the generator");
        }
    }
    std::vector<double> log_det(xs.size(), 0.0);

    ExponentEstimate est;
    auto cursor = gen.cursor();
    for (std::size_t k = 1; k <= n; ++k) {
        const LayerMap T = cursor.next();
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            try {
                log_det[i] += metrics::log_abs_det(layers::exact_jacobian(T, xs[i]));
            } catch (const DomainError&) {
                throw DomainError("jacobian_distortion_rate: singular Jacobian at step " + std::to_string(k) +
                                  " for point " + std::to_string(i));
            }
            xs[i] = apply_layer(T, xs[i]);
            double total = log_det[i];
            if (decision_jacobian) {
                total += metrics::log_abs_det(decision_jacobian(xs[i]));
            }
            lo = std::min(lo, total);
            hi = std::max(hi, total);
        }
        est.series.emplace_back(k, (hi - lo) / static_cast<double>(k));
    }
    finish_estimate(est);
    return est;
}

} // namespace metricnet::ergodic
