#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "metricnet/layers.hpp"

using namespace metricnet;
using namespace metricnet::layers;
using metricnet::metrics::MetricKind;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

LayerMap scalar_sigmoid(double a, double b) {
    return LayerMap::make(LayerForm::Affine, Matrix::Constant(1, 1, a), Vector::Constant(1, b), Activation::Sigmoid);
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Power iteration on W^T W; independent of the SVD used by sample_weights.
double power_iteration_top_singular_value(const Matrix& W) {
    Vector v = Vector::Ones(W.cols()).normalized();
    double sigma = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vector next = W.transpose() * (W * v);
        sigma = std::sqrt(next.norm());
        v = next.normalized();
    }
    return sigma;
}

const std::vector<Activation> all_activations = {Activation::ReLU, Activation::TanH, Activation::Sigmoid,
                                                 Activation::SiLU, Activation::HardSigmoid, Activation::Identity};

} // namespace

TEST_CASE("activations agree with their scalar formulas") {
    for (double t : {-3.0, -0.5, 0.0, 0.25, 0.9, 4.0}) {
        CHECK(activate(Activation::ReLU, t) == std::max(0.0, t));
        CHECK(activate(Activation::TanH, t) == std::tanh(t));
        CHECK(activate(Activation::Sigmoid, t) == doctest::Approx(1.0 / (1.0 + std::exp(-t))).epsilon(1e-15));
        CHECK(activate(Activation::SiLU, t) == doctest::Approx(t / (1.0 + std::exp(-t))).epsilon(1e-15));
        CHECK(activate(Activation::HardSigmoid, t) == std::min(1.0, std::max(0.0, t)));
        CHECK(activate(Activation::Identity, t) == t);
    }
    CHECK(activation_from_string("TanH") == Activation::TanH);
    CHECK(activation_from_string("swish") == Activation::SiLU);
    CHECK_THROWS_AS(activation_from_string("gelu"), ConfigError);
}

TEST_CASE("activations are 1-Lipschitz except SiLU") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (Activation act : all_activations) {
        double worst = 0.0;
        for (int trial = 0; trial < 100000; ++trial) {
            const double s = u(rng);
            const double t = u(rng);
            worst = std::max(worst, std::abs(activate(act, s) - activate(act, t)) - std::abs(s - t));
        }
        if (act == Activation::SiLU) {
            // sup |silu'| is about 1.0998 (near t = 2.4): not 1-Lipschitz.
            CHECK(worst > 1e-3);
        } else {
            CHECK(worst <= 1e-12);
        }
    }
    CHECK(activate_derivative(Activation::SiLU, 2.4) == doctest::Approx(1.0998).epsilon(1e-3));
}

TEST_CASE("monotone norms: |x_i| <= |y_i| implies ||x|| <= ||y||") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_real_distribution<double> shrink(0.0, 1.0);
    for (const auto spec : {metrics::NormSpec::euclidean(), metrics::NormSpec::pnorm(1.0), metrics::NormSpec::pnorm(3.0)}) {
        for (int trial = 0; trial < 10000; ++trial) {
            Vector y(4);
            for (auto& c : y) c = u(rng);
            Vector x = y;
            for (auto& c : x) c *= shrink(rng) * (shrink(rng) < 0.5 ? -1.0 : 1.0);
            REQUIRE(metrics::norm(x, spec) <= metrics::norm(y, spec));
        }
    }
}

TEST_CASE("apply_layer examples") {
    const Vector x = vec({-1.0, 2.0});
    const Matrix I = Matrix::Identity(2, 2);
    const Vector zero = Vector::Zero(2);
    CHECK(apply_layer(LayerMap::make(LayerForm::Affine, I, zero, Activation::Identity), x) == x);
    CHECK(apply_layer(LayerMap::make(LayerForm::Affine, I, zero, Activation::ReLU), x) == vec({0.0, 2.0}));
    const Vector y = apply_layer(LayerMap::make(LayerForm::Affine, Matrix::Zero(2, 2), vec({1.0, -1.0}), Activation::TanH), x);
    CHECK(y[0] == doctest::Approx(0.761594).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(-0.761594).epsilon(1e-6));

    const Matrix W = mat2(0.5, -1.0, 2.0, 0.25);
    const Vector b = vec({0.1, -0.2});
    const Vector s = (W * x + b).array().tanh();
    CHECK(apply_layer(LayerMap::make(LayerForm::Sandwich, W, b, Activation::TanH), x).isApprox(W.transpose() * s));
    CHECK(apply_layer(LayerMap::make(LayerForm::Residual, W, b, Activation::TanH), x).isApprox(x + s));
    CHECK(apply_layer(LayerMap::make(LayerForm::ScaledResidual, W, b, Activation::TanH, 4.0), x).isApprox(x + s / 4.0));

    CHECK_THROWS_AS(apply_layer(LayerMap::make(LayerForm::Affine, I, zero, Activation::ReLU), vec({1.0})), DimensionError);
    CHECK_THROWS_AS(LayerMap::make(LayerForm::Affine, Matrix::Zero(2, 3), zero, Activation::ReLU), ConfigError);
    CHECK_THROWS_AS(LayerMap::make(LayerForm::Affine, I, vec({1.0}), Activation::ReLU), ConfigError);
    CHECK_THROWS_AS(LayerMap::make(LayerForm::ScaledResidual, I, zero, Activation::ReLU, 0.5), ConfigError);
}

TEST_CASE("scaled residual layers converge to the identity like C/n") {
    std::mt19937_64 rng(9);
    const Matrix W = sample_weights(WeightSpec::uniform_box(3, 1.0), 5);
    const Vector b = vec({0.3, -0.1, 0.2});
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Vector> xs;
    double C = 0.0;
    for (int i = 0; i < 200; ++i) {
        Vector x(3);
        for (auto& c : x) c = u(rng);
        C = std::max(C, activate(Activation::TanH, W * x + b).norm());
        xs.push_back(x);
    }
    for (double n : {1.0, 10.0, 1e3, 1e6}) {
        const auto T = LayerMap::make(LayerForm::ScaledResidual, W, b, Activation::TanH, n);
        for (const auto& x : xs) {
            REQUIRE((apply_layer(T, x) - x).norm() <= C / n + 1e-12);
        }
    }
}

TEST_CASE("sample_weights") {
    SUBCASE("box bounds") {
        const Matrix W = sample_weights(WeightSpec::inverse_sqrt(4), 1);
        CHECK(W.cwiseAbs().maxCoeff() <= 0.5);
        const Matrix X = sample_weights(WeightSpec::xavier(3), 2);
        CHECK(X.cwiseAbs().maxCoeff() <= 1.0);
        CHECK(WeightSpec::xavier(3).box_scale() == doctest::Approx(1.0).epsilon(1e-15));
        const Matrix P = sample_weights(WeightSpec::positive_uniform(3, 0.5, 2.0), 3);
        CHECK(P.minCoeff() >= 0.5);
        CHECK(P.maxCoeff() <= 2.0);
        CHECK(sample_weights(WeightSpec::uniform_box(2, 0.0), 4) == Matrix::Zero(2, 2));
    }
    SUBCASE("spectral cap") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Matrix W = sample_weights(WeightSpec::uniform_box(5, 10.0).capped(), seed);
            CHECK(power_iteration_top_singular_value(W) <= 1.0 + 1e-9);
        }
    }
    SUBCASE("determinism") {
        const auto spec = WeightSpec::uniform_box(4, 2.0).capped();
        CHECK(sample_weights(spec, 42) == sample_weights(spec, 42));
        CHECK(sample_weights(spec, 42) != sample_weights(spec, 43));
    }
    SUBCASE("invalid parameters") {
        CHECK_THROWS_AS(sample_weights(WeightSpec::uniform_box(2, -1.0), 0), ConfigError);
        CHECK_THROWS_AS(sample_weights(WeightSpec::positive_uniform(2, 2.0, 1.0), 0), ConfigError);
        CHECK_THROWS_AS(sample_weights(WeightSpec::positive_uniform(2, -1.0, 1.0), 0), ConfigError);
        CHECK_THROWS_AS(sample_weights(WeightSpec::uniform_box(0, 1.0), 0), ConfigError);
    }
}

TEST_CASE("check_order_preserving") {
    const Matrix Wpos = sample_weights(WeightSpec::positive_uniform(3, 0.0, 1.0), 11);
    const auto relu = LayerMap::make(LayerForm::Affine, Wpos, vec({0.0, 0.5, 1.0}), Activation::ReLU);
    CHECK(check_order_preserving(relu, {.trials = 10000, .seed = 1}).passed);

    const auto sig = LayerMap::make(LayerForm::Affine, Wpos, Vector::Constant(3, -5.0), Activation::Sigmoid);
    CHECK(check_order_preserving(sig, {.trials = 10000, .seed = 2}).passed);

    // Raising y's second coordinate lowers (Ty)_1.
    const auto shear = LayerMap::make(LayerForm::Affine, mat2(1.0, -2.0, 0.0, 1.0), Vector::Zero(2), Activation::Identity);
    const Vector x = vec({1.0, 1.0});
    const Vector y = vec({1.0, 2.0});
    CHECK(apply_layer(shear, x)[0] > apply_layer(shear, y)[0]);
    const auto verdict = check_order_preserving(shear, {.trials = 1000, .seed = 3});
    REQUIRE_FALSE(verdict.passed);
    REQUIRE(verdict.witness.has_value());
    const auto& w = *verdict.witness;
    CHECK((w.x.array() <= w.y.array()).all());
    CHECK(w.violation > verdict.tolerance);
    CHECK((apply_layer(shear, w.x) - apply_layer(shear, w.y)).maxCoeff() == doctest::Approx(w.violation));
}

TEST_CASE("check_subhomogeneous") {
    std::mt19937_64 rng(12);
    for (int draw = 0; draw < 20; ++draw) {
        const Matrix W = sample_weights(WeightSpec::uniform_box(3, 2.0), 100 + draw);
        const auto relu = LayerMap::make(LayerForm::Affine, W, vec({0.0, 0.1, 3.0}), Activation::ReLU);
        REQUIRE(check_subhomogeneous(relu, {.trials = 2000, .seed = static_cast<std::uint64_t>(draw)}).passed);
    }
    CHECK(check_subhomogeneous(scalar_sigmoid(1.0, 0.0), {.trials = 10000, .seed = 4}).passed);

    // Grid search oracle: lambda sigma(x - 3) exceeds sigma(lambda x - 3) somewhere.
    double oracle = -1.0;
    for (int i = 1; i <= 2000; ++i) {
        const double x = 0.01 * i;
        for (int j = 1; j < 100; ++j) {
            const double lam = 0.01 * j;
            oracle = std::max(oracle, lam * sigmoid(x - 3.0) - sigmoid(lam * x - 3.0));
        }
    }
    REQUIRE(oracle > 1e-3);
    const auto verdict = check_subhomogeneous(scalar_sigmoid(1.0, -3.0), {.trials = 10000, .seed = 5});
    REQUIRE_FALSE(verdict.passed);
    const auto& w = *verdict.witness;
    CHECK(w.lambda > 0.0);
    CHECK(w.lambda < 1.0);
    CHECK(w.violation > 1e-9);
    CHECK(w.violation <= oracle + 1e-3);
}

TEST_CASE("check_nonexpansive") {
    SUBCASE("thompson, positive sigmoid layer, b > -2") {
        const Matrix W = sample_weights(WeightSpec::positive_uniform(3, 0.0, 1.0), 21);
        const auto T = LayerMap::make(LayerForm::Affine, W, vec({-1.9, 0.0, 2.0}), Activation::Sigmoid);
        const auto v = check_nonexpansive(T, MetricKind::thompson(), {.trials = 10000, .seed = 6});
        CHECK(v.passed);
        CHECK(v.trials == 10000);
    }
    SUBCASE("euclidean, spectral-capped sandwich tanh") {
        const Matrix W = sample_weights(WeightSpec::uniform_box(4, 3.0).capped(), 22);
        const auto T = LayerMap::make(LayerForm::Sandwich, W, vec({1.0, -2.0, 0.5, 0.0}), Activation::TanH);
        CHECK(check_nonexpansive(T, MetricKind::euclidean(), {.trials = 10000, .seed = 7}).passed);
    }
    SUBCASE("linear expansion by two") {
        const auto T = LayerMap::make(LayerForm::Affine, 2.0 * Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity);
        const auto v = check_nonexpansive(T, MetricKind::euclidean(), {.trials = 100, .seed = 8});
        REQUIRE_FALSE(v.passed);
        CHECK(v.witness->ratio == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("points leaving the cone are redrawn, then reported") {
        const auto relu = LayerMap::make(LayerForm::Affine, -Matrix::Identity(2, 2), Vector::Zero(2), Activation::ReLU);
        CHECK_THROWS_AS(check_nonexpansive(relu, MetricKind::thompson(), {.trials = 5, .seed = 9}), DomainError);
    }
}

TEST_CASE("check_scalar_criterion_b") {
    std::vector<double> grid;
    for (int i = 0; i < 40000; ++i) grid.push_back(0.0005 + 0.001 * i);

    const auto pass = check_scalar_criterion_b(0.0, grid);
    CHECK(pass.verdict.passed);
    CHECK(pass.max_value < 1.0);

    // Dense maximization near x = 2 for the boundary case.
    double oracle = 0.0;
    for (int i = -100000; i <= 100000; ++i) {
        const double x = 2.0 + 1e-5 * i + 5e-6;
        oracle = std::max(oracle, x * (1.0 - sigmoid(x - 2.0)));
    }
    CHECK(oracle < 1.0);
    CHECK(oracle > 1.0 - 1e-3);
    const auto boundary = check_scalar_criterion_b(-2.0, grid);
    CHECK(boundary.verdict.passed);
    CHECK(boundary.max_value == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(boundary.argmax == doctest::Approx(2.0).epsilon(1e-2));

    const auto fail = check_scalar_criterion_b(-4.0, grid);
    CHECK_FALSE(fail.verdict.passed);
    REQUIRE(fail.verdict.witness.has_value());
    CHECK(fail.max_value > 1.0);
    CHECK(fail.verdict.witness->x[0] == fail.argmax);
}

TEST_CASE("order preservation and subhomogeneity survive composition") {
    const double tau = 1e-9;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto A = LayerMap::make(LayerForm::Affine, sample_weights(WeightSpec::positive_uniform(3, 0.0, 1.0), seed),
                                      Vector::Constant(3, -1.5), Activation::Sigmoid);
        const auto B = LayerMap::make(LayerForm::Affine, sample_weights(WeightSpec::positive_uniform(3, 0.0, 2.0), seed + 50),
                                      Vector::Constant(3, 0.5), Activation::ReLU);
        const CheckOptions opts{.trials = 2000, .seed = seed, .tolerance = tau};
        REQUIRE(check_order_preserving(A, opts).passed);
        REQUIRE(check_subhomogeneous(A, opts).passed);
        REQUIRE(check_order_preserving(B, opts).passed);
        REQUIRE(check_subhomogeneous(B, opts).passed);

        const VectorMap BA = [&](const Vector& x) { return apply_layer(B, apply_layer(A, x)); };
        const CheckOptions loose{.trials = 2000, .seed = seed + 1000, .tolerance = 2 * tau};
        CHECK(check_order_preserving(BA, 3, loose).passed);
        CHECK(check_subhomogeneous(BA, 3, loose).passed);
    }
}
