#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "metricnet/metrics.hpp"

using namespace metricnet;
using namespace metricnet::metrics;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        v[i++] = x;
    }
    return v;
}

Vector random_positive(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> e(std::log(1e-3), std::log(1e3));
    Vector v(n);
    for (auto& c : v) c = std::exp(e(rng));
    return v;
}

Vector random_box(std::mt19937_64& rng, Eigen::Index n, double r) {
    std::uniform_real_distribution<double> u(-r, r);
    Vector v(n);
    for (auto& c : v) c = u(rng);
    return v;
}

} // namespace

TEST_CASE("thompson_distance examples") {
    CHECK(thompson_distance(PositivePoint(vec({1, 1})), PositivePoint(vec({1, 1}))) == 0.0);
    CHECK(thompson_distance(PositivePoint(vec({M_E, M_E})), PositivePoint(vec({1, 1}))) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(thompson_distance(PositivePoint(vec({2, 1})), PositivePoint(vec({1, 2}))) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("thompson_distance errors") {
    CHECK_THROWS_AS(PositivePoint(vec({1, 0})), DomainError);
    CHECK_THROWS_AS(PositivePoint(vec({1, -2})), DomainError);
    CHECK_THROWS_AS(thompson_distance(PositivePoint(vec({1, 1})), PositivePoint(vec({1, 1, 1}))), DimensionError);
    CHECK_THROWS_AS(point_distance(MetricKind::thompson(), vec({1, 1}), vec({0, 1})), DomainError);
}

TEST_CASE("hilbert_distance examples") {
    const Vector x = vec({0.3, 7.0, 2.5});
    CHECK(hilbert_distance(PositivePoint(x), PositivePoint(3.0 * x)) == 0.0);
    CHECK(hilbert_distance(PositivePoint(vec({2, 1})), PositivePoint(vec({1, 2}))) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(hilbert_distance(PositivePoint(vec({5, 5})), PositivePoint(vec({5, 5}))) == 0.0);
}

TEST_CASE("norm_distance examples") {
    CHECK(norm_distance(vec({0, 0}), vec({3, 4}), NormSpec::euclidean()) == 5.0);
    CHECK(norm_distance(vec({0, 0}), vec({3, 4}), NormSpec::max()) == 4.0);
    CHECK(norm_distance(vec({1, 2}), vec({1, 2}), NormSpec::pnorm(3.0)) == 0.0);
    CHECK(norm_distance(vec({0, 0}), vec({3, 4}), NormSpec::pnorm(1.0)) == doctest::Approx(7.0));
    CHECK_THROWS_AS(NormSpec::pnorm(0.5), ConfigError);
    CHECK_THROWS_AS(norm_distance(vec({0}), vec({3, 4}), NormSpec::max()), DimensionError);
}

TEST_CASE("metric axioms on random triples") {
    std::mt19937_64 rng(11);
    const std::vector<MetricKind> kinds = {MetricKind::thompson(), MetricKind::euclidean(),
                                           MetricKind::of_norm(NormSpec::max()), MetricKind::of_norm(NormSpec::pnorm(3.0))};
    for (const auto& kind : kinds) {
        for (int trial = 0; trial < 10000; ++trial) {
            const Vector x = kind.needs_positive_cone() ? random_positive(rng, 3) : random_box(rng, 3, 10.0);
            const Vector y = kind.needs_positive_cone() ? random_positive(rng, 3) : random_box(rng, 3, 10.0);
            const Vector z = kind.needs_positive_cone() ? random_positive(rng, 3) : random_box(rng, 3, 10.0);
            const double dxy = point_distance(kind, x, y);
            REQUIRE(dxy == point_distance(kind, y, x));
            REQUIRE(dxy >= 0.0);
            REQUIRE(point_distance(kind, x, x) == 0.0);
            REQUIRE(dxy <= point_distance(kind, x, z) + point_distance(kind, z, y) + 1e-12);
        }
    }
}

TEST_CASE("hilbert distance vanishes on rays and obeys the triangle inequality") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> lam(std::log(1e-3), std::log(1e3));
    for (int trial = 0; trial < 10000; ++trial) {
        const Vector x = random_positive(rng, 4);
        const double lambda = std::exp(lam(rng));
        REQUIRE(hilbert_distance(PositivePoint(x), PositivePoint(lambda * x)) == 0.0);
        const Vector y = random_positive(rng, 4);
        const Vector z = random_positive(rng, 4);
        const double dxy = hilbert_distance(PositivePoint(x), PositivePoint(y));
        REQUIRE(dxy <= hilbert_distance(PositivePoint(x), PositivePoint(z)) +
                           hilbert_distance(PositivePoint(z), PositivePoint(y)) + 1e-12);
    }
}

TEST_CASE("log_point_distance_scaled agrees with the unscaled distance") {
    const Vector x0 = vec({1.0, 2.0});
    const Vector u = vec({0.5, 0.25});
    const double s = 3.0;
    const Vector y = std::exp(s) * u;
    for (const auto& kind : {MetricKind::euclidean(), MetricKind::thompson(), MetricKind::hilbert()}) {
        CHECK(log_point_distance_scaled(kind, x0, s, u) == doctest::Approx(std::log(point_distance(kind, x0, y))).epsilon(1e-12));
    }
    CHECK(log_point_distance_scaled(MetricKind::euclidean(), x0, -2.0, u) ==
          doctest::Approx(std::log(norm_distance(x0, std::exp(-2.0) * u, NormSpec::euclidean()))).epsilon(1e-12));
}

TEST_CASE("PairSample rejects degenerate pairs") {
    PairSample s(vec({0, 0}), vec({1, 1}));
    CHECK_FALSE(s.add(vec({0.5, 0.5}), vec({0.5, 0.5})));
    CHECK_FALSE(s.add(vec({0.5, 0.5}), vec({0.5, 0.5 + 1e-10})));
    CHECK(s.add(vec({0.5, 0.5}), vec({0.5, 0.6})));
    CHECK(s.size() == 1);
    CHECK_THROWS_AS(s.add(vec({2, 0.5}), vec({0.5, 0.6})), DomainError);

    const auto u = PairSample::uniform(vec({-1, -1}), vec({1, 1}), 50, 3);
    CHECK(u.size() == 50);
    const auto nd = PairSample::near_diagonal(vec({-1, -1}), vec({1, 1}), 50, 1e-3, 3);
    for (const auto& [x, y] : nd.pairs()) {
        CHECK((x - y).norm() <= 1e-3 + 1e-15);
        CHECK((x - y).norm() >= PairSample::min_separation);
    }
}

TEST_CASE("empirical_distance_metric_D") {
    const DistanceFn eu = [](const Vector& x, const Vector& y) { return (x - y).norm(); };
    const auto sample = PairSample::uniform(vec({-1, -1}), vec({1, 1}), 200, 5);

    SUBCASE("identical distances give zero") {
        CHECK(empirical_distance_metric_D(eu, eu, sample) == 0.0);
    }
    SUBCASE("constant ratio two") {
        const DistanceFn twice = [&](const Vector& x, const Vector& y) { return 2.0 * eu(x, y); };
        CHECK(empirical_distance_metric_D(eu, twice, sample) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    }
    SUBCASE("diag(1,3) pushforward is bounded by log 3 and reaches it on a dense grid") {
        const Vector a = vec({1.0, 3.0});
        const DistanceFn stretched = [&](const Vector& x, const Vector& y) { return (a.asDiagonal() * (x - y)).norm(); };
        const double random_value = empirical_distance_metric_D(eu, stretched, sample);
        CHECK(random_value > 0.0);
        CHECK(random_value <= std::log(3.0) + 1e-14);

        // Brute force over every pair of a 9x9 grid.
        std::vector<Vector> grid;
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j) grid.push_back(vec({-1.0 + 0.25 * i, -1.0 + 0.25 * j}));
        PairSample dense(vec({-1, -1}), vec({1, 1}));
        double oracle = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (std::size_t j = i + 1; j < grid.size(); ++j) {
                dense.add(grid[i], grid[j]);
                const double r = stretched(grid[i], grid[j]) / eu(grid[i], grid[j]);
                oracle = std::max({oracle, r, 1.0 / r});
            }
        }
        CHECK(empirical_distance_metric_D(eu, stretched, dense) == doctest::Approx(std::log(oracle)).epsilon(1e-14));
        CHECK(std::log(oracle) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
        CHECK(random_value <= std::log(oracle) + 1e-14);
    }
    SUBCASE("zero distance is an error") {
        const DistanceFn zero = [](const Vector&, const Vector&) { return 0.0; };
        CHECK_THROWS_AS(empirical_distance_metric_D(eu, zero, sample), DomainError);
    }
}

TEST_CASE("distortion_distance_1d") {
    std::vector<double> grid;
    for (int i = 0; i <= 1000; ++i) grid.push_back(1.0 + i / 1000.0);
    const ScalarFn one = [](double) { return 1.0; };
    const ScalarFn ident = [](double t) { return t; };

    CHECK(distortion_distance_1d(ident, ident, grid) == 0.0);
    const ScalarFn two = [](double) { return 2.0; };
    CHECK(distortion_distance_1d(one, two, grid) == 0.0);

    // f(x) = x, g(x) = x^2/2: brute force over all grid pairs.
    double oracle = 0.0;
    for (double x : grid)
        for (double y : grid) oracle = std::max(oracle, std::abs(std::log((x / 1.0) * (1.0 / y))));
    const double d = distortion_distance_1d(one, ident, grid);
    CHECK(d == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(d == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    const ScalarFn vanishing = [](double t) { return t - 1.5; };
    CHECK_THROWS_AS(distortion_distance_1d(one, vanishing, grid), DomainError);
}

TEST_CASE("distortion_distance_1d is invariant under constant rescaling of g") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> c(0.01, 100.0);
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(-1.0 + i / 100.0);
    const ScalarFn fprime = [](double t) { return 2.0 + std::sin(t); };
    const ScalarFn gprime = [](double t) { return 1.0 / std::cosh(t) / std::cosh(t); };
    const double base = distortion_distance_1d(fprime, gprime, grid);
    for (int trial = 0; trial < 100; ++trial) {
        const double k = c(rng) * (trial % 2 == 0 ? 1.0 : -1.0);
        const ScalarFn scaled = [&](double t) { return k * gprime(t); };
        REQUIRE(std::abs(distortion_distance_1d(fprime, scaled, grid) - base) <= 1e-12);
    }
}

TEST_CASE("jacobian_distortion_distance") {
    const JacobianFn identity = [](const Vector& x) { return Matrix::Identity(x.size(), x.size()).eval(); };
    std::vector<Vector> points;
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) points.push_back(vec({-1.0 + 0.1 * i, -1.0 + 0.1 * j}));

    CHECK(jacobian_distortion_distance(identity, identity, points) == 0.0);

    Matrix A(2, 2);
    A << 2.0, 1.0, -0.5, 3.0;
    const JacobianFn affine = [&](const Vector&) { return A; };
    CHECK(jacobian_distortion_distance(identity, affine, points) == doctest::Approx(0.0).epsilon(1e-14));

    const JacobianFn tanh_jac = [](const Vector& x) {
        Vector d = x.unaryExpr([](double t) { return 1.0 - std::tanh(t) * std::tanh(t); });
        return Matrix(d.asDiagonal());
    };
    double oracle = 0.0;
    for (const auto& x : points) {
        for (const auto& y : points) {
            double lx = 0.0;
            double ly = 0.0;
            for (int i = 0; i < 2; ++i) {
                lx += std::log(1.0 - std::tanh(x[i]) * std::tanh(x[i]));
                ly += std::log(1.0 - std::tanh(y[i]) * std::tanh(y[i]));
            }
            oracle = std::max(oracle, std::abs(lx - ly));
        }
    }
    CHECK(jacobian_distortion_distance(identity, tanh_jac, points) == doctest::Approx(oracle).epsilon(1e-12));

    const JacobianFn singular = [](const Vector&) { return Matrix::Zero(2, 2).eval(); };
    CHECK_THROWS_AS(jacobian_distortion_distance(identity, singular, points), DomainError);
}

TEST_CASE("jacobian distortion does not increase under precomposition") {
    // f o h versus f and g evaluated on h(S), with h(x) = tanh(Mx).
    Matrix M(2, 2);
    M << 0.9, 0.4, -0.3, 0.7;
    auto h = [&](const Vector& x) { return Vector((M * x).array().tanh()); };
    auto jh = [&](const Vector& x) {
        Vector d = (M * x).unaryExpr([](double t) { return 1.0 - std::tanh(t) * std::tanh(t); });
        return Matrix(d.asDiagonal() * M);
    };
    const JacobianFn jf = [](const Vector& x) {
        Matrix J(2, 2);
        J << 1.0 + x[1] * x[1], 0.3, 0.1, 2.0 + std::sin(x[0]);
        return J;
    };
    const JacobianFn jg = [](const Vector& x) {
        Matrix J(2, 2);
        J << std::exp(x[0]), 0.0, x[1], 1.5;
        return J;
    };
    const JacobianFn jfh = [&](const Vector& x) { return Matrix(jf(h(x)) * jh(x)); };
    const JacobianFn jgh = [&](const Vector& x) { return Matrix(jg(h(x)) * jh(x)); };

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Vector> sample;
        std::vector<Vector> image;
        for (int i = 0; i < 10; ++i) {
            sample.push_back(random_box(rng, 2, 1.0));
            image.push_back(h(sample.back()));
        }
        REQUIRE(jacobian_distortion_distance(jfh, jgh, sample) <= jacobian_distortion_distance(jf, jg, image) + 1e-10);
    }
}

TEST_CASE("eval_metric_functional examples") {
    const auto h = MetricFunctional::smooth_norm_directional(vec({1.0, 0.0}));
    CHECK(eval_metric_functional(h, vec({3.5, -2.0})) == -3.5);
    CHECK(eval_metric_functional(h, vec({0.0, 0.0})) == 0.0);

    const auto t = MetricFunctional::thompson_horo(vec({1.0, 0.0, 0.0}), vec({0.0, 0.0, 0.0}));
    CHECK(eval_metric_functional(t, vec({2.5, 7.0, 0.1})) == doctest::Approx(std::log(2.5)));
    CHECK_THROWS_AS(eval_metric_functional(t, vec({-1.0, 1.0, 1.0})), DomainError);
}

TEST_CASE("metric functional validation") {
    CHECK_THROWS_AS(MetricFunctional::smooth_norm_directional(vec({1.0, 1.0})), ConfigError);
    CHECK_THROWS_AS(MetricFunctional::smooth_norm_directional(vec({1.0, 0.0}), NormSpec::max()), ConfigError);
    CHECK_THROWS_AS(MetricFunctional::smooth_norm_directional(vec({1.0, 0.0}), NormSpec::pnorm(1.0)), ConfigError);
    CHECK_THROWS_AS(MetricFunctional::thompson_horo(vec({1.0, 0.5}), vec({0.2, 0.0})), ConfigError);
    CHECK_THROWS_AS(MetricFunctional::thompson_horo(vec({0.5, 0.0}), vec({0.0, 0.5})), ConfigError);
    CHECK_THROWS_AS(MetricFunctional::thompson_horo(vec({-1.0, 0.0}), vec({0.0, 1.0})), ConfigError);
    CHECK_NOTHROW(MetricFunctional::thompson_horo(vec({0.0, 1.0}), vec({0.3, 0.0})));
}

TEST_CASE("p-norm gradient matches finite differences") {
    const NormSpec spec = NormSpec::pnorm(3.0);
    Vector w = vec({0.4, -0.7, 0.2});
    w /= norm(w, spec);
    const Vector g = norm_gradient(w, spec);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        Vector a = w;
        Vector b = w;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        CHECK(g[i] == doctest::Approx((norm(a, spec) - norm(b, spec)) / 2e-6).epsilon(1e-7));
    }
}

TEST_CASE("smooth-norm functionals are 1-Lipschitz") {
    std::mt19937_64 rng(41);
    for (const NormSpec spec : {NormSpec::euclidean(), NormSpec::pnorm(1.5), NormSpec::pnorm(4.0)}) {
        for (int trial = 0; trial < 2000; ++trial) {
            Vector w = random_box(rng, 3, 1.0);
            w /= norm(w, spec);
            const auto h = MetricFunctional::smooth_norm_directional(w, spec);
            const Vector x = random_box(rng, 3, 5.0);
            const Vector y = random_box(rng, 3, 5.0);
            REQUIRE(std::abs(eval_metric_functional(h, x) - eval_metric_functional(h, y)) <=
                    norm_distance(x, y, spec) + 1e-12);
        }
    }
}

TEST_CASE("empirical_horofunction examples") {
    const Vector base = vec({0.0, 0.0});
    const Vector x = vec({1.0, 1.0});

    SUBCASE("constant sequence at x") {
        const std::vector<Vector> ys(5, x);
        const auto h = empirical_horofunction(MetricKind::euclidean(), base, ys, x);
        for (double v : h) CHECK(v == doctest::Approx(-std::sqrt(2.0)));
    }
    SUBCASE("euclidean ray along e1 tends to -1") {
        std::vector<Vector> ys;
        for (double n : {1e2, 1e4, 1e6}) ys.push_back(vec({n, 0.0}));
        const auto h = empirical_horofunction(MetricKind::euclidean(), base, ys, x);
        CHECK(std::abs(h.back() + 1.0) < 1e-5);
        for (double v : h) CHECK(std::abs(v) <= std::sqrt(2.0) + 1e-12);
    }
    SUBCASE("thompson sequence (n, 1/n) converges to the horofunction u = e2, v = e1") {
        const Vector one = vec({1.0, 1.0});
        const Vector p = vec({2.0, 2.0});
        std::vector<Vector> ys;
        for (double n : {1e2, 1e4, 1e6}) ys.push_back(vec({n, 1.0 / n}));
        const auto h = empirical_horofunction(MetricKind::thompson(), one, ys, p);

        // Direct evaluation at n = 1e6.
        const double n = 1e6;
        const double direct = std::log(std::max({2.0 / n, 2.0 * n, n / 2.0, 1.0 / (2.0 * n)})) - std::log(n);
        CHECK(h.back() == doctest::Approx(direct).epsilon(1e-12));

        const auto limit = MetricFunctional::thompson_horo(vec({0.0, 1.0}), vec({1.0, 0.0}));
        CHECK(std::abs(h.back() - eval_metric_functional(limit, p)) < 1e-6);
    }
}

TEST_CASE("euclidean horofunctions converge to the directional functional at rate 2|x|^2/n") {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 100; ++trial) {
        Vector w = random_box(rng, 3, 1.0);
        w.normalize();
        const Vector x = random_box(rng, 3, 2.0);
        const auto h = MetricFunctional::smooth_norm_directional(w);
        const std::vector<double> ns = {1e2, 1e3, 1e4};
        std::vector<Vector> ys;
        for (double n : ns) ys.push_back(n * w);
        const auto values = empirical_horofunction(MetricKind::euclidean(), Vector::Zero(3), ys, x);
        for (std::size_t i = 0; i < ns.size(); ++i) {
            REQUIRE(std::abs(values[i] - eval_metric_functional(h, x)) <= 2.0 * x.squaredNorm() / ns[i]);
        }
    }
}
