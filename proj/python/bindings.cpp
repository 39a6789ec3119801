#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metricnet/cutoff.hpp"
#include "metricnet/ergodic.hpp"
#include "metricnet/layers.hpp"
#include "metricnet/metrics.hpp"
#include "metricnet/stats.hpp"

namespace py = pybind11;
using namespace metricnet;
using namespace pybind11::literals;

namespace {

metrics::MetricKind metric_from(const std::string& name, double p) {
    if (name == "thompson") return metrics::MetricKind::thompson();
    if (name == "hilbert") return metrics::MetricKind::hilbert();
    if (name == "euclidean") return metrics::MetricKind::euclidean();
    if (name == "max") return metrics::MetricKind::of_norm(metrics::NormSpec::max());
    if (name == "pnorm") return metrics::MetricKind::of_norm(metrics::NormSpec::pnorm(p));
    throw ConfigError("unknown metric '" + name + "'");
}

metrics::NormSpec norm_from(const std::string& name, double p) {
    if (name == "euclidean") return metrics::NormSpec::euclidean();
    if (name == "max") return metrics::NormSpec::max();
    if (name == "pnorm") return metrics::NormSpec::pnorm(p);
    throw ConfigError("unknown norm '" + name + "'");
}

layers::WeightSpec weights_from(const std::string& kind, std::size_t dim, double scale, double lo, double hi, bool cap) {
    layers::WeightSpec spec;
    if (kind == "uniform_box") {
        spec = layers::WeightSpec::uniform_box(dim, scale);
    } else if (kind == "inverse_sqrt") {
        spec = layers::WeightSpec::inverse_sqrt(dim);
    } else if (kind == "xavier") {
        spec = layers::WeightSpec::xavier(dim);
    } else if (kind == "positive_uniform") {
        spec = layers::WeightSpec::positive_uniform(dim, lo, hi);
    } else {
        throw ConfigError("unknown weight kind '" + kind + "'");
    }
    return cap ? spec.capped() : spec;
}

layers::CheckOptions options(std::size_t trials, std::uint64_t seed, const std::optional<std::pair<double, double>>& box) {
    layers::CheckOptions opts;
    opts.trials = trials;
    opts.seed = seed;
    if (box) opts.domain = layers::SamplingDomain::box(box->first, box->second);
    return opts;
}

py::dict verdict_dict(const layers::PropertyVerdict& v) {
    py::dict d("passed"_a = v.passed, "trials"_a = v.trials, "tolerance"_a = v.tolerance, "redraws"_a = v.redraws);
    if (v.witness) {
        d["witness"] = py::dict("x"_a = v.witness->x, "y"_a = v.witness->y, "lambda"_a = v.witness->lambda,
                                "violation"_a = v.witness->violation, "ratio"_a = v.witness->ratio);
    } else {
        d["witness"] = py::none();
    }
    return d;
}

} // namespace

PYBIND11_MODULE(metricnet, m) {
    m.doc() = "Metric-space diagnostics for deep networks viewed as random dynamical systems";

    auto value_error = py::reinterpret_borrow<py::object>(PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", value_error);
    py::register_exception<ConfigError>(m, "ConfigError", value_error);
    py::register_exception<DomainError>(m, "DomainError", value_error);

    // metrics
    m.def("thompson_distance", [](const Vector& x, const Vector& y) {
        return metrics::thompson_distance(metrics::PositivePoint(x), metrics::PositivePoint(y));
    }, "x"_a, "y"_a);
    m.def("hilbert_distance", [](const Vector& x, const Vector& y) {
        return metrics::hilbert_distance(metrics::PositivePoint(x), metrics::PositivePoint(y));
    }, "x"_a, "y"_a);
    m.def("norm_distance", [](const Vector& x, const Vector& y, const std::string& norm, double p) {
        return metrics::norm_distance(x, y, norm_from(norm, p));
    }, "x"_a, "y"_a, "norm"_a = "euclidean", "p"_a = 2.0);
    m.def("point_distance", [](const std::string& metric, const Vector& x, const Vector& y, double p) {
        return metrics::point_distance(metric_from(metric, p), x, y);
    }, "metric"_a, "x"_a, "y"_a, "p"_a = 2.0);
    m.def("distortion_distance_1d", [](const metrics::ScalarFn& f, const metrics::ScalarFn& g, const std::vector<double>& grid) {
        return metrics::distortion_distance_1d(f, g, grid);
    }, "fprime"_a, "gprime"_a, "grid"_a);
    m.def("smooth_norm_functional", [](const Vector& w, const Vector& x, const std::string& norm, double p) {
        return metrics::eval_metric_functional(metrics::MetricFunctional::smooth_norm_directional(w, norm_from(norm, p)), x);
    }, "w"_a, "x"_a, "norm"_a = "euclidean", "p"_a = 2.0);
    m.def("thompson_horofunction", [](const Vector& u, const Vector& v, const Vector& x) {
        return metrics::eval_metric_functional(metrics::MetricFunctional::thompson_horo(u, v), x);
    }, "u"_a, "v"_a, "x"_a);
    m.def("empirical_horofunction", [](const std::string& metric, const Vector& base, const std::vector<Vector>& ys,
                                       const Vector& x, double p) {
        return metrics::empirical_horofunction(metric_from(metric, p), base, ys, x);
    }, "metric"_a, "base"_a, "ys"_a, "x"_a, "p"_a = 2.0);

    // layers
    m.def("activate", [](const std::string& name, const Vector& x) {
        return layers::activate(layers::activation_from_string(name), x);
    }, "activation"_a, "x"_a);

    py::class_<layers::LayerMap>(m, "LayerMap")
        .def(py::init([](const std::string& form, const Matrix& W, const Vector& b, const std::string& activation,
                         double residual_steps) {
                 return layers::LayerMap::make(layers::layer_form_from_string(form), W, b,
                                               layers::activation_from_string(activation), residual_steps);
             }),
             "form"_a, "W"_a, "b"_a, "activation"_a, "residual_steps"_a = 1.0)
        .def_property_readonly("W", [](const layers::LayerMap& T) { return T.W; })
        .def_property_readonly("b", [](const layers::LayerMap& T) { return T.b; })
        .def_property_readonly("form", [](const layers::LayerMap& T) { return std::string(layers::to_string(T.form)); })
        .def_property_readonly("activation",
                               [](const layers::LayerMap& T) { return std::string(layers::to_string(T.activation)); })
        .def_property_readonly("dim", &layers::LayerMap::dim)
        .def("__call__", [](const layers::LayerMap& T, const Vector& x) { return layers::apply_layer(T, x); }, "x"_a)
        .def("jacobian", [](const layers::LayerMap& T, const Vector& x) { return layers::exact_jacobian(T, x); }, "x"_a);

    m.def("sample_weights", [](const std::string& kind, std::size_t dim, std::uint64_t seed, double scale, double lo,
                               double hi, bool cap) {
        return layers::sample_weights(weights_from(kind, dim, scale, lo, hi, cap), seed);
    }, "kind"_a, "dim"_a, "seed"_a, "scale"_a = 1.0, "lo"_a = 0.0, "hi"_a = 1.0, "cap"_a = false);
    m.def("operator_norm", &layers::operator_norm, "W"_a);

    m.def("check_order_preserving", [](const layers::LayerMap& T, std::size_t trials, std::uint64_t seed,
                                       std::optional<std::pair<double, double>> box) {
        return verdict_dict(layers::check_order_preserving(T, options(trials, seed, box)));
    }, "layer"_a, "trials"_a = 10000, "seed"_a = 0, "box"_a = py::none());
    m.def("check_subhomogeneous", [](const layers::LayerMap& T, std::size_t trials, std::uint64_t seed,
                                     std::optional<std::pair<double, double>> box) {
        return verdict_dict(layers::check_subhomogeneous(T, options(trials, seed, box)));
    }, "layer"_a, "trials"_a = 10000, "seed"_a = 0, "box"_a = py::none());
    m.def("check_nonexpansive", [](const layers::LayerMap& T, const std::string& metric, std::size_t trials,
                                   std::uint64_t seed, std::optional<std::pair<double, double>> box, double p) {
        return verdict_dict(layers::check_nonexpansive(T, metric_from(metric, p), options(trials, seed, box)));
    }, "layer"_a, "metric"_a = "thompson", "trials"_a = 10000, "seed"_a = 0, "box"_a = py::none(), "p"_a = 2.0);

    // ergodic
    py::class_<ergodic::SequenceGenerator>(m, "SequenceGenerator")
        .def_static("constant", &ergodic::SequenceGenerator::constant, "layer"_a)
        .def_static("fixed_cycle", &ergodic::SequenceGenerator::fixed_cycle, "layers"_a)
        .def_static("markov", &ergodic::SequenceGenerator::markov, "first"_a, "second"_a, "switch_prob"_a, "seed"_a)
        .def_static("iid", [](const std::string& form, const std::string& activation, const std::string& weights,
                              std::size_t dim, std::uint64_t seed, double scale, double lo, double hi, bool cap,
                              std::optional<Vector> bias, std::optional<std::pair<double, double>> bias_range) {
                ergodic::SequenceGenerator::IIDParams p;
                p.form = layers::layer_form_from_string(form);
                p.activation = layers::activation_from_string(activation);
                p.weights = weights_from(weights, dim, scale, lo, hi, cap);
                if (bias && bias_range) throw ConfigError("give either bias or bias_range, not both");
                if (bias) p.bias = ergodic::BiasSpec::fixed(*bias);
                if (bias_range) p.bias = ergodic::BiasSpec::uniform(bias_range->first, bias_range->second);
                return ergodic::SequenceGenerator::iid(p, seed);
            },
            "form"_a, "activation"_a, "weights"_a, "dim"_a, "seed"_a, "scale"_a = 1.0, "lo"_a = 0.0, "hi"_a = 1.0,
            "cap"_a = false, "bias"_a = py::none(), "bias_range"_a = py::none())
        .def("realize", &ergodic::SequenceGenerator::realize, "n"_a)
        .def("with_seed", &ergodic::SequenceGenerator::with_seed, "seed"_a)
        .def_property_readonly("dim", &ergodic::SequenceGenerator::dim)
        .def("__repr__", &ergodic::SequenceGenerator::describe);

    py::class_<ergodic::Trajectory>(m, "Trajectory")
        .def_property_readonly("steps", &ergodic::Trajectory::steps)
        .def_readonly("log_scale", &ergodic::Trajectory::log_scale)
        .def_readonly("overflowed", &ergodic::Trajectory::overflowed)
        .def("point", &ergodic::Trajectory::point, "k"_a);

    py::class_<ergodic::ExponentEstimate>(m, "ExponentEstimate")
        .def_readonly("lambda_", &ergodic::ExponentEstimate::lambda)
        .def_readonly("series", &ergodic::ExponentEstimate::series)
        .def_readonly("leading_coordinate", &ergodic::ExponentEstimate::leading_coordinate)
        .def_readonly("tie", &ergodic::ExponentEstimate::tie)
        .def_readonly("half_width", &ergodic::ExponentEstimate::half_width)
        .def_readonly("overflowed", &ergodic::ExponentEstimate::overflowed);

    m.def("run_append", &ergodic::run_append, "generator"_a, "x0"_a, "n"_a);
    m.def("run_insert", &ergodic::run_insert, "generator"_a, "x0"_a, "n"_a);
    m.def("top_exponent", &ergodic::top_exponent, "trajectory"_a);
    m.def("subadditive_rate", [](const ergodic::Trajectory& t, const std::string& metric, bool log_scale, double p) {
        return ergodic::subadditive_rate(t, metric_from(metric, p), log_scale ? ergodic::RateScale::Log : ergodic::RateScale::Linear);
    }, "trajectory"_a, "metric"_a = "euclidean", "log_scale"_a = false, "p"_a = 2.0);
    m.def("drift", [](const ergodic::Trajectory& t) {
        const auto d = ergodic::drift(t);
        return py::dict("v"_a = d.v, "norm"_a = d.norm, "tail_std"_a = d.tail_std, "overflowed"_a = d.overflowed);
    }, "trajectory"_a);
    m.def("lipschitz_expansion_rate", [](const ergodic::SequenceGenerator& gen, const Vector& lo, const Vector& hi,
                                         std::size_t pairs, std::size_t n, std::uint64_t seed) {
        const auto est = ergodic::lipschitz_expansion_rate(gen, metrics::PairSample::uniform(lo, hi, pairs, seed), n);
        return py::dict("lambda"_a = est.rate.lambda, "series"_a = est.rate.series, "max_pair_x"_a = est.max_pair_x,
                        "max_pair_y"_a = est.max_pair_y);
    }, "generator"_a, "lo"_a, "hi"_a, "pairs"_a, "n"_a, "seed"_a = 0);
    m.def("jacobian_distortion_rate", [](const ergodic::SequenceGenerator& gen, std::size_t n, const std::vector<Vector>& points) {
        return ergodic::jacobian_distortion_rate(gen, n, points);
    }, "generator"_a, "n"_a, "points"_a);

    // cutoff
    m.def("tv_curve", [](std::size_t width, const std::string& activation, std::size_t ensemble, std::size_t max_depth,
                         double precision, std::uint64_t seed, const std::string& scale_rule, unsigned threads,
                         double epsilon) {
        cutoff::ChainConfig cfg;
        cfg.width = width;
        cfg.activation = layers::activation_from_string(activation);
        if (scale_rule == "xavier") {
            cfg.weights = layers::WeightSpec::xavier(width);
        } else if (scale_rule == "inverse_sqrt") {
            cfg.weights = layers::WeightSpec::inverse_sqrt(width);
        } else {
            throw ConfigError("unknown scale rule '" + scale_rule + "'");
        }
        cfg.ensemble = ensemble;
        cfg.max_depth = max_depth;
        cfg.precision = precision;
        cfg.seed = seed;
        cfg.threads = threads;
        cutoff::TVCurve curve;
        {
            py::gil_scoped_release release;
            curve = cutoff::tv_curve(cfg);
        }
        const auto r = cutoff::mixing_time(curve, epsilon);
        return py::dict("tv_raw"_a = curve.tv_raw, "tv_normalized"_a = curve.normalized(),
                        "origin_mass"_a = curve.origin_mass, "occupied_bins"_a = curve.occupied_bins,
                        "t_mix"_a = r.t_mix, "window"_a = py::make_tuple(r.window_begin, r.window_end),
                        "d_max"_a = r.d_max);
    }, "width"_a = 1, "activation"_a = "tanh", "ensemble"_a = 100000, "max_depth"_a = 30, "precision"_a = 1e-3,
       "seed"_a = 0, "scale_rule"_a = "inverse_sqrt", "threads"_a = 1, "epsilon"_a = 0.25);

    // stats
    m.def("ks_two_sample", [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = stats::ks_two_sample(a, b);
        return py::make_tuple(r.statistic, r.p_value);
    }, "a"_a, "b"_a);
}
