#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "metricnet/cutoff.hpp"
#include "metricnet/ergodic.hpp"
#include "metricnet/format.hpp"
#include "metricnet/layers.hpp"
#include "metricnet/metrics.hpp"
#include "metricnet/random.hpp"
#include "params.hpp"

namespace metricnet::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

std::string series_csv(const std::vector<std::pair<std::size_t, double>>& series) {
    std::ostringstream os;
    os << "n,value\n";
    for (const auto& [n, v] : series) os << n << ',' << format_double(v) << '\n';
    return os.str();
}

void emit(const RunConfig& cfg, const std::string& stem, json summary, const std::string* csv) {
    const fs::path dir(cfg.out);
    summary["config"] = cli::to_json(cfg);
    if (csv) write_atomic(dir / (stem + ".csv"), *csv);
    write_atomic(dir / (stem + ".json"), summary.dump(2) + "\n");
}

layers::WeightSpec weight_spec(const Params& p, std::size_t dim) {
    const auto kind = p.choice("weights", {"uniform_box", "inverse_sqrt", "xavier", "positive_uniform"});
    layers::WeightSpec spec;
    if (kind == "uniform_box") spec = layers::WeightSpec::uniform_box(dim, p.real("scale"));
    if (kind == "inverse_sqrt") spec = layers::WeightSpec::inverse_sqrt(dim);
    if (kind == "xavier") spec = layers::WeightSpec::xavier(dim);
    if (kind == "positive_uniform") spec = layers::WeightSpec::positive_uniform(dim, p.real("lo"), p.real("hi"));
    if (p.flag("cap")) spec = spec.capped();
    spec.validate();
    return spec;
}

metrics::MetricKind metric_kind(const Params& p) {
    const auto name = p.choice("metric", {"euclidean", "max", "pnorm", "thompson", "hilbert"});
    if (name == "thompson") return metrics::MetricKind::thompson();
    if (name == "hilbert") return metrics::MetricKind::hilbert();
    if (name == "max") return metrics::MetricKind::of_norm(metrics::NormSpec::max());
    if (name == "pnorm") return metrics::MetricKind::of_norm(metrics::NormSpec::pnorm(p.real("metric_p")));
    return metrics::MetricKind::euclidean();
}

struct GeneratorSetup {
    ergodic::SequenceGenerator gen;
    Vector x0;
};

GeneratorSetup build_generator(const Params& p, std::uint64_t seed) {
    const auto kind = p.choice("generator", {"constant", "cycle", "markov", "iid"});
    const auto form = layers::layer_form_from_string(p.raw("form"));
    const auto act = layers::activation_from_string(p.raw("activation"));
    const double steps = p.real("residual_steps");

    auto finish = [&](ergodic::SequenceGenerator gen) {
        Vector x0 = p.has("x0") ? p.vector("x0") : Vector::Ones(gen.dim());
        if (x0.size() != gen.dim()) p.fail("x0", "dimension differs from the layers'");
        return GeneratorSetup{std::move(gen), std::move(x0)};
    };

    if (kind == "iid") {
        const std::size_t dim = p.count("dim", 1);
        ergodic::SequenceGenerator::IIDParams params;
        params.form = form;
        params.activation = act;
        params.weights = weight_spec(p, dim);
        const auto bias = p.choice("bias_kind", {"zero", "fixed", "uniform"});
        if (bias == "fixed") {
            params.bias = ergodic::BiasSpec::fixed(p.vector("bias"));
            if (params.bias.value.size() != static_cast<Eigen::Index>(dim)) p.fail("bias", "dimension differs from dim");
        } else if (bias == "uniform") {
            params.bias = ergodic::BiasSpec::uniform(p.real("bias_lo"), p.real("bias_hi"));
        }
        return finish(ergodic::SequenceGenerator::iid(params, derive_seed(seed, 1)));
    }

    if (!p.has("matrices")) p.fail("matrices", "required for generator '" + kind + "'");
    const auto mats = p.matrices("matrices");
    const Eigen::Index dim = mats.front().rows();
    for (const auto& m : mats) {
        if (m.rows() != dim) p.fail("matrices", "all matrices must share one dimension");
    }
    const Vector b = p.has("bias") ? p.vector("bias") : Vector::Zero(dim);
    if (b.size() != dim) p.fail("bias", "dimension differs from the matrices'");
    std::vector<layers::LayerMap> maps;
    for (const auto& m : mats) maps.push_back(layers::LayerMap::make(form, m, b, act, steps));

    if (kind == "constant") {
        if (maps.size() != 1) p.fail("matrices", "a constant generator takes exactly one matrix");
        return finish(ergodic::SequenceGenerator::constant(maps.front()));
    }
    if (kind == "markov") {
        if (maps.size() != 2) p.fail("matrices", "a Markov generator takes exactly two matrices");
        return finish(ergodic::SequenceGenerator::markov(maps[0], maps[1], p.real("p"), derive_seed(seed, 1)));
    }
    return finish(ergodic::SequenceGenerator::fixed_cycle(std::move(maps)));
}

ergodic::Trajectory orbit(const Params& p, const GeneratorSetup& setup) {
    const std::size_t n = p.count("n", 1);
    if (p.choice("order", {"append", "insert"}) == "insert") {
        return ergodic::run_insert(setup.gen, setup.x0, n);
    }
    return ergodic::run_append(setup.gen, setup.x0, n);
}

json exponent_json(const ergodic::ExponentEstimate& est) {
    json j = {{"lambda", est.lambda},
              {"half_width", est.half_width},
              {"overflowed", est.overflowed},
              {"tie", est.tie},
              {"leading_coordinate", nullptr}};
    if (est.leading_coordinate) j["leading_coordinate"] = *est.leading_coordinate;
    return j;
}

Vector box_corner(Eigen::Index dim, double value) { return Vector::Constant(dim, value); }

int cmd_exponent(const RunConfig& cfg, std::ostream& log) {
    const Params p("params", cfg.sections.at("params"));
    const auto setup = build_generator(p, cfg.seed);
    const auto traj = orbit(p, setup);
    ergodic::ExponentEstimate est;
    if (p.choice("method", {"top", "subadditive"}) == "top") {
        est = ergodic::top_exponent(traj);
    } else {
        const auto scale = p.choice("rate_scale", {"linear", "log"}) == "log" ? ergodic::RateScale::Log
                                                                              : ergodic::RateScale::Linear;
        est = ergodic::subadditive_rate(traj, metric_kind(p), scale);
    }
    json summary = exponent_json(est);
    summary["steps"] = traj.steps();
    summary["generator"] = traj.generator;
    const auto csv = series_csv(est.series);
    emit(cfg, "exponent", summary, &csv);
    log << "exponent: lambda = " << format_double(est.lambda) << (est.overflowed ? " (overflowed)" : "") << '\n';
    return exit_ok;
}

int cmd_drift(const RunConfig& cfg, std::ostream& log) {
    const Params p("params", cfg.sections.at("params"));
    const auto setup = build_generator(p, cfg.seed);
    const auto traj = orbit(p, setup);
    const auto est = ergodic::drift(traj);
    std::vector<std::pair<std::size_t, double>> norms;
    for (const auto& [n, v] : est.series) norms.emplace_back(n, v.norm());
    json summary = {{"v", to_json(est.v)},
                    {"norm", est.norm},
                    {"tail_std", est.tail_std},
                    {"overflowed", est.overflowed},
                    {"steps", traj.steps()},
                    {"generator", traj.generator}};
    const auto csv = series_csv(norms);
    emit(cfg, "drift", summary, &csv);
    log << "drift: |v| = " << format_double(est.norm) << (est.overflowed ? " (overflowed)" : "") << '\n';
    return exit_ok;
}

int cmd_expansion(const RunConfig& cfg, std::ostream& log) {
    const Params p("params", cfg.sections.at("params"));
    const auto setup = build_generator(p, cfg.seed);
    const Eigen::Index dim = setup.gen.dim();
    const Vector lo = box_corner(dim, p.real("box_lo"));
    const Vector hi = box_corner(dim, p.real("box_hi"));
    const std::size_t count = p.count("pairs", 1);
    const std::uint64_t pair_seed = derive_seed(cfg.seed, 2);
    const auto pairs = p.choice("sampling", {"uniform", "near_diagonal"}) == "uniform"
                           ? metrics::PairSample::uniform(lo, hi, count, pair_seed)
                           : metrics::PairSample::near_diagonal(lo, hi, count, p.real("radius"), pair_seed);
    const auto est = ergodic::lipschitz_expansion_rate(setup.gen, pairs, p.count("n", 1));
    json summary = exponent_json(est.rate);
    summary["rate"] = std::exp(est.rate.lambda);
    summary["max_pair"] = {{"index", est.max_pair_index}, {"x", to_json(est.max_pair_x)}, {"y", to_json(est.max_pair_y)}};
    summary["generator"] = setup.gen.describe();
    const auto csv = series_csv(est.rate.series);
    emit(cfg, "expansion", summary, &csv);
    log << "expansion: lambda = " << format_double(est.rate.lambda) << ", rate = " << format_double(std::exp(est.rate.lambda))
        << '\n';
    return exit_ok;
}

int cmd_distortion(const RunConfig& cfg, std::ostream& log) {
    const Params p("params", cfg.sections.at("params"));
    const auto setup = build_generator(p, cfg.seed);
    const Eigen::Index dim = setup.gen.dim();
    const double lo = p.real("box_lo");
    const double hi = p.real("box_hi");
    if (!(lo < hi)) p.fail("box_hi", "must exceed box_lo");
    Rng rng = make_rng(cfg.seed, 3);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Vector> points(p.count("points", 2));
    for (auto& x : points) {
        x.resize(dim);
        for (auto& c : x) c = u(rng);
    }
    const auto est = ergodic::jacobian_distortion_rate(setup.gen, p.count("n", 1), points);
    json summary = exponent_json(est);
    summary["generator"] = setup.gen.describe();
    const auto csv = series_csv(est.series);
    emit(cfg, "distortion", summary, &csv);
    log << "distortion: lambda = " << format_double(est.lambda) << '\n';
    return exit_ok;
}

int cmd_horofunction(const RunConfig& cfg, std::ostream& log) {
    const Params p("params", cfg.sections.at("params"));
    const auto name = p.choice("metric", {"euclidean", "pnorm", "thompson"});
    if (!p.has("w")) p.fail("w", "required");
    if (!p.has("x")) p.fail("x", "required");
    const Vector w = p.vector("w");
    const Vector x = p.vector("x");
    if (x.size() != w.size()) p.fail("x", "dimension differs from w");
    const auto ns = p.counts("ns");

    std::vector<Vector> ys;
    Vector base;
    metrics::MetricKind kind = metrics::MetricKind::euclidean();
    double limit = 0.0;
    if (name == "thompson") {
        const Vector v = p.has("v") ? p.vector("v") : Vector::Zero(w.size());
        if (v.size() != w.size()) p.fail("v", "dimension differs from w");
        limit = metrics::eval_metric_functional(metrics::MetricFunctional::thompson_horo(w, v), x);
        kind = metrics::MetricKind::thompson();
        base = Vector::Ones(w.size());
        for (std::size_t n : ns) {
            Vector y = Vector::Ones(w.size());
            const double t = static_cast<double>(n);
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                if (w[i] > 0.0) y[i] = 1.0 / (t * w[i]);
                if (v[i] > 0.0) y[i] = t * v[i];
            }
            ys.push_back(std::move(y));
        }
    } else {
        const auto spec = name == "pnorm" ? metrics::NormSpec::pnorm(p.real("metric_p")) : metrics::NormSpec::euclidean();
        limit = metrics::eval_metric_functional(metrics::MetricFunctional::smooth_norm_directional(w, spec), x);
        kind = metrics::MetricKind::of_norm(spec);
        base = Vector::Zero(w.size());
        for (std::size_t n : ns) ys.push_back(static_cast<double>(n) * w);
    }
    const auto values = metrics::empirical_horofunction(kind, base, ys, x);
    std::vector<std::pair<std::size_t, double>> series;
    json rows = json::array();
    for (std::size_t i = 0; i < ns.size(); ++i) {
        series.emplace_back(ns[i], values[i]);
        rows.push_back({{"n", ns[i]}, {"value", values[i]}, {"error", std::abs(values[i] - limit)}});
    }
    json summary = {{"limit", limit}, {"values", rows}};
    const auto csv = series_csv(series);
    emit(cfg, "horofunction", summary, &csv);
    log << "horofunction: limit = " << format_double(limit) << ", last value = " << format_double(values.back()) << '\n';
    return exit_ok;
}

json witness_json(const layers::Witness& w) {
    return {{"x", to_json(w.x)},
            {"y", to_json(w.y)},
            {"lambda", w.lambda},
            {"violation", w.violation},
            {"ratio", w.ratio}};
}

int cmd_properties(const RunConfig& cfg, std::ostream& log) {
    std::size_t index = 0;
    bool all_ok = true;
    json results = json::array();
    for (const auto& [section, values] : cfg.sections) {
        if (section == "params") continue;
        const Params p(section, values);
        const std::string name = section.substr(6);
        const auto property = p.choice("property", {"order", "subhomogeneous", "nonexpansive", "scalar_b"});
        const bool expect_pass = p.choice("expect", {"pass", "fail"}) == "pass";
        const std::uint64_t section_seed = derive_seed(cfg.seed, 100 + index++);

        json entry = {{"name", name}, {"property", property}, {"expect", expect_pass ? "pass" : "fail"}};
        std::size_t failures = 0;
        std::size_t draws = 0;
        std::optional<layers::Witness> witness;

        if (property == "scalar_b") {
            const std::size_t count = p.count("grid_count", 1);
            std::vector<double> grid(count);
            for (std::size_t i = 0; i < count; ++i) grid[i] = p.real("grid_lo") + static_cast<double>(i) * p.real("grid_step");
            const auto report = layers::check_scalar_criterion_b(p.real("bias"), grid);
            draws = 1;
            failures = report.verdict.passed ? 0 : 1;
            witness = report.verdict.witness;
            entry["max_value"] = report.max_value;
            entry["argmax"] = report.argmax;
        } else {
            const std::size_t dim = p.count("dim", 1);
            Vector b = p.vector("bias");
            if (b.size() == 1) b = Vector::Constant(static_cast<Eigen::Index>(dim), b[0]);
            if (b.size() != static_cast<Eigen::Index>(dim)) p.fail("bias", "expects one value or dim values");
            const auto form = layers::layer_form_from_string(p.raw("form"));
            const auto act = layers::activation_from_string(p.raw("activation"));
            std::optional<Matrix> fixed;
            if (p.has("matrix")) {
                fixed = p.matrix("matrix");
                if (fixed->rows() != static_cast<Eigen::Index>(dim)) p.fail("matrix", "dimension differs from dim");
            }
            const auto spec = weight_spec(p, dim);
            layers::CheckOptions opts;
            opts.trials = p.count("trials", 1);
            const auto domain = p.choice("domain", {"default", "cone", "box"});
            if (domain == "cone") opts.domain = layers::SamplingDomain::positive_cone();
            if (domain == "box") opts.domain = layers::SamplingDomain::box(p.real("domain_lo"), p.real("domain_hi"));
            const auto metric = metric_kind(p);
            draws = p.count("layer_draws", 1);
            std::size_t trials = 0;
            std::size_t redraws = 0;
            for (std::size_t d = 0; d < draws; ++d) {
                Rng rng = make_rng(section_seed, d);
                const Matrix W = fixed ? *fixed : layers::sample_weights(spec, rng);
                const auto T = layers::LayerMap::make(form, W, b, act, p.real("residual_steps"));
                opts.seed = derive_seed(section_seed, draws + d);
                layers::PropertyVerdict v;
                if (property == "order") v = layers::check_order_preserving(T, opts);
                if (property == "subhomogeneous") v = layers::check_subhomogeneous(T, opts);
                if (property == "nonexpansive") v = layers::check_nonexpansive(T, metric, opts);
                trials += v.trials;
                redraws += v.redraws;
                if (!v.passed) {
                    ++failures;
                    if (!witness) witness = v.witness;
                }
            }
            entry["trials"] = trials;
            entry["redraws"] = redraws;
        }
        const bool ok = expect_pass ? failures == 0 : (failures > 0 && witness.has_value());
        all_ok = all_ok && ok;
        entry["draws"] = draws;
        entry["failures"] = failures;
        entry["witness"] = witness ? witness_json(*witness) : json(nullptr);
        entry["ok"] = ok;
        results.push_back(entry);
        log << "properties: " << name << " (" << property << ", expect " << (expect_pass ? "pass" : "fail")
            << "): " << failures << '/' << draws << " draws failed -> " << (ok ? "ok" : "UNEXPECTED") << '\n';
    }
    if (results.empty()) {
        throw ConfigError("properties: no [check NAME] sections given");
    }
    emit(cfg, "properties", {{"checks", results}, {"all_ok", all_ok}}, nullptr);
    return all_ok ? exit_ok : exit_check_failed;
}

int cmd_cutoff(const RunConfig& cfg, std::ostream& log) {
    const Params p("params", cfg.sections.at("params"));
    const auto widths = p.counts("widths");
    const auto rule = p.choice("scale_rule", {"inverse_sqrt", "xavier"}) == "xavier" ? cutoff::ScaleRule::Xavier
                                                                                     : cutoff::ScaleRule::InverseSqrt;
    const double epsilon = p.real("epsilon");
    if (!(epsilon > 0.0)) p.fail("epsilon", "must be positive");
    for (const auto& act_name : p.words("activations")) {
        cutoff::ChainConfig base;
        base.activation = layers::activation_from_string(act_name);
        base.weights.spectral_cap = p.flag("cap");
        base.precision = p.real("precision");
        base.ensemble = p.count("ensemble", 1);
        base.max_depth = p.count("max_depth", 1);
        base.seed = cfg.seed;
        base.threads = cfg.threads;
        for (const auto& entry : cutoff::cutoff_scan(widths, base, rule)) {
            const auto report = cutoff::mixing_time(entry.curve, epsilon);
            const std::string stem = "cutoff_" + std::string(layers::to_string(base.activation)) + "_w" +
                                     std::to_string(entry.width);
            std::ostringstream csv;
            cutoff::write_curve_csv(csv, entry.curve);
            json summary = {{"chain", cutoff::to_json(entry.curve.config)},
                            {"report", cutoff::to_json(report)},
                            {"seed", cfg.seed}};
            const std::string text = csv.str();
            emit(cfg, stem, summary, &text);
            log << "cutoff: " << layers::to_string(base.activation) << " width " << entry.width << ": t_mix = "
                << (report.t_mix ? std::to_string(*report.t_mix) : std::string("not reached")) << '\n';
        }
    }
    return exit_ok;
}

} // namespace

int execute(const RunConfig& raw_cfg, std::ostream& log) {
    const RunConfig cfg = resolve(raw_cfg);
    if (cfg.command == "exponent") return cmd_exponent(cfg, log);
    if (cfg.command == "drift") return cmd_drift(cfg, log);
    if (cfg.command == "expansion") return cmd_expansion(cfg, log);
    if (cfg.command == "distortion") return cmd_distortion(cfg, log);
    if (cfg.command == "properties") return cmd_properties(cfg, log);
    if (cfg.command == "cutoff") return cmd_cutoff(cfg, log);
    return cmd_horofunction(cfg, log);
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Metric-space diagnostics for deep networks viewed as random dynamical systems"};
    app.set_version_flag("--version", "metricnet 0.1.0");

    std::string command;
    std::string config_path;
    std::string preset_name;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
    std::vector<std::string> overrides;
    bool print_config = false;

    app.add_option("command", command, "One of: exponent, drift, expansion, distortion, properties, cutoff, horofunction");
    app.add_option("--config", config_path, "INI or JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--preset", preset_name, "paper-fig1, paper-fig2 or paper-fig3");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--threads", threads, "Worker threads (default from METRICNET_THREADS, else 1)")
        ->check(CLI::Range(1u, 1024u));
    app.add_option("--set", overrides, "Override a parameter: [section.]key=value")->take_all();
    app.add_flag("--print-config", print_config, "Print the resolved configuration as INI and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        RunConfig cfg;
        if (!preset_name.empty()) cfg = preset(preset_name);
        if (const char* env = std::getenv("METRICNET_THREADS")) {
            apply_override(cfg, std::string("run.threads=") + env);
        }
        if (!config_path.empty()) merge_into(cfg, load_config(config_path));
        if (!command.empty()) {
            if (!cfg.command.empty() && cfg.command != command) {
                throw ConfigError("command '" + command + "' conflicts with '" + cfg.command + "' from the configuration");
            }
            cfg.command = command;
        }
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out = *out_dir;
        if (threads) cfg.threads = *threads;
        for (const auto& o : overrides) apply_override(cfg, o);

        if (print_config) {
            out << to_ini(resolve(cfg));
            return exit_ok;
        }
        return execute(cfg, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_check_failed;
    }
}

} // namespace metricnet::cli
