#include "metricnet/cutoff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

#include "metricnet/format.hpp"
#include "metricnet/random.hpp"

namespace metricnet::cutoff {

namespace {

constexpr std::size_t chains_per_block = 4096;

} // namespace

void ChainConfig::validate() const {
    if (width == 0) {
        throw ConfigError("ChainConfig: width must be >= 1");
    }
    if (!(precision > 0.0) || !std::isfinite(precision)) {
        throw ConfigError("ChainConfig: precision must be positive");
    }
    if (ensemble == 0) {
        throw ConfigError("ChainConfig: ensemble size must be >= 1");
    }
    if (weights.dim != width) {
        throw ConfigError("ChainConfig: weight spec dimension must equal the chain width");
    }
    weights.validate();
    if (x0.size() != 0) {
        if (x0.size() != static_cast<Eigen::Index>(width)) {
            throw ConfigError("ChainConfig: x0 dimension must equal the chain width");
        }
        if ((x0.array() == 0.0).all()) {
            throw ConfigError("ChainConfig: x0 must have a nonzero coordinate");
        }
        if (!x0.allFinite()) {
            throw ConfigError("ChainConfig: x0 must be finite");
        }
    }
}

Vector ChainConfig::start() const {
    if (x0.size() != 0) {
        return x0;
    }
    return Vector::Ones(static_cast<Eigen::Index>(width));
}

std::size_t BinKeyHash::operator()(const BinKey& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int64_t k : key) {
        h ^= static_cast<std::uint64_t>(k) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

void Histogram::add(const BinKey& key, std::uint64_t count) {
    bins_[key] += count;
    total_ += count;
}

void Histogram::merge(const Histogram& other) {
    for (const auto& [key, count] : other.bins_) {
        add(key, count);
    }
}

std::uint64_t Histogram::count(const BinKey& key) const {
    const auto it = bins_.find(key);
    return it == bins_.end() ? 0 : it->second;
}

std::uint64_t Histogram::origin_count() const {
    if (bins_.empty()) {
        return 0;
    }
    return count(BinKey(bins_.begin()->first.size(), 0));
}

BinKey quantize(const Vector& x, double precision) {
    BinKey key(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double cell = std::round(x[i] / precision);
        if (!std::isfinite(cell) || std::abs(cell) > 9e18) {
            throw DomainError("quantize: state coordinate is not finite or exceeds the cell index range");
        }
        key[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(cell);
    }
    return key;
}

namespace {

// Runs chains [first, last) of one block on the block's own random stream.
std::vector<Histogram> simulate_block(const ChainConfig& cfg, std::size_t block, std::size_t first, std::size_t last) {
    Rng rng = make_rng(cfg.seed, block);
    const Vector start = cfg.start();
    std::vector<Vector> states(last - first, start);
    std::vector<Histogram> hists(cfg.max_depth + 1);
    hists[0].add(quantize(start, cfg.precision), last - first);
    for (std::size_t depth = 1; depth <= cfg.max_depth; ++depth) {
        for (Vector& x : states) {
            const Matrix W = layers::sample_weights(cfg.weights, rng);
            x = layers::activate(cfg.activation, W * x);
            hists[depth].add(quantize(x, cfg.precision));
        }
    }
    return hists;
}

} // namespace

std::vector<Histogram> simulate_ensemble(const ChainConfig& cfg) {
    cfg.validate();
    const std::size_t blocks = (cfg.ensemble + chains_per_block - 1) / chains_per_block;
    std::vector<std::vector<Histogram>> per_block(blocks);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next++; b < blocks; b = next++) {
            const std::size_t first = b * chains_per_block;
            const std::size_t last = std::min(cfg.ensemble, first + chains_per_block);
            per_block[b] = simulate_block(cfg, b, first, last);
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(blocks)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    std::vector<Histogram> merged(cfg.max_depth + 1);
    for (const auto& block : per_block) {
        for (std::size_t d = 0; d < merged.size(); ++d) {
            merged[d].merge(block[d]);
        }
    }
    return merged;
}

double tv_to_point_mass(const Histogram& hist) {
    if (hist.empty()) {
        throw DomainError("tv_to_point_mass: empty histogram");
    }
    const double origin = static_cast<double>(hist.origin_count()) / static_cast<double>(hist.total());
    // |mu(0) - 1| + sum_{b != 0} mu(b)
    return 2.0 * (1.0 - origin);
}

std::vector<double> TVCurve::normalized() const {
    std::vector<double> out(tv_raw.size());
    std::transform(tv_raw.begin(), tv_raw.end(), out.begin(), [](double v) { return 0.5 * v; });
    return out;
}

TVCurve curve_from_histograms(const std::vector<Histogram>& hists, const ChainConfig& cfg) {
    TVCurve curve;
    curve.config = cfg;
    for (const Histogram& h : hists) {
        curve.tv_raw.push_back(tv_to_point_mass(h));
        curve.origin_mass.push_back(static_cast<double>(h.origin_count()) / static_cast<double>(h.total()));
        curve.occupied_bins.push_back(h.occupied());
    }
    return curve;
}

TVCurve tv_curve(const ChainConfig& cfg) {
    return curve_from_histograms(simulate_ensemble(cfg), cfg);
}

MixingReport mixing_time(const TVCurve& curve, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw ConfigError("mixing_time: epsilon must be positive");
    }
    if (curve.tv_raw.empty()) {
        throw ConfigError("mixing_time: empty curve");
    }
    MixingReport report;
    report.epsilon = epsilon;
    report.final_value = curve.tv_raw.back();
    const auto& d = curve.tv_raw;
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (0.5 * d[t] <= epsilon) {
            report.t_mix = t;
            break;
        }
    }
    report.d_max = *std::max_element(d.begin(), d.end());
    for (std::size_t t = d.size(); t-- > 0;) {
        if (d[t] >= 0.9 * report.d_max) {
            report.window_begin = t;
            break;
        }
    }
    for (std::size_t t = *report.window_begin; t < d.size(); ++t) {
        if (d[t] <= 0.1 * report.d_max) {
            report.window_end = t;
            break;
        }
    }
    return report;
}

std::vector<ScanEntry> cutoff_scan(std::span<const std::size_t> widths, const ChainConfig& base, ScaleRule rule) {
    if (widths.empty()) {
        throw ConfigError("cutoff_scan: no widths given");
    }
    std::vector<ScanEntry> entries;
    for (std::size_t n : widths) {
        ChainConfig cfg = base;
        cfg.width = n;
        const bool cap = base.weights.spectral_cap;
        cfg.weights = rule == ScaleRule::Xavier ? layers::WeightSpec::xavier(n) : layers::WeightSpec::inverse_sqrt(n);
        cfg.weights.spectral_cap = cap;
        cfg.x0 = Vector();
        ScanEntry entry;
        entry.width = n;
        entry.curve = tv_curve(cfg);
        entry.report = mixing_time(entry.curve);
        entries.push_back(std::move(entry));
    }
    return entries;
}

void write_curve_csv(std::ostream& os, const TVCurve& curve) {
    os << "depth,tv_raw,tv_normalized,origin_mass,occupied_bins\n";
    for (std::size_t t = 0; t < curve.size(); ++t) {
        os << t << ',' << format_double(curve.tv_raw[t]) << ',' << format_double(0.5 * curve.tv_raw[t]) << ','
           << format_double(curve.origin_mass[t]) << ',' << curve.occupied_bins[t] << '\n';
    }
}

namespace {

std::string weight_kind_name(layers::WeightSpec::Kind kind) {
    switch (kind) {
    case layers::WeightSpec::Kind::UniformBox: return "uniform_box";
    case layers::WeightSpec::Kind::XavierUniform: return "xavier";
    case layers::WeightSpec::Kind::PositiveUniform: return "positive_uniform";
    }
    return "uniform_box";
}

} // namespace

nlohmann::json to_json(const ChainConfig& cfg) {
    const Vector start = cfg.start();
    return {
        {"width", cfg.width},
        {"activation", std::string(layers::to_string(cfg.activation))},
        {"weights",
         {{"kind", weight_kind_name(cfg.weights.kind)},
          {"scale", cfg.weights.box_scale()},
          {"lo", cfg.weights.lo},
          {"hi", cfg.weights.hi},
          {"spectral_cap", cfg.weights.spectral_cap}}},
        {"x0", std::vector<double>(start.begin(), start.end())},
        {"precision", cfg.precision},
        {"ensemble", cfg.ensemble},
        {"max_depth", cfg.max_depth},
        {"seed", cfg.seed},
    };
}

nlohmann::json to_json(const MixingReport& report) {
    auto opt = [](const std::optional<std::size_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {
        {"epsilon", report.epsilon},
        {"t_mix", opt(report.t_mix)},
        {"final_tv_raw", report.final_value},
        {"d_max", report.d_max},
        {"window", {opt(report.window_begin), opt(report.window_end)}},
        {"tv_convention", "tv_raw = sum_x |mu(x) - nu(x)| in [0, 2]; t_mix = min{t : tv_raw / 2 <= epsilon}"},
    };
}

} // namespace metricnet::cutoff
