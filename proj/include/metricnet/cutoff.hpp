#ifndef METRICNET_CUTOFF_HPP
#define METRICNET_CUTOFF_HPP

/**
 * @file cutoff.hpp
 *
 * @brief Markov chains induced by random networks X_{t+1} = sigma(W_t X_t),
 * their total-variation distance to the point mass at the origin, and
 * mixing-time / cut-off window extraction.
 *
 * States are quantized to a grid of cell width `precision` per coordinate
 * (round half away from zero), which makes the state space finite. The TV
 * distance uses the un-halved convention sum_x |mu(x) - nu(x)|, so it ranges
 * over [0, 2]; mixing thresholds are applied to the normalized value raw / 2.
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "metricnet/layers.hpp"
#include "metricnet/types.hpp"

namespace metricnet::cutoff {

struct ChainConfig {
    std::size_t width = 1;
    layers::Activation activation = layers::Activation::TanH;
    layers::WeightSpec weights = layers::WeightSpec::inverse_sqrt(1);
    Vector x0;               ///< Empty selects the all-ones vector of the chain width.
    double precision = 1e-3;
    std::size_t ensemble = 100000;
    std::size_t max_depth = 30;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    /// @throws ConfigError for precision <= 0, ensemble = 0, mismatched dims or x0 = 0.
    void validate() const;
    Vector start() const;
};

using BinKey = std::vector<std::int64_t>;

struct BinKeyHash {
    std::size_t operator()(const BinKey& key) const noexcept;
};

/**
 * @brief Sparse counts over quantization cells.
 */
class Histogram {
public:
    void add(const BinKey& key, std::uint64_t count = 1);
    /// Associative and commutative.
    void merge(const Histogram& other);

    std::uint64_t total() const { return total_; }
    std::uint64_t count(const BinKey& key) const;
    std::uint64_t origin_count() const;
    std::size_t occupied() const { return bins_.size(); }
    bool empty() const { return total_ == 0; }
    const std::unordered_map<BinKey, std::uint64_t, BinKeyHash>& bins() const { return bins_; }

private:
    std::unordered_map<BinKey, std::uint64_t, BinKeyHash> bins_;
    std::uint64_t total_ = 0;
};

/// Cell index of a state; throws DomainError for non-finite or out-of-range values.
BinKey quantize(const Vector& x, double precision);

/// One histogram per depth 0..max_depth, each with total mass `ensemble`.
std::vector<Histogram> simulate_ensemble(const ChainConfig& cfg);

/// 2 (1 - mu(origin cell)).
/// @throws DomainError for an empty histogram.
double tv_to_point_mass(const Histogram& hist);

struct TVCurve {
    std::vector<double> tv_raw;
    std::vector<double> origin_mass;
    std::vector<std::size_t> occupied_bins;
    ChainConfig config;

    std::size_t size() const { return tv_raw.size(); }
    std::vector<double> normalized() const;
};

TVCurve curve_from_histograms(const std::vector<Histogram>& hists, const ChainConfig& cfg);
TVCurve tv_curve(const ChainConfig& cfg);

struct MixingReport {
    double epsilon = 0.25;
    std::optional<std::size_t> t_mix; ///< First depth with raw / 2 <= epsilon.
    double final_value = 0.0;         ///< Raw TV at the last depth.
    double d_max = 0.0;
    /// Last depth with raw >= 0.9 d_max, and the first later depth with raw <= 0.1 d_max.
    std::optional<std::size_t> window_begin;
    std::optional<std::size_t> window_end;
};

/// @throws ConfigError if epsilon <= 0 or the curve is empty.
MixingReport mixing_time(const TVCurve& curve, double epsilon = 0.25);

enum class ScaleRule {
    InverseSqrt, ///< Entries uniform on [-1/sqrt(N), 1/sqrt(N)].
    Xavier       ///< Entries uniform on [-sqrt(3)/sqrt(N), sqrt(3)/sqrt(N)].
};

struct ScanEntry {
    std::size_t width = 1;
    TVCurve curve;
    MixingReport report;
};

/// One run per width with the weight scale recomputed for that width and x0
/// reset to the default start.
std::vector<ScanEntry> cutoff_scan(std::span<const std::size_t> widths, const ChainConfig& base,
                                   ScaleRule rule = ScaleRule::InverseSqrt);

/// Header: depth,tv_raw,tv_normalized,origin_mass,occupied_bins
void write_curve_csv(std::ostream& os, const TVCurve& curve);

nlohmann::json to_json(const ChainConfig& cfg);
nlohmann::json to_json(const MixingReport& report);

} // namespace metricnet::cutoff

#endif
