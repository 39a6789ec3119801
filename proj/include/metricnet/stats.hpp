#ifndef METRICNET_STATS_HPP
#define METRICNET_STATS_HPP

#include <span>

namespace metricnet::stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> xs);

struct KsResult {
    double statistic = 0.0; ///< sup |F_a - F_b|
    double p_value = 1.0;   ///< Asymptotic Kolmogorov distribution.
};

/// Two-sample Kolmogorov-Smirnov test.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

} // namespace metricnet::stats

#endif
