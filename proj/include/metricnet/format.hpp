#ifndef METRICNET_FORMAT_HPP
#define METRICNET_FORMAT_HPP

#include <charconv>
#include <string>

namespace metricnet {

/// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_double(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

} // namespace metricnet

#endif
