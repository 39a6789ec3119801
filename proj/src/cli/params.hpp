#ifndef METRICNET_CLI_PARAMS_HPP
#define METRICNET_CLI_PARAMS_HPP

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "metricnet/cli.hpp"
#include "metricnet/types.hpp"

namespace metricnet::cli {

// Typed view of one resolved section. Errors name the offending key.
class Params {
public:
    Params(std::string section, const Section& values) : name_(std::move(section)), values_(&values) {}

    const std::string& raw(const std::string& key) const;
    bool has(const std::string& key) const { return !raw(key).empty(); }

    std::string choice(const std::string& key, std::initializer_list<const char*> allowed) const;
    double real(const std::string& key) const;
    std::size_t count(const std::string& key, std::size_t min = 0) const;
    bool flag(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    std::vector<std::size_t> counts(const std::string& key) const;
    std::vector<std::string> words(const std::string& key) const;
    Vector vector(const std::string& key) const;
    /// Rows split by ';', entries by ','.
    Matrix matrix(const std::string& key) const;
    /// Matrices split by '|'.
    std::vector<Matrix> matrices(const std::string& key) const;

    [[noreturn]] void fail(const std::string& key, const std::string& why) const;

private:
    std::string name_;
    const Section* values_;
};

double parse_real(const std::string& text);
std::uint64_t parse_u64(const std::string& text);
std::vector<std::string> split(const std::string& text, char sep);

} // namespace metricnet::cli

#endif
