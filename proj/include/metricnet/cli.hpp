#ifndef METRICNET_CLI_HPP
#define METRICNET_CLI_HPP

/**
 * @file cli.hpp
 *
 * @brief Run configuration and experiment drivers behind the `metricnet`
 * command-line tool.
 *
 * A configuration is INI text with sections:
 *
 *     [run]
 *     command = exponent
 *     seed = 7
 *     out = results
 *
 *     [params]
 *     generator = constant
 *     matrices = 2,0;0,0.5
 *
 * The `properties` command additionally takes one `[check NAME]` section per
 * battery. Every output JSON carries the fully resolved configuration under
 * "config", and that JSON is itself accepted as a configuration file.
 *
 * Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
 */

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace metricnet::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_check_failed = 1;
inline constexpr int exit_usage = 2;

using Section = std::map<std::string, std::string>;

struct RunConfig {
    std::string command;
    std::uint64_t seed = 0;
    std::string out = "metricnet-out";
    unsigned threads = 1;
    std::string preset;
    std::map<std::string, Section> sections;
};

/// The seven command names.
const std::vector<std::string>& commands();
const std::vector<std::string>& preset_names();

/// @throws ConfigError for an unknown preset.
RunConfig preset(std::string_view name);

/// INI text, or JSON when the first non-blank character is '{'.
/// @throws ConfigError on malformed input.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Overlays `top` onto `base`: run fields set in `top` and every section key.
void merge_into(RunConfig& base, const RunConfig& top);

/// `section.key=value`; a bare `key=value` targets [run] for command, seed,
/// out and threads, and [params] otherwise.
void apply_override(RunConfig& cfg, std::string_view assignment);

/**
 * Checks the command and every key against the command's schema and fills in
 * defaults.
 * @throws ConfigError for unknown commands, sections or keys, and for values
 * that do not parse.
 */
RunConfig resolve(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
std::string to_ini(const RunConfig& cfg);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Resolves and executes; log lines go to `log`.
/// @throws ConfigError and DomainError from the drivers.
int execute(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point; never throws.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace metricnet::cli

#endif
