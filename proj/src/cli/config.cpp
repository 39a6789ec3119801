#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <unistd.h>

#include "params.hpp"

namespace metricnet::cli {

namespace {

const Section& generator_schema() {
    static const Section schema = {
        {"generator", "constant"}, {"form", "affine"},      {"activation", "identity"}, {"residual_steps", "1"},
        {"matrices", ""},          {"bias", ""},            {"p", "0.5"},               {"dim", "2"},
        {"weights", "inverse_sqrt"}, {"scale", "1"},        {"lo", "0"},                {"hi", "1"},
        {"cap", "false"},          {"bias_kind", "zero"},   {"bias_lo", "-1"},          {"bias_hi", "1"},
        {"x0", ""},                {"n", "1000"},
    };
    return schema;
}

Section extend(Section base, std::initializer_list<std::pair<const std::string, std::string>> extra) {
    for (const auto& kv : extra) base.insert_or_assign(kv.first, kv.second);
    return base;
}

const std::map<std::string, Section>& params_schemas() {
    static const std::map<std::string, Section> schemas = {
        {"exponent", extend(generator_schema(), {{"order", "append"},
                                                 {"method", "top"},
                                                 {"metric", "euclidean"},
                                                 {"metric_p", "2"},
                                                 {"rate_scale", "linear"}})},
        {"drift", extend(generator_schema(), {{"order", "append"}})},
        {"expansion", extend(generator_schema(), {{"pairs", "1000"},
                                                  {"box_lo", "-1"},
                                                  {"box_hi", "1"},
                                                  {"sampling", "uniform"},
                                                  {"radius", "0.001"}})},
        {"distortion", extend(generator_schema(), {{"points", "100"}, {"box_lo", "-1"}, {"box_hi", "1"}})},
        {"properties", {}},
        {"cutoff", {{"widths", "1"},
                    {"activations", "tanh"},
                    {"scale_rule", "inverse_sqrt"},
                    {"precision", "0.001"},
                    {"ensemble", "100000"},
                    {"max_depth", "30"},
                    {"epsilon", "0.25"},
                    {"cap", "false"}}},
        {"horofunction", {{"metric", "euclidean"},
                          {"metric_p", "2"},
                          {"w", ""},
                          {"v", ""},
                          {"x", ""},
                          {"ns", "100,1000,10000"}}},
    };
    return schemas;
}

const Section& check_schema() {
    static const Section schema = {
        {"property", "nonexpansive"}, {"expect", "pass"},      {"form", "affine"},
        {"activation", "sigmoid"},    {"residual_steps", "1"}, {"dim", "2"},
        {"matrix", ""},               {"weights", "positive_uniform"}, {"scale", "1"},
        {"lo", "0"},                  {"hi", "1"},             {"cap", "false"},
        {"bias", "0"},                {"metric", "thompson"},  {"metric_p", "2"},
        {"trials", "10000"},          {"domain", "default"},   {"domain_lo", "-10"},
        {"domain_hi", "10"},          {"layer_draws", "1"},    {"grid_lo", "0.0005"},
        {"grid_step", "0.001"},       {"grid_count", "20000"},
    };
    return schema;
}

bool is_check_section(const std::string& name) {
    return name.rfind("check ", 0) == 0 && name.size() > 6;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

unsigned parse_threads(const std::string& text) {
    const std::uint64_t t = parse_u64(text);
    if (t == 0 || t > 1024) {
        throw ConfigError("threads must be in [1, 1024], got '" + text + "'");
    }
    return static_cast<unsigned>(t);
}

void set_run_field(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "command") {
        cfg.command = value;
    } else if (key == "seed") {
        cfg.seed = parse_u64(value);
    } else if (key == "out") {
        cfg.out = value;
    } else if (key == "threads") {
        cfg.threads = parse_threads(value);
    } else if (key == "preset") {
        cfg.preset = value;
    } else {
        throw ConfigError("unknown key 'run." + key + "'");
    }
}

std::string json_scalar(const nlohmann::json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw ConfigError("'" + where + "' must be a string, number or boolean");
}

RunConfig parse_ini(std::string_view text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is{std::string(text)};
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: " + e.message() + " at line " + std::to_string(e.line()));
    }
    RunConfig cfg;
    for (const auto& [name, section] : tree) {
        if (section.empty() && !section.data().empty()) {
            throw ConfigError("config: key '" + name + "' appears outside a section");
        }
        if (name == "run") {
            for (const auto& [key, value] : section) {
                set_run_field(cfg, key, value.data());
            }
            continue;
        }
        Section& out = cfg.sections[name];
        for (const auto& [key, value] : section) {
            out[key] = value.data();
        }
    }
    return cfg;
}

RunConfig parse_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (j.contains("config")) {
        j = j.at("config");
    }
    if (!j.is_object()) {
        throw ConfigError("config: JSON configuration must be an object");
    }
    RunConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "sections") {
            if (!value.is_object()) throw ConfigError("config: 'sections' must be an object");
            for (const auto& [name, section] : value.items()) {
                if (!section.is_object()) throw ConfigError("config: section '" + name + "' must be an object");
                Section& out = cfg.sections[name];
                for (const auto& [k, v] : section.items()) {
                    out[k] = json_scalar(v, name + "." + k);
                }
            }
        } else {
            set_run_field(cfg, key, json_scalar(value, key));
        }
    }
    return cfg;
}

} // namespace

double parse_real(const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw ConfigError("'" + text + "' is not a finite number");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("'" + text + "' is not an unsigned integer");
    }
    return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(text);
    while (std::getline(is, cur, sep)) {
        parts.push_back(trim(cur));
    }
    if (!text.empty() && text.back() == sep) {
        parts.emplace_back();
    }
    return parts;
}

const std::string& Params::raw(const std::string& key) const {
    const auto it = values_->find(key);
    if (it == values_->end()) {
        throw ConfigError("internal: key '" + name_ + "." + key + "' missing from schema");
    }
    return it->second;
}

void Params::fail(const std::string& key, const std::string& why) const {
    throw ConfigError(name_ + "." + key + ": " + why);
}

std::string Params::choice(const std::string& key, std::initializer_list<const char*> allowed) const {
    const std::string& v = raw(key);
    for (const char* a : allowed) {
        if (v == a) return v;
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    fail(key, "'" + v + "' is not one of {" + list + "}");
}

double Params::real(const std::string& key) const {
    try {
        return parse_real(raw(key));
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
}

std::size_t Params::count(const std::string& key, std::size_t min) const {
    std::uint64_t v = 0;
    try {
        v = parse_u64(raw(key));
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
    if (v < min) fail(key, "must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

bool Params::flag(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "'" + v + "' is not a boolean");
}

std::vector<double> Params::reals(const std::string& key) const {
    std::vector<double> out;
    try {
        for (const auto& part : split(raw(key), ',')) out.push_back(parse_real(part));
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
    if (out.empty()) fail(key, "expected a comma-separated list of numbers");
    return out;
}

std::vector<std::size_t> Params::counts(const std::string& key) const {
    std::vector<std::size_t> out;
    try {
        for (const auto& part : split(raw(key), ',')) out.push_back(static_cast<std::size_t>(parse_u64(part)));
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
    if (out.empty()) fail(key, "expected a comma-separated list of counts");
    return out;
}

std::vector<std::string> Params::words(const std::string& key) const {
    auto out = split(raw(key), ',');
    if (out.empty() || std::any_of(out.begin(), out.end(), [](const std::string& w) { return w.empty(); })) {
        fail(key, "expected a comma-separated list");
    }
    return out;
}

Vector Params::vector(const std::string& key) const {
    const auto xs = reals(key);
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

namespace {

Matrix parse_matrix(const std::string& text) {
    const auto rows = split(text, ';');
    std::vector<std::vector<double>> entries;
    for (const auto& row : rows) {
        std::vector<double> r;
        for (const auto& e : split(row, ',')) r.push_back(parse_real(e));
        if (r.empty() || (!entries.empty() && r.size() != entries.front().size())) {
            throw ConfigError("matrix rows must be nonempty and of equal length");
        }
        entries.push_back(std::move(r));
    }
    if (entries.empty() || entries.size() != entries.front().size()) {
        throw ConfigError("matrix must be square");
    }
    const auto n = static_cast<Eigen::Index>(entries.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = entries[i][j];
    }
    return m;
}

} // namespace

Matrix Params::matrix(const std::string& key) const {
    try {
        return parse_matrix(raw(key));
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
}

std::vector<Matrix> Params::matrices(const std::string& key) const {
    std::vector<Matrix> out;
    try {
        for (const auto& part : split(raw(key), '|')) out.push_back(parse_matrix(part));
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
    return out;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> names = {"exponent",   "drift",   "expansion",   "distortion",
                                                   "properties", "cutoff", "horofunction"};
    return names;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"paper-fig1", "paper-fig2", "paper-fig3"};
    return names;
}

RunConfig preset(std::string_view name) {
    RunConfig cfg;
    cfg.command = "cutoff";
    cfg.preset = std::string(name);
    Section& p = cfg.sections["params"];
    p = {{"scale_rule", "inverse_sqrt"}, {"precision", "0.001"}, {"ensemble", "100000"},
         {"max_depth", "30"},            {"epsilon", "0.25"},    {"cap", "false"}};
    if (name == "paper-fig1" || name == "paper-fig2") {
        p["widths"] = "1,2";
        p["activations"] = "tanh";
    } else if (name == "paper-fig3") {
        p["widths"] = "1";
        p["activations"] = "silu";
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
    return cfg;
}

RunConfig parse_config(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        return parse_json(text);
    }
    return parse_ini(text);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void merge_into(RunConfig& base, const RunConfig& top) {
    const RunConfig defaults;
    if (!top.command.empty()) base.command = top.command;
    if (top.seed != defaults.seed) base.seed = top.seed;
    if (top.out != defaults.out) base.out = top.out;
    if (top.threads != defaults.threads) base.threads = top.threads;
    if (!top.preset.empty()) base.preset = top.preset;
    for (const auto& [name, section] : top.sections) {
        for (const auto& [key, value] : section) {
            base.sections[name][key] = value;
        }
    }
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    const std::string lhs = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const auto dot = lhs.find('.');
    std::string section = dot == std::string::npos ? "" : lhs.substr(0, dot);
    const std::string key = dot == std::string::npos ? lhs : lhs.substr(dot + 1);
    if (section.empty()) {
        static const std::vector<std::string> run_keys = {"command", "seed", "out", "threads"};
        section = std::find(run_keys.begin(), run_keys.end(), key) != run_keys.end() ? "run" : "params";
    }
    if (key.empty()) {
        throw ConfigError("override '" + std::string(assignment) + "' has an empty key");
    }
    if (section == "run") {
        set_run_field(cfg, key, value);
    } else {
        cfg.sections[section][key] = value;
    }
}

RunConfig resolve(const RunConfig& cfg) {
    const auto& schemas = params_schemas();
    const auto schema = schemas.find(cfg.command);
    if (cfg.command.empty()) {
        throw ConfigError("no command given");
    }
    if (schema == schemas.end()) {
        throw ConfigError("unknown command '" + cfg.command + "'");
    }
    RunConfig out = cfg;
    auto fill = [](Section& section, const Section& defaults, const std::string& name) {
        for (const auto& [key, value] : section) {
            if (!defaults.contains(key)) {
                throw ConfigError("unknown key '" + name + "." + key + "'");
            }
        }
        for (const auto& [key, value] : defaults) {
            section.try_emplace(key, value);
        }
    };
    out.sections.try_emplace("params");
    for (auto& [name, section] : out.sections) {
        if (name == "params") {
            fill(section, schema->second, name);
        } else if (cfg.command == "properties" && is_check_section(name)) {
            if (name.find('.') != std::string::npos) {
                throw ConfigError("section name '" + name + "' must not contain '.'");
            }
            fill(section, check_schema(), name);
        } else {
            throw ConfigError("unknown section '" + name + "' for command '" + cfg.command + "'");
        }
    }
    if (out.sections.at("params").empty() && cfg.command == "properties") {
        out.sections.erase("params");
    }
    return out;
}

nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json sections = nlohmann::json::object();
    for (const auto& [name, section] : cfg.sections) {
        sections[name] = section;
    }
    nlohmann::json j = {
        {"command", cfg.command}, {"seed", cfg.seed}, {"out", cfg.out},
        {"threads", cfg.threads}, {"sections", sections},
    };
    if (!cfg.preset.empty()) j["preset"] = cfg.preset;
    return j;
}

std::string to_ini(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[run]\ncommand = " << cfg.command << "\nseed = " << cfg.seed << "\nout = " << cfg.out
       << "\nthreads = " << cfg.threads << '\n';
    if (!cfg.preset.empty()) os << "preset = " << cfg.preset << '\n';
    for (const auto& [name, section] : cfg.sections) {
        os << "\n[" << name << "]\n";
        for (const auto& [key, value] : section) os << key << " = " << value << '\n';
    }
    return os.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot write '" + tmp.string() + "'");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp);
            throw ConfigError("failed writing '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

} // namespace metricnet::cli
