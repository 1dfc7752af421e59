#pragma once

// Run configuration: a sectioned key = value text file, command-line
// overrides of the form section.key=value, and a JSON form used for the
// sidecar written next to every result.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "colltherm/errors.hpp"

namespace colltherm::cli {

struct RunConfig {
    struct Physical {
        double omega = 1.0;
        double gamma_tau_se = 0.4;
        double g_tau_sa = std::numbers::pi / 2;
        std::string probe = "ground";  // ground | thermal | mixture
        double probe_temperature = 0.0;
        double probe_q = 1.0;
    } physical;
    struct Grid {
        double t_min = 0.05;
        double t_max = 5.0;
        std::int64_t n_points = 500;
    } grid;
    struct PriorCfg {
        double alpha = -100.0;
    } prior;
    struct Experiment {
        std::string model = "auto";  // auto | closed-form | numeric | exact-filter | markov1 | markov2
        double true_temperature = 1.5;
        std::int64_t n_min = 10;
        std::int64_t n_max = 10000;
        std::int64_t per_decade = 4;
        std::int64_t n_trajectories = 3000;
        std::int64_t seed = 1;
        std::int64_t threads = 1;
    } experiment;
    struct Bmse {
        std::int64_t n_points = 150;
        std::int64_t n_max = 1000000;
        std::int64_t n_trajectories = 500;
    } bmse;
    struct Sweep {
        double center = 1.5;
        std::vector<double> deltas{0.1, 0.25, 0.5, 0.75, 1.0};
        double gamma_min = 0.05;
        double gamma_max = 2.0;
        std::int64_t gamma_points = 40;
        std::vector<double> g_values{std::numbers::pi / 2};
        std::int64_t n_points = 150;
    } sweep;
    struct Noise {
        std::vector<double> probe_temperatures{0.0, 0.5, 1.0, 1.5, 2.0};
        double t_min = 0.1;
        double t_max = 5.0;
        std::int64_t n_points = 150;
    } noise;
    struct Bias {
        std::vector<double> q_values{1.0, 0.95, 0.9};
        double t_min = 0.1;
        double t_max = 5.0;
        std::int64_t n_points = 150;
        std::int64_t n_max = 10000000;
        std::int64_t n_trajectories = 500;
    } bias;
    struct MutualInfo {
        double temperature = 2.0;
        double gamma_tau_se = 0.2;
        std::vector<double> g_values{0.5, 1.0, std::numbers::pi / 2};
        std::int64_t max_lag = 8;
    } mutual_info;
    struct FisherMap {
        double t_min = 0.1;
        double t_max = 5.0;
        std::int64_t t_points = 50;
        double gamma_min = 0.05;
        double gamma_max = 2.0;
        std::int64_t gamma_points = 40;
    } fisher_map;
    struct Output {
        std::string dir = ".";
        std::string format = "csv";  // csv | json
    } output;
};

// ---------------------------------------------------------------------------
// Field registry
// ---------------------------------------------------------------------------

using FieldRef = std::variant<double*, std::int64_t*, std::string*, std::vector<double>*>;

struct Field {
    std::string key;  // section.name
    FieldRef ref;
    std::string note;
    bool affects_results = true;
};

inline std::vector<Field> fields(RunConfig& c) {
    return {
        {"physical.omega", &c.physical.omega, "ancilla and system gap"},
        {"physical.gamma_tau_se", &c.physical.gamma_tau_se, "system-bath coupling times contact time"},
        {"physical.g_tau_sa", &c.physical.g_tau_sa, "system-ancilla coupling; pi/2 is a full swap"},
        {"physical.probe", &c.physical.probe, "ancilla preparation: ground, thermal or mixture"},
        {"physical.probe_temperature", &c.physical.probe_temperature, "temperature of thermal probes"},
        {"physical.probe_q", &c.physical.probe_q, "ground-state weight of mixture probes"},
        {"grid.t_min", &c.grid.t_min, "lower end of the temperature grid"},
        {"grid.t_max", &c.grid.t_max, "upper end of the temperature grid"},
        {"grid.n_points", &c.grid.n_points, "grid points used for single-temperature studies"},
        {"prior.alpha", &c.prior.alpha, "prior shape; 0 is uniform, large negative values flatten the interior"},
        {"experiment.model", &c.experiment.model, "inference model: auto, closed-form, numeric, exact-filter, markov1, markov2"},
        {"experiment.true_temperature", &c.experiment.true_temperature, "true temperature of fixed-temperature studies"},
        {"experiment.n_min", &c.experiment.n_min, "first checkpoint"},
        {"experiment.n_max", &c.experiment.n_max, "record length of fixed-temperature studies"},
        {"experiment.per_decade", &c.experiment.per_decade, "checkpoints per decade of n"},
        {"experiment.n_trajectories", &c.experiment.n_trajectories, "ensemble size of the MSE study"},
        {"experiment.seed", &c.experiment.seed, "master seed"},
        {"experiment.threads", &c.experiment.threads, "worker threads (results do not depend on it)", false},
        {"bmse.n_points", &c.bmse.n_points, "prior grid points of the BMSE study"},
        {"bmse.n_max", &c.bmse.n_max, "record length of the BMSE study"},
        {"bmse.n_trajectories", &c.bmse.n_trajectories, "ensemble size of the BMSE study"},
        {"sweep.center", &c.sweep.center, "centre of the symmetric prior intervals"},
        {"sweep.deltas", &c.sweep.deltas, "half-widths of the prior intervals"},
        {"sweep.gamma_min", &c.sweep.gamma_min, "smallest gamma_tau_se"},
        {"sweep.gamma_max", &c.sweep.gamma_max, "largest gamma_tau_se"},
        {"sweep.gamma_points", &c.sweep.gamma_points, "gamma_tau_se grid size"},
        {"sweep.g_values", &c.sweep.g_values, "g_tau_sa values"},
        {"sweep.n_points", &c.sweep.n_points, "prior grid points per interval"},
        {"noise.probe_temperatures", &c.noise.probe_temperatures, "probe temperatures compared with ground probes"},
        {"noise.t_min", &c.noise.t_min, "lower end of the averaging interval"},
        {"noise.t_max", &c.noise.t_max, "upper end of the averaging interval"},
        {"noise.n_points", &c.noise.n_points, "grid points of the averaging interval"},
        {"bias.q_values", &c.bias.q_values, "ground-state weights of the record-generating probes"},
        {"bias.t_min", &c.bias.t_min, "lower end of the prior interval"},
        {"bias.t_max", &c.bias.t_max, "upper end of the prior interval"},
        {"bias.n_points", &c.bias.n_points, "prior grid points"},
        {"bias.n_max", &c.bias.n_max, "record length"},
        {"bias.n_trajectories", &c.bias.n_trajectories, "ensemble size"},
        {"mutual_info.temperature", &c.mutual_info.temperature, "bath temperature"},
        {"mutual_info.gamma_tau_se", &c.mutual_info.gamma_tau_se, "system-bath coupling"},
        {"mutual_info.g_values", &c.mutual_info.g_values, "g_tau_sa values"},
        {"mutual_info.max_lag", &c.mutual_info.max_lag, "largest ancilla separation"},
        {"fisher_map.t_min", &c.fisher_map.t_min, "lowest temperature"},
        {"fisher_map.t_max", &c.fisher_map.t_max, "highest temperature"},
        {"fisher_map.t_points", &c.fisher_map.t_points, "temperature points"},
        {"fisher_map.gamma_min", &c.fisher_map.gamma_min, "smallest gamma_tau_se"},
        {"fisher_map.gamma_max", &c.fisher_map.gamma_max, "largest gamma_tau_se"},
        {"fisher_map.gamma_points", &c.fisher_map.gamma_points, "gamma_tau_se points"},
        {"output.dir", &c.output.dir, "output directory", false},
        {"output.format", &c.output.format, "csv or json", false},
    };
}

// ---------------------------------------------------------------------------
// Scalar text forms
// ---------------------------------------------------------------------------

// Shortest text that parses back to the same double.
inline std::string format_shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, std::string_view text) {
    text = trim(text);
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || text.empty())
        throw ConfigError(key, "expected a number, got '" + std::string(text) + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& key, std::string_view text) {
    text = trim(text);
    std::int64_t v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec == std::errc{} && r.ptr == text.data() + text.size() && !text.empty()) return v;
    // Accept integral values written in floating form, such as 1e6.
    const double d = parse_double(key, text);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(key, "expected an integer");
    return static_cast<std::int64_t>(d);
}

inline std::vector<double> parse_list(const std::string& key, std::string_view text) {
    std::vector<double> out;
    text = trim(text);
    if (text.empty()) return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        out.push_back(parse_double(key, item));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline std::string value_text(const FieldRef& ref) {
    return std::visit(
        [](auto* p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) return format_shortest(*p);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(*p);
            else if constexpr (std::is_same_v<T, std::string>) return *p;
            else {
                std::string s;
                for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + format_shortest((*p)[i]);
                return s;
            }
        },
        ref);
}

// ---------------------------------------------------------------------------
// Setting values
// ---------------------------------------------------------------------------

inline void check_choice(const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (value == a) return;
    std::string list;
    for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    throw ConfigError(key, "'" + value + "' is not one of: " + list);
}

inline void set_value(RunConfig& c, const std::string& key, std::string_view text) {
    for (auto& f : fields(c)) {
        if (f.key != key) continue;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, double>) *p = parse_double(key, text);
                else if constexpr (std::is_same_v<T, std::int64_t>) *p = parse_int(key, text);
                else if constexpr (std::is_same_v<T, std::string>) *p = std::string(trim(text));
                else *p = parse_list(key, text);
            },
            f.ref);
        if (key == "physical.probe") check_choice(key, c.physical.probe, {"ground", "thermal", "mixture"});
        if (key == "experiment.model")
            check_choice(key, c.experiment.model, {"auto", "closed-form", "numeric", "exact-filter", "markov1", "markov2"});
        if (key == "output.format") check_choice(key, c.output.format, {"csv", "json"});
        return;
    }
    throw ConfigError(key, "unknown configuration key");
}

// `section.key=value`
inline void apply_override(RunConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError(assignment, "override must have the form section.key=value");
    set_value(c, std::string(trim(std::string_view(assignment).substr(0, eq))), std::string_view(assignment).substr(eq + 1));
}

// ---------------------------------------------------------------------------
// Text and JSON forms
// ---------------------------------------------------------------------------

inline std::string to_ini(const RunConfig& config) {
    RunConfig c = config;
    std::ostringstream os;
    std::string section;
    for (const auto& f : fields(c)) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
            section = sec;
        }
        os << f.key.substr(dot + 1) << " = " << value_text(f.ref) << "\n";
    }
    return os.str();
}

inline void parse_ini(RunConfig& c, const std::string& text) {
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto s = trim(line);
        if (s.empty() || s.front() == '#' || s.front() == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno), "malformed section header");
            section = std::string(trim(s.substr(1, s.size() - 2)));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        const std::string name(trim(s.substr(0, eq)));
        const std::string key = section.empty() ? name : section + "." + name;
        set_value(c, key, s.substr(eq + 1));
    }
}

inline nlohmann::ordered_json to_json(const RunConfig& config) {
    RunConfig c = config;
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& f : fields(c)) {
        const auto dot = f.key.find('.');
        auto& slot = j[f.key.substr(0, dot)][f.key.substr(dot + 1)];
        std::visit([&](auto* p) { slot = *p; }, f.ref);
    }
    return j;
}

inline RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    if (!j.is_object()) throw ConfigError("<json>", "configuration must be a JSON object");
    for (const auto& [section, body] : j.items()) {
        if (!body.is_object()) throw ConfigError(section, "section must be an object");
        for (const auto& [name, value] : body.items()) {
            const std::string key = section + "." + name;
            bool found = false;
            for (auto& f : fields(c)) {
                if (f.key != key) continue;
                found = true;
                try {
                    std::visit([&](auto* p) { *p = value.get<std::remove_pointer_t<decltype(p)>>(); }, f.ref);
                } catch (const nlohmann::json::exception&) {
                    throw ConfigError(key, "wrong JSON type");
                }
            }
            if (!found) throw ConfigError(key, "unknown configuration key");
            if (value.is_string()) set_value(c, key, value.get<std::string>());  // re-run choice checks
        }
    }
    return c;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto body = trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("--config", e.what());
        }
        // A result sidecar carries the configuration under "config".
        return from_json(j.contains("config") ? j.at("config") : j);
    }
    RunConfig c;
    parse_ini(c, text);
    return c;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_ini(a) == to_ini(b); }

// FNV-1a over the settings that influence results.
inline std::string config_hash(const RunConfig& config, const std::string& subcommand) {
    RunConfig c = config;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    mix(subcommand);
    for (const auto& f : fields(c)) {
        if (!f.affects_results) continue;
        mix(f.key);
        mix("=");
        mix(value_text(f.ref));
        mix("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace colltherm::cli
