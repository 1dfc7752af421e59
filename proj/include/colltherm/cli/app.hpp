#pragma once

// Subcommands of the colltherm tool. Each one builds its inputs from a
// RunConfig, runs a library operation and writes one result table plus a
// JSON sidecar holding the configuration.

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "colltherm/cli/config.hpp"
#include "colltherm/cli/table.hpp"
#include "colltherm/experiments.hpp"

namespace colltherm::cli {

struct RunResult {
    std::string summary;
    std::vector<std::string> files;
};

inline ModelParams model_params(const RunConfig& c) {
    ModelParams p;
    p.omega = c.physical.omega;
    p.gamma_tau_se = c.physical.gamma_tau_se;
    p.g_tau_sa = c.physical.g_tau_sa;
    if (c.physical.probe == "thermal") p.probe = ThermalProbe{c.physical.probe_temperature};
    else if (c.physical.probe == "mixture") p.probe = MixtureProbe{c.physical.probe_q};
    else p.probe = GroundProbe{};
    p.validate();
    return p;
}

inline LikelihoodModel inference_model(const RunConfig& c, const ModelParams& p) {
    const std::string& m = c.experiment.model;
    if (m == "auto") return p.full_swap() ? LikelihoodModel::iid_closed_form(p) : LikelihoodModel::iid_numeric(p);
    if (m == "closed-form") return LikelihoodModel::iid_closed_form(p);
    if (m == "numeric") return LikelihoodModel::iid_numeric(p);
    if (m == "exact-filter") return LikelihoodModel::exact_filter(p);
    if (m == "markov1") return LikelihoodModel::markov(p, 1);
    if (m == "markov2") return LikelihoodModel::markov(p, 2);
    throw ConfigError("experiment.model", "unknown model '" + m + "'");
}

inline int as_count(const std::string& key, std::int64_t v, std::int64_t lo) {
    if (v < lo || v > 100000000) throw ConfigError(key, "value out of range");
    return static_cast<int>(v);
}

inline std::uint64_t as_length(const std::string& key, std::int64_t v) {
    if (v < 1) throw ConfigError(key, "must be at least 1");
    return static_cast<std::uint64_t>(v);
}

inline std::vector<std::uint64_t> checkpoints(const RunConfig& c, std::uint64_t n_max) {
    const auto n_min = std::min(as_length("experiment.n_min", c.experiment.n_min), n_max);
    return log_checkpoints(n_min, n_max, as_count("experiment.per_decade", c.experiment.per_decade, 1));
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out;
    if (n == 1) return {a};
    for (int i = 0; i < n; ++i) out.push_back(i == n - 1 ? b : a + (b - a) * i / (n - 1));
    return out;
}

inline Prior grid_prior(const RunConfig& c) {
    return make_prior(c.grid.t_min, c.grid.t_max, c.prior.alpha, as_count("grid.n_points", c.grid.n_points, 2));
}

inline std::string fmt(double v) { return format_shortest(v); }

// ---------------------------------------------------------------------------

inline Table cmd_posterior(const RunConfig& c, std::string& summary) {
    const auto params = model_params(c);
    const auto model = inference_model(c, params);
    const Prior prior = grid_prior(c);
    const auto n_max = as_length("experiment.n_max", c.experiment.n_max);
    const double t0 = c.experiment.true_temperature;
    const auto tr = sample_trajectory(model, t0, n_max, derive_stream_seed(static_cast<std::uint64_t>(c.experiment.seed), 0));
    const GridLikelihood gl(model, prior.grid());
    PosteriorState state(prior);
    Table t{"posterior of a single record at T0 = " + fmt(t0), {"n", "temperature", "posterior"}, {}};
    std::uint64_t done = 0;
    for (auto n : checkpoints(c, n_max)) {
        state.update(std::span(tr.outcomes).subspan(done, n - done), gl);
        done = n;
        for (int k = 0; k < prior.grid().size(); ++k)
            t.add({static_cast<std::int64_t>(n), prior.grid()[static_cast<std::size_t>(k)],
                   state.posterior()[static_cast<std::size_t>(k)]});
    }
    summary = "BA = " + fmt(bayes_average(state)) + ", posterior sd = " + fmt(std::sqrt(posterior_variance(state))) +
              " at n = " + std::to_string(n_max);
    return t;
}

inline Table cmd_mse(const RunConfig& c, std::string& summary) {
    const auto params = model_params(c);
    const auto model = inference_model(c, params);
    const auto n_max = as_length("experiment.n_max", c.experiment.n_max);
    ExperimentSpec spec{model, std::nullopt, grid_prior(c), n_max, checkpoints(c, n_max),
                        as_length("experiment.n_trajectories", c.experiment.n_trajectories),
                        static_cast<std::uint64_t>(c.experiment.seed),
                        as_count("experiment.threads", c.experiment.threads, 1)};
    const double t0 = c.experiment.true_temperature;
    const auto s = mse_study(spec, t0);
    const double f = fisher_information(model, t0);
    Table t{"mean-squared error of the Bayesian average at T0 = " + fmt(t0),
            {"n", "mse", "mse_stderr", "crb", "mean_posterior_variance", "posterior_variance_stderr", "mean_estimate",
             "estimate_stderr"},
            {}};
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
        const double n = static_cast<double>(s.checkpoints[i]);
        t.add({static_cast<std::int64_t>(s.checkpoints[i]), s.mean_sq_error[i], s.sq_error_stderr[i], 1.0 / (n * f),
               s.mean_posterior_variance[i], s.posterior_variance_stderr[i], s.mean_estimate[i], s.estimate_stderr[i]});
    }
    summary = "MSE * n F(T0) = " + fmt(s.mean_sq_error.back() * static_cast<double>(n_max) * f) + " at n = " +
              std::to_string(n_max);
    return t;
}

inline Table cmd_bmse(const RunConfig& c, std::string& summary) {
    const auto params = model_params(c);
    const auto model = inference_model(c, params);
    const auto n_max = as_length("bmse.n_max", c.bmse.n_max);
    const Prior prior = make_prior(c.grid.t_min, c.grid.t_max, c.prior.alpha, as_count("bmse.n_points", c.bmse.n_points, 2));
    ExperimentSpec spec{model, std::nullopt, prior, n_max, checkpoints(c, n_max),
                        as_length("bmse.n_trajectories", c.bmse.n_trajectories),
                        static_cast<std::uint64_t>(c.experiment.seed),
                        as_count("experiment.threads", c.experiment.threads, 1)};
    const auto s = bmse_study(spec);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double avg = nan, fp = nan;
    if (!prior.shape().uniform()) {
        avg = average_fisher(prior, model);
        fp = prior_fisher(prior);
    }
    const double e_inv = model.is_iid() ? expected_inverse_fisher(prior, model) : nan;
    Table t{"Bayesian mean-squared error with temperatures drawn from the prior",
            {"n", "bmse", "bmse_stderr", "mean_posterior_loss", "posterior_loss_stderr", "vtsb", "asymptotic_bmse"},
            {}};
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
        const auto n = s.checkpoints[i];
        const double nd = static_cast<double>(n);
        t.add({static_cast<std::int64_t>(n), s.mean_sq_error[i], s.sq_error_stderr[i], s.mean_posterior_variance[i],
               s.posterior_variance_stderr[i], std::isnan(avg) ? nan : van_trees_from(avg, fp, n), e_inv / nd});
    }
    summary = "BMSE = " + fmt(s.mean_sq_error.back()) + " +- " + fmt(s.sq_error_stderr.back()) +
              ", asymptotic = " + fmt(e_inv / static_cast<double>(n_max)) + " at n = " + std::to_string(n_max);
    return t;
}

inline Table cmd_sweep(const RunConfig& c, std::string& summary) {
    const ModelParams base = model_params(c);
    const auto gammas = linspace(c.sweep.gamma_min, c.sweep.gamma_max, as_count("sweep.gamma_points", c.sweep.gamma_points, 1));
    if (c.sweep.g_values.empty()) throw ConfigError("sweep.g_values", "needs at least one value");
    const int n_points = as_count("sweep.n_points", c.sweep.n_points, 2);
    Table t{"asymptotic error E_P[1/F] on intervals [center - delta, center + delta]; delta = 0 rows hold 1/F(center)",
            {"delta", "t_min", "t_max", "g_tau_sa", "gamma_tau_se", "expected_inverse_fisher", "is_optimum"},
            {}};
    const double center = c.sweep.center;
    for (double g : c.sweep.g_values) {
        ModelParams p = base;
        p.g_tau_sa = g;
        double best_f = -1.0, best_gamma = gammas.front();
        std::vector<double> inv;
        for (double gamma : gammas) {
            p.gamma_tau_se = gamma;
            const double f = fisher_information(preferred_iid_model(p), center);
            inv.push_back(1.0 / f);
            if (f > best_f) {
                best_f = f;
                best_gamma = gamma;
            }
        }
        for (std::size_t i = 0; i < gammas.size(); ++i)
            t.add({0.0, center, center, g, gammas[i], inv[i], static_cast<std::int64_t>(gammas[i] == best_gamma)});
    }
    std::string optima;
    for (double delta : c.sweep.deltas) {
        if (!(delta > 0.0) || !(center - delta > 0.0)) throw ConfigError("sweep.deltas", "intervals must stay at positive temperature");
        const PriorInterval interval{center - delta, center + delta, c.prior.alpha, n_points};
        const auto table = sweep_asymptotic(interval, gammas, c.sweep.g_values, base);
        for (const auto& pt : table.points) {
            bool optimum = false;
            for (const auto& m : table.minima)
                optimum = optimum || (m.g_tau_sa == pt.g_tau_sa && m.gamma_tau_se == pt.gamma_tau_se);
            t.add({delta, interval.t_min, interval.t_max, pt.g_tau_sa, pt.gamma_tau_se, pt.expected_inverse_fisher,
                   static_cast<std::int64_t>(optimum)});
        }
        optima += (optima.empty() ? "" : ", ") + fmt(delta) + ":" + fmt(table.minima.front().gamma_tau_se);
    }
    summary = "optimal gamma_tau_se by delta {" + optima + "}";
    return t;
}

inline Table cmd_bounds(const RunConfig& c, std::string& summary) {
    const auto params = model_params(c);
    const auto model = inference_model(c, params);
    const Prior prior = grid_prior(c);
    const auto n_max = as_length("experiment.n_max", c.experiment.n_max);
    Table t{"Bayesian bounds for the configured prior",
            {"n", "prior_fisher", "avg_fisher", "vtsb", "asymptotic_bmse", "crb_at_true_temperature"},
            {}};
    BoundReport last{};
    for (auto n : checkpoints(c, n_max)) {
        last = bound_report(prior, model, n, c.experiment.true_temperature);
        t.add({static_cast<std::int64_t>(n), last.prior_fisher, last.avg_fisher, last.vtsb, last.asymptotic_bmse, last.crb_at});
    }
    summary = "F_P = " + fmt(last.prior_fisher) + ", E_P[F] = " + fmt(last.avg_fisher) + ", VTSB = " + fmt(last.vtsb) +
              " at n = " + std::to_string(n_max);
    return t;
}

inline Table cmd_mutual_info(const RunConfig& c, std::string& summary) {
    ModelParams p = model_params(c);
    p.gamma_tau_se = c.mutual_info.gamma_tau_se;
    const int max_lag = as_count("mutual_info.max_lag", c.mutual_info.max_lag, 1);
    Table t{"mutual information between ancillas at distance lag, T = " + fmt(c.mutual_info.temperature),
            {"g_tau_sa", "lag", "mutual_information"},
            {}};
    std::string first;
    for (double g : c.mutual_info.g_values) {
        p.g_tau_sa = g;
        p.validate();
        for (int lag = 1; lag <= max_lag; ++lag) {
            const double mi = mutual_information(p, c.mutual_info.temperature, lag);
            t.add({g, static_cast<std::int64_t>(lag), mi});
            if (lag == 1) first += (first.empty() ? "" : ", ") + fmt(g) + ":" + fmt(mi);
        }
    }
    summary = "I(1) by g_tau_sa {" + first + "}";
    return t;
}

inline Table cmd_probe_noise(const RunConfig& c, std::string& summary) {
    const Prior prior = make_prior(c.noise.t_min, c.noise.t_max, c.prior.alpha, as_count("noise.n_points", c.noise.n_points, 2));
    ModelParams p = model_params(c);
    p.probe = GroundProbe{};
    const auto rows = probe_noise_study(c.noise.probe_temperatures, prior, p);
    Table t{"asymptotic error with thermal probes relative to ground-state probes",
            {"probe_temperature", "expected_inverse_fisher", "ratio"},
            {}};
    std::string s;
    for (const auto& r : rows) {
        t.add({r.probe_temperature, r.expected_inverse_fisher, r.ratio});
        s += (s.empty() ? "" : ", ") + fmt(r.probe_temperature) + ":" + fmt(r.ratio);
    }
    summary = "ratio by probe temperature {" + s + "}";
    return t;
}

inline Table cmd_bias(const RunConfig& c, std::string& summary) {
    ModelParams p = model_params(c);
    p.probe = GroundProbe{};
    const auto n_max = as_length("bias.n_max", c.bias.n_max);
    ExperimentSpec spec{LikelihoodModel::iid_closed_form(p), std::nullopt,
                        make_prior(c.bias.t_min, c.bias.t_max, c.prior.alpha, as_count("bias.n_points", c.bias.n_points, 2)),
                        n_max, checkpoints(c, n_max), as_length("bias.n_trajectories", c.bias.n_trajectories),
                        static_cast<std::uint64_t>(c.experiment.seed), as_count("experiment.threads", c.experiment.threads, 1)};
    const auto curves = mixture_bias_study(c.bias.q_values, spec);
    Table t{"BMSE of ideal-model inference on records from probe mixtures with ground weight q",
            {"q", "n", "bmse", "bmse_stderr", "plateau_level", "plateau_slope"},
            {}};
    std::string s;
    for (const auto& bc : curves) {
        for (std::size_t i = 0; i < bc.curve.checkpoints.size(); ++i)
            t.add({bc.q, static_cast<std::int64_t>(bc.curve.checkpoints[i]), bc.curve.values[i], bc.curve.stderr_[i],
                   bc.plateau.level, bc.plateau.slope});
        s += (s.empty() ? "" : ", ") + fmt(bc.q) + ":" + fmt(bc.plateau.level);
    }
    summary = "last-decade BMSE by q {" + s + "}";
    return t;
}

inline Table cmd_fisher_map(const RunConfig& c, std::string& summary) {
    const ModelParams base = model_params(c);
    const auto temps = linspace(c.fisher_map.t_min, c.fisher_map.t_max, as_count("fisher_map.t_points", c.fisher_map.t_points, 1));
    const auto gammas =
        linspace(c.fisher_map.gamma_min, c.fisher_map.gamma_max, as_count("fisher_map.gamma_points", c.fisher_map.gamma_points, 1));
    Table t{"Fisher information per ancilla relative to a thermalized ancilla, g_tau_sa = " + fmt(base.g_tau_sa),
            {"temperature", "gamma_tau_se", "fisher", "thermal_fisher", "ratio"},
            {}};
    double best = 0.0;
    for (double gamma : gammas) {
        ModelParams p = base;
        p.gamma_tau_se = gamma;
        const auto model = preferred_iid_model(p);
        for (double temp : temps) {
            const auto r = fisher_report(model, temp);
            t.add({temp, gamma, r.fisher, r.thermal_fisher, r.ratio});
            best = std::max(best, r.ratio);
        }
    }
    summary = "max F/F_th = " + fmt(best);
    return t;
}

// ---------------------------------------------------------------------------

using Command = std::function<Table(const RunConfig&, std::string&)>;

inline const std::map<std::string, std::pair<Command, std::string>>& commands() {
    static const std::map<std::string, std::pair<Command, std::string>> table{
        {"posterior", {cmd_posterior, "posterior snapshots of one simulated record"}},
        {"mse", {cmd_mse, "ensemble MSE at a fixed true temperature"}},
        {"bmse", {cmd_bmse, "ensemble BMSE with temperatures drawn from the prior"}},
        {"sweep", {cmd_sweep, "asymptotic error over coupling parameters and prior widths"}},
        {"bounds", {cmd_bounds, "van Trees bound and asymptotic BMSE"}},
        {"mutual-info", {cmd_mutual_info, "mutual information between ancillas versus distance"}},
        {"probe-noise", {cmd_probe_noise, "precision lost with thermal probes"}},
        {"bias", {cmd_bias, "BMSE saturation under probe-preparation mismatch"}},
        {"fisher-map", {cmd_fisher_map, "Fisher ratio over temperature and coupling"}},
    };
    return table;
}

inline RunResult run(const std::string& subcommand, const RunConfig& c) {
    const auto it = commands().find(subcommand);
    if (it == commands().end()) throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
    std::string summary;
    const Table table = it->second.first(c, summary);

    std::error_code ec;
    std::filesystem::create_directories(c.output.dir, ec);
    if (ec) throw ConfigError("output.dir", "cannot create '" + c.output.dir + "': " + ec.message());
    const std::string stem = (std::filesystem::path(c.output.dir) / (subcommand + "-" + config_hash(c, subcommand))).string();

    nlohmann::ordered_json sidecar;
    sidecar["subcommand"] = subcommand;
    sidecar["config"] = to_json(c);

    RunResult result;
    if (c.output.format == "json") {
        nlohmann::ordered_json j;
        j["subcommand"] = subcommand;
        j["config"] = to_json(c);
        j["table"] = to_json(table);
        write_file(stem + ".json", j.dump(2) + "\n");
        result.files.push_back(stem + ".json");
    } else {
        write_file(stem + ".csv", to_csv(table));
        result.files.push_back(stem + ".csv");
    }
    write_file(stem + ".config.json", sidecar.dump(2) + "\n");
    result.files.push_back(stem + ".config.json");
    result.summary = subcommand + ": " + summary + " -> " + result.files.front();
    return result;
}

inline std::string list_defaults() {
    RunConfig c;
    std::string out;
    std::string section;
    for (const auto& f : fields(c)) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
            section = sec;
        }
        std::string line = f.key.substr(dot + 1) + " = " + value_text(f.ref);
        if (line.size() < 36) line.resize(36, ' ');
        out += line + "  # " + f.note + "\n";
    }
    return out;
}

// Exit codes: 0 success, 1 internal error, 2 configuration error, 3 domain error.
inline int main_entry(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Collisional qubit thermometry: Bayesian inference and metrology studies", "colltherm"};
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::int64_t> seed, threads;
    std::optional<std::string> out_dir;
    bool show_defaults = false;
    app.add_option("--config", config_path, "configuration file (sectioned key = value, or a JSON sidecar)");
    app.add_option("--set", sets, "override, section.key=value (repeatable)");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads");
    app.add_flag("--list-defaults", show_defaults, "print every configuration key with its default");
    app.require_subcommand(0, 1);
    for (const auto& [name, entry] : commands()) app.add_subcommand(name, entry.second)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (show_defaults) {
            out << list_defaults();
            return 0;
        }
        if (app.get_subcommands().empty()) {
            err << app.help();
            return 2;
        }
        RunConfig c = config_path.empty() ? RunConfig{} : load_config_file(config_path);
        if (seed) c.experiment.seed = *seed;
        if (threads) c.experiment.threads = *threads;
        if (out_dir) c.output.dir = *out_dir;
        for (const auto& s : sets) apply_override(c, s);
        const auto result = run(app.get_subcommands().front()->get_name(), c);
        out << result.summary << "\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const InvariantViolation& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace colltherm::cli
