#pragma once

// Monte Carlo error studies over ensembles of simulated records.
//
// Trajectory i draws everything from its own stream seeded by
// derive_stream_seed(master_seed, i), and per-trajectory results are reduced
// in index order, so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "colltherm/errors.hpp"
#include "colltherm/inference.hpp"
#include "colltherm/likelihood.hpp"
#include "colltherm/metrology.hpp"
#include "colltherm/rng.hpp"

namespace colltherm {

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Roughly `per_decade` log-spaced record lengths from n_min up to n_max
// (always included).
inline std::vector<std::uint64_t> log_checkpoints(std::uint64_t n_min, std::uint64_t n_max, int per_decade) {
    if (n_min < 1 || n_max < n_min || per_decade < 1) throw DomainError("invalid checkpoint schedule");
    std::vector<std::uint64_t> out;
    const double lo = std::log10(static_cast<double>(n_min)), hi = std::log10(static_cast<double>(n_max));
    const int steps = static_cast<int>(std::floor((hi - lo) * per_decade + 1e-9));
    for (int i = 0; i <= steps; ++i) {
        const auto n = static_cast<std::uint64_t>(std::llround(std::pow(10.0, lo + static_cast<double>(i) / per_decade)));
        if (out.empty() || n > out.back()) out.push_back(std::min(n, n_max));
    }
    if (out.back() != n_max) out.push_back(n_max);
    return out;
}

struct ExperimentSpec {
    LikelihoodModel model;                      // used for inference
    std::optional<LikelihoodModel> generator;   // generates records; defaults to `model`
    Prior prior;
    std::uint64_t n_max = 10000;
    std::vector<std::uint64_t> checkpoints;
    std::size_t n_trajectories = 3000;
    std::uint64_t master_seed = 1;
    int threads = 1;

    const LikelihoodModel& generating_model() const { return generator ? *generator : model; }

    void validate() const {
        if (n_trajectories < 1) throw DomainError("n_trajectories must be at least 1");
        if (checkpoints.empty()) throw DomainError("at least one checkpoint is required");
        if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
            std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end())
            throw DomainError("checkpoints must be strictly increasing");
        if (checkpoints.front() < 1 || checkpoints.back() > n_max)
            throw DomainError("checkpoints must lie in [1, n_max]");
    }
};

enum class ErrorKind { MSE, BMSE, PosteriorLoss };

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::MSE: return "mse";
        case ErrorKind::BMSE: return "bmse";
        case ErrorKind::PosteriorLoss: return "posterior_loss";
    }
    return "?";
}

struct ErrorCurve {
    std::vector<std::uint64_t> checkpoints;
    std::vector<double> values;
    std::vector<double> stderr_;
    ErrorKind kind = ErrorKind::MSE;
};

// Ensemble statistics at each checkpoint.
struct EnsembleSummary {
    std::vector<std::uint64_t> checkpoints;
    std::vector<double> mean_sq_error, sq_error_stderr;
    std::vector<double> mean_posterior_variance, posterior_variance_stderr;
    std::vector<double> mean_estimate, estimate_stderr;

    ErrorCurve curve(ErrorKind kind) const {
        if (kind == ErrorKind::PosteriorLoss) return {checkpoints, mean_posterior_variance, posterior_variance_stderr, kind};
        return {checkpoints, mean_sq_error, sq_error_stderr, kind};
    }
};

struct CheckpointSample {
    double estimate;
    double sq_error;
    double posterior_variance;
};

// One simulated record evaluated at every checkpoint. iid generation and
// inference use the count sufficient statistic, drawing the number of ones
// between checkpoints from a binomial; otherwise outcomes are drawn and
// consumed one at a time.
inline std::vector<CheckpointSample> run_trajectory(const ExperimentSpec& spec, const GridLikelihood& likelihood,
                                                    double true_temperature, Rng& rng) {
    std::vector<CheckpointSample> out;
    out.reserve(spec.checkpoints.size());
    PosteriorState state(spec.prior);
    const LikelihoodModel& gen = spec.generating_model();
    auto record = [&] {
        const double ba = bayes_average(state);
        const double d = ba - true_temperature;
        out.push_back({ba, d * d, posterior_loss(state, ba)});
    };

    if (gen.is_iid() && likelihood.is_iid()) {
        const double p1 = outcome_prob_iid(gen, true_temperature);
        std::uint64_t ones = 0, done = 0;
        for (auto n : spec.checkpoints) {
            ones += rng.binomial(n - done, p1);
            done = n;
            state.set_counts(ones, n - ones, likelihood);
            record();
        }
        return out;
    }

    OutcomeSequenceModel source(gen, true_temperature);
    std::vector<std::uint8_t> chunk;
    std::uint64_t done = 0;
    for (auto n : spec.checkpoints) {
        chunk.clear();
        for (; done < n; ++done) {
            const int bit = rng.bernoulli(source.prob_one()) ? 1 : 0;
            source.observe(bit);
            chunk.push_back(static_cast<std::uint8_t>(bit));
        }
        state.update(chunk, likelihood);
        record();
    }
    return out;
}

namespace detail {

struct MeanAndError {
    double mean, stderr_;
};

inline MeanAndError mean_and_error(const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

// Every trajectory spends the first uniform of its stream on the prior draw,
// used or not, so fixed-temperature and prior-sampled studies see the same
// records for the same temperature.
template <class DrawTemperature>
EnsembleSummary run_ensemble(const ExperimentSpec& spec, DrawTemperature&& draw_temperature) {
    spec.validate();
    const GridLikelihood likelihood(spec.model, spec.prior.grid());
    std::vector<std::vector<CheckpointSample>> samples(spec.n_trajectories);
    parallel_for(spec.n_trajectories, spec.threads, [&](std::size_t i) {
        Rng rng(derive_stream_seed(spec.master_seed, i));
        const double t0 = draw_temperature(rng.uniform());
        samples[i] = run_trajectory(spec, likelihood, t0, rng);
    });

    EnsembleSummary s;
    s.checkpoints = spec.checkpoints;
    std::vector<double> err(spec.n_trajectories), var(spec.n_trajectories), est(spec.n_trajectories);
    for (std::size_t c = 0; c < spec.checkpoints.size(); ++c) {
        for (std::size_t i = 0; i < spec.n_trajectories; ++i) {
            err[i] = samples[i][c].sq_error;
            var[i] = samples[i][c].posterior_variance;
            est[i] = samples[i][c].estimate;
        }
        const auto e = mean_and_error(err), v = mean_and_error(var), t = mean_and_error(est);
        s.mean_sq_error.push_back(e.mean);
        s.sq_error_stderr.push_back(e.stderr_);
        s.mean_posterior_variance.push_back(v.mean);
        s.posterior_variance_stderr.push_back(v.stderr_);
        s.mean_estimate.push_back(t.mean);
        s.estimate_stderr.push_back(t.stderr_);
    }
    return s;
}

}  // namespace detail

// Records generated at a fixed true temperature.
inline EnsembleSummary mse_study(const ExperimentSpec& spec, double true_temperature) {
    if (!(true_temperature > 0.0)) throw DomainError("true temperature must be positive");
    return detail::run_ensemble(spec, [true_temperature](double) { return true_temperature; });
}

// True temperatures drawn from the prior by inverse CDF over the grid weights.
inline EnsembleSummary bmse_study(const ExperimentSpec& spec) {
    return detail::run_ensemble(spec, [&spec](double u) { return spec.prior.grid()[spec.prior.sample_index(u)]; });
}

inline ErrorCurve mse_curve(const ExperimentSpec& spec, double true_temperature) {
    return mse_study(spec, true_temperature).curve(ErrorKind::MSE);
}

inline ErrorCurve bmse_curve(const ExperimentSpec& spec) { return bmse_study(spec).curve(ErrorKind::BMSE); }

// Least-squares slope of ln(value) against ln(n) over checkpoints in [n_lo, n_hi].
inline double loglog_slope(const ErrorCurve& curve, std::uint64_t n_lo, std::uint64_t n_hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < curve.checkpoints.size(); ++i) {
        const auto n = curve.checkpoints[i];
        if (n < n_lo || n > n_hi || !(curve.values[i] > 0.0)) continue;
        const double x = std::log(static_cast<double>(n)), y = std::log(curve.values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) throw DomainError("slope fit needs at least two checkpoints in range");
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct Plateau {
    double level;  // mean value over the last decade of n
    double slope;  // log-log slope over the same range
};

inline Plateau detect_plateau(const ErrorCurve& curve) {
    const auto n_max = curve.checkpoints.back();
    const auto n_lo = std::max<std::uint64_t>(1, n_max / 10);
    double sum = 0.0;
    int m = 0;
    for (std::size_t i = 0; i < curve.checkpoints.size(); ++i)
        if (curve.checkpoints[i] >= n_lo) {
            sum += curve.values[i];
            ++m;
        }
    return {sum / m, loglog_slope(curve, n_lo, n_max)};
}

// ---------------------------------------------------------------------------
// Asymptotic-error parameter studies
// ---------------------------------------------------------------------------

// Closed form where it applies, steady-state pipeline otherwise.
inline LikelihoodModel preferred_iid_model(const ModelParams& params) {
    if (params.full_swap() && std::holds_alternative<GroundProbe>(params.probe))
        return LikelihoodModel::iid_closed_form(params);
    return LikelihoodModel::iid_numeric(params);
}

struct PriorInterval {
    double t_min;
    double t_max;
    double alpha = -100.0;
    int n_points = 150;

    Prior prior() const { return make_prior(t_min, t_max, alpha, n_points); }
};

struct SweepPoint {
    double gamma_tau_se;
    double g_tau_sa;
    double expected_inverse_fisher;
};

struct SweepTable {
    PriorInterval interval;
    std::vector<SweepPoint> points;
    // Per g_tau_sa value, the point with the smallest E_P[1/F].
    std::vector<SweepPoint> minima;
};

inline SweepTable sweep_asymptotic(const PriorInterval& interval, const std::vector<double>& gamma_grid,
                                   const std::vector<double>& g_grid, const ModelParams& base = {}) {
    if (gamma_grid.empty() || g_grid.empty()) throw DomainError("sweep grids must be non-empty");
    const Prior prior = interval.prior();
    SweepTable table{interval, {}, {}};
    for (double g : g_grid) {
        SweepPoint best{0, g, std::numeric_limits<double>::infinity()};
        for (double gamma : gamma_grid) {
            ModelParams p = base;
            p.gamma_tau_se = gamma;
            p.g_tau_sa = g;
            const double value = expected_inverse_fisher(prior, preferred_iid_model(p));
            table.points.push_back({gamma, g, value});
            if (value < best.expected_inverse_fisher) best = table.points.back();
        }
        table.minima.push_back(best);
    }
    return table;
}

struct IntervalOptimum {
    double delta;
    double optimal_gamma_tau_se;
    double expected_inverse_fisher;
};

// Optimal gamma_tau_se on symmetric intervals [center - delta, center + delta].
inline std::vector<IntervalOptimum> optimal_gamma_by_interval(double center, const std::vector<double>& deltas,
                                                              const std::vector<double>& gamma_grid,
                                                              const ModelParams& base = {}, double alpha = -100.0,
                                                              int n_points = 150) {
    std::vector<IntervalOptimum> out;
    for (double delta : deltas) {
        if (!(delta > 0.0) || !(center - delta > 0.0)) throw DomainError("interval must stay at positive temperature");
        const auto table = sweep_asymptotic({center - delta, center + delta, alpha, n_points}, gamma_grid,
                                            {base.g_tau_sa}, base);
        out.push_back({delta, table.minima.front().gamma_tau_se, table.minima.front().expected_inverse_fisher});
    }
    return out;
}

// gamma_tau_se on the grid maximizing F at a single temperature.
inline double argmax_fisher_gamma(double temperature, const std::vector<double>& gamma_grid,
                                  const ModelParams& base = {}) {
    if (gamma_grid.empty()) throw DomainError("gamma grid must be non-empty");
    double best_gamma = gamma_grid.front(), best = -1.0;
    for (double gamma : gamma_grid) {
        ModelParams p = base;
        p.gamma_tau_se = gamma;
        const double f = fisher_information(preferred_iid_model(p), temperature);
        if (f > best) {
            best = f;
            best_gamma = gamma;
        }
    }
    return best_gamma;
}

struct ProbeNoiseRow {
    double probe_temperature;
    double expected_inverse_fisher;
    double ratio;  // relative to ground-state probes
};

inline std::vector<ProbeNoiseRow> probe_noise_study(const std::vector<double>& probe_temperatures, const Prior& prior,
                                                    const ModelParams& params = {}) {
    if (!params.full_swap()) throw RegimeError("probe-noise study requires g_tau_sa = pi/2");
    ModelParams ground = params;
    ground.probe = GroundProbe{};
    const double e0 = expected_inverse_fisher(prior, LikelihoodModel::iid_closed_form(ground));
    std::vector<ProbeNoiseRow> rows;
    for (double tp : probe_temperatures) {
        const double e = expected_inverse_fisher(prior, LikelihoodModel::noisy_probe(ground, tp));
        rows.push_back({tp, e, e / e0});
    }
    return rows;
}

struct BiasCurve {
    double q;
    ErrorCurve curve;
    Plateau plateau;
};

// Records generated from the probe-mixture likelihood with weight q while
// inference keeps using spec.model.
inline std::vector<BiasCurve> mixture_bias_study(const std::vector<double>& q_grid, const ExperimentSpec& spec) {
    std::vector<BiasCurve> out;
    for (double q : q_grid) {
        ExperimentSpec s = spec;
        ModelParams p = spec.model.params();
        p.probe = GroundProbe{};
        s.generator = LikelihoodModel::mixture(p, q);
        const ErrorCurve curve = bmse_curve(s);
        out.push_back({q, curve, detect_plateau(curve)});
    }
    return out;
}

}  // namespace colltherm
