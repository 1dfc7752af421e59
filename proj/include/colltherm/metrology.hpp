#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "colltherm/errors.hpp"
#include "colltherm/inference.hpp"
#include "colltherm/likelihood.hpp"

namespace colltherm {

struct FisherReport {
    double temperature;
    double fisher;
    double thermal_fisher;
    double ratio;
    double heat_capacity;
};

struct BoundReport {
    std::uint64_t n;
    double crb_at;          // 1 / (n F(T_ref))
    double vtsb;            // 1 / (n E_P[F] + F_P)
    double prior_fisher;    // F_P
    double avg_fisher;      // E_P[F]
    double asymptotic_bmse; // E_P[1 / (n F)]
};

// Settings of the Monte Carlo estimate of the per-outcome Fisher rate used
// for correlated models.
struct FisherRateOptions {
    std::size_t records = 400;
    std::size_t length = 2000;
    std::uint64_t seed = 0x5EEDF15E;
};

inline double finite_difference_step(double temperature) {
    return std::min(1e-5 * std::max(temperature, 1.0), 0.5 * temperature);
}

inline double central_difference(const LikelihoodModel& model, double temperature, double h) {
    return (outcome_prob_iid(model, temperature + h) - outcome_prob_iid(model, temperature - h)) / (2.0 * h);
}

// Binary-outcome Fisher information (dp1/dT)^2 / (p1 (1 - p1)).
inline double binary_fisher(double p1, double dp1) {
    if (!(p1 > 0.0 && p1 < 1.0)) throw DegenerateDistributionError("Fisher information needs 0 < p1 < 1");
    return dp1 * dp1 / (p1 * (1.0 - p1));
}

namespace detail {

inline double record_log_likelihood(const LikelihoodModel& model, double temperature,
                                    const std::vector<std::uint8_t>& outcomes) {
    OutcomeSequenceModel seq(model, temperature);
    double ll = 0.0;
    for (auto x : outcomes) ll += std::log(seq.observe(x));
    return ll;
}

}  // namespace detail

// Per-outcome asymptotic Fisher information of a correlated record, estimated
// as E[score^2] / n over simulated stationary records; the score is a central
// difference of the exact record log-likelihood.
inline double fisher_rate_monte_carlo(const LikelihoodModel& model, double temperature,
                                      const FisherRateOptions& opts = {}) {
    const double h = finite_difference_step(temperature);
    double sum_sq = 0.0;
    for (std::size_t r = 0; r < opts.records; ++r) {
        const Trajectory tr = sample_trajectory(model, temperature, opts.length, derive_stream_seed(opts.seed, r));
        const double score = (detail::record_log_likelihood(model, temperature + h, tr.outcomes) -
                              detail::record_log_likelihood(model, temperature - h, tr.outcomes)) /
                             (2.0 * h);
        sum_sq += score * score;
    }
    return sum_sq / (static_cast<double>(opts.records) * static_cast<double>(opts.length));
}

// Fisher information per ancilla. Closed-form models use the analytic
// derivative; other iid models a central difference with relative step 1e-5.
inline double fisher_information(const LikelihoodModel& model, double temperature) {
    if (!(temperature > 0.0)) throw DomainError("fisher_information requires T > 0");
    if (!model.is_iid()) return fisher_rate_monte_carlo(model, temperature);
    const double p1 = outcome_prob_iid(model, temperature);
    if (!(p1 > 0.0 && p1 < 1.0)) throw DegenerateDistributionError("Fisher information needs 0 < p1 < 1");
    const auto analytic = outcome_prob_derivative(model, temperature);
    const double dp1 = analytic ? *analytic : central_difference(model, temperature, finite_difference_step(temperature));
    return binary_fisher(p1, dp1);
}

// Qubit thermal Fisher information (omega / 2T^2)^2 sech^2(omega / 2T).
inline double thermal_fisher(double temperature, double omega) {
    if (!(temperature > 0.0)) throw DomainError("thermal_fisher requires T > 0");
    if (!(omega > 0.0)) throw DomainError("omega must be positive");
    const double x = omega / (2.0 * temperature);
    const double sech = 1.0 / std::cosh(x);
    const double a = omega / (2.0 * temperature * temperature);
    return a * a * sech * sech;
}

inline double heat_capacity(double temperature, double omega) {
    return temperature * temperature * thermal_fisher(temperature, omega);
}

inline FisherReport fisher_report(const LikelihoodModel& model, double temperature) {
    const double f = fisher_information(model, temperature);
    const double th = thermal_fisher(temperature, model.params().omega);
    return {temperature, f, th, f / th, heat_capacity(temperature, model.params().omega)};
}

// Full swap, ground probes:
//   F / F_th = (nbar+1)(e^G + 2 nbar G - 1)^2 / (e^{2G}(nbar+1) - e^G - nbar).
inline double fisher_ratio_closed_form(double temperature, const ModelParams& params) {
    params.validate();
    if (!params.full_swap() || !std::holds_alternative<GroundProbe>(params.probe))
        throw RegimeError("closed-form Fisher ratio requires full swap with ground-state probes");
    const double nbar = bose_occupation(temperature, params.omega);
    const double g = params.gamma_tau_se * (2.0 * nbar + 1.0);
    if (g == 0.0) throw DegenerateDistributionError("Fisher ratio undefined at Gamma = 0");
    // Divide numerator and denominator by e^{2G} to stay finite for large Gamma.
    const double emg = std::exp(-g);
    const double num = (nbar + 1.0) * std::pow(1.0 + (2.0 * nbar * g - 1.0) * emg, 2);
    const double den = (nbar + 1.0) - emg - nbar * emg * emg;
    return num / den;
}

// Fisher information of the prior density, int P'(T)^2 / P(T) dT, as a
// midpoint sum over grid intervals. P' is a central difference of the
// continuous density with a step well inside the interval. The integrand is
// a smooth periodic function of the scaled temperature, so the midpoint rule
// converges much faster than the grid spacing would suggest.
inline double prior_fisher(const Prior& prior) {
    if (prior.shape().uniform() || prior.is_point_mass())
        throw BoundInapplicableError("van Trees bound does not apply to a truncated prior");
    const auto& grid = prior.grid();
    const double dt = grid.spacing();
    const double e = 1e-4 * dt;
    double fp = 0.0;
    for (int j = 0; j + 1 < grid.size(); ++j) {
        const double mid = 0.5 * (grid[static_cast<std::size_t>(j)] + grid[static_cast<std::size_t>(j) + 1]);
        const double density = prior.density(mid);
        if (!(density > 0.0)) continue;
        const double dp = (prior.density(mid + e) - prior.density(mid - e)) / (2.0 * e);
        fp += dp * dp / density * dt;
    }
    return fp;
}

// E_P[F] = sum_k P_k F(T_k).
inline double average_fisher(const Prior& prior, const LikelihoodModel& model) {
    double avg = 0.0;
    for (std::size_t k = 0; k < prior.weights().size(); ++k) {
        const double w = prior.weight(k);
        if (w > 0.0) avg += w * fisher_information(model, prior.grid()[k]);
    }
    return avg;
}

inline double van_trees_from(double avg_fisher, double prior_fi, std::uint64_t n) {
    return 1.0 / (static_cast<double>(n) * avg_fisher + prior_fi);
}

inline double van_trees_bound(const Prior& prior, const LikelihoodModel& model, std::uint64_t n) {
    if (n < 1) throw DomainError("van_trees_bound requires n >= 1");
    return van_trees_from(average_fisher(prior, model), prior_fisher(prior), n);
}

// E_P[1 / F] (the n = 1 asymptotic error).
inline double expected_inverse_fisher(const Prior& prior, const LikelihoodModel& model) {
    double acc = 0.0;
    for (std::size_t k = 0; k < prior.weights().size(); ++k) {
        const double w = prior.weight(k);
        if (!(w > 0.0)) continue;
        double f = 0.0;
        try {
            f = fisher_information(model, prior.grid()[k]);
        } catch (const DegenerateDistributionError&) {
            f = 0.0;
        }
        if (!(f > 0.0)) throw DivergentError("Fisher information vanishes where the prior has weight");
        acc += w / f;
    }
    return acc;
}

inline double asymptotic_bmse(const Prior& prior, const LikelihoodModel& model, std::uint64_t n) {
    if (n < 1) throw DomainError("asymptotic_bmse requires n >= 1");
    return expected_inverse_fisher(prior, model) / static_cast<double>(n);
}

inline BoundReport bound_report(const Prior& prior, const LikelihoodModel& model, std::uint64_t n,
                                double reference_temperature) {
    const double avg = average_fisher(prior, model);
    const double fp = prior_fisher(prior);
    const double nd = static_cast<double>(n);
    return {n,
            1.0 / (nd * fisher_information(model, reference_temperature)),
            van_trees_from(avg, fp, n),
            fp,
            avg,
            expected_inverse_fisher(prior, model) / nd};
}

}  // namespace colltherm
