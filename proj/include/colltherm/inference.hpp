#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "colltherm/errors.hpp"
#include "colltherm/likelihood.hpp"

namespace colltherm {

// e^{-|x|} I0(x): power series below |x| = 20, asymptotic expansion above.
inline double bessel_i0_scaled(double x) {
    const double ax = std::abs(x);
    if (ax < 20.0) {
        const double q = 0.25 * ax * ax;
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 500; ++k) {
            term *= q / (static_cast<double>(k) * k);
            sum += term;
            if (term < sum * 1e-17) break;
        }
        return sum * std::exp(-ax);
    }
    // I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k, a_k = a_{k-1} (2k-1)^2 / (8 k x)
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * ax);
        if (next > term) break;
        term = next;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * ax);
}

inline double bessel_i0(double x) { return bessel_i0_scaled(x) * std::exp(std::abs(x)); }

// Shape of the prior family on [0, 1]:
//   lambda(theta) = (e^{alpha sin^2(pi theta)} - 1) / (e^{alpha/2} I0(alpha/2) - 1),
// which integrates to one. alpha = 0 is the exact uniform density.
class PriorShape {
public:
    explicit PriorShape(double alpha) : alpha_(alpha) {
        if (!std::isfinite(alpha)) throw DomainError("alpha must be finite");
        if (alpha > 700.0) throw DomainError("alpha above 700 overflows the prior normalization");
        if (alpha != 0.0) {
            // e^{alpha/2} I0(alpha/2) - 1, with the scaled Bessel to keep alpha << 0 accurate.
            const double half = 0.5 * alpha;
            const double moment = alpha < 0.0 ? bessel_i0_scaled(half) : bessel_i0_scaled(half) * std::exp(alpha);
            norm_ = moment - 1.0;
        }
    }

    double alpha() const noexcept { return alpha_; }
    bool uniform() const noexcept { return alpha_ == 0.0; }
    double normalization() const noexcept { return norm_; }

    double operator()(double theta) const {
        if (theta < 0.0 || theta > 1.0) return 0.0;
        if (uniform()) return 1.0;
        const double s = std::sin(std::numbers::pi * std::min(theta, 1.0 - theta));
        return std::expm1(alpha_ * s * s) / norm_;
    }

private:
    double alpha_;
    double norm_ = 1.0;
};

class TemperatureGrid {
public:
    TemperatureGrid(double t_min, double t_max, int n_points) : t_min_(t_min), t_max_(t_max) {
        if (!(t_min > 0.0) || !(t_max > t_min) || !std::isfinite(t_max))
            throw DomainError("temperature grid requires 0 < t_min < t_max");
        if (n_points < 2) throw DomainError("temperature grid needs at least two points");
        points_.resize(static_cast<std::size_t>(n_points));
        const double step = (t_max - t_min) / (n_points - 1);
        for (int k = 0; k < n_points; ++k) points_[static_cast<std::size_t>(k)] = t_min + k * step;
        points_.back() = t_max;
    }

    double t_min() const noexcept { return t_min_; }
    double t_max() const noexcept { return t_max_; }
    int size() const noexcept { return static_cast<int>(points_.size()); }
    double spacing() const noexcept { return (t_max_ - t_min_) / (size() - 1); }
    double operator[](std::size_t k) const { return points_[k]; }
    std::span<const double> points() const noexcept { return points_; }

private:
    double t_min_, t_max_;
    std::vector<double> points_;
};

class Prior {
public:
    Prior(TemperatureGrid grid, double alpha) : grid_(std::move(grid)), shape_(alpha) {
        const int n = grid_.size();
        weights_.resize(static_cast<std::size_t>(n));
        // Mirror the index so that weights are exactly symmetric.
        for (int k = 0; k < n; ++k) {
            const int mirrored = std::min(k, n - 1 - k);
            weights_[static_cast<std::size_t>(k)] = shape_(static_cast<double>(mirrored) / (n - 1));
        }
        double total = 0.0;
        for (int k = 0; k < (n + 1) / 2; ++k) {
            const double w = weights_[static_cast<std::size_t>(k)];
            total += (k == n - 1 - k) ? w : 2.0 * w;
        }
        if (!(total > 0.0)) throw DomainError("prior has no weight on the grid");
        for (auto& w : weights_) w /= total;
    }

    // Weight one on a single temperature: a degenerate two-point grid is not
    // needed, the point itself is the grid.
    static Prior point_mass(const TemperatureGrid& grid, std::size_t index) {
        Prior p(grid, 0.0);
        std::fill(p.weights_.begin(), p.weights_.end(), 0.0);
        p.weights_.at(index) = 1.0;
        p.point_mass_ = true;
        return p;
    }

    const TemperatureGrid& grid() const noexcept { return grid_; }
    double alpha() const noexcept { return shape_.alpha(); }
    const PriorShape& shape() const noexcept { return shape_; }
    std::span<const double> weights() const noexcept { return weights_; }
    double weight(std::size_t k) const { return weights_[k]; }
    bool is_point_mass() const noexcept { return point_mass_; }

    // Continuous density P(T) = lambda((T - T_min)/(T_max - T_min)) / (T_max - T_min).
    double density(double temperature) const {
        const double width = grid_.t_max() - grid_.t_min();
        return shape_((temperature - grid_.t_min()) / width) / width;
    }

    // Inverse-CDF draw of a grid index with a uniform variate u in [0, 1).
    std::size_t sample_index(double u) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            acc += weights_[k];
            if (u < acc && weights_[k] > 0.0) return k;
        }
        for (std::size_t k = weights_.size(); k-- > 0;)
            if (weights_[k] > 0.0) return k;
        return weights_.size() - 1;
    }

private:
    TemperatureGrid grid_;
    PriorShape shape_;
    std::vector<double> weights_;
    bool point_mass_ = false;
};

inline Prior make_prior(double t_min, double t_max, double alpha, int n_points) {
    return Prior(TemperatureGrid(t_min, t_max, n_points), alpha);
}

// The model evaluated once on every grid point.
class GridLikelihood {
public:
    GridLikelihood(const LikelihoodModel& model, const TemperatureGrid& grid) : model_(model) {
        const auto n = static_cast<std::size_t>(grid.size());
        if (model.is_iid()) {
            log_p0_.resize(n);
            log_p1_.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double p1 = outcome_prob_iid(model, grid[k]);
                log_p1_[k] = std::log(p1);
                log_p0_[k] = std::log1p(-p1);
            }
        } else {
            sequences_.reserve(n);
            for (std::size_t k = 0; k < n; ++k) sequences_.emplace_back(model, grid[k]);
        }
    }

    const LikelihoodModel& model() const noexcept { return model_; }
    bool is_iid() const noexcept { return model_.is_iid(); }
    std::span<const double> log_p1() const noexcept { return log_p1_; }
    std::span<const double> log_p0() const noexcept { return log_p0_; }

    // Fresh per-grid conditional sources positioned before the first outcome.
    const std::vector<OutcomeSequenceModel>& initial_sequences() const noexcept { return sequences_; }

private:
    LikelihoodModel model_;
    std::vector<double> log_p0_, log_p1_;
    std::vector<OutcomeSequenceModel> sequences_;
};

class PosteriorState {
public:
    explicit PosteriorState(Prior prior)
        : prior_(std::move(prior)),
          log_likelihood_(prior_.weights().size(), 0.0),
          posterior_(prior_.weights().begin(), prior_.weights().end()) {}

    const Prior& prior() const noexcept { return prior_; }
    const TemperatureGrid& grid() const noexcept { return prior_.grid(); }
    std::span<const double> log_likelihood() const noexcept { return log_likelihood_; }
    std::span<const double> posterior() const noexcept { return posterior_; }
    double log_max() const noexcept { return log_max_; }
    std::uint64_t count() const noexcept { return n_; }

    // Consumes outcomes in order, accumulating L_k += ln P(X_i | T_k, past).
    // The same GridLikelihood must be used for every call on one state.
    void update(std::span<const std::uint8_t> outcomes, const GridLikelihood& likelihood) {
        if (outcomes.empty()) return;
        const std::size_t n = log_likelihood_.size();
        if (likelihood.is_iid()) {
            const auto lp0 = likelihood.log_p0(), lp1 = likelihood.log_p1();
            for (auto x : outcomes) {
                const auto& lp = x ? lp1 : lp0;
                bool possible = false;
                for (std::size_t k = 0; k < n; ++k) {
                    log_likelihood_[k] += lp[k];
                    possible = possible || lp[k] > -std::numeric_limits<double>::infinity();
                }
                if (!possible) throw InconsistentRecordError("outcome has zero probability at every grid temperature");
            }
        } else {
            if (sequences_.empty()) sequences_ = likelihood.initial_sequences();
            for (auto x : outcomes) {
                bool possible = false;
                for (std::size_t k = 0; k < n; ++k) {
                    double lp = -std::numeric_limits<double>::infinity();
                    if (log_likelihood_[k] > -std::numeric_limits<double>::infinity()) {
                        try {
                            lp = std::log(sequences_[k].observe(x));
                        } catch (const UnderflowError&) {
                        }
                    }
                    log_likelihood_[k] += lp;
                    possible = possible || lp > -std::numeric_limits<double>::infinity();
                }
                if (!possible) throw InconsistentRecordError("outcome has zero probability at every grid temperature");
            }
        }
        n_ += outcomes.size();
        normalize();
    }

    void update(std::span<const std::uint8_t> outcomes, const LikelihoodModel& model) {
        update(outcomes, GridLikelihood(model, grid()));
    }

    // Sufficient-statistic form for iid models: L_k = n1 ln p1_k + n0 ln p0_k.
    void set_counts(std::uint64_t ones, std::uint64_t zeros, const GridLikelihood& likelihood) {
        if (!likelihood.is_iid()) throw DomainError("count-based update requires an iid model");
        const auto lp0 = likelihood.log_p0(), lp1 = likelihood.log_p1();
        for (std::size_t k = 0; k < log_likelihood_.size(); ++k) {
            const double a = ones ? static_cast<double>(ones) * lp1[k] : 0.0;
            const double b = zeros ? static_cast<double>(zeros) * lp0[k] : 0.0;
            log_likelihood_[k] = a + b;
        }
        n_ = ones + zeros;
        if (n_ > 0 && std::none_of(log_likelihood_.begin(), log_likelihood_.end(), [](double l) {
                return l > -std::numeric_limits<double>::infinity();
            }))
            throw InconsistentRecordError("record has zero probability at every grid temperature");
        normalize();
    }

private:
    // P_k|n = e^{L_k - L_max} P_k / sum_q e^{L_q - L_max} P_q
    void normalize() {
        log_max_ = *std::max_element(log_likelihood_.begin(), log_likelihood_.end());
        const auto prior = prior_.weights();
        double total = 0.0;
        for (std::size_t k = 0; k < posterior_.size(); ++k) {
            posterior_[k] = std::exp(log_likelihood_[k] - log_max_) * prior[k];
            total += posterior_[k];
        }
        if (!(total > 0.0)) {
            // The maximum sits where the prior vanishes and every supported
            // point underflowed; rescale against the supported maximum.
            double support_max = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < posterior_.size(); ++k)
                if (prior[k] > 0.0) support_max = std::max(support_max, log_likelihood_[k]);
            if (!(support_max > -std::numeric_limits<double>::infinity()))
                throw InconsistentRecordError("record has zero probability wherever the prior has weight");
            total = 0.0;
            for (std::size_t k = 0; k < posterior_.size(); ++k) {
                posterior_[k] = std::exp(log_likelihood_[k] - support_max) * prior[k];
                total += posterior_[k];
            }
        }
        for (auto& p : posterior_) p /= total;
    }

    Prior prior_;
    std::vector<double> log_likelihood_;
    std::vector<double> posterior_;
    double log_max_ = 0.0;
    std::uint64_t n_ = 0;
    std::vector<OutcomeSequenceModel> sequences_;
};

// Functional form: returns the updated state, leaving the input untouched.
inline PosteriorState update(PosteriorState state, std::span<const std::uint8_t> outcomes,
                             const LikelihoodModel& model) {
    state.update(outcomes, model);
    return state;
}

inline double bayes_average(const PosteriorState& state) {
    const auto post = state.posterior();
    const auto& grid = state.grid();
    double mean = 0.0;
    for (std::size_t k = 0; k < post.size(); ++k) mean += grid[k] * post[k];
    return mean;
}

// Posterior mode; ties go to the smaller temperature.
inline double map_estimate(const PosteriorState& state) {
    const auto post = state.posterior();
    std::size_t best = 0;
    for (std::size_t k = 1; k < post.size(); ++k)
        if (post[k] > post[best]) best = k;
    return state.grid()[best];
}

inline double posterior_loss(const PosteriorState& state, double estimate) {
    const auto post = state.posterior();
    const auto& grid = state.grid();
    double loss = 0.0;
    for (std::size_t k = 0; k < post.size(); ++k) {
        const double d = grid[k] - estimate;
        loss += d * d * post[k];
    }
    return loss;
}

inline double posterior_variance(const PosteriorState& state) { return posterior_loss(state, bayes_average(state)); }

}  // namespace colltherm
