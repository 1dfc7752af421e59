#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "colltherm/likelihood.hpp"
#include "support/oracles.hpp"

using namespace colltherm;

namespace {

ModelParams params_with(double gamma, double g, ProbePrep probe = GroundProbe{}) {
    ModelParams p;
    p.gamma_tau_se = gamma;
    p.g_tau_sa = g;
    p.probe = probe;
    return p;
}

// Sequence probability from the conditional factorization of a model.
double sequence_probability(const LikelihoodModel& model, double t, const std::vector<int>& bits) {
    OutcomeSequenceModel seq(model, t);
    double p = 1.0;
    for (int b : bits) p *= seq.observe(b);
    return p;
}

std::vector<int> bits_of(unsigned x, int m) {
    std::vector<int> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = (x >> (m - 1 - i)) & 1;
    return out;
}

}  // namespace

TEST(ClosedForm, ReferenceValue) {
    EXPECT_NEAR(closed_form_likelihood(2.0, params_with(0.2, kFullSwap)), 0.210693095348470740, 1e-14);
}

TEST(ClosedForm, Limits) {
    EXPECT_LT(closed_form_likelihood(1.0, params_with(1e-9, kFullSwap)), 1e-9);
    EXPECT_NEAR(closed_form_likelihood(1.0, params_with(80.0, kFullSwap)), thermal_population(1.0, 1.0), 1e-14);
}

TEST(ClosedForm, StrictlyIncreasingInTemperature) {
    const auto p = params_with(0.4, kFullSwap);
    double prev = closed_form_likelihood(0.05, p);
    for (double t = 0.1; t <= 5.0; t += 0.05) {
        const double cur = closed_form_likelihood(t, p);
        EXPECT_GT(cur, prev);
        prev = cur;
    }
}

TEST(ClosedForm, MatchesCollisionalPipeline) {
    for (double t : {0.2, 0.7, 1.5, 3.0, 5.0})
        for (double gamma : {0.01, 0.4, 2.0}) {
            const auto p = params_with(gamma, kFullSwap);
            EXPECT_NEAR(closed_form_likelihood(t, p), pipeline_excited_probability(p, t), 1e-13);
            const auto thermal = params_with(gamma, kFullSwap, ThermalProbe{0.8});
            EXPECT_NEAR(noisy_probe_likelihood(t, 0.8, p), pipeline_excited_probability(thermal, t), 1e-13);
        }
}

TEST(ClosedForm, RejectsPartialSwap) {
    EXPECT_THROW(closed_form_likelihood(1.0, params_with(0.4, 1.0)), RegimeError);
    EXPECT_THROW(LikelihoodModel::iid_closed_form(params_with(0.4, 1.0)), RegimeError);
    EXPECT_THROW(LikelihoodModel::noisy_probe(params_with(0.4, 1.0), 0.5), RegimeError);
    EXPECT_THROW(LikelihoodModel::mixture(params_with(0.4, 1.0), 0.5), RegimeError);
    EXPECT_THROW(closed_form_likelihood(0.0, params_with(0.4, kFullSwap)), DomainError);
}

TEST(ClosedForm, AnalyticDerivativeMatchesRichardson) {
    for (double t : {0.1, 0.5, 1.5, 4.0}) {
        for (const ProbePrep& probe : {ProbePrep{GroundProbe{}}, ProbePrep{ThermalProbe{0.6}}}) {
            const auto model = LikelihoodModel::iid_closed_form(params_with(0.4, kFullSwap, probe));
            const double h = 1e-3 * t;
            auto p = [&](double x) { return outcome_prob_iid(model, x); };
            const double d1 = (p(t + h) - p(t - h)) / (2 * h);
            const double d2 = (p(t + h / 2) - p(t - h / 2)) / h;
            const double rich = (4 * d2 - d1) / 3;
            EXPECT_NEAR(*outcome_prob_derivative(model, t), rich, 1e-9 * std::max(1.0, std::abs(rich)));
        }
    }
    EXPECT_FALSE(outcome_prob_derivative(LikelihoodModel::iid_numeric(params_with(0.4, 1.0)), 1.0).has_value());
}

TEST(NoisyProbe, ZeroProbeTemperatureIsGround) {
    const auto p = params_with(0.4, kFullSwap);
    for (double t : {0.3, 1.5, 4.0}) EXPECT_DOUBLE_EQ(noisy_probe_likelihood(t, 0.0, p), closed_form_likelihood(t, p));
}

TEST(NoisyProbe, ClosedFormExpression) {
    const double t = 1.5, tp = 0.7;
    const double gamma = 0.4 * (2 * oracle::bose(t, 1.0) + 1);
    const double pth = 1 / (1 + std::exp(1 / t));
    const double pp = 1 / (1 + std::exp(1 / tp));
    EXPECT_NEAR(noisy_probe_likelihood(t, tp, params_with(0.4, kFullSwap)),
                std::exp(-gamma) * pp + (1 - std::exp(-gamma)) * pth, 1e-15);
}

TEST(Mixture, EndpointsAndLinearity) {
    const auto p = params_with(0.4, kFullSwap);
    const double t = 1.5;
    const double ground = closed_form_likelihood(t, p);
    const double gamma = 0.4 * (2 * oracle::bose(t, 1.0) + 1);
    const double excited = std::exp(-gamma) + (1 - std::exp(-gamma)) / (1 + std::exp(1 / t));
    EXPECT_NEAR(mixture_likelihood(t, 1.0, p), ground, 1e-14);
    EXPECT_NEAR(mixture_likelihood(t, 0.0, p), excited, 1e-14);
    EXPECT_NEAR(mixture_likelihood(t, 0.3, p), 0.3 * ground + 0.7 * excited, 1e-14);
    EXPECT_THROW(mixture_likelihood(t, 1.5, p), DomainError);
}

TEST(Mixture, MatchesMixedProbePreparation) {
    // A physically mixed probe diag(q, 1-q) gives the same single-ancilla statistics.
    const auto p = params_with(0.4, kFullSwap);
    for (double q : {0.0, 0.5, 0.9})
        EXPECT_NEAR(mixture_likelihood(1.5, q, p), pipeline_excited_probability(params_with(0.4, kFullSwap, MixtureProbe{q}), 1.5),
                    1e-13);
}

TEST(ExactFilter, BruteForceBlockProbabilities) {
    for (double g : {0.4, 0.8, 1.2})
        for (double t : {0.5, 1.5, 3.0}) {
            const auto p = params_with(0.3, g);
            const auto model = LikelihoodModel::exact_filter(p);
            const auto dist = oracle::block_distribution(steady_state(p, t).matrix(),
                                                         DensityMatrix::basis_state(2, 0).matrix(), 3, t, 0.3, g, 1.0);
            double total = 0.0;
            for (unsigned x = 0; x < 8; ++x) {
                const double prob = sequence_probability(model, t, bits_of(x, 3));
                EXPECT_NEAR(prob, dist[x], 1e-12) << "g=" << g << " T=" << t << " x=" << x;
                total += prob;
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
}

TEST(ExactFilter, FullSwapReducesToIid) {
    const auto p = params_with(0.4, kFullSwap);
    const auto filter = LikelihoodModel::exact_filter(p);
    const double p1 = closed_form_likelihood(1.5, p);
    const std::vector<int> bits{1, 0, 0, 1, 1, 0};
    double expect = 1.0;
    for (int b : bits) expect *= b ? p1 : 1 - p1;
    EXPECT_NEAR(sequence_probability(filter, 1.5, bits), expect, 1e-14);
}

TEST(ExactFilter, ConditionedStatesStayPhysical) {
    const auto model = LikelihoodModel::exact_filter(params_with(0.3, 0.9));
    const auto tr = sample_trajectory(model, 1.5, 200, 7);
    DensityMatrix state = steady_state(model.params(), 1.5);
    for (auto b : tr.outcomes) {
        const auto step0 = filter_step(state, 0, model, 1.5);
        const auto step1 = filter_step(state, 1, model, 1.5);
        EXPECT_NEAR(step0.prob + step1.prob, 1.0, 1e-12);
        state = b ? step1.next_state : step0.next_state;
        EXPECT_GE(state.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(ExactFilter, RecordsAreCorrelatedAwayFromFullSwap) {
    const auto model = LikelihoodModel::exact_filter(params_with(0.2, 0.5));
    const double two_one = sequence_probability(model, 2.0, {1, 1});
    const double one = sequence_probability(model, 2.0, {1});
    EXPECT_GT(std::abs(two_one - one * one), 1e-6);
}

TEST(Markov, FirstOrderMatchesPairState) {
    const auto p = params_with(0.2, 0.5);
    const auto model = LikelihoodModel::markov(p, 1);
    const auto table = markov_conditional_table(model, 2.0, 1);
    const auto pair = ancilla_pair_state(p, 2.0, 1);
    const double p1 = outcome_prob_iid(model, 2.0);
    EXPECT_NEAR(table(1), pair.population(3) / p1, 1e-12);
    EXPECT_NEAR(table(0), pair.population(1) / (1 - p1), 1e-12);
    EXPECT_NEAR(p1, ancilla_marginal_state(p, 2.0).population(1), 1e-14);
}

TEST(Markov, OrderTwoMatchesFilterOnThreeBlocks) {
    const auto p = params_with(0.3, 0.8);
    const auto model = LikelihoodModel::markov(p, 2);
    const auto filter = LikelihoodModel::exact_filter(p);
    // Up to three outcomes the Markov-2 hierarchy equals the exact joint.
    for (unsigned x = 0; x < 8; ++x) {
        const auto bits = bits_of(x, 3);
        EXPECT_NEAR(sequence_probability(model, 1.5, bits), sequence_probability(filter, 1.5, bits), 1e-12);
    }
}

TEST(Markov, OrderZeroAndFullSwapAreIid) {
    const auto zero = markov_conditional_table(LikelihoodModel::markov(params_with(0.3, 0.8), 0), 1.5, 0);
    EXPECT_EQ(zero.p_one.size(), 1u);
    const auto fs = markov_conditional_table(LikelihoodModel::markov(params_with(0.3, kFullSwap), 2), 1.5, 2);
    for (double v : fs.p_one) EXPECT_NEAR(v, closed_form_likelihood(1.5, params_with(0.3, kFullSwap)), 1e-13);
}

TEST(Markov, UnsupportedOrders) {
    EXPECT_THROW(LikelihoodModel::markov(params_with(0.3, 0.8), 3), UnsupportedOrderError);
    EXPECT_THROW(markov_conditional_table(LikelihoodModel::markov(params_with(0.3, 0.8), 1), 1.0, 3),
                 UnsupportedOrderError);
}

TEST(Sampling, FrequencyMatchesLikelihood) {
    const auto model = LikelihoodModel::iid_closed_form(params_with(0.4, kFullSwap));
    const std::size_t n = 200000;
    const auto tr = sample_trajectory(model, 1.5, n, 11);
    const double p1 = outcome_prob_iid(model, 1.5);
    const double freq = static_cast<double>(tr.count_ones()) / static_cast<double>(n);
    EXPECT_NEAR(freq, p1, 5 * std::sqrt(p1 * (1 - p1) / static_cast<double>(n)));
}

TEST(Sampling, CorrelatedPairFrequencies) {
    const auto p = params_with(0.2, 0.5);
    const auto model = LikelihoodModel::exact_filter(p);
    const std::size_t n = 200000;
    const auto tr = sample_trajectory(model, 2.0, n, 3);
    double both = 0;
    for (std::size_t i = 1; i < n; ++i) both += tr.outcomes[i] && tr.outcomes[i - 1];
    const double expect = ancilla_pair_state(p, 2.0, 1).population(3);
    EXPECT_NEAR(both / static_cast<double>(n - 1), expect, 6 * std::sqrt(expect / static_cast<double>(n)));
}

TEST(Sampling, DeterministicPerSeed) {
    const auto model = LikelihoodModel::exact_filter(params_with(0.2, 0.5));
    const auto a = sample_trajectory(model, 1.0, 500, 99);
    const auto b = sample_trajectory(model, 1.0, 500, 99);
    const auto c = sample_trajectory(model, 1.0, 500, 100);
    EXPECT_EQ(a.outcomes, b.outcomes);
    EXPECT_NE(a.outcomes, c.outcomes);
    EXPECT_THROW(sample_trajectory(model, 1.0, 0, 1), DomainError);
}

TEST(Sampling, TextRoundTrip) {
    const auto model = LikelihoodModel::iid_closed_form(params_with(0.4, kFullSwap));
    const auto tr = sample_trajectory(model, 1.2345678901234567, 64, 123456789012345ULL);
    const auto back = trajectory_from_text(to_text(tr));
    EXPECT_EQ(back.true_temperature, tr.true_temperature);
    EXPECT_EQ(back.seed, tr.seed);
    EXPECT_EQ(back.model_descriptor, tr.model_descriptor);
    EXPECT_EQ(back.outcomes, tr.outcomes);
    EXPECT_THROW(trajectory_from_text("garbage"), DomainError);
}
