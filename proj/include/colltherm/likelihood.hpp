#pragma once

// Outcome-probability models for projective measurements of each ancilla
// in the computational basis. X = 1 is the excited outcome |1><1|.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "colltherm/errors.hpp"
#include "colltherm/quantum.hpp"
#include "colltherm/rng.hpp"

namespace colltherm {

struct IidClosedForm {};
struct IidNumeric {};
struct ExactFilter {};
struct MarkovOrder {
    int order = 1;
};
struct NoisyProbeThermal {
    double probe_temperature = 0.0;
};
struct MixtureLikelihood {
    double q = 1.0;
};
using LikelihoodKind =
    std::variant<IidClosedForm, IidNumeric, ExactFilter, MarkovOrder, NoisyProbeThermal, MixtureLikelihood>;

class LikelihoodModel {
public:
    static constexpr int kMaxMarkovOrder = 2;

    LikelihoodModel(LikelihoodKind kind, ModelParams params) : kind_(kind), params_(std::move(params)) {
        params_.validate();
        std::visit([this](const auto& k) { check(k); }, kind_);
    }

    static LikelihoodModel iid_closed_form(const ModelParams& p) { return {IidClosedForm{}, p}; }
    static LikelihoodModel iid_numeric(const ModelParams& p) { return {IidNumeric{}, p}; }
    static LikelihoodModel exact_filter(const ModelParams& p) { return {ExactFilter{}, p}; }
    static LikelihoodModel markov(const ModelParams& p, int order) { return {MarkovOrder{order}, p}; }
    static LikelihoodModel noisy_probe(const ModelParams& p, double t_p) { return {NoisyProbeThermal{t_p}, p}; }
    static LikelihoodModel mixture(const ModelParams& p, double q) { return {MixtureLikelihood{q}, p}; }

    const LikelihoodKind& kind() const noexcept { return kind_; }
    const ModelParams& params() const noexcept { return params_; }

    // Outcomes are independent and identically distributed under this model.
    bool is_iid() const noexcept {
        return !std::holds_alternative<ExactFilter>(kind_) && !std::holds_alternative<MarkovOrder>(kind_);
    }

    std::string descriptor() const {
        std::ostringstream os;
        os.precision(17);
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, IidClosedForm>) os << "iid-closed-form";
                else if constexpr (std::is_same_v<K, IidNumeric>) os << "iid-numeric";
                else if constexpr (std::is_same_v<K, ExactFilter>) os << "exact-filter";
                else if constexpr (std::is_same_v<K, MarkovOrder>) os << "markov:" << k.order;
                else if constexpr (std::is_same_v<K, NoisyProbeThermal>) os << "noisy-probe:" << k.probe_temperature;
                else os << "mixture:" << k.q;
            },
            kind_);
        os << " omega=" << params_.omega << " gamma_tau_se=" << params_.gamma_tau_se
           << " g_tau_sa=" << params_.g_tau_sa << " probe=" << probe_name(params_.probe);
        if (auto* t = std::get_if<ThermalProbe>(&params_.probe)) os << ":" << t->temperature;
        if (auto* m = std::get_if<MixtureProbe>(&params_.probe)) os << ":" << m->q;
        return os.str();
    }

private:
    void require_full_swap(const char* what) const {
        if (!params_.full_swap()) throw RegimeError(std::string(what) + " requires g_tau_sa = pi/2");
    }
    void check(const IidClosedForm&) const { require_full_swap("closed-form likelihood"); }
    void check(const IidNumeric&) const {}
    void check(const ExactFilter&) const {}
    void check(const MarkovOrder& k) const {
        if (k.order < 0) throw DomainError("Markov order must be non-negative");
        if (k.order > kMaxMarkovOrder) throw UnsupportedOrderError("Markov order above 2 is not supported");
    }
    void check(const NoisyProbeThermal& k) const {
        require_full_swap("noisy-probe likelihood");
        if (!(k.probe_temperature >= 0.0)) throw DomainError("probe temperature must be non-negative");
    }
    void check(const MixtureLikelihood& k) const {
        require_full_swap("mixture likelihood");
        if (!(k.q >= 0.0 && k.q <= 1.0)) throw DomainError("mixture weight q must lie in [0, 1]");
    }

    LikelihoodKind kind_;
    ModelParams params_;
};

namespace detail {

inline void require_positive_temperature(double t) {
    if (!(t > 0.0)) throw DomainError("temperature must be positive");
}

// p1 and dp1/dT for the full-swap closed forms. `probe_p1` is the excited
// population the ancilla carries into the system (zero for ground probes).
struct ClosedForm {
    double p1;
    double dp1;
};

inline ClosedForm full_swap_closed_form(double t, double probe_p1, double dprobe_p1, const ModelParams& params) {
    const double x = params.omega / t;
    const double nbar = bose_occupation(t, params.omega);
    const double p_th = thermal_population(t, params.omega);
    const double gamma = params.gamma_tau_se * (2.0 * nbar + 1.0);
    const double decay = std::exp(-gamma);
    const double relaxed = -std::expm1(-gamma);
    const double dnbar = (x / t) * nbar * (nbar + 1.0);
    const double dp_th = (x / t) * p_th * (1.0 - p_th);
    const double dgamma = 2.0 * params.gamma_tau_se * dnbar;
    return {decay * probe_p1 + relaxed * p_th,
            decay * dprobe_p1 + decay * dgamma * (p_th - probe_p1) + relaxed * dp_th};
}

inline double probe_excitation(const ProbePrep& prep, double omega) {
    return initial_ancilla_state(prep, omega).population(1);
}

}  // namespace detail

// Full swap with ground-state probes: (1 - e^{-Gamma}) / (1 + e^{omega/T}).
inline double closed_form_likelihood(double temperature, const ModelParams& params) {
    detail::require_positive_temperature(temperature);
    params.validate();
    if (!params.full_swap()) throw RegimeError("closed_form_likelihood requires g_tau_sa = pi/2");
    if (!std::holds_alternative<GroundProbe>(params.probe))
        throw RegimeError("closed_form_likelihood requires ground-state probes");
    return detail::full_swap_closed_form(temperature, 0.0, 0.0, params).p1;
}

// Full swap with thermal probes at T_p:
// e^{-Gamma} / (1 + e^{omega/T_p}) + (1 - e^{-Gamma}) / (1 + e^{omega/T}).
inline double noisy_probe_likelihood(double temperature, double probe_temperature, const ModelParams& params) {
    detail::require_positive_temperature(temperature);
    params.validate();
    if (!params.full_swap()) throw RegimeError("noisy_probe_likelihood requires g_tau_sa = pi/2");
    const double probe_p1 = thermal_population(probe_temperature, params.omega);
    return detail::full_swap_closed_form(temperature, probe_p1, 0.0, params).p1;
}

inline double pipeline_excited_probability(const ModelParams& params, double temperature) {
    const double p = ancilla_marginal_state(params, temperature).population(1);
    return std::clamp(p, 0.0, 1.0);
}

// q P(X|T, |0><0|) + (1 - q) P(X|T, |1><1|), each term from the collisional pipeline.
inline double mixture_likelihood(double temperature, double q, const ModelParams& params) {
    detail::require_positive_temperature(temperature);
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("mixture weight q must lie in [0, 1]");
    params.validate();
    if (!params.full_swap()) throw RegimeError("mixture_likelihood requires g_tau_sa = pi/2");
    ModelParams ground = params, excited = params;
    ground.probe = GroundProbe{};
    excited.probe = MixtureProbe{0.0};
    return q * pipeline_excited_probability(ground, temperature) +
           (1.0 - q) * pipeline_excited_probability(excited, temperature);
}

// P(X = 1 | T) of a single ancilla in steady-state operation. For correlated
// models this is the stationary marginal.
inline double outcome_prob_iid(const LikelihoodModel& model, double temperature) {
    detail::require_positive_temperature(temperature);
    const ModelParams& params = model.params();
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, IidClosedForm>) {
                const double probe_p1 = detail::probe_excitation(params.probe, params.omega);
                return detail::full_swap_closed_form(temperature, probe_p1, 0.0, params).p1;
            } else if constexpr (std::is_same_v<K, NoisyProbeThermal>) {
                return noisy_probe_likelihood(temperature, k.probe_temperature, params);
            } else if constexpr (std::is_same_v<K, MixtureLikelihood>) {
                return mixture_likelihood(temperature, k.q, params);
            } else {
                return pipeline_excited_probability(params, temperature);
            }
        },
        model.kind());
}

// Analytic dp1/dT where the model has a closed form.
inline std::optional<double> outcome_prob_derivative(const LikelihoodModel& model, double temperature) {
    detail::require_positive_temperature(temperature);
    const ModelParams& params = model.params();
    if (std::holds_alternative<IidClosedForm>(model.kind())) {
        const double probe_p1 = detail::probe_excitation(params.probe, params.omega);
        return detail::full_swap_closed_form(temperature, probe_p1, 0.0, params).dp1;
    }
    if (auto* k = std::get_if<NoisyProbeThermal>(&model.kind())) {
        const double probe_p1 = thermal_population(k->probe_temperature, params.omega);
        return detail::full_swap_closed_form(temperature, probe_p1, 0.0, params).dp1;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Measurement-conditioned filter
// ---------------------------------------------------------------------------

struct FilterStep {
    double prob;
    DensityMatrix next_state;
};

inline constexpr double kMinOutcomeProbability = 1e-300;

namespace detail {

// Unnormalized conditional system state after relaxing, colliding with a
// fresh ancilla and observing `outcome` on it.
inline CMatrix conditioned_system(const CMatrix& rho_s, int outcome, const CMatrix& ancilla, double g_tau_sa,
                                  const RelaxationCoefficients& c) {
    const CMatrix joint = collide(rho_s, ancilla, g_tau_sa, c);
    CMatrix out(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out(i, j) = joint(2 * i + outcome, 2 * j + outcome);
    return out;
}

}  // namespace detail

inline FilterStep filter_step(const DensityMatrix& cond_state, int outcome, const LikelihoodModel& model,
                              double temperature) {
    if (cond_state.dim() != 2) throw InvariantViolation("filter_step expects a qubit state");
    if (outcome != 0 && outcome != 1) throw DomainError("outcome must be 0 or 1");
    detail::require_positive_temperature(temperature);
    const ModelParams& params = model.params();
    const detail::RelaxationCoefficients c(temperature, params);
    const CMatrix ancilla = initial_ancilla_state(params.probe, params.omega).matrix();
    const CMatrix sigma = detail::conditioned_system(cond_state.matrix(), outcome, ancilla, params.g_tau_sa, c);
    const double prob = sigma.trace().real();
    if (!(prob >= kMinOutcomeProbability)) throw UnderflowError("outcome has vanishing probability under the model");
    return {std::min(prob, 1.0), DensityMatrix::from_matrix(sigma / prob)};
}

// Precomputed filter for one temperature: the two conditioning maps as 4x4
// superoperators acting on vec(rho_S), plus the steady state they start from.
class FilterKernel {
public:
    FilterKernel(const ModelParams& params, double temperature) {
        detail::require_positive_temperature(temperature);
        const detail::RelaxationCoefficients c(temperature, params);
        const CMatrix ancilla = initial_ancilla_state(params.probe, params.omega).matrix();
        for (int x = 0; x < 2; ++x)
            maps_[x] = detail::superoperator(
                [&](const CMatrix& m) { return detail::conditioned_system(m, x, ancilla, params.g_tau_sa, c); });
        const CMatrix rho = steady_state(params, temperature).matrix();
        initial_ << rho(0, 0), rho(1, 0), rho(0, 1), rho(1, 1);
    }

    using State = Eigen::Vector4cd;

    const State& initial() const noexcept { return initial_; }

    static double excited_probability(const Eigen::Matrix4cd& map, const State& s) {
        const State out = map * s;
        return (out(0) + out(3)).real();
    }

    double prob_one(const State& s) const { return excited_probability(maps_[1], s); }

    // Conditions the state on `outcome` and returns that outcome's probability.
    double advance(State& s, int outcome) const {
        State out = maps_[outcome] * s;
        const double prob = (out(0) + out(3)).real();
        if (!(prob >= kMinOutcomeProbability)) throw UnderflowError("outcome has vanishing probability under the model");
        s = out / prob;
        return prob;
    }

    const Eigen::Matrix4cd& map(int outcome) const { return maps_[outcome]; }

private:
    std::array<Eigen::Matrix4cd, 2> maps_;
    State initial_;
};

// ---------------------------------------------------------------------------
// Markov-order truncation
// ---------------------------------------------------------------------------

// P(X = 1 | history) for histories of `order` bits. Histories are indexed
// with the most recent outcome as the least significant bit.
struct MarkovTable {
    int order = 0;
    std::vector<double> p_one;

    double operator()(unsigned history) const { return p_one.at(history); }
};

namespace detail {

// Stationary joint probability of `len` consecutive outcomes, bits listed
// oldest first, from the exact filter started at the steady state.
inline double block_probability(const FilterKernel& kernel, const std::vector<int>& bits) {
    FilterKernel::State s = kernel.initial();
    for (int b : bits) s = kernel.map(b) * s;
    return (s(0) + s(3)).real();
}

inline MarkovTable markov_table_from_kernel(const FilterKernel& kernel, int order, double marginal) {
    MarkovTable table{order, std::vector<double>(std::size_t{1} << order)};
    for (unsigned h = 0; h < table.p_one.size(); ++h) {
        std::vector<int> bits(static_cast<std::size_t>(order));
        for (int i = 0; i < order; ++i) bits[static_cast<std::size_t>(i)] = (h >> (order - 1 - i)) & 1;
        const double p_hist = block_probability(kernel, bits);
        bits.push_back(1);
        const double p_joint = block_probability(kernel, bits);
        // Histories of vanishing probability never occur in records; fall
        // back to the marginal so the table stays well defined.
        table.p_one[h] = p_hist > kMinOutcomeProbability ? std::clamp(p_joint / p_hist, 0.0, 1.0) : marginal;
    }
    return table;
}

}  // namespace detail

inline MarkovTable markov_conditional_table(const LikelihoodModel& model, double temperature, int order) {
    if (order < 0) throw DomainError("Markov order must be non-negative");
    if (order > LikelihoodModel::kMaxMarkovOrder) throw UnsupportedOrderError("Markov order above 2 is not supported");
    const double marginal = outcome_prob_iid(model, temperature);
    if (order == 0) return {0, {marginal}};
    return detail::markov_table_from_kernel(FilterKernel(model.params(), temperature), order, marginal);
}

// Conditional outcome probabilities for one temperature, consumed one
// outcome at a time in causal order.
class OutcomeSequenceModel {
public:
    OutcomeSequenceModel(const LikelihoodModel& model, double temperature) {
        if (model.is_iid()) {
            source_ = Iid{outcome_prob_iid(model, temperature)};
        } else if (std::holds_alternative<ExactFilter>(model.kind())) {
            FilterKernel kernel(model.params(), temperature);
            auto s = kernel.initial();
            source_ = Filter{std::move(kernel), s};
        } else {
            const int order = std::get<MarkovOrder>(model.kind()).order;
            const double marginal = outcome_prob_iid(model, temperature);
            Markov m;
            m.order = order;
            m.tables.push_back({0, {marginal}});
            if (order > 0) {
                const FilterKernel kernel(model.params(), temperature);
                for (int k = 1; k <= order; ++k) m.tables.push_back(detail::markov_table_from_kernel(kernel, k, marginal));
            }
            source_ = std::move(m);
        }
    }

    double prob_one() const {
        return std::visit(
            [](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Iid>) return s.p1;
                else if constexpr (std::is_same_v<S, Filter>) return std::clamp(s.kernel.prob_one(s.state), 0.0, 1.0);
                else return s.current();
            },
            source_);
    }

    // Probability of `outcome` given the past, then conditions on it.
    double observe(int outcome) {
        return std::visit(
            [outcome](auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Iid>) {
                    return outcome ? s.p1 : 1.0 - s.p1;
                } else if constexpr (std::is_same_v<S, Filter>) {
                    return std::min(1.0, s.kernel.advance(s.state, outcome));
                } else {
                    const double p1 = s.current();
                    s.history = ((s.history << 1) | static_cast<unsigned>(outcome)) & 0x3u;
                    if (s.seen < s.order) ++s.seen;
                    return outcome ? p1 : 1.0 - p1;
                }
            },
            source_);
    }

private:
    struct Iid {
        double p1;
    };
    struct Filter {
        FilterKernel kernel;
        FilterKernel::State state;
    };
    struct Markov {
        int order = 0;
        int seen = 0;
        unsigned history = 0;
        std::vector<MarkovTable> tables;

        // Early outcomes use the lower-order conditional of the hierarchy.
        double current() const {
            const unsigned mask = (1u << seen) - 1u;
            return tables[static_cast<std::size_t>(seen)](history & mask);
        }
    };
    std::variant<Iid, Filter, Markov> source_;
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct Trajectory {
    double true_temperature = 0.0;
    std::uint64_t seed = 0;
    std::string model_descriptor;
    std::vector<std::uint8_t> outcomes;

    std::size_t count_ones() const {
        std::size_t n = 0;
        for (auto b : outcomes) n += b;
        return n;
    }
};

inline Trajectory sample_trajectory(const LikelihoodModel& model, double true_temperature, std::size_t n,
                                    std::uint64_t seed) {
    if (n < 1) throw DomainError("trajectory length must be at least 1");
    Trajectory tr{true_temperature, seed, model.descriptor(), {}};
    tr.outcomes.reserve(n);
    Rng rng(seed);
    if (model.is_iid()) {
        const double p1 = outcome_prob_iid(model, true_temperature);
        for (std::size_t i = 0; i < n; ++i) tr.outcomes.push_back(rng.bernoulli(p1) ? 1 : 0);
    } else {
        OutcomeSequenceModel seq(model, true_temperature);
        for (std::size_t i = 0; i < n; ++i) {
            const int bit = rng.bernoulli(seq.prob_one()) ? 1 : 0;
            seq.observe(bit);
            tr.outcomes.push_back(static_cast<std::uint8_t>(bit));
        }
    }
    return tr;
}

// Two-line text form: a header with T0, seed and the model descriptor, then
// the outcomes as a string of '0'/'1'.
//   # trajectory T0=1.5 seed=42 model=iid-closed-form omega=1 ...
//   0100110...
inline std::string to_text(const Trajectory& tr) {
    std::ostringstream os;
    os.precision(17);
    os << "# trajectory T0=" << tr.true_temperature << " seed=" << tr.seed << " model=" << tr.model_descriptor
       << '\n';
    for (auto b : tr.outcomes) os << (b ? '1' : '0');
    os << '\n';
    return os.str();
}

inline Trajectory trajectory_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string header, bits;
    if (!std::getline(is, header) || !std::getline(is, bits)) throw DomainError("trajectory text needs two lines");
    const std::string prefix = "# trajectory T0=";
    if (header.rfind(prefix, 0) != 0) throw DomainError("malformed trajectory header");
    Trajectory tr;
    const auto seed_pos = header.find(" seed=");
    const auto model_pos = header.find(" model=");
    if (seed_pos == std::string::npos || model_pos == std::string::npos || model_pos < seed_pos)
        throw DomainError("malformed trajectory header");
    try {
        tr.true_temperature = std::stod(header.substr(prefix.size(), seed_pos - prefix.size()));
        tr.seed = std::stoull(header.substr(seed_pos + 6, model_pos - seed_pos - 6));
    } catch (const std::exception&) {
        throw DomainError("malformed trajectory header");
    }
    tr.model_descriptor = header.substr(model_pos + 7);
    tr.outcomes.reserve(bits.size());
    for (char ch : bits) {
        if (ch != '0' && ch != '1') throw DomainError("trajectory outcomes must be '0' or '1'");
        tr.outcomes.push_back(ch == '1' ? 1 : 0);
    }
    return tr;
}

}  // namespace colltherm
