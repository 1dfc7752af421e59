#pragma once

// Small-Hilbert-space dynamics of the collisional model: a system qubit S
// relaxes against a thermal environment, then undergoes a partial swap with
// a fresh ancilla qubit. Basis ordering is |0> = ground, |1> = excited, and
// in joint states the system is always the most significant tensor factor.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "colltherm/errors.hpp"
#include "colltherm/linalg.hpp"

namespace colltherm {

inline constexpr double kFullSwap = std::numbers::pi / 2.0;

class DensityMatrix {
public:
    static constexpr double kHermitianTol = 1e-12;
    static constexpr double kTraceTol = 1e-10;
    static constexpr double kPsdTol = 1e-10;

    // Validates every invariant; throws InvariantViolation on failure.
    static DensityMatrix from_matrix(const CMatrix& m) {
        check(m);
        CMatrix h = 0.5 * (m + m.adjoint());
        return DensityMatrix(std::move(h));
    }

    static DensityMatrix diagonal(const std::vector<double>& populations) {
        const auto d = static_cast<Eigen::Index>(populations.size());
        CMatrix m = CMatrix::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) m(i, i) = populations[static_cast<std::size_t>(i)];
        return from_matrix(m);
    }

    static DensityMatrix basis_state(int dim, int index) {
        std::vector<double> p(static_cast<std::size_t>(dim), 0.0);
        p.at(static_cast<std::size_t>(index)) = 1.0;
        return diagonal(p);
    }

    static DensityMatrix maximally_mixed(int dim) {
        return diagonal(std::vector<double>(static_cast<std::size_t>(dim), 1.0 / dim));
    }

    const CMatrix& matrix() const noexcept { return m_; }
    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    double population(int i) const { return m_(i, i).real(); }
    Complex operator()(int i, int j) const { return m_(i, j); }

    // Eigenvalues in ascending order.
    RVector eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    static void check(const CMatrix& m) {
        const auto d = m.rows();
        if (m.cols() != d || (d != 2 && d != 4 && d != 8))
            throw InvariantViolation("density matrix must be square of dimension 2, 4 or 8");
        if (!m.allFinite()) throw InvariantViolation("density matrix has non-finite entries");
        if (linalg::max_abs(m - m.adjoint()) > kHermitianTol)
            throw InvariantViolation("density matrix is not Hermitian");
        if (std::abs(m.trace() - Complex(1.0)) > kTraceTol)
            throw InvariantViolation("density matrix trace differs from one");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kPsdTol)
            throw InvariantViolation("density matrix is not positive semidefinite");
    }

private:
    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
    CMatrix m_;
};

struct GroundProbe {};
struct ThermalProbe {
    double temperature = 0.0;
};
// Ancilla prepared in |0> with probability q and |1> with probability 1 - q.
struct MixtureProbe {
    double q = 1.0;
};
using ProbePrep = std::variant<GroundProbe, ThermalProbe, MixtureProbe>;

struct ModelParams {
    double omega = 1.0;
    double gamma_tau_se = 0.4;
    double g_tau_sa = kFullSwap;
    ProbePrep probe = GroundProbe{};

    bool full_swap() const noexcept { return std::abs(g_tau_sa - kFullSwap) < 1e-12; }

    void validate() const {
        if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("omega must be positive");
        if (!(gamma_tau_se >= 0.0) || std::isnan(gamma_tau_se))
            throw DomainError("gamma_tau_se must be non-negative");
        if (!(g_tau_sa >= 0.0 && g_tau_sa <= kFullSwap + 1e-12))
            throw DomainError("g_tau_sa must lie in [0, pi/2]");
        if (auto* t = std::get_if<ThermalProbe>(&probe); t && !(t->temperature >= 0.0))
            throw DomainError("probe temperature must be non-negative");
        if (auto* m = std::get_if<MixtureProbe>(&probe); m && !(m->q >= 0.0 && m->q <= 1.0))
            throw DomainError("mixture weight q must lie in [0, 1]");
    }
};

inline std::string probe_name(const ProbePrep& p) {
    if (std::holds_alternative<GroundProbe>(p)) return "ground";
    if (std::holds_alternative<ThermalProbe>(p)) return "thermal";
    return "mixture";
}

inline double bose_occupation(double temperature, double omega) {
    if (!(temperature > 0.0) || !(omega > 0.0))
        throw DomainError("bose_occupation requires T > 0 and omega > 0");
    return 1.0 / std::expm1(omega / temperature);
}

// Excited-state population of a thermal qubit, 1 / (1 + e^{omega/T}).
inline double thermal_population(double temperature, double omega) {
    if (temperature < 0.0 || std::isnan(temperature)) throw DomainError("temperature must be non-negative");
    if (!(omega > 0.0)) throw DomainError("omega must be positive");
    if (temperature == 0.0) return 0.0;
    return 1.0 / (1.0 + std::exp(omega / temperature));
}

inline DensityMatrix thermal_qubit_state(double temperature, double omega) {
    const double p1 = thermal_population(temperature, omega);
    return DensityMatrix::diagonal({1.0 - p1, p1});
}

// Thermal relaxation parameter gamma (2 nbar + 1) tau_SE.
inline double relaxation_parameter(double temperature, const ModelParams& params) {
    return params.gamma_tau_se * (2.0 * bose_occupation(temperature, params.omega) + 1.0);
}

inline DensityMatrix initial_ancilla_state(const ProbePrep& prep, double omega) {
    if (std::holds_alternative<GroundProbe>(prep)) return DensityMatrix::basis_state(2, 0);
    if (auto* t = std::get_if<ThermalProbe>(&prep)) return thermal_qubit_state(t->temperature, omega);
    const double q = std::get<MixtureProbe>(prep).q;
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("mixture weight q must lie in [0, 1]");
    return DensityMatrix::diagonal({q, 1.0 - q});
}

namespace detail {

// Action of the relaxation map on matrix units, from the analytic solution
// of the qubit master equation: populations relax at rate Gamma toward the
// thermal value, coherences at Gamma/2.
struct RelaxationCoefficients {
    double excite_from_ground;   // <1|E(|0><0|)|1>
    double stay_excited;         // <1|E(|1><1|)|1>
    double coherence;            // E(|0><1|) = coherence |0><1|

    RelaxationCoefficients(double temperature, const ModelParams& params) {
        const double p_th = thermal_population(temperature, params.omega);
        const double gamma = relaxation_parameter(temperature, params);
        const double decay = std::exp(-gamma);
        excite_from_ground = p_th * (-std::expm1(-gamma));
        stay_excited = p_th + (1.0 - p_th) * decay;
        coherence = std::exp(-0.5 * gamma);
    }
};

// Applies the relaxation map to qubit 0 of a joint operator (identity on the rest).
inline CMatrix relax_leading_qubit(const CMatrix& joint, const RelaxationCoefficients& c) {
    const Eigen::Index d = joint.rows() / 2;
    const CMatrix b00 = joint.topLeftCorner(d, d);
    const CMatrix b11 = joint.bottomRightCorner(d, d);
    CMatrix out(joint.rows(), joint.cols());
    out.topLeftCorner(d, d) = (1.0 - c.excite_from_ground) * b00 + (1.0 - c.stay_excited) * b11;
    out.bottomRightCorner(d, d) = c.excite_from_ground * b00 + c.stay_excited * b11;
    out.topRightCorner(d, d) = c.coherence * joint.topRightCorner(d, d);
    out.bottomLeftCorner(d, d) = c.coherence * joint.bottomLeftCorner(d, d);
    return out;
}

// Partial swap between qubit 0 (system) and the last qubit of an n-qubit register.
inline CMatrix swap_with_last(const CMatrix& joint, double g_tau_sa) {
    const int n = linalg::qubit_count(joint.rows());
    const Eigen::Index sys_bit = Eigen::Index{1} << (n - 1);
    const Eigen::Index anc_bit = 1;
    const Complex c(std::cos(g_tau_sa), 0.0);
    const Complex s(0.0, -std::sin(g_tau_sa));
    CMatrix u = CMatrix::Identity(joint.rows(), joint.cols());
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        const bool sys = (i & sys_bit) != 0, anc = (i & anc_bit) != 0;
        if (sys == anc) continue;
        const Eigen::Index partner = i ^ sys_bit ^ anc_bit;
        u(i, i) = c;
        u(partner, i) = s;
    }
    return u * joint * u.adjoint();
}

// One collision on a joint operator with the system as qubit 0: relax the
// system, append a fresh ancilla, apply the partial swap to (S, new ancilla).
inline CMatrix collide(const CMatrix& joint, const CMatrix& ancilla, double g_tau_sa,
                       const RelaxationCoefficients& c) {
    return swap_with_last(linalg::kron(relax_leading_qubit(joint, c), ancilla), g_tau_sa);
}

// Traces out the last qubit of a register.
inline CMatrix trace_last(const CMatrix& joint) {
    const Eigen::Index d = joint.rows() / 2;
    CMatrix out(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) out(i, j) = joint(2 * i, 2 * j) + joint(2 * i + 1, 2 * j + 1);
    return out;
}

// Traces out qubit 0 of a register.
inline CMatrix trace_first(const CMatrix& joint) {
    const Eigen::Index d = joint.rows() / 2;
    return joint.topLeftCorner(d, d) + joint.bottomRightCorner(d, d);
}

// Stroboscopic map applied to an arbitrary (not necessarily physical) 2x2 operator.
inline CMatrix stroboscopic(const CMatrix& rho_s, const CMatrix& ancilla, double g_tau_sa,
                            const RelaxationCoefficients& c) {
    return trace_last(collide(rho_s, ancilla, g_tau_sa, c));
}

// 4x4 matrix of a linear map on 2x2 operators in column-stacked vec form.
template <class Map>
CMatrix superoperator(Map&& map) {
    CMatrix sup(4, 4);
    for (int col = 0; col < 4; ++col) {
        CMatrix unit = CMatrix::Zero(2, 2);
        unit(col % 2, col / 2) = 1.0;
        const CMatrix img = map(unit);
        for (int row = 0; row < 4; ++row) sup(row, col) = img(row % 2, row / 2);
    }
    return sup;
}

inline CMatrix unvec2(const CVector& v) {
    CMatrix m(2, 2);
    m << v(0), v(2), v(1), v(3);
    return m;
}

}  // namespace detail

inline DensityMatrix se_relaxation_map(const DensityMatrix& rho_s, double temperature, const ModelParams& params) {
    if (rho_s.dim() != 2) throw InvariantViolation("se_relaxation_map expects a qubit state");
    params.validate();
    const detail::RelaxationCoefficients c(temperature, params);
    return DensityMatrix::from_matrix(detail::relax_leading_qubit(rho_s.matrix(), c));
}

// exp{-i g tau (s+ s- + s- s+)} on S (x) A. Only the {|01>, |10>} block is nontrivial.
inline CMatrix partial_swap_unitary(double g_tau_sa) {
    if (!std::isfinite(g_tau_sa)) throw DomainError("g_tau_sa must be finite");
    CMatrix u = CMatrix::Identity(4, 4);
    u(1, 1) = u(2, 2) = std::cos(g_tau_sa);
    u(1, 2) = u(2, 1) = Complex(0.0, -std::sin(g_tau_sa));
    return u;
}

enum class Keep { System, Ancilla, Both };

inline DensityMatrix collide_and_reduce(const DensityMatrix& rho_s, const DensityMatrix& ancilla, double temperature,
                                        const ModelParams& params, Keep keep) {
    if (rho_s.dim() != 2 || ancilla.dim() != 2) throw InvariantViolation("collide_and_reduce expects qubit states");
    params.validate();
    const detail::RelaxationCoefficients c(temperature, params);
    const CMatrix joint = detail::collide(rho_s.matrix(), ancilla.matrix(), params.g_tau_sa, c);
    switch (keep) {
        case Keep::System: return DensityMatrix::from_matrix(detail::trace_last(joint));
        case Keep::Ancilla: return DensityMatrix::from_matrix(detail::trace_first(joint));
        case Keep::Both: break;
    }
    return DensityMatrix::from_matrix(joint);
}

// Fixed point of the stroboscopic map, solved as the trace-one null vector
// of (Phi - id); fixed-point iteration is the fallback if the linear solve
// leaves a residual above tolerance.
inline DensityMatrix steady_state(const ModelParams& params, double temperature) {
    params.validate();
    if (!(temperature > 0.0)) throw DomainError("steady_state requires T > 0");
    if (params.gamma_tau_se == 0.0 && params.g_tau_sa == 0.0)
        throw DegenerateMapError("stroboscopic map is the identity; fixed point is not unique");

    const detail::RelaxationCoefficients c(temperature, params);
    const CMatrix ancilla = initial_ancilla_state(params.probe, params.omega).matrix();
    auto phi = [&](const CMatrix& x) { return detail::stroboscopic(x, ancilla, params.g_tau_sa, c); };
    const CMatrix a = detail::superoperator(phi) - CMatrix::Identity(4, 4);

    Eigen::JacobiSVD<CMatrix> svd(a);
    const auto& sv = svd.singularValues();
    if (sv(2) < 1e-13) throw DegenerateMapError("stroboscopic map has more than one fixed point");

    // Stack the trace condition beneath (Phi - id) and solve in least squares.
    CMatrix sys(5, 4);
    sys.topRows(4) = a;
    sys.row(4) << 1.0, 0.0, 0.0, 1.0;
    CVector rhs = CVector::Zero(5);
    rhs(4) = 1.0;
    CMatrix rho = detail::unvec2(sys.colPivHouseholderQr().solve(rhs));
    rho = 0.5 * (rho + rho.adjoint());

    if (linalg::max_abs(phi(rho) - rho) >= 1e-12) {
        CMatrix it = CMatrix::Identity(2, 2) * 0.5;
        for (int k = 0; k < 100000 && linalg::max_abs(phi(it) - it) >= 1e-14; ++k) it = phi(it);
        rho = 0.5 * (it + it.adjoint());
    }
    return DensityMatrix::from_matrix(rho);
}

// Post-collision state of a single ancilla in steady-state operation.
inline DensityMatrix ancilla_marginal_state(const ModelParams& params, double temperature) {
    return collide_and_reduce(steady_state(params, temperature), initial_ancilla_state(params.probe, params.omega),
                              temperature, params, Keep::Ancilla);
}

// Joint state of ancillas A_i and A_{i+lag} in steady-state operation.
inline DensityMatrix ancilla_pair_state(const ModelParams& params, double temperature, int lag) {
    if (lag < 1) throw DomainError("lag must be at least 1");
    const DensityMatrix rho_star = steady_state(params, temperature);
    const detail::RelaxationCoefficients c(temperature, params);
    const CMatrix ancilla = initial_ancilla_state(params.probe, params.omega).matrix();

    // S (x) A_i, then intermediate collisions with fresh ancillas traced out at once.
    CMatrix joint = detail::collide(rho_star.matrix(), ancilla, params.g_tau_sa, c);
    for (int k = 1; k < lag; ++k) joint = detail::trace_last(detail::collide(joint, ancilla, params.g_tau_sa, c));
    // S (x) A_i (x) A_{i+lag} -> A_i (x) A_{i+lag}
    return DensityMatrix::from_matrix(detail::trace_first(detail::collide(joint, ancilla, params.g_tau_sa, c)));
}

// In nats. Eigenvalues in [-1e-10, 0) are clipped to zero; DensityMatrix
// construction already rejects anything more negative.
inline double von_neumann_entropy(const DensityMatrix& rho) {
    double s = 0.0;
    for (double lambda : rho.eigenvalues()) {
        if (lambda < -DensityMatrix::kPsdTol) throw InvariantViolation("negative eigenvalue in entropy");
        if (lambda > 0.0) s -= lambda * std::log(lambda);
    }
    return s;
}

// I = S(A) + S(B) - S(AB). Pair states of this model are diagonal; for those
// the equivalent relative-entropy form sum p_ab log(p_ab / p_a p_b) is used,
// written in terms of the covariance so that correlations far below machine
// epsilon of the entropies stay resolvable.
inline double mutual_information(const DensityMatrix& pair) {
    if (pair.dim() != 4) throw DomainError("mutual_information expects a two-qubit state");
    const CMatrix& m = pair.matrix();
    const CMatrix offdiag = m - CMatrix(m.diagonal().asDiagonal());
    if (linalg::max_abs(offdiag) > 1e-14) {
        const DensityMatrix a = DensityMatrix::from_matrix(linalg::partial_trace(m, {0}));
        const DensityMatrix b = DensityMatrix::from_matrix(linalg::partial_trace(m, {1}));
        const double info = von_neumann_entropy(a) + von_neumann_entropy(b) - von_neumann_entropy(pair);
        return info < 0.0 ? 0.0 : info;
    }
    double joint[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) joint[i][j] = std::max(0.0, m(2 * i + j, 2 * i + j).real());
    const double pa[2] = {joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]};
    const double pb[2] = {joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]};
    // Covariance of the two excitation indicators; every cell deviates by +-cov.
    const double cov = joint[1][1] - pa[1] * pb[1];
    double info = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            if (joint[i][j] <= 0.0) continue;
            const double product = pa[i] * pb[j];
            const double delta = (i == j) ? cov : -cov;
            info += joint[i][j] * std::log1p(delta / product);
        }
    return info < 0.0 ? 0.0 : info;
}

inline double mutual_information(const ModelParams& params, double temperature, int lag) {
    return mutual_information(ancilla_pair_state(params, temperature, lag));
}

}  // namespace colltherm
