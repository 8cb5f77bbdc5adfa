#pragma once

#include "realdrl/linalg.hpp"
#include "realdrl/lmi.hpp"

#include <optional>
#include <stdexcept>

namespace realdrl {

struct InvalidState : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateSafetySet : std::domain_error {
    using std::domain_error::domain_error;
};

// Box-polytope sets S = {|C s| < c}, A = {|D a| < d} and the eta-scaled L.
struct SafetySpec {
    RectMatrix C;
    Vector c;
    RectMatrix D;
    Vector d;
    double eta = 0.7;
    // bounding rows used only for the indicator matrix when C alone is unbounded
    RectMatrix C_indicator;
    Vector c_indicator;
    std::optional<SymMatrix> indicator_P;

    int state_dim() const { return static_cast<int>(C.cols()); }
    int action_dim() const { return static_cast<int>(D.cols()); }

    void validate() const {
        if (C.rows() != c.size() || D.rows() != d.size())
            throw std::invalid_argument("SafetySpec: bound vector length mismatch");
        if (!(c.array() > 0).all() || !(d.array() > 0).all())
            throw std::invalid_argument("SafetySpec: bounds must be positive");
        if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("SafetySpec: eta must lie in (0,1)");
    }
};

namespace detail {
inline bool strictly_inside(const RectMatrix& M, const Vector& bound, const Vector& v, double scale) {
    if (M.cols() != v.size()) throw InvalidState("state/action dimension mismatch");
    const Vector y = M * v;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!(std::abs(y[i]) < scale * bound[i])) return false;
    return true;
}
}  // namespace detail

inline bool in_safety_set(const SafetySpec& spec, const Vector& s) {
    return detail::strictly_inside(spec.C, spec.c, s, 1.0);
}

inline bool in_learning_space(const SafetySpec& spec, const Vector& s) {
    return detail::strictly_inside(spec.C, spec.c, s, spec.eta);
}

inline bool is_admissible(const SafetySpec& spec, const Vector& a) {
    return detail::strictly_inside(spec.D, spec.d, a, 1.0);
}

// Maximum-volume ellipsoid {s' P s < 1} with I - Cb P^-1 Cb' > 0, Cb = diag(1/c) C.
inline SymMatrix compute_indicator_matrix(const RectMatrix& C, const Vector& c,
                                          const SolverOptions& opt = {}) {
    const int n = static_cast<int>(C.cols());
    const int p = static_cast<int>(C.rows());
    if (c.size() != p || !(c.array() > 0).all())
        throw std::invalid_argument("indicator: bounds must be positive, one per row");
    const RectMatrix Cb = c.cwiseInverse().asDiagonal() * C;
    if (p < n || min_eigenvalue(SymMatrix(RectMatrix(Cb.transpose() * Cb))) <= 1e-12)
        throw DegenerateSafetySet("indicator: safety polytope is unbounded");

    LmiProblem prob;
    prob.add_symmetric("Q", n);
    const AffineExpr Q = prob.var("Q");
    prob.add_constraint({"Q", {{Q}}});
    prob.add_constraint(
        {"box", {{AffineExpr::constant_of(RectMatrix::Identity(p, p)) - Cb * Q * RectMatrix(Cb.transpose())}}});
    prob.maximize_logdet("Q");
    const Assignment a = solve(prob, opt);
    return invert_spd(SymMatrix(a[0]));
}

inline const SymMatrix& compute_indicator_matrix(SafetySpec& spec) {
    if (!spec.indicator_P) {
        const bool own = spec.C_indicator.size() == 0;
        spec.indicator_P = compute_indicator_matrix(own ? spec.C : spec.C_indicator,
                                                    own ? spec.c : spec.c_indicator);
    }
    return *spec.indicator_P;
}

inline double safety_indicator(const SymMatrix& P, const Vector& s) {
    if (P.order() != s.size()) throw InvalidState("indicator: dimension mismatch");
    return P.quad(s);
}

inline double safety_indicator(const SafetySpec& spec, const Vector& s) {
    if (!spec.indicator_P) throw std::logic_error("indicator matrix not computed");
    return safety_indicator(*spec.indicator_P, s);
}

// Cart-pole spec: |x| < 1, |theta| < 1, |a| < 50, velocity rows only for P.
inline SafetySpec cartpole_safety_spec(double eta = 0.7) {
    SafetySpec s;
    s.C = from_rows({{1, 0, 0, 0}, {0, 0, 1, 0}});
    s.c = vec({1, 1});
    s.D = from_rows({{1}});
    s.d = vec({50});
    s.eta = eta;
    s.C_indicator = RectMatrix::Identity(4, 4);
    s.c_indicator = vec({1, 3, 1, 4.5});
    s.validate();
    return s;
}

}  // namespace realdrl
