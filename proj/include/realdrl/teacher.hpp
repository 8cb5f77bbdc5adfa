#pragma once

#include "realdrl/linalg.hpp"
#include "realdrl/lmi.hpp"
#include "realdrl/safety.hpp"

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace realdrl {

// How the trigger state is tied to the patch ellipsoid.
//   Diagonal:       Q - n * diag^2(s_trigger) > 0
//   ErrorEllipsoid: e' Q^-1 e < 1 for e = s_trigger - center, as [[1, e'], [e, Q]] > 0
enum class Containment { Diagonal, ErrorEllipsoid };

struct TeacherConfig {
    double chi = 0.3;
    double theta_patch = 0.5;
    double alpha = 0.9;
    double phi = 0.01;
    double kappa = 0.0008;
    double lambda_ridge = 1e-6;
    Containment containment = Containment::Diagonal;

    // reference cart-pole teacher values; infeasible here
    static TeacherConfig nominal() { return {}; }

    // feasible on the cart-pole; see README for the derivation
    static TeacherConfig operational() {
        TeacherConfig c;
        c.chi = 0.95;
        c.theta_patch = 0.32;
        c.alpha = 0.99;
        c.phi = 0.01;
        c.kappa = 1e-6;
        c.containment = Containment::ErrorEllipsoid;
        return c;
    }
};

struct InvalidConfig : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct PatchInfeasible : std::runtime_error {
    PatchInfeasible(const std::string& what, double slack) : std::runtime_error(what), best_slack(slack) {}
    double best_slack;
};

struct ParamCheck {
    bool ok = true;
    std::string violation;
    explicit operator bool() const { return ok; }
};

inline ParamCheck validate_parameters(const TeacherConfig& cfg, double eta) {
    ParamCheck r;
    std::ostringstream msg;
    const double mid = cfg.theta_patch + cfg.chi * eta;
    if (!(eta < mid && mid < 1.0)) {
        r.ok = false;
        msg << "theta + chi*eta = " << mid << " must lie in (" << eta << ", 1)";
    }
    const double lhs = (cfg.phi + 1.0) * cfg.kappa / ((1.0 - cfg.alpha) * cfg.phi);
    const double rhs = (1.0 - cfg.chi) * (1.0 - cfg.chi) * eta * eta / (cfg.theta_patch * cfg.theta_patch);
    if (!(lhs < rhs)) {
        if (!r.ok) msg << "; ";
        r.ok = false;
        msg << "mismatch bound " << lhs << " must be below " << rhs;
    }
    r.violation = msg.str();
    return r;
}

struct Patch {
    Vector trigger_state;
    Vector center;
    RectMatrix F;
    SymMatrix Q;
    SymMatrix P;
    SymMatrix T;
    RectMatrix A, B;
    int trigger_time = 0;
    int activation_steps = 0;
    std::vector<std::string> constraint_names;
    std::vector<double> slack;
    double solve_seconds = 0.0;
};

inline Vector patch_center(const Vector& s_trigger, const TeacherConfig& cfg) { return cfg.chi * s_trigger; }

inline LmiProblem patch_problem(const Vector& s_trigger, const RectMatrix& A, const RectMatrix& B,
                                const SafetySpec& spec, const TeacherConfig& cfg) {
    const int n = static_cast<int>(A.rows());
    const int m = static_cast<int>(B.cols());
    const int p = static_cast<int>(spec.C.rows());
    const int q = static_cast<int>(spec.D.rows());
    const RectMatrix Cb = (cfg.theta_patch * spec.c).cwiseInverse().asDiagonal() * spec.C;
    const RectMatrix Db = spec.d.cwiseInverse().asDiagonal() * spec.D;

    LmiProblem prob;
    prob.add_symmetric("Q", n);
    prob.add_rectangular("R", m, n);
    prob.add_symmetric("T", m);
    const AffineExpr Q = prob.var("Q"), R = prob.var("R"), T = prob.var("T");
    const auto I = [](int k) { return AffineExpr::constant_of(RectMatrix::Identity(k, k)); };

    prob.add_constraint({"patch", {{I(p) - Cb * Q * RectMatrix(Cb.transpose())}}});
    prob.add_constraint({"action", {{I(q) - Db * T * RectMatrix(Db.transpose())}}});
    if (cfg.containment == Containment::Diagonal) {
        const RectMatrix d2 = RectMatrix(s_trigger.cwiseAbs2().asDiagonal()) * static_cast<double>(n);
        prob.add_constraint({"trigger", {{Q - AffineExpr::constant_of(d2)}}});
    } else {
        const Vector e = s_trigger - patch_center(s_trigger, cfg);
        prob.add_constraint({"trigger",
                             {{AffineExpr::constant_of(RectMatrix::Ones(1, 1))},
                              {AffineExpr::constant_of(e), Q}}});
    }
    const AffineExpr AQBR = A * Q + B * R;
    prob.add_constraint({"decay", {{cfg.alpha * Q}, {AQBR, (1.0 / (1.0 + cfg.phi)) * Q}}});
    prob.add_constraint({"gain", {{Q}, {R, T}}});
    return prob;
}

// alpha P - (1 + phi) (A + B F)' P (A + B F)
inline SymMatrix closed_loop_certificate(const Patch& patch, const TeacherConfig& cfg) {
    const RectMatrix Acl = patch.A + patch.B * patch.F;
    return SymMatrix(RectMatrix(cfg.alpha * patch.P.dense() -
                                (1.0 + cfg.phi) * Acl.transpose() * patch.P.dense() * Acl));
}

inline Patch compute_patch(const Vector& s_trigger, const RectMatrix& A, const RectMatrix& B,
                           const SafetySpec& spec, const TeacherConfig& cfg, const SolverOptions& opt = {}) {
    if (auto chk = validate_parameters(cfg, spec.eta); !chk) throw InvalidConfig(chk.violation);
    const LmiProblem prob = patch_problem(s_trigger, A, B, spec, cfg);
    Assignment a;
    try {
        a = solve(prob, opt);
    } catch (const LmiSolveError& e) {
        throw PatchInfeasible(e.what(), e.best_slack);
    }
    Patch patch;
    patch.trigger_state = s_trigger;
    patch.center = patch_center(s_trigger, cfg);
    patch.Q = SymMatrix(a[0]);
    patch.P = invert_spd(patch.Q);
    patch.F = a[1] * patch.P.dense();
    patch.T = SymMatrix(a[2]);
    patch.A = A;
    patch.B = B;
    patch.constraint_names = a.constraint_names;
    patch.slack = a.slack;
    patch.solve_seconds = a.solve_seconds;
    return patch;
}

struct PatchCertificate {
    std::vector<std::string> names;
    std::vector<double> min_eig;
    bool pass = false;
};

// All four LMI families plus the closed-loop decay, rechecked from the patch alone.
inline PatchCertificate certify_patch(const Patch& patch, const SafetySpec& spec, const TeacherConfig& cfg,
                                      double tol = 1e-8) {
    const LmiProblem prob = patch_problem(patch.trigger_state, patch.A, patch.B, spec, cfg);
    Assignment a;
    a.values = {patch.Q.dense(), RectMatrix(patch.F * patch.Q.dense()), patch.T.dense()};
    const CertifyReport r = certify(prob, a, tol);
    PatchCertificate c{r.names, r.min_eig, r.pass};
    const double cl = min_eigenvalue(closed_loop_certificate(patch, cfg));
    c.names.push_back("closed-loop");
    c.min_eig.push_back(cl);
    c.pass = c.pass && cl >= tol;
    return c;
}

inline Vector teacher_action(const Patch& patch, const Vector& s) { return patch.F * (s - patch.center); }

struct MismatchEstimate {
    Vector h_hat;
    double magnitude = 0.0;
};

inline MismatchEstimate estimate_mismatch(const RectMatrix& A, const RectMatrix& B, const SymMatrix& P,
                                          const Vector& e_prev, const Vector& a_prev, const Vector& e_curr) {
    MismatchEstimate m;
    m.h_hat = e_curr - A * e_prev - B * a_prev;
    m.magnitude = P.quad(m.h_hat);
    return m;
}

// argmin_a |B a - (e - e_hat)|^2 + lambda |a|^2
inline Vector compensation_action(const RectMatrix& B, const Vector& e_curr, const Vector& e_predicted,
                                  double lambda_ridge) {
    if (!(lambda_ridge > 0.0)) throw std::invalid_argument("compensation: lambda must be positive");
    const RectMatrix G = B.transpose() * B + lambda_ridge * RectMatrix::Identity(B.cols(), B.cols());
    return G.ldlt().solve(B.transpose() * (e_curr - e_predicted));
}

inline Vector clamp_to_box(const SafetySpec& spec, const Vector& a) {
    // box sets only: D is square diagonal for every spec built here
    Vector out = a;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double lim = spec.d[i] / std::abs(spec.D(i, i));
        out[i] = std::clamp(a[i], -lim, lim);
    }
    return out;
}

struct PrevTransition {
    Vector e;  // error relative to the patch center
    Vector a;  // action actually applied
};

struct TeacherStep {
    Vector action;
    Vector nominal;
    Vector compensation;
    std::optional<MismatchEstimate> mismatch;
    bool compensated = false;
};

inline TeacherStep teacher_step(const Patch& patch, const SafetySpec& spec, const TeacherConfig& cfg,
                                const Vector& s, const std::optional<PrevTransition>& prev) {
    TeacherStep o;
    const Vector e = s - patch.center;
    o.nominal = patch.F * e;
    o.compensation = Vector::Zero(o.nominal.size());
    if (prev) {
        o.mismatch = estimate_mismatch(patch.A, patch.B, patch.P, prev->e, prev->a, e);
        if (o.mismatch->magnitude > cfg.kappa) {
            // the residual is taken to persist one more step; cancel it
            const Vector predicted = e - o.mismatch->h_hat;
            o.compensation = compensation_action(patch.B, predicted, e, cfg.lambda_ridge);
            o.compensated = true;
        }
    }
    o.action = clamp_to_box(spec, o.nominal + o.compensation);
    return o;
}

// Holds one activation: the patch plus the previous transition.
class TeacherController {
public:
    TeacherController(Patch patch, const SafetySpec& spec, const TeacherConfig& cfg)
        : patch_(std::move(patch)), spec_(&spec), cfg_(cfg) {}

    TeacherStep step(const Vector& s) {
        TeacherStep o = teacher_step(patch_, *spec_, cfg_, s, prev_);
        prev_ = PrevTransition{s - patch_.center, o.action};
        ++patch_.activation_steps;
        return o;
    }

    const Patch& patch() const { return patch_; }

private:
    Patch patch_;
    const SafetySpec* spec_;
    TeacherConfig cfg_;
    std::optional<PrevTransition> prev_;
};

}  // namespace realdrl
