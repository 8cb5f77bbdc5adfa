#pragma once

#include "realdrl/linalg.hpp"

#include <chrono>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace realdrl {

enum class VarKind { Symmetric, Rectangular };

struct LmiVariable {
    std::string id;
    VarKind kind = VarKind::Symmetric;
    int rows = 1;
    int cols = 1;
};

struct InvalidProblem : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidAssignment : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class SolveStatus { Solved, Infeasible, MaxIterations };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Solved: return "solved";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIterations: return "max-iterations";
    }
    return "?";
}

struct LmiSolveError : std::runtime_error {
    LmiSolveError(SolveStatus s, double slack, const std::string& what)
        : std::runtime_error(what), status(s), best_slack(slack) {}
    SolveStatus status;
    double best_slack;
};

// left * op(X) * right, op = identity or transpose.
struct Term {
    int var = 0;
    RectMatrix left;
    RectMatrix right;
    bool transpose = false;
};

// constant + sum of terms; every piece has shape rows x cols.
struct AffineExpr {
    int rows = 0;
    int cols = 0;
    RectMatrix constant;
    std::vector<Term> terms;

    static AffineExpr zero(int r, int c) {
        AffineExpr e;
        e.rows = r;
        e.cols = c;
        e.constant = RectMatrix::Zero(r, c);
        return e;
    }

    static AffineExpr constant_of(const RectMatrix& m) {
        AffineExpr e = zero(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
        e.constant = m;
        return e;
    }
};

inline AffineExpr operator+(AffineExpr a, const AffineExpr& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw InvalidProblem("expr +: shape mismatch");
    a.constant += b.constant;
    a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
    return a;
}

inline AffineExpr operator*(double k, AffineExpr a) {
    a.constant *= k;
    for (auto& t : a.terms) t.left *= k;
    return a;
}

inline AffineExpr operator-(const AffineExpr& a) { return -1.0 * a; }
inline AffineExpr operator-(const AffineExpr& a, const AffineExpr& b) { return a + (-b); }

inline AffineExpr operator*(const RectMatrix& l, AffineExpr a) {
    if (l.cols() != a.rows) throw InvalidProblem("expr left multiply: shape mismatch");
    a.constant = l * a.constant;
    for (auto& t : a.terms) t.left = l * t.left;
    a.rows = static_cast<int>(l.rows());
    return a;
}

inline AffineExpr operator*(AffineExpr a, const RectMatrix& r) {
    if (r.rows() != a.cols) throw InvalidProblem("expr right multiply: shape mismatch");
    a.constant = a.constant * r;
    for (auto& t : a.terms) t.right = t.right * r;
    a.cols = static_cast<int>(r.cols());
    return a;
}

inline AffineExpr transpose(const AffineExpr& a) {
    AffineExpr e = AffineExpr::zero(a.cols, a.rows);
    e.constant = a.constant.transpose();
    for (const auto& t : a.terms)
        e.terms.push_back({t.var, t.right.transpose(), t.left.transpose(), !t.transpose});
    return e;
}

// Symmetric block matrix given by its lower triangle: blocks[i][j], j <= i.
struct LmiConstraint {
    std::string name;
    std::vector<std::vector<AffineExpr>> blocks;
};

enum class ObjectiveKind { Feasibility, MaximizeLogDet };

struct Objective {
    ObjectiveKind kind = ObjectiveKind::Feasibility;
    int target = -1;
};

class LmiProblem {
public:
    int add_symmetric(const std::string& id, int n) { return add({id, VarKind::Symmetric, n, n}); }
    int add_rectangular(const std::string& id, int r, int c) {
        return add({id, VarKind::Rectangular, r, c});
    }

    AffineExpr var(const std::string& id) const { return var(index(id)); }

    AffineExpr var(int k) const {
        const auto& v = variables_.at(static_cast<size_t>(k));
        AffineExpr e = AffineExpr::zero(v.rows, v.cols);
        e.terms.push_back({k, RectMatrix::Identity(v.rows, v.rows),
                           RectMatrix::Identity(v.cols, v.cols), false});
        return e;
    }

    int index(const std::string& id) const {
        auto it = ids_.find(id);
        if (it == ids_.end()) throw InvalidProblem("unknown variable " + id);
        return it->second;
    }

    void add_constraint(LmiConstraint c) {
        validate(c);
        constraints_.push_back(std::move(c));
    }

    void maximize_logdet(const std::string& id) {
        const int k = index(id);
        if (variables_[static_cast<size_t>(k)].kind != VarKind::Symmetric)
            throw InvalidProblem("logdet target must be symmetric");
        objective_ = {ObjectiveKind::MaximizeLogDet, k};
    }

    const std::vector<LmiVariable>& variables() const { return variables_; }
    const std::vector<LmiConstraint>& constraints() const { return constraints_; }
    const Objective& objective() const { return objective_; }

    // scale every block of every constraint by k > 0
    LmiProblem scaled(double k) const {
        LmiProblem p = *this;
        for (auto& c : p.constraints_)
            for (auto& row : c.blocks)
                for (auto& b : row) b = k * b;
        return p;
    }

private:
    int add(LmiVariable v) {
        if (v.rows < 1 || v.cols < 1) throw InvalidProblem("variable shape must be positive");
        if (ids_.count(v.id)) throw InvalidProblem("duplicate variable " + v.id);
        const int k = static_cast<int>(variables_.size());
        ids_[v.id] = k;
        variables_.push_back(std::move(v));
        return k;
    }

    void validate(const LmiConstraint& c) const {
        const size_t nb = c.blocks.size();
        if (nb == 0) throw InvalidProblem("constraint without blocks");
        for (size_t i = 0; i < nb; ++i) {
            if (c.blocks[i].size() != i + 1)
                throw InvalidProblem("constraint blocks must be lower triangular");
            const int ri = c.blocks[i][i].rows;
            for (size_t j = 0; j <= i; ++j) {
                const auto& b = c.blocks[i][j];
                if (b.rows != ri || b.cols != c.blocks[j][j].rows)
                    throw InvalidProblem("constraint block shape mismatch in " + c.name);
                for (const auto& t : b.terms) {
                    if (t.var < 0 || t.var >= static_cast<int>(variables_.size()))
                        throw InvalidProblem("term references unknown variable");
                    const auto& v = variables_[static_cast<size_t>(t.var)];
                    const int vr = t.transpose ? v.cols : v.rows;
                    const int vc = t.transpose ? v.rows : v.cols;
                    if (t.left.cols() != vr || t.right.rows() != vc || t.left.rows() != b.rows ||
                        t.right.cols() != b.cols)
                        throw InvalidProblem("term shape mismatch in " + c.name);
                }
            }
        }
    }

    std::vector<LmiVariable> variables_;
    std::map<std::string, int> ids_;
    std::vector<LmiConstraint> constraints_;
    Objective objective_;
};

struct Assignment {
    std::vector<RectMatrix> values;            // indexed like problem variables
    std::vector<double> slack;                 // per-constraint minimum eigenvalue
    std::vector<std::string> constraint_names;
    int iterations = 0;
    double solve_seconds = 0.0;

    const RectMatrix& operator[](size_t k) const { return values.at(k); }
};

inline RectMatrix evaluate(const AffineExpr& e, const std::vector<RectMatrix>& x) {
    RectMatrix m = e.constant;
    for (const auto& t : e.terms) {
        const RectMatrix& v = x.at(static_cast<size_t>(t.var));
        if (t.transpose)
            m += t.left * v.transpose() * t.right;
        else
            m += t.left * v * t.right;
    }
    return m;
}

inline RectMatrix assemble(const LmiConstraint& c, const std::vector<RectMatrix>& x) {
    std::vector<int> off{0};
    for (size_t i = 0; i < c.blocks.size(); ++i) off.push_back(off.back() + c.blocks[i][i].rows);
    RectMatrix m = RectMatrix::Zero(off.back(), off.back());
    for (size_t i = 0; i < c.blocks.size(); ++i) {
        for (size_t j = 0; j <= i; ++j) {
            RectMatrix b = evaluate(c.blocks[i][j], x);
            m.block(off[i], off[j], b.rows(), b.cols()) = b;
            if (i != j) m.block(off[j], off[i], b.cols(), b.rows()) = b.transpose();
        }
    }
    return m;
}

struct CertifyReport {
    std::vector<std::string> names;
    std::vector<double> min_eig;
    bool pass = false;
};

inline void check_shapes(const LmiProblem& p, const Assignment& a) {
    const auto& vars = p.variables();
    if (a.values.size() != vars.size()) throw InvalidAssignment("assignment variable count mismatch");
    for (size_t k = 0; k < vars.size(); ++k)
        if (a.values[k].rows() != vars[k].rows || a.values[k].cols() != vars[k].cols)
            throw InvalidAssignment("assignment shape mismatch for " + vars[k].id);
}

// Re-evaluates every constraint at the assignment with the Jacobi eigensolver.
inline CertifyReport certify(const LmiProblem& p, const Assignment& a, double tol = 1e-8) {
    check_shapes(p, a);
    CertifyReport r;
    r.pass = true;
    for (const auto& c : p.constraints()) {
        const double e = min_eigenvalue(SymMatrix(assemble(c, a.values)));
        r.names.push_back(c.name);
        r.min_eig.push_back(e);
        if (!(e >= tol)) r.pass = false;
    }
    return r;
}

struct SolverOptions {
    double tol = 1e-8;
    double target_slack = 1e-6;
    int max_iters = 400;          // total Newton steps across both phases
    double radius = 1e6;          // feasibility ball on the scalar unknowns
    double mu = 8.0;              // barrier weight growth per outer iteration
    double phase1_gap = 1e-9;
    double logdet_gap = 1e-6;
};

namespace detail {

// Problem flattened to F0 + sum_k z_k F_k per constraint, over scalar unknowns z.
struct Compiled {
    struct Basis {
        int var;
        int i, j;  // entry (and its mirror for symmetric off-diagonals)
    };
    std::vector<Basis> basis;
    struct Block {
        RectMatrix f0;
        std::vector<std::pair<int, RectMatrix>> fk;  // nonzero directions only
    };
    std::vector<Block> blocks;
    std::vector<int> target_dofs;  // logdet target basis indices
    RectMatrix target_f0;          // zero matrix of the target's shape

    int dofs() const { return static_cast<int>(basis.size()); }
};

inline RectMatrix basis_matrix(const LmiVariable& v, const Compiled::Basis& b) {
    RectMatrix m = RectMatrix::Zero(v.rows, v.cols);
    m(b.i, b.j) = 1.0;
    if (v.kind == VarKind::Symmetric) m(b.j, b.i) = 1.0;
    return m;
}

inline std::vector<RectMatrix> zero_values(const LmiProblem& p) {
    std::vector<RectMatrix> x;
    for (const auto& v : p.variables()) x.push_back(RectMatrix::Zero(v.rows, v.cols));
    return x;
}

inline Compiled compile(const LmiProblem& p) {
    Compiled c;
    const auto& vars = p.variables();
    for (int k = 0; k < static_cast<int>(vars.size()); ++k) {
        const auto& v = vars[static_cast<size_t>(k)];
        if (v.kind == VarKind::Symmetric) {
            for (int j = 0; j < v.cols; ++j)
                for (int i = j; i < v.rows; ++i) c.basis.push_back({k, i, j});
        } else {
            for (int i = 0; i < v.rows; ++i)
                for (int j = 0; j < v.cols; ++j) c.basis.push_back({k, i, j});
        }
    }
    const auto zero = zero_values(p);
    for (const auto& con : p.constraints()) {
        Compiled::Block blk;
        blk.f0 = assemble(con, zero);
        const double scale = std::max(1.0, blk.f0.norm());
        if ((blk.f0 - blk.f0.transpose()).norm() > 1e-12 * scale)
            throw InvalidProblem("constraint " + con.name + " is not symmetric");
        blk.f0 = SymMatrix(blk.f0).dense();
        for (int d = 0; d < c.dofs(); ++d) {
            const auto& b = c.basis[static_cast<size_t>(d)];
            bool touches = false;
            for (const auto& row : con.blocks)
                for (const auto& e : row)
                    for (const auto& t : e.terms) touches = touches || t.var == b.var;
            if (!touches) continue;
            auto x = zero;
            x[static_cast<size_t>(b.var)] = basis_matrix(vars[static_cast<size_t>(b.var)], b);
            RectMatrix f = assemble(con, x) - blk.f0;
            if ((f - f.transpose()).norm() > 1e-12 * std::max(1.0, f.norm()))
                throw InvalidProblem("constraint " + con.name + " is not symmetric in " +
                                     vars[static_cast<size_t>(b.var)].id);
            if (f.cwiseAbs().maxCoeff() == 0.0) continue;
            blk.fk.emplace_back(d, SymMatrix(f).dense());
        }
        c.blocks.push_back(std::move(blk));
    }
    const auto& obj = p.objective();
    if (obj.kind == ObjectiveKind::MaximizeLogDet) {
        for (int d = 0; d < c.dofs(); ++d)
            if (c.basis[static_cast<size_t>(d)].var == obj.target) c.target_dofs.push_back(d);
        const auto& v = vars[static_cast<size_t>(obj.target)];
        c.target_f0 = RectMatrix::Zero(v.rows, v.rows);
    }
    return c;
}

inline std::vector<RectMatrix> unpack(const LmiProblem& p, const Compiled& c, const Vector& z) {
    auto x = zero_values(p);
    const auto& vars = p.variables();
    for (int d = 0; d < c.dofs(); ++d) {
        const auto& b = c.basis[static_cast<size_t>(d)];
        auto& m = x[static_cast<size_t>(b.var)];
        m(b.i, b.j) = z[d];
        if (vars[static_cast<size_t>(b.var)].kind == VarKind::Symmetric) m(b.j, b.i) = z[d];
    }
    return x;
}

// One log-det barrier term: -weight * logdet(f0 + sum z_k f_k - t_coef * t * I).
struct BarrierTerm {
    const RectMatrix* f0;
    const std::vector<std::pair<int, RectMatrix>>* fk;
    double weight;
    bool with_t;
};

// Barrier state over x = (z, [t]); the linear part is lin . x.
class Barrier {
public:
    Barrier(std::vector<BarrierTerm> terms, int dofs, bool with_t, double radius)
        : terms_(std::move(terms)), dofs_(dofs), with_t_(with_t), r2_(radius * radius) {}

    int size() const { return dofs_ + (with_t_ ? 1 : 0); }

    RectMatrix matrix(const BarrierTerm& b, const Vector& x) const {
        RectMatrix s = *b.f0;
        for (const auto& [k, f] : *b.fk) s += x[k] * f;
        if (b.with_t) s.diagonal().array() -= x[dofs_];
        return s;
    }

    // value at x, or +inf outside the domain
    double value(const Vector& x, const Vector& lin) const {
        const double zr = x.head(dofs_).squaredNorm();
        if (!(zr < r2_)) return std::numeric_limits<double>::infinity();
        double v = lin.dot(x) - std::log(r2_ - zr);
        for (const auto& b : terms_) {
            auto l = cholesky(matrix(b, x));
            if (!l) return std::numeric_limits<double>::infinity();
            v -= b.weight * cholesky_logdet(*l);
        }
        return v;
    }

    void derivatives(const Vector& x, const Vector& lin, Vector& g, RectMatrix& h) const {
        const int n = size();
        g = lin;
        h = RectMatrix::Zero(n, n);
        const double zr = x.head(dofs_).squaredNorm();
        const double gap = r2_ - zr;
        for (int k = 0; k < dofs_; ++k) {
            g[k] += 2.0 * x[k] / gap;
            h(k, k) += 2.0 / gap;
            for (int l = 0; l < dofs_; ++l) h(k, l) += 4.0 * x[k] * x[l] / (gap * gap);
        }
        for (const auto& b : terms_) {
            auto l = cholesky(matrix(b, x));
            const RectMatrix sinv = cholesky_inverse(*l);
            std::vector<int> idx;
            std::vector<RectMatrix> gk;
            for (const auto& [k, f] : *b.fk) {
                idx.push_back(k);
                gk.push_back(sinv * f);
            }
            if (b.with_t) {
                idx.push_back(dofs_);
                gk.push_back(-sinv);
            }
            for (size_t a = 0; a < idx.size(); ++a) {
                g[idx[a]] -= b.weight * gk[a].trace();
                for (size_t c = 0; c <= a; ++c) {
                    const double v = b.weight * (gk[a].array() * gk[c].transpose().array()).sum();
                    h(idx[a], idx[c]) += v;
                    if (c != a) h(idx[c], idx[a]) += v;
                }
            }
        }
    }

private:
    std::vector<BarrierTerm> terms_;
    int dofs_;
    bool with_t_;
    double r2_;
};

// Damped Newton centering; returns false when the iteration budget ran out.
inline bool center(const Barrier& bar, const Vector& lin, Vector& x, int& iters, int max_iters) {
    Vector g;
    RectMatrix h;
    double fx = bar.value(x, lin);
    for (int it = 0; it < 100; ++it) {
        if (iters >= max_iters) return false;
        bar.derivatives(x, lin, g, h);
        Eigen::LDLT<RectMatrix> ldlt(h);
        Vector dx = -ldlt.solve(g);
        const double dec2 = -g.dot(dx);
        ++iters;
        if (!(dec2 >= 0.0) || !dx.allFinite()) return true;
        if (dec2 < 1e-12) return true;
        double step = dec2 > 0.25 ? 1.0 / (1.0 + std::sqrt(dec2)) : 1.0;
        double fn = bar.value(x + step * dx, lin);
        int halvings = 0;
        while (!(fn <= fx - 0.25 * step * dec2) && halvings < 60) {
            step *= 0.5;
            fn = bar.value(x + step * dx, lin);
            ++halvings;
        }
        if (halvings == 60) return true;
        x += step * dx;
        fx = fn;
    }
    return true;
}

inline double min_slack(const Compiled& c, const Vector& z) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : c.blocks) {
        RectMatrix s = b.f0;
        for (const auto& [k, f] : b.fk) s += z[k] * f;
        m = std::min(m, min_eigenvalue(SymMatrix(s)));
    }
    return m;
}

}  // namespace detail

// Phase I maximizes a common eigenvalue slack t; phase II (logdet mode) then
// follows the central path of the determinant objective from that point.
inline Assignment solve(const LmiProblem& problem, const SolverOptions& opt = {}) {
    using namespace detail;
    const auto t0 = std::chrono::steady_clock::now();
    if (problem.constraints().empty()) throw InvalidProblem("problem has no constraints");
    const Compiled c = compile(problem);
    const int n = c.dofs();
    const bool logdet = problem.objective().kind == ObjectiveKind::MaximizeLogDet;

    int m = 1;
    for (const auto& b : c.blocks) m += static_cast<int>(b.f0.rows());

    std::vector<BarrierTerm> terms1;
    for (const auto& b : c.blocks) terms1.push_back({&b.f0, &b.fk, 1.0, true});
    Barrier phase1(terms1, n, true, opt.radius);

    Vector x = Vector::Zero(n + 1);
    x[n] = min_slack(c, Vector::Zero(n)) - 1.0;
    Vector lin = Vector::Zero(n + 1);
    int iters = 0;
    double w = 1.0;
    const double want = std::max(opt.tol, opt.target_slack);
    SolveStatus status = SolveStatus::MaxIterations;
    while (true) {
        lin[n] = -w;
        const bool ok = center(phase1, lin, x, iters, opt.max_iters);
        const double t = x[n];
        if (logdet && t >= want) {
            status = SolveStatus::Solved;
            break;
        }
        if (t + m / w <= 0.0) {
            status = SolveStatus::Infeasible;
            break;
        }
        if (m / w < opt.phase1_gap * std::max(1.0, std::abs(t)) || !ok) {
            status = t >= opt.tol ? SolveStatus::Solved
                     : t > 0.0    ? SolveStatus::MaxIterations
                                  : SolveStatus::Infeasible;
            break;
        }
        w *= opt.mu;
    }
    if (status != SolveStatus::Solved) {
        const double best = x[n];
        throw LmiSolveError(status, best,
                            std::string("lmi solve: ") + to_string(status) +
                                " (best slack " + std::to_string(best) + ")");
    }

    Vector z = x.head(n);
    if (logdet) {
        std::vector<RectMatrix> tfk;
        std::vector<std::pair<int, RectMatrix>> target_fk;
        const auto& tv = problem.variables()[static_cast<size_t>(problem.objective().target)];
        for (int d : c.target_dofs)
            target_fk.emplace_back(d, basis_matrix(tv, c.basis[static_cast<size_t>(d)]));
        Vector lin2 = Vector::Zero(n);
        Vector best = z;
        double wt = 1.0;
        while (true) {
            std::vector<BarrierTerm> terms2;
            for (const auto& b : c.blocks) terms2.push_back({&b.f0, &b.fk, 1.0, false});
            terms2.push_back({&c.target_f0, &target_fk, wt, false});
            Barrier phase2(terms2, n, false, opt.radius);
            const bool ok = center(phase2, lin2, z, iters, opt.max_iters);
            if (min_slack(c, z) < 10.0 * opt.tol) break;
            best = z;
            if (m / wt < opt.logdet_gap || !ok) break;
            wt *= opt.mu;
        }
        z = best;
    }

    Assignment a;
    a.values = unpack(problem, c, z);
    a.iterations = iters;
    for (const auto& con : problem.constraints()) {
        a.constraint_names.push_back(con.name);
        a.slack.push_back(min_eigenvalue(SymMatrix(assemble(con, a.values))));
    }
    a.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return a;
}

inline Assignment solve(const LmiProblem& problem, double tol, int max_iters) {
    SolverOptions opt;
    opt.tol = tol;
    opt.max_iters = max_iters;
    return solve(problem, opt);
}

inline double logdet_of(const RectMatrix& m) {
    auto l = cholesky(m);
    if (!l) return -std::numeric_limits<double>::infinity();
    return cholesky_logdet(*l);
}

}  // namespace realdrl
