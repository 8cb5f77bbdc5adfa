#include "realdrl/harness.hpp"
#include "realdrl/lmi.hpp"
#include "realdrl/lmi_json.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace realdrl;

namespace {

AffineExpr constant(const RectMatrix& m) { return AffineExpr::constant_of(m); }

LmiProblem box_logdet(const Vector& c) {
    const int n = static_cast<int>(c.size());
    const RectMatrix Cb = c.cwiseInverse().asDiagonal();
    LmiProblem p;
    p.add_symmetric("Q", n);
    const AffineExpr Q = p.var("Q");
    p.add_constraint({"Q", {{Q}}});
    p.add_constraint({"box", {{constant(RectMatrix::Identity(n, n)) - Cb * Q * RectMatrix(Cb.transpose())}}});
    p.maximize_logdet("Q");
    return p;
}

LmiProblem sandwich(int n, double lo, double hi) {
    LmiProblem p;
    p.add_symmetric("X", n);
    const AffineExpr X = p.var("X");
    const RectMatrix I = RectMatrix::Identity(n, n);
    p.add_constraint({"lower", {{X - constant(lo * I)}}});
    p.add_constraint({"upper", {{constant(hi * I) - X}}});
    return p;
}

}  // namespace

TEST(Lmi, FeasibilitySolutionCertifies) {
    const LmiProblem p = sandwich(3, 1.0, 2.0);
    const Assignment a = solve(p);
    const CertifyReport r = certify(p, a);
    EXPECT_TRUE(r.pass);
    const auto e = sym_eigen(SymMatrix(a[0]));
    EXPECT_GT(e.values[0], 1.0);
    EXPECT_LT(e.values[2], 2.0);
}

TEST(Lmi, ContradictionIsInfeasible) {
    LmiProblem p;
    p.add_symmetric("Q", 2);
    const AffineExpr Q = p.var("Q");
    p.add_constraint({"Q", {{Q}}});
    p.add_constraint({"minus-Q", {{-Q}}});
    try {
        solve(p);
        FAIL() << "expected infeasible";
    } catch (const LmiSolveError& e) {
        EXPECT_EQ(e.status, SolveStatus::Infeasible);
        EXPECT_LE(e.best_slack, 0.0);
    }
}

TEST(Lmi, EmptyInteriorIsNotSolved) {
    // X >= 1 and X <= 1 only meet at a single point without interior
    EXPECT_THROW(solve(sandwich(2, 1.0, 1.0)), LmiSolveError);
}

TEST(Lmi, BoxLogdetMatchesAnalyticDiagonal) {
    const Vector c = vec({1, 3, 1, 4.5});
    const Assignment a = solve(box_logdet(c));
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(a[0](i, i), c[i] * c[i], 1e-3 * c[i] * c[i]);
        for (int j = 0; j < 4; ++j)
            if (i != j) EXPECT_NEAR(a[0](i, j), 0.0, 1e-3 * c[i] * c[j]);
    }
}

TEST(Lmi, RotatedBoxLogdetMatchesInverseGram) {
    // max logdet Q with Cb Q Cb' < I and Cb square gives Q = (Cb' Cb)^-1
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    RectMatrix Cb(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) Cb(i, j) = nd(rng) + (i == j ? 2.0 : 0.0);
    LmiProblem p;
    p.add_symmetric("Q", 3);
    const AffineExpr Q = p.var("Q");
    p.add_constraint({"Q", {{Q}}});
    p.add_constraint({"poly", {{constant(RectMatrix::Identity(3, 3)) - Cb * Q * RectMatrix(Cb.transpose())}}});
    p.maximize_logdet("Q");
    const Assignment a = solve(p);
    const RectMatrix expect = (Cb.transpose() * Cb).inverse();
    EXPECT_LT((a[0] - expect).norm() / expect.norm(), 1e-3);
}

TEST(Lmi, RectangularVariableAndOffDiagonalBlocks) {
    // [[I, R'], [R, I]] > 0 and R >= constant bound through a Schur block
    LmiProblem p;
    p.add_rectangular("R", 1, 2);
    p.add_symmetric("T", 1);
    const AffineExpr R = p.var("R"), T = p.var("T");
    p.add_constraint({"schur", {{constant(RectMatrix::Identity(2, 2))}, {R, T}}});
    p.add_constraint({"T-small", {{constant(RectMatrix::Constant(1, 1, 2.0)) - T}}});
    const Assignment a = solve(p);
    EXPECT_TRUE(certify(p, a).pass);
    EXPECT_LT(a[0].squaredNorm(), a[1](0, 0));
}

TEST(Lmi, ScalingPreservesFeasibility) {
    const LmiProblem p = sandwich(2, 1.0, 3.0);
    for (double k : {1e-3, 1.0, 1e3}) EXPECT_TRUE(certify(p, solve(p.scaled(k))).pass);
}

TEST(Lmi, CertifyReportsNegativeEigenvalue) {
    const LmiProblem p = sandwich(2, 1.0, 2.0);
    Assignment a;
    a.values = {3.0 * RectMatrix::Identity(2, 2)};
    const CertifyReport r = certify(p, a);
    EXPECT_FALSE(r.pass);
    EXPECT_NEAR(r.min_eig[0], 2.0, 1e-12);
    EXPECT_NEAR(r.min_eig[1], -1.0, 1e-12);
}

TEST(Lmi, CertifyRejectsShapeMismatch) {
    const LmiProblem p = sandwich(2, 1.0, 2.0);
    Assignment a;
    a.values = {RectMatrix::Identity(3, 3)};
    EXPECT_THROW(certify(p, a), InvalidAssignment);
}

TEST(Lmi, ProblemValidation) {
    LmiProblem p;
    p.add_symmetric("Q", 2);
    EXPECT_THROW(p.add_symmetric("Q", 2), InvalidProblem);
    EXPECT_THROW(p.var("missing"), InvalidProblem);
    const AffineExpr Q = p.var("Q");
    EXPECT_THROW(p.add_constraint({"upper-tri", {{Q, Q}}}), InvalidProblem);
    EXPECT_THROW(p.add_constraint({"shape", {{Q}, {constant(RectMatrix::Zero(1, 3)), Q}}}), InvalidProblem);
    EXPECT_THROW(p.add_constraint({"empty", {}}), InvalidProblem);
    EXPECT_THROW(solve(LmiProblem{}), InvalidProblem);
}

TEST(Lmi, SlackReportedPerConstraint) {
    const LmiProblem p = sandwich(2, 1.0, 2.0);
    const Assignment a = solve(p);
    ASSERT_EQ(a.slack.size(), 2u);
    EXPECT_EQ(a.constraint_names[0], "lower");
    for (double s : a.slack) EXPECT_GT(s, 0.0);
}

TEST(LmiJson, RoundTripSolvesIdentically) {
    const LmiProblem p = box_logdet(vec({1, 2}));
    const LmiProblem q = problem_from_json(json::parse(problem_to_json(p).dump()));
    const Assignment a = solve(p), b = solve(q);
    EXPECT_EQ((a[0] - b[0]).norm(), 0.0);
    EXPECT_EQ(q.objective().kind, ObjectiveKind::MaximizeLogDet);
}

TEST(LmiJson, TransposedTermsSurvive) {
    LmiProblem p;
    p.add_rectangular("R", 1, 2);
    const AffineExpr R = p.var("R");
    p.add_constraint({"t", {{constant(RectMatrix::Identity(2, 2)) - transpose(R) * RectMatrix::Ones(1, 2)}}});
    const LmiProblem q = problem_from_json(problem_to_json(p));
    Assignment a;
    a.values = {from_rows({{0.1, -0.2}})};
    const auto r1 = certify(p, a, -1e9), r2 = certify(q, a, -1e9);
    EXPECT_DOUBLE_EQ(r1.min_eig[0], r2.min_eig[0]);
}

TEST(LmiJson, MalformedInputThrows) {
    EXPECT_THROW(problem_from_json(json::parse(R"({"variables":[{"id":"Q","kind":"odd","rows":1}],"constraints":[]})")),
                 InvalidProblem);
    EXPECT_THROW(matrix_from_json(json::parse("[[1,2],[3]]")), InvalidProblem);
}

TEST(LmiCorpus, EveryGoldenProblemPasses) {
    const auto results = lmi_check(REALDRL_CORPUS_DIR);
    ASSERT_EQ(results.size(), 4u);
    for (const auto& r : results) EXPECT_TRUE(r.pass) << r.file << ": " << r.outcome << " in " << r.ms << " ms";
}

TEST(LmiCorpus, MatchesBuiltInDefinitions) {
    for (const auto& g : golden_corpus()) {
        const GoldenProblem disk = load_golden(std::string(REALDRL_CORPUS_DIR) + "/" + g.name + ".json");
        EXPECT_EQ(problem_to_json(disk.problem), problem_to_json(g.problem)) << g.name;
        EXPECT_EQ(disk.expect, g.expect);
    }
}
