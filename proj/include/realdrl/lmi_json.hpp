#pragma once

#include "realdrl/lmi.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace realdrl {

using json = nlohmann::json;

inline json matrix_to_json(const RectMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline RectMatrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw InvalidProblem("matrix must be a nonempty array of rows");
    RectMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size()) throw InvalidProblem("ragged matrix rows");
        for (size_t k = 0; k < j[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return m;
}

struct GoldenProblem {
    std::string name;
    LmiProblem problem;
    std::string expect = "solved";
    double tol = 1e-8;
    double budget_ms = 150.0;
};

inline json expr_to_json(const LmiProblem& p, const AffineExpr& e) {
    json j;
    j["rows"] = e.rows;
    j["cols"] = e.cols;
    if (e.constant.cwiseAbs().maxCoeff() != 0.0) j["constant"] = matrix_to_json(e.constant);
    json terms = json::array();
    for (const auto& t : e.terms) {
        json tj;
        tj["var"] = p.variables()[static_cast<size_t>(t.var)].id;
        tj["left"] = matrix_to_json(t.left);
        tj["right"] = matrix_to_json(t.right);
        if (t.transpose) tj["transpose"] = true;
        terms.push_back(tj);
    }
    j["terms"] = terms;
    return j;
}

inline AffineExpr expr_from_json(const LmiProblem& p, const json& j) {
    const int r = j.at("rows").get<int>();
    const int c = j.at("cols").get<int>();
    AffineExpr e = AffineExpr::zero(r, c);
    if (j.contains("constant")) {
        e.constant = matrix_from_json(j["constant"]);
        if (e.constant.rows() != r || e.constant.cols() != c)
            throw InvalidProblem("constant shape mismatch");
    }
    for (const auto& tj : j.value("terms", json::array())) {
        Term t;
        t.var = p.index(tj.at("var").get<std::string>());
        const auto& v = p.variables()[static_cast<size_t>(t.var)];
        t.transpose = tj.value("transpose", false);
        const int vr = t.transpose ? v.cols : v.rows;
        const int vc = t.transpose ? v.rows : v.cols;
        t.left = tj.contains("left") ? matrix_from_json(tj["left"]) : RectMatrix::Identity(vr, vr);
        t.right = tj.contains("right") ? matrix_from_json(tj["right"]) : RectMatrix::Identity(vc, vc);
        e.terms.push_back(std::move(t));
    }
    return e;
}

inline json problem_to_json(const LmiProblem& p) {
    json j;
    json vars = json::array();
    for (const auto& v : p.variables()) {
        json vj;
        vj["id"] = v.id;
        vj["kind"] = v.kind == VarKind::Symmetric ? "symmetric" : "rectangular";
        vj["rows"] = v.rows;
        vj["cols"] = v.cols;
        vars.push_back(vj);
    }
    j["variables"] = vars;
    json cons = json::array();
    for (const auto& c : p.constraints()) {
        json cj;
        cj["name"] = c.name;
        json rows = json::array();
        for (const auto& row : c.blocks) {
            json rj = json::array();
            for (const auto& b : row) rj.push_back(expr_to_json(p, b));
            rows.push_back(rj);
        }
        cj["blocks"] = rows;
        cons.push_back(cj);
    }
    j["constraints"] = cons;
    if (p.objective().kind == ObjectiveKind::MaximizeLogDet)
        j["objective"] = {{"kind", "maximize_logdet"},
                          {"target", p.variables()[static_cast<size_t>(p.objective().target)].id}};
    else
        j["objective"] = {{"kind", "feasibility"}};
    return j;
}

inline LmiProblem problem_from_json(const json& j) {
    LmiProblem p;
    for (const auto& vj : j.at("variables")) {
        const auto kind = vj.at("kind").get<std::string>();
        const int r = vj.at("rows").get<int>();
        if (kind == "symmetric")
            p.add_symmetric(vj.at("id").get<std::string>(), r);
        else if (kind == "rectangular")
            p.add_rectangular(vj.at("id").get<std::string>(), r, vj.at("cols").get<int>());
        else
            throw InvalidProblem("unknown variable kind " + kind);
    }
    for (const auto& cj : j.at("constraints")) {
        LmiConstraint c;
        c.name = cj.value("name", "");
        for (const auto& rj : cj.at("blocks")) {
            std::vector<AffineExpr> row;
            for (const auto& bj : rj) row.push_back(expr_from_json(p, bj));
            c.blocks.push_back(std::move(row));
        }
        p.add_constraint(std::move(c));
    }
    if (j.contains("objective") && j["objective"].value("kind", "feasibility") == "maximize_logdet")
        p.maximize_logdet(j["objective"].at("target").get<std::string>());
    return p;
}

inline json golden_to_json(const GoldenProblem& g) {
    json j = problem_to_json(g.problem);
    j["name"] = g.name;
    j["expect"] = g.expect;
    j["tol"] = g.tol;
    j["budget_ms"] = g.budget_ms;
    return j;
}

inline GoldenProblem golden_from_json(const json& j) {
    GoldenProblem g;
    g.problem = problem_from_json(j);
    g.name = j.value("name", "");
    g.expect = j.value("expect", "solved");
    g.tol = j.value("tol", 1e-8);
    g.budget_ms = j.value("budget_ms", 150.0);
    return g;
}

inline GoldenProblem load_golden(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return golden_from_json(json::parse(in));
}

}  // namespace realdrl
