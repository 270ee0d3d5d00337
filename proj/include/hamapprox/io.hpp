#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace hamapprox::core {

inline nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

inline Mat matrix_from_json(const nlohmann::json& rows) {
    if (!rows.is_array() || rows.empty())
        throw ValidationError("matrix must be a non-empty array of rows");
    const auto nr = rows.size();
    const auto nc = rows[0].size();
    Mat m(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc));
    for (std::size_t r = 0; r < nr; ++r) {
        if (!rows[r].is_array() || rows[r].size() != nc)
            throw ValidationError("matrix rows must all have the same length");
        for (std::size_t c = 0; c < nc; ++c) {
            const auto& e = rows[r][c];
            if (!e.is_array() || e.size() != 2)
                throw ValidationError("matrix entries must be [re, im] pairs");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                cxd(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

// Terms acting on fewer than k sites are padded to exactly k sites by
// tensoring identity legs onto the smallest site indices not already used.
inline LocalTerm pad_term(const LocalTerm& term, int n, int d, int k) {
    const int j = static_cast<int>(term.support.size());
    if (j == k) return term;
    if (j > k) throw ValidationError("term support larger than locality k");
    std::vector<int> padded = term.support;
    for (int site = 0; site < n && static_cast<int>(padded.size()) < k; ++site)
        if (std::find(term.support.begin(), term.support.end(), site) == term.support.end())
            padded.push_back(site);
    if (static_cast<int>(padded.size()) != k)
        throw ValidationError("cannot pad term support to k sites");
    std::sort(padded.begin(), padded.end());
    LocalTerm out;
    out.support = padded;
    out.matrix = embed_on_support(term.matrix, d, term.support, padded);
    return out;
}

inline HamiltonianInstance instance_from_json(const nlohmann::json& j) {
    HamiltonianInstance inst;
    if (!j.contains("n") || !j.contains("d") || !j.contains("k") || !j.contains("terms"))
        throw ValidationError("instance requires fields n, d, k, terms");
    inst.n = j.at("n").get<int>();
    inst.d = j.at("d").get<int>();
    inst.k = j.at("k").get<int>();
    for (const auto& jt : j.at("terms")) {
        LocalTerm term;
        for (const auto& s : jt.at("support")) {
            const int site = s.get<int>();
            if (site < 1 || site > inst.n)
                throw ValidationError("support sites must lie in 1..n");
            term.support.push_back(site - 1);
        }
        term.matrix = matrix_from_json(jt.at("matrix"));
        const auto want = ipow(inst.d, static_cast<int>(term.support.size()));
        if (term.matrix.rows() != want || term.matrix.cols() != want)
            throw ValidationError("term matrix dimension does not match its support");
        inst.terms.push_back(pad_term(term, inst.n, inst.d, inst.k));
    }
    validate_instance(inst);
    return inst;
}

inline nlohmann::json instance_to_json(const HamiltonianInstance& inst) {
    nlohmann::json j;
    j["n"] = inst.n;
    j["d"] = inst.d;
    j["k"] = inst.k;
    j["terms"] = nlohmann::json::array();
    for (const auto& term : inst.terms) {
        nlohmann::json jt;
        jt["support"] = nlohmann::json::array();
        for (int s : term.support) jt["support"].push_back(s + 1);
        jt["matrix"] = matrix_to_json(term.matrix);
        j["terms"].push_back(jt);
    }
    return j;
}

inline HamiltonianInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open instance file: " + path);
    nlohmann::json j;
    in >> j;
    return instance_from_json(j);
}

inline void save_instance(const HamiltonianInstance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write instance file: " + path);
    out << instance_to_json(inst).dump(1) << "\n";
}

} // namespace hamapprox::core
