#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "linearize.hpp"
#include "rng.hpp"

namespace hamapprox::pipeline {

using core::HamiltonianInstance;
using core::LocalTerm;
using core::Mat;
using core::Vec;
using linearizer::ParameterError;

namespace detail {

inline Mat projector(const Vec& v) { return v * v.adjoint(); }

inline Vec epr_state() {
    Vec v = Vec::Zero(4);
    v(0) = 1.0 / std::sqrt(2.0);
    v(3) = 1.0 / std::sqrt(2.0);
    return v;
}

inline Vec w_state() {
    Vec v = Vec::Zero(8);
    const double a = 1.0 / std::sqrt(3.0);
    v(1) = a; // |001>
    v(2) = a; // |010>
    v(4) = a; // |100>
    return v;
}

inline void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        fn(idx);
        int p = k - 1;
        while (p >= 0 && idx[static_cast<std::size_t>(p)] == n - k + p) --p;
        if (p < 0) break;
        ++idx[static_cast<std::size_t>(p)];
        for (int q = p + 1; q < k; ++q)
            idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
    }
}

} // namespace detail

// Chain of EPR projectors on neighbouring qubit pairs.
inline HamiltonianInstance epr_chain(int n) {
    if (n < 2) throw ParameterError("epr_chain needs at least two qubits");
    HamiltonianInstance inst;
    inst.n = n;
    inst.d = 2;
    inst.k = 2;
    const Mat p = detail::projector(detail::epr_state());
    for (int i = 0; i + 1 < n; ++i) inst.terms.push_back({{i, i + 1}, p});
    core::validate_instance(inst);
    return inst;
}

// Single projector onto the three-qubit W state.
inline HamiltonianInstance w_clause() {
    HamiltonianInstance inst;
    inst.n = 3;
    inst.d = 2;
    inst.k = 3;
    inst.terms.push_back({{0, 1, 2}, detail::projector(detail::w_state())});
    core::validate_instance(inst);
    return inst;
}

// One k-local clause made of EPR projectors on consecutive pairs; for odd k
// the last qubit carries an identity leg.
inline HamiltonianInstance tensor_epr_clause(int k) {
    if (k < 2) throw ParameterError("tensor_epr_clause needs k >= 2");
    HamiltonianInstance inst;
    inst.n = k;
    inst.d = 2;
    inst.k = k;
    Mat m = detail::projector(detail::epr_state());
    for (int pairs = 1; 2 * pairs + 1 < k; ++pairs)
        m = core::kron(m, detail::projector(detail::epr_state()));
    if (k % 2 == 1) m = core::kron(m, Mat::Identity(2, 2));
    std::vector<int> support(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) support[static_cast<std::size_t>(i)] = i;
    inst.terms.push_back({support, m});
    core::validate_instance(inst);
    return inst;
}

// Five-qubit clause: EPR projector on the first pair tensored with the W
// projector on the last three qubits. Best product value is 2/9.
inline HamiltonianInstance epr_w_clause() {
    HamiltonianInstance inst;
    inst.n = 5;
    inst.d = 2;
    inst.k = 5;
    const Mat m = core::kron(detail::projector(detail::epr_state()),
                             detail::projector(detail::w_state()));
    inst.terms.push_back({{0, 1, 2, 3, 4}, m});
    core::validate_instance(inst);
    return inst;
}

// Projector onto the maximally entangled state of two qudits; best product
// value is 1/d.
inline HamiltonianInstance maxent_qudit_clause(int d) {
    if (d < 2) throw ParameterError("maxent_qudit_clause needs d >= 2");
    HamiltonianInstance inst;
    inst.n = 2;
    inst.d = d;
    inst.k = 2;
    Vec v = Vec::Zero(static_cast<long>(d) * d);
    for (int i = 0; i < d; ++i) v(static_cast<long>(i) * d + i) = 1.0 / std::sqrt(static_cast<double>(d));
    inst.terms.push_back({{0, 1}, detail::projector(v)});
    core::validate_instance(inst);
    return inst;
}

// Random PSD norm-one term on every k-subset of sites, in lexicographic
// subset order with a sequential generator, so instances are reproducible.
inline HamiltonianInstance random_dense(int n, int k, int d, std::uint64_t seed) {
    if (k < 1 || k > n) throw ParameterError("random_dense needs 1 <= k <= n");
    if (d < 2) throw ParameterError("random_dense needs d >= 2");
    HamiltonianInstance inst;
    inst.n = n;
    inst.d = d;
    inst.k = k;
    util::Rng rng(seed);
    const long dim = static_cast<long>(core::ipow(d, k));
    detail::for_each_subset(n, k, [&](const std::vector<int>& support) {
        Mat g(dim, dim);
        for (long r = 0; r < dim; ++r)
            for (long c = 0; c < dim; ++c)
                g(r, c) = core::cxd(rng.normal(), rng.normal()) / std::sqrt(2.0);
        Mat w = g * g.adjoint();
        w /= core::operator_norm(w);
        inst.terms.push_back({support, w});
    });
    core::validate_instance(inst);
    return inst;
}

// Append a fresh block of n qudits carrying |0...0> projectors on every
// k-subset. The extension is classical: it adds exactly C(n, k) to both the
// global and the best-product optimum while making the instance dense.
inline HamiltonianInstance densify(const HamiltonianInstance& inst) {
    core::validate_instance(inst);
    HamiltonianInstance out;
    out.n = 2 * inst.n;
    out.d = inst.d;
    out.k = inst.k;
    out.terms = inst.terms;
    const long dim = static_cast<long>(core::ipow(inst.d, inst.k));
    Mat zeros = Mat::Zero(dim, dim);
    zeros(0, 0) = 1.0;
    detail::for_each_subset(inst.n, inst.k, [&](const std::vector<int>& subset) {
        std::vector<int> support;
        support.reserve(subset.size());
        for (int s : subset) support.push_back(s + inst.n);
        out.terms.push_back({support, zeros});
    });
    core::validate_instance(out);
    return out;
}

struct RelativeErrorConfig {
    double density = 0.0; // average term trace mass per n^k
    double eps_abs = 0.0;
};

// Density-normalized absolute budget for a relative error request: with
// c = sum_T Tr(W_T) / (d^k n^k), a relative error eps_rel corresponds to the
// absolute budget c * eps_rel per n^k.
inline RelativeErrorConfig relative_error_config(const HamiltonianInstance& inst,
                                                 double eps_rel) {
    if (eps_rel <= 0.0) throw ParameterError("relative error must be positive");
    double mass = 0.0;
    for (const auto& t : inst.terms) mass += t.matrix.trace().real();
    const double dk = std::pow(static_cast<double>(inst.d), inst.k);
    const double nk = std::pow(static_cast<double>(inst.n), inst.k);
    RelativeErrorConfig cfg;
    cfg.density = mass / (dk * nk);
    if (cfg.density < 1e-9)
        throw ParameterError("instance is too sparse for a relative error guarantee");
    cfg.eps_abs = cfg.density * eps_rel;
    return cfg;
}

} // namespace hamapprox::pipeline
