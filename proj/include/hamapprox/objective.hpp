#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "sampling.hpp"

namespace hamapprox::net_sampling {

using core::CoeffTensor;
using core::HamiltonianInstance;
using core::HermitianBasis;
using core::Mat;
using core::ValidationError;

// Coefficient view of an instance. Each term is decomposed in the Hermitian
// basis; decomposition level l (1-based) pairs with support slot k - l, so
// level 1 acts on the largest site of a support and level k on the smallest.
// Outer index tuples are passed outermost first: position p of an outer array
// fixes level k - p, i.e. support slot p.
struct ObjectiveTree {
    int n = 0;
    int d = 2;
    int k = 1;
    HermitianBasis basis;

    struct Node {
        std::vector<int> support;
        CoeffTensor r;
    };
    std::vector<Node> terms;

    std::uint64_t prefix_radix = 0; // n + 1
    std::unordered_map<std::uint64_t, std::vector<int>> prefix_terms;

    std::uint64_t extend_prefix(std::uint64_t code, int site) const {
        return code * prefix_radix + static_cast<std::uint64_t>(site + 1);
    }

    const std::vector<int>* match(std::uint64_t code) const {
        const auto it = prefix_terms.find(code);
        return it == prefix_terms.end() ? nullptr : &it->second;
    }

    std::size_t dd() const { return static_cast<std::size_t>(d) * d; }

    std::size_t dd_pow(int e) const {
        std::size_t r = 1;
        for (int i = 0; i < e; ++i) r *= dd();
        return r;
    }

    // Full objective sum_T sum_j r[j] prod_l X[site(l)][j_l] for a trace
    // table X with row stride d^2.
    double value(const double* x) const {
        const std::size_t stride = dd();
        double total = 0.0;
        std::vector<int> digits(static_cast<std::size_t>(k));
        for (const auto& node : terms) {
            double acc = 0.0;
            for (std::size_t flat = 0; flat < node.r.r.size(); ++flat) {
                const double rv = node.r.r[flat];
                if (rv == 0.0) continue;
                std::size_t rem = flat;
                double w = rv;
                for (int l = 1; l <= k; ++l) {
                    const int jl = static_cast<int>(rem % stride);
                    rem /= stride;
                    const int site = node.support[static_cast<std::size_t>(k - l)];
                    w *= x[static_cast<std::size_t>(site) * stride + static_cast<std::size_t>(jl)];
                }
                acc += w;
            }
            total += acc;
        }
        return total;
    }

    double value(const core::ProductAssignment& a) const {
        const auto x = core::trace_table(a, basis);
        return value(x.data());
    }

    // Partial objective t_{a,b}: sites at levels k..a+1 fixed by outer_sites,
    // basis indices at levels k..b+1 fixed by outer_basis, the remaining site
    // indices summed over all terms and the first b levels traced against X.
    double t_ab(int a, int b, const std::vector<int>& outer_sites,
                const std::vector<int>& outer_basis, const double* x) const {
        if (b < 1 || b > a || a > k) throw ValidationError("t_ab: levels out of range");
        if (static_cast<int>(outer_sites.size()) != k - a)
            throw ValidationError("t_ab: outer_sites must fix levels k..a+1");
        if (static_cast<int>(outer_basis.size()) != k - b)
            throw ValidationError("t_ab: outer_basis must fix levels k..b+1");
        const std::size_t stride = dd();
        std::uint64_t code = 0;
        for (int s : outer_sites) code = extend_prefix(code, s);
        const auto* ids = match(code);
        if (!ids) return 0.0;
        std::size_t fixed = 0;
        for (std::size_t p = 0; p < outer_basis.size(); ++p)
            fixed += static_cast<std::size_t>(outer_basis[p]) * dd_pow(k - 1 - static_cast<int>(p));
        double total = 0.0;
        const std::size_t inner = dd_pow(b);
        for (int tid : *ids) {
            const auto& node = terms[static_cast<std::size_t>(tid)];
            double acc = 0.0;
            for (std::size_t flat = 0; flat < inner; ++flat) {
                const double rv = node.r.r[fixed + flat];
                if (rv == 0.0) continue;
                std::size_t rem = flat;
                double w = rv;
                for (int l = 1; l <= b; ++l) {
                    const int jl = static_cast<int>(rem % stride);
                    rem /= stride;
                    const int site = node.support[static_cast<std::size_t>(k - l)];
                    w *= x[static_cast<std::size_t>(site) * stride + static_cast<std::size_t>(jl)];
                }
                acc += w;
            }
            total += acc;
        }
        return total;
    }

    // The level-b operator of one term with levels k..b+1 fixed:
    // H_b = sum_{j_b..j_1} r(j_1..j_b, outer) s_{j_b} (x) ... (x) s_{j_1}.
    Mat h_b(int term_id, int b, const std::vector<int>& outer_basis) const {
        if (b < 1 || b > k) throw ValidationError("h_b: level out of range");
        if (static_cast<int>(outer_basis.size()) != k - b)
            throw ValidationError("h_b: outer_basis must fix levels k..b+1");
        const auto& node = terms.at(static_cast<std::size_t>(term_id));
        const std::size_t stride = dd();
        std::size_t fixed = 0;
        for (std::size_t p = 0; p < outer_basis.size(); ++p)
            fixed += static_cast<std::size_t>(outer_basis[p]) * dd_pow(k - 1 - static_cast<int>(p));
        const auto dim = core::ipow(d, b);
        Mat h = Mat::Zero(dim, dim);
        const std::size_t inner = dd_pow(b);
        std::vector<Mat> slots(static_cast<std::size_t>(b));
        for (std::size_t flat = 0; flat < inner; ++flat) {
            const double rv = node.r.r[fixed + flat];
            if (rv == 0.0) continue;
            std::size_t rem = flat;
            for (int l = 1; l <= b; ++l) {
                const int jl = static_cast<int>(rem % stride);
                rem /= stride;
                slots[static_cast<std::size_t>(b - l)] = basis[jl]; // level b outermost
            }
            h += rv * core::kron_list(slots);
        }
        return h;
    }
};

inline ObjectiveTree build_objective_tree(const HamiltonianInstance& inst) {
    core::validate_instance(inst);
    ObjectiveTree tree;
    tree.n = inst.n;
    tree.d = inst.d;
    tree.k = inst.k;
    tree.basis = core::build_basis(inst.d);
    tree.prefix_radix = static_cast<std::uint64_t>(inst.n) + 1;
    for (const auto& term : inst.terms) {
        ObjectiveTree::Node node;
        node.support = term.support;
        node.r = core::decompose_term(term.matrix, tree.basis, inst.k);
        tree.terms.push_back(std::move(node));
    }
    for (int tid = 0; tid < static_cast<int>(tree.terms.size()); ++tid) {
        std::uint64_t code = 0;
        tree.prefix_terms[code].push_back(tid);
        for (int q = 0; q < tree.k; ++q) {
            code = tree.extend_prefix(code, tree.terms[static_cast<std::size_t>(tid)].support[static_cast<std::size_t>(q)]);
            tree.prefix_terms[code].push_back(tid);
        }
    }
    return tree;
}

struct EvalMemo {
    std::unordered_map<std::uint64_t, double> table;
    void clear() { table.clear(); }
};

namespace detail {

struct EvalFrame {
    const ObjectiveTree* tree;
    const std::vector<int>* sample;
    const double* traces; // row m holds the d^2 traces of sample m's point
    double scale;         // n / |S|
    std::uint64_t key_radix;
    EvalMemo* memo;
};

inline double eval_rec(const EvalFrame& fr, int b, std::uint64_t prefix,
                       std::size_t fixed, std::uint64_t key) {
    if (fr.memo) {
        const auto it = fr.memo->table.find(key);
        if (it != fr.memo->table.end()) return it->second;
    }
    const ObjectiveTree& tree = *fr.tree;
    const std::size_t stride = tree.dd();
    const std::size_t child_pow = tree.dd_pow(b - 1);
    double acc = 0.0;
    for (std::size_t m = 0; m < fr.sample->size(); ++m) {
        const int i = (*fr.sample)[m];
        const std::uint64_t child_prefix = tree.extend_prefix(prefix, i);
        const auto* ids = tree.match(child_prefix);
        if (!ids) continue;
        const double* xrow = fr.traces + m * stride;
        if (b == 1) {
            const auto& node = tree.terms[static_cast<std::size_t>(ids->front())];
            for (std::size_t j = 0; j < stride; ++j)
                acc += xrow[j] * node.r.r[fixed + j];
        } else {
            const std::uint64_t pair_base =
                1 + static_cast<std::uint64_t>(i) * stride;
            for (std::size_t j = 0; j < stride; ++j) {
                const std::uint64_t child_key = key * fr.key_radix + pair_base + j;
                acc += xrow[j] * eval_rec(fr, b - 1, child_prefix, fixed + j * child_pow, child_key);
            }
        }
    }
    const double out = acc * fr.scale;
    if (fr.memo) fr.memo->table.emplace(key, out);
    return out;
}

} // namespace detail

// Recursive sampling estimate of t_b with the given outer indices fixed.
// With memo == nullptr the plain recursion is evaluated; a memo changes
// nothing about the result, bit for bit.
inline double eval_estimate(const ObjectiveTree& tree, int b,
                            const std::vector<int>& outer_sites,
                            const std::vector<int>& outer_basis,
                            const std::vector<int>& sample, const double* traces,
                            EvalMemo* memo = nullptr) {
    if (b < 1 || b > tree.k) throw ValidationError("eval_estimate: level out of range");
    if (outer_sites.size() != outer_basis.size() ||
        static_cast<int>(outer_sites.size()) != tree.k - b)
        throw ValidationError("eval_estimate: outer indices must fix levels k..b+1");
    if (sample.empty()) throw ValidationError("eval_estimate: empty sample");
    detail::EvalFrame fr;
    fr.tree = &tree;
    fr.sample = &sample;
    fr.traces = traces;
    fr.scale = static_cast<double>(tree.n) / static_cast<double>(sample.size());
    fr.key_radix = static_cast<std::uint64_t>(tree.n) * tree.dd() + 1;
    fr.memo = memo;
    long double reach = 1.0L;
    for (int i = 0; i < tree.k; ++i) reach *= static_cast<long double>(fr.key_radix);
    if (memo && reach > 9.0e18L)
        throw ValidationError("eval_estimate: memo keys would overflow, disable memoization");
    std::uint64_t prefix = 0, key = 0;
    std::size_t fixed = 0;
    for (std::size_t p = 0; p < outer_sites.size(); ++p) {
        prefix = tree.extend_prefix(prefix, outer_sites[p]);
        fixed += static_cast<std::size_t>(outer_basis[p]) * tree.dd_pow(tree.k - 1 - static_cast<int>(p));
        key = key * fr.key_radix + 1 + static_cast<std::uint64_t>(outer_sites[p]) * tree.dd() +
              static_cast<std::uint64_t>(outer_basis[p]);
    }
    return detail::eval_rec(fr, b, prefix, fixed, key);
}

} // namespace hamapprox::net_sampling
