#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "objective.hpp"
#include "sampling.hpp"

namespace hamapprox::linearizer {

using core::ValidationError;
using net_sampling::EvalMemo;
using net_sampling::ObjectiveTree;
using net_sampling::SamplingParams;

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LinearTermRef {
    int site = 0;
    int basis = 0;
    double coeff = 0.0;
};

struct LinearConstraint {
    std::vector<LinearTermRef> coeffs;
    std::optional<double> lower;
    std::optional<double> upper;
    int level = 0;
};

// The linear program P2 produced by recursively replacing nested partial sums
// with sampled estimates. Variables are x[i * d^2 + j] = Tr(s_j rho_i).
struct LinearizedSDP {
    int n = 0;
    int d = 2;
    int k = 1;
    std::vector<double> objective; // dense, site-major with stride d^2
    std::vector<LinearConstraint> constraints;
    SamplingParams params;
    std::vector<int> sample;
    std::vector<std::uint64_t> sample_points; // net indices when applicable
};

namespace detail {

struct LinContext {
    const ObjectiveTree* tree = nullptr;
    const std::vector<int>* sample = nullptr;
    const double* traces = nullptr;
    const SamplingParams* params = nullptr;
    EvalMemo* memo = nullptr;
    LinearizedSDP* out = nullptr;
    bool update = false;
    std::size_t cursor = 0;
    double c = 0.0; // C (sqrt(f/g) + delta)
};

inline void emit_base_row(LinContext& ctx, const std::vector<int>& outer_sites,
                          const std::vector<int>& outer_basis,
                          std::optional<double> lower, std::optional<double> upper) {
    const ObjectiveTree& tree = *ctx.tree;
    const std::size_t stride = tree.dd();
    if (!lower && !upper) {
        // only reachable for k == 1: the base sum is the objective itself
        auto& obj = ctx.out->objective;
        std::fill(obj.begin(), obj.end(), 0.0);
        for (int i = 0; i < tree.n; ++i) {
            const auto* ids = tree.match(tree.extend_prefix(0, i));
            if (!ids) continue;
            const auto& node = tree.terms[static_cast<std::size_t>(ids->front())];
            for (std::size_t j = 0; j < stride; ++j)
                obj[static_cast<std::size_t>(i) * stride + j] = node.r.r[j];
        }
        return;
    }
    std::uint64_t prefix = 0;
    for (int s : outer_sites) prefix = tree.extend_prefix(prefix, s);
    std::size_t fixed = 0;
    for (std::size_t p = 0; p < outer_basis.size(); ++p)
        fixed += static_cast<std::size_t>(outer_basis[p]) * tree.dd_pow(tree.k - 1 - static_cast<int>(p));
    if (ctx.update) {
        auto& row = ctx.out->constraints[ctx.cursor++];
        row.lower = lower;
        row.upper = upper;
        return; // base coefficients are sample independent
    }
    LinearConstraint row;
    row.level = 1;
    row.lower = lower;
    row.upper = upper;
    for (int i = 0; i < tree.n; ++i) {
        const auto* ids = tree.match(tree.extend_prefix(prefix, i));
        if (!ids) continue;
        const auto& node = tree.terms[static_cast<std::size_t>(ids->front())];
        for (std::size_t j = 0; j < stride; ++j)
            row.coeffs.push_back({i, static_cast<int>(j), node.r.r[fixed + j]});
    }
    ctx.out->constraints.push_back(std::move(row));
    ++ctx.cursor;
}

inline void lin_rec(LinContext& ctx, int b, std::vector<int>& outer_sites,
                    std::vector<int>& outer_basis, std::optional<double> lower,
                    std::optional<double> upper, double eps_here) {
    const ObjectiveTree& tree = *ctx.tree;
    if (b == 1) {
        emit_base_row(ctx, outer_sites, outer_basis, lower, upper);
        return;
    }
    const std::size_t stride = tree.dd();
    double eps_child = eps_here - ctx.c * std::pow(ctx.params->Delta, b - 1);
    if (eps_child < -1e-12)
        throw ParameterError("linearize: error budget becomes negative at level " +
                             std::to_string(b - 1));
    eps_child = std::max(eps_child, 0.0);
    const double child_scale = std::pow(static_cast<double>(tree.n), b - 1);
    std::vector<double> evals(static_cast<std::size_t>(tree.n) * stride);
    for (int i = 0; i < tree.n; ++i) {
        outer_sites.push_back(i);
        for (std::size_t j = 0; j < stride; ++j) {
            outer_basis.push_back(static_cast<int>(j));
            const double e = net_sampling::eval_estimate(tree, b - 1, outer_sites, outer_basis,
                                                         *ctx.sample, ctx.traces, ctx.memo);
            evals[static_cast<std::size_t>(i) * stride + j] = e;
            lin_rec(ctx, b - 1, outer_sites, outer_basis, e - eps_child * child_scale,
                    e + eps_child * child_scale, eps_child);
            outer_basis.pop_back();
        }
        outer_sites.pop_back();
    }
    if (!lower && !upper) {
        ctx.out->objective = std::move(evals);
        return;
    }
    const double slack = eps_child * static_cast<double>(stride) *
                         std::pow(static_cast<double>(tree.n), b);
    if (ctx.update) {
        auto& row = ctx.out->constraints[ctx.cursor++];
        for (std::size_t v = 0; v < evals.size(); ++v) row.coeffs[v].coeff = evals[v];
        row.lower = *lower - slack;
        row.upper = *upper + slack;
        return;
    }
    LinearConstraint row;
    row.level = b;
    row.lower = *lower - slack;
    row.upper = *upper + slack;
    row.coeffs.reserve(evals.size());
    for (int i = 0; i < tree.n; ++i)
        for (std::size_t j = 0; j < stride; ++j)
            row.coeffs.push_back({i, static_cast<int>(j),
                                  evals[static_cast<std::size_t>(i) * stride + j]});
    ctx.out->constraints.push_back(std::move(row));
    ++ctx.cursor;
}

} // namespace detail

inline void check_linearize_budget(const SamplingParams& params) {
    for (int m = 1; m <= params.k; ++m)
        if (net_sampling::eps_level(m, params) < -1e-12)
            throw ParameterError(
                "linearize: error budget negative at level " + std::to_string(m) +
                "; eps must be at least epsilon_k = " +
                std::to_string(net_sampling::epsilon_b(params.k, params)));
}

// Rebuild (or, with update = true, refresh in place for new sample traces)
// the linear program obtained from Algorithm 2. Constraints are emitted
// depth first, children before their parent row; the top call contributes
// the objective instead of a constraint.
inline void linearize_into(LinearizedSDP& out, const ObjectiveTree& tree,
                           const std::vector<int>& sample, const double* traces,
                           const SamplingParams& params, EvalMemo& memo,
                           bool update = false) {
    if (params.d != tree.d || params.k != tree.k)
        throw ParameterError("linearize: params do not match the instance");
    if (sample.empty()) throw ParameterError("linearize: empty sample");
    check_linearize_budget(params);
    memo.clear();
    detail::LinContext ctx;
    ctx.tree = &tree;
    ctx.sample = &sample;
    ctx.traces = traces;
    ctx.params = &params;
    ctx.memo = &memo;
    ctx.out = &out;
    ctx.update = update;
    ctx.c = params.C * (std::sqrt(params.f / params.g) + params.delta);
    if (!update) {
        out.n = tree.n;
        out.d = tree.d;
        out.k = tree.k;
        out.constraints.clear();
        out.objective.assign(static_cast<std::size_t>(tree.n) * tree.dd(), 0.0);
    }
    out.params = params;
    out.sample = sample;
    std::vector<int> outer_sites, outer_basis;
    outer_sites.reserve(static_cast<std::size_t>(tree.k));
    outer_basis.reserve(static_cast<std::size_t>(tree.k));
    detail::lin_rec(ctx, tree.k, outer_sites, outer_basis, std::nullopt, std::nullopt,
                    params.eps);
    if (update && ctx.cursor != out.constraints.size())
        throw ValidationError("linearize: constraint structure changed during update");
}

inline LinearizedSDP linearize(const ObjectiveTree& tree, const std::vector<int>& sample,
                               const double* traces, const SamplingParams& params) {
    LinearizedSDP out;
    EvalMemo memo;
    linearize_into(out, tree, sample, traces, params, memo, false);
    return out;
}

struct FeasibilityReport {
    double max_violation = 0.0;
    bool feasible = true;
};

inline double constraint_value(const LinearConstraint& row, const double* x, std::size_t stride) {
    double v = 0.0;
    for (const auto& t : row.coeffs)
        v += t.coeff * x[static_cast<std::size_t>(t.site) * stride + static_cast<std::size_t>(t.basis)];
    return v;
}

inline FeasibilityReport check_feasible(const LinearizedSDP& sdp,
                                        const core::ProductAssignment& a) {
    core::validate_assignment(a, sdp.n, sdp.d);
    const auto basis = core::build_basis(sdp.d);
    const auto x = core::trace_table(a, basis);
    FeasibilityReport rep;
    const std::size_t stride = static_cast<std::size_t>(sdp.d) * sdp.d;
    for (const auto& row : sdp.constraints) {
        const double v = constraint_value(row, x.data(), stride);
        double viol = 0.0;
        if (row.lower) viol = std::max(viol, *row.lower - v);
        if (row.upper) viol = std::max(viol, v - *row.upper);
        rep.max_violation = std::max(rep.max_violation, viol);
    }
    rep.feasible = rep.max_violation <= 1e-9;
    return rep;
}

// Bound from the approximation analysis on |opt(P2) - optprod|:
// d (d + sqrt 2) * sum_{m=1}^{k-1} (sqrt 2 d)^{k-1-m} eps_m * n^k,
// with eps_m the error parameter reaching level m of the recursion.
inline double p2_gap_bound(const SamplingParams& params, int n) {
    double sum = 0.0;
    for (int m = 1; m <= params.k - 1; ++m)
        sum += std::pow(std::sqrt(2.0) * params.d, params.k - 1 - m) *
               net_sampling::eps_level(m, params);
    return params.d * (params.d + std::sqrt(2.0)) * sum * std::pow(static_cast<double>(n), params.k);
}

inline nlohmann::json sdp_to_json(const LinearizedSDP& sdp) {
    nlohmann::json j;
    j["n"] = sdp.n;
    j["d"] = sdp.d;
    j["k"] = sdp.k;
    j["params"] = {{"f", sdp.params.f},     {"g", sdp.params.g},
                   {"delta", sdp.params.delta}, {"eps", sdp.params.eps},
                   {"eps_sdp", sdp.params.eps_sdp}, {"seed", sdp.params.seed}};
    j["sample"] = nlohmann::json::array();
    for (int s : sdp.sample) j["sample"].push_back(s + 1);
    j["objective"] = nlohmann::json::array();
    const std::size_t stride = static_cast<std::size_t>(sdp.d) * sdp.d;
    for (std::size_t v = 0; v < sdp.objective.size(); ++v) {
        if (sdp.objective[v] == 0.0) continue;
        j["objective"].push_back({{"site", static_cast<int>(v / stride) + 1},
                                  {"basis", static_cast<int>(v % stride)},
                                  {"coeff", sdp.objective[v]}});
    }
    j["constraints"] = nlohmann::json::array();
    for (const auto& row : sdp.constraints) {
        nlohmann::json jr;
        jr["level"] = row.level;
        if (row.lower) jr["lower"] = *row.lower;
        if (row.upper) jr["upper"] = *row.upper;
        jr["coeffs"] = nlohmann::json::array();
        for (const auto& t : row.coeffs) {
            if (t.coeff == 0.0) continue;
            jr["coeffs"].push_back({{"site", t.site + 1}, {"basis", t.basis}, {"coeff", t.coeff}});
        }
        j["constraints"].push_back(std::move(jr));
    }
    return j;
}

} // namespace hamapprox::linearizer
