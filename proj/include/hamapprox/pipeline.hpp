#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "expander.hpp"
#include "linearize.hpp"
#include "mixing.hpp"
#include "net.hpp"
#include "objective.hpp"
#include "sampling.hpp"
#include "sdp.hpp"

namespace hamapprox::pipeline {

using core::HamiltonianInstance;
using core::ProductAssignment;
using linearizer::ParameterError;
using net_sampling::DeltaNet;
using net_sampling::ObjectiveTree;
using net_sampling::SamplingParams;

struct AllInfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunMode { desk, theoretical };

struct ApproximateConfig {
    double eps = 0.1;
    RunMode mode = RunMode::desk;
    int sample_size = 2;       // desk mode: requested |S|
    double net_delta = 0.5;    // desk mode net resolution
    std::optional<double> f_override;
    std::uint64_t seed = 1;
    int repetitions = 1;
    bool derandomize = false;
    std::uint64_t max_walks = 0;       // 0 enumerates every walk
    double candidate_budget = 2.2e7;
    double net_budget = 16777216.0;
    int workers = 1;
    int solver_max_iters = 60000;
};

struct RunReport {
    double value = 0.0;  // energy of the purified best assignment
    double alpha = -std::numeric_limits<double>::infinity(); // best program value
    ProductAssignment assignment;
    SamplingParams params;
    std::vector<int> sample;
    std::uint64_t candidates = 0;
    std::uint64_t feasible = 0;
    std::uint64_t infeasible = 0;
    std::uint64_t unsolved = 0;
    std::uint64_t best_candidate = 0;
    std::uint64_t net_size = 0;
    double net_delta = 0.0;
    bool derandomized = false;
    std::uint64_t walk_id = 0;
    int repetition = 0;
    double seconds = 0.0;
    std::string derivation;
};

namespace detail {

struct DerivedParams {
    SamplingParams params;
    double f = 0.0;
    double g = 0.0;
    double delta = 0.0;
    std::string log;
};

inline double default_f(int n, int d, int k) {
    return k + std::log(2.0 * std::pow(static_cast<double>(d), 2 * k)) /
                   std::log(static_cast<double>(n)) + 0.5;
}

inline SamplingParams params_for(int d, int k, double f, double g, double delta,
                                 double eps_sdp, std::uint64_t seed) {
    SamplingParams probe = net_sampling::make_sampling_params(d, k, f, g, delta, 1.0, eps_sdp, seed);
    const double eps_k = net_sampling::epsilon_b(k, probe);
    return net_sampling::make_sampling_params(d, k, f, g, delta, eps_k, eps_sdp, seed);
}

// Per-n^k gap of the linearized program when the whole error chain is driven
// by the equal-split parameter u = sqrt(f/g) and net resolution delta.
inline double gap_per_nk(int n, int d, int k, double f, double u, double delta) {
    const SamplingParams p = params_for(d, k, f, f / (u * u), delta, 0.1, 1);
    return linearizer::p2_gap_bound(p, n) / std::pow(static_cast<double>(n), k);
}

inline DerivedParams derive_desk(const HamiltonianInstance& inst, const ApproximateConfig& cfg) {
    DerivedParams out;
    std::ostringstream log;
    const int n = inst.n;
    if (n < 2) throw ParameterError("approximate: the instance needs at least two qudits");
    const double ln_ceil = std::ceil(std::log(static_cast<double>(n)));
    const int s = std::max(1, cfg.sample_size);
    out.delta = cfg.net_delta;
    out.g = static_cast<double>(s) / ln_ceil;
    out.f = cfg.f_override.value_or(default_f(n, inst.d, inst.k));
    log << "mode=desk n=" << n << " d=" << inst.d << " k=" << inst.k << "\n";
    log << "sample_size=" << s << " -> g=" << out.g << " (ceil ln n = " << ln_ceil << ")\n";
    log << "f=" << out.f << (cfg.f_override ? " (override)" : " (k + ln(2 d^2k)/ln n + 1/2)")
        << "\n";
    if (out.f <= inst.k)
        log << "warning: f <= k, the union bound over tuples is not covered\n";
    out.params = params_for(inst.d, inst.k, out.f, out.g, out.delta, cfg.eps / 10.0, cfg.seed);
    log << "delta=" << out.delta << " eps_top=epsilon_k=" << out.params.eps
        << " eps_sdp=" << out.params.eps_sdp << "\n";
    out.log = log.str();
    return out;
}

inline DerivedParams derive_theoretical(const HamiltonianInstance& inst,
                                        const ApproximateConfig& cfg) {
    DerivedParams out;
    std::ostringstream log;
    const int n = inst.n;
    if (n < 2) throw ParameterError("approximate: the instance needs at least two qudits");
    if (cfg.eps <= 0.0) throw ParameterError("approximate: eps must be positive");
    const double eps_sdp = cfg.eps / 10.0;
    const double target = cfg.eps - eps_sdp;
    out.f = cfg.f_override.value_or(default_f(n, inst.d, inst.k));
    log << "mode=theoretical n=" << n << " d=" << inst.d << " k=" << inst.k << "\n";
    log << "eps=" << cfg.eps << " eps_sdp=eps/10=" << eps_sdp << " gap target=" << target
        << "\n";
    log << "f=" << out.f << (cfg.f_override ? " (override)" : " (k + ln(2 d^2k)/ln n + 1/2)")
        << "\n";
    if (inst.k == 1) {
        // the objective is already linear; any modest parameters do
        out.delta = std::min(1.0, std::sqrt(target));
        out.g = out.f / (out.delta * out.delta);
        out.params = params_for(inst.d, 1, out.f, out.g, out.delta, eps_sdp, cfg.seed);
        log << "k=1: objective is linear, delta=" << out.delta << " g=" << out.g << "\n";
        out.log = log.str();
        return out;
    }
    // Equal split u = sqrt(f/g) = delta; gap_per_nk is continuous and
    // increasing in u with limit 0 at u -> 0, so bisection applies.
    auto gap_equal = [&](double u) { return gap_per_nk(n, inst.d, inst.k, out.f, u, u); };
    const double cap = 2.0;
    if (gap_equal(cap) <= target) {
        // even the coarsest useful net meets the budget; fix delta at the cap
        // and spend the rest on the sampling ratio alone
        out.delta = cap;
        auto gap_fixed = [&](double u) { return gap_per_nk(n, inst.d, inst.k, out.f, u, cap); };
        double lo = 1e-9, hi = cap;
        if (gap_fixed(hi) <= target) {
            lo = hi;
        } else {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (gap_fixed(mid) <= target ? lo : hi) = mid;
            }
        }
        out.g = out.f / (lo * lo);
        log << "delta capped at " << cap << "; u=" << lo << " -> g=" << out.g << "\n";
    } else {
        double lo = 1e-9, hi = cap;
        if (gap_equal(lo) > target)
            throw ParameterError("approximate: eps is too small to satisfy even with u -> 0");
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (gap_equal(mid) <= target ? lo : hi) = mid;
        }
        out.delta = lo;
        out.g = out.f / (lo * lo);
        log << "equal split u=delta=" << lo << " -> g=" << out.g << "\n";
    }
    out.params = params_for(inst.d, inst.k, out.f, out.g, out.delta, eps_sdp, cfg.seed);
    log << "delta=" << out.delta << " eps_top=epsilon_k=" << out.params.eps
        << " eps_sdp=" << out.params.eps_sdp << "\n";
    out.log = log.str();
    return out;
}

struct CandidateOutcome {
    bool any_feasible = false;
    double alpha = -std::numeric_limits<double>::infinity();
    std::uint64_t best_candidate = 0;
    std::vector<double> best_x;
    std::uint64_t feasible = 0;
    std::uint64_t infeasible = 0;
    std::uint64_t unsolved = 0;
};

// Enumerate all assignments of net points to the distinct sampled sites in a
// contiguous index range. Each candidate's program is solved and its solution
// re-scored under the true objective; the scan keeps the best true value.
inline CandidateOutcome scan_candidates(const ObjectiveTree& tree,
                                        const std::vector<int>& sample,
                                        const std::vector<int>& distinct,
                                        const std::vector<std::vector<double>>& net_traces,
                                        const SamplingParams& params, int solver_max_iters,
                                        std::uint64_t begin, std::uint64_t end) {
    CandidateOutcome out;
    const std::size_t stride = tree.dd();
    const std::uint64_t net_size = net_traces.size();
    std::vector<std::uint64_t> digits(distinct.size(), 0);
    std::vector<std::size_t> sample_slot(sample.size(), 0); // sample position -> distinct slot
    for (std::size_t m = 0; m < sample.size(); ++m)
        sample_slot[m] = static_cast<std::size_t>(
            std::lower_bound(distinct.begin(), distinct.end(), sample[m]) - distinct.begin());
    std::vector<double> traces(sample.size() * stride);
    std::vector<int> every_site(static_cast<std::size_t>(tree.n));
    for (int i = 0; i < tree.n; ++i) every_site[static_cast<std::size_t>(i)] = i;

    linearizer::LinearizedSDP sdp;
    net_sampling::EvalMemo memo;
    sdp_solver::Workspace ws;
    sdp_solver::SolveOptions opts;
    opts.eps_sdp = params.eps_sdp;
    opts.max_iters = solver_max_iters;
    bool built = false;

    for (std::uint64_t cand = begin; cand < end; ++cand) {
        std::uint64_t rem = cand;
        for (std::size_t t = 0; t < digits.size(); ++t) {
            digits[t] = rem % net_size;
            rem /= net_size;
        }
        for (std::size_t m = 0; m < sample.size(); ++m) {
            const auto& row = net_traces[static_cast<std::size_t>(digits[sample_slot[m]])];
            std::copy(row.begin(), row.end(), traces.begin() + static_cast<long>(m * stride));
        }
        linearizer::linearize_into(sdp, tree, sample, traces.data(), params, memo, built);
        built = true;
        const auto sol = sdp_solver::solve_sdp(sdp, opts, &ws);
        if (sol.status == sdp_solver::SolveStatus::infeasible) {
            ++out.infeasible;
            continue;
        }
        if (sol.status == sdp_solver::SolveStatus::max_iterations) {
            ++out.unsolved;
            continue;
        }
        ++out.feasible;
        // the solver's x is site-major trace rows, exactly the layout an
        // every-site sample expects, so this evaluates the true objective
        const double alpha =
            net_sampling::eval_estimate(tree, tree.k, {}, {}, every_site, sol.x.data());
        if (alpha > out.alpha) {
            out.alpha = alpha;
            out.best_candidate = cand;
            out.best_x = sol.x;
            out.any_feasible = true;
        }
    }
    return out;
}

inline CandidateOutcome run_candidates(const ObjectiveTree& tree, const std::vector<int>& sample,
                                       const std::vector<int>& distinct,
                                       const std::vector<std::vector<double>>& net_traces,
                                       const SamplingParams& params, int solver_max_iters,
                                       std::uint64_t total, int workers) {
    const int w = std::max(1, std::min<int>(workers, static_cast<int>(
                                                std::min<std::uint64_t>(total, 512))));
    std::vector<CandidateOutcome> parts(static_cast<std::size_t>(w));
    if (w == 1) {
        parts[0] = scan_candidates(tree, sample, distinct, net_traces, params, solver_max_iters,
                                   0, total);
    } else {
        const std::uint64_t chunk = (total + static_cast<std::uint64_t>(w) - 1) / w;
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(w));
        for (int t = 0; t < w; ++t) {
            const std::uint64_t begin = chunk * static_cast<std::uint64_t>(t);
            const std::uint64_t end = std::min(total, begin + chunk);
            threads.emplace_back([&, t, begin, end] {
                parts[static_cast<std::size_t>(t)] =
                    scan_candidates(tree, sample, distinct, net_traces, params, solver_max_iters,
                                    begin, end);
            });
        }
        for (auto& th : threads) th.join();
    }
    CandidateOutcome merged;
    for (const auto& p : parts) {
        merged.feasible += p.feasible;
        merged.infeasible += p.infeasible;
        merged.unsolved += p.unsolved;
        if (!p.any_feasible) continue;
        // strict improvement keeps the lowest candidate index on ties because
        // chunks are scanned in ascending index order
        if (!merged.any_feasible || p.alpha > merged.alpha ||
            (p.alpha == merged.alpha && p.best_candidate < merged.best_candidate)) {
            merged.any_feasible = true;
            merged.alpha = p.alpha;
            merged.best_candidate = p.best_candidate;
            merged.best_x = p.best_x;
        }
    }
    return merged;
}

inline std::uint64_t candidate_total(const DeltaNet& net, std::size_t distinct_sites,
                                     double budget) {
    const long double total = std::pow(static_cast<long double>(net.size()),
                                       static_cast<long double>(distinct_sites));
    if (total > static_cast<long double>(budget))
        throw ParameterError(
            "approximate: candidate enumeration needs " + std::to_string(static_cast<double>(total)) +
            " program solves, above the budget of " + std::to_string(budget) +
            "; lower the sample size or coarsen the net");
    std::uint64_t out = 1;
    for (std::size_t i = 0; i < distinct_sites; ++i) out *= net.size();
    return out;
}

} // namespace detail

// Run the sampling + linearization + rounding pipeline once per repetition
// and return the best purified product assignment found.
inline RunReport approximate(const HamiltonianInstance& inst, const ApproximateConfig& cfg) {
    core::validate_instance(inst);
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.repetitions < 1) throw ParameterError("approximate: repetitions must be positive");
    if (cfg.workers < 1) throw ParameterError("approximate: workers must be positive");

    const auto tree = net_sampling::build_objective_tree(inst);
    const auto basis = core::build_basis(inst.d);
    const std::size_t stride = static_cast<std::size_t>(inst.d) * inst.d;

    RunReport best;
    std::ostringstream derivation;
    bool best_set = false;

    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        ApproximateConfig rep_cfg = cfg;
        rep_cfg.seed = cfg.seed + static_cast<std::uint64_t>(rep);
        const auto derived = cfg.mode == RunMode::desk ? detail::derive_desk(inst, rep_cfg)
                                                       : detail::derive_theoretical(inst, rep_cfg);
        DeltaNet net;
        try {
            net = net_sampling::build_net(inst.d, derived.delta, cfg.net_budget);
        } catch (const core::ValidationError& e) {
            throw ParameterError(std::string("approximate: ") + e.what() +
                                 "; raise the net budget or loosen eps");
        }
        std::vector<std::vector<double>> net_traces(static_cast<std::size_t>(net.size()));
        for (std::uint64_t p = 0; p < net.size(); ++p) {
            const core::Mat point = net.point(p);
            auto& row = net_traces[static_cast<std::size_t>(p)];
            row.resize(stride);
            for (std::size_t j = 0; j < stride; ++j)
                row[j] = core::trace_product_real(basis[j], point);
        }

        if (rep > 0) derivation << "\n";
        derivation << "repetition " << rep << ":\n" << derived.log;
        derivation << "net size=" << net.size() << " at delta=" << derived.delta << "\n";

        std::uint64_t samples_to_try = 1;
        if (cfg.derandomize) {
            samples_to_try = pipeline::walk_count(inst.n, derived.g);
            if (cfg.max_walks > 0) samples_to_try = std::min(samples_to_try, cfg.max_walks);
            derivation << "derandomized: enumerating up to " << samples_to_try << " walks\n";
        }

        for (std::uint64_t walk = 0; walk < samples_to_try; ++walk) {
            std::vector<int> sample =
                cfg.derandomize ? pipeline::derandomized_indices(inst.n, derived.g, walk)
                                : net_sampling::sample_indices(inst.n, derived.g, rep_cfg.seed);
            std::vector<int> distinct(sample);
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            const std::uint64_t total =
                inst.k == 1 ? 1 : detail::candidate_total(net, distinct.size(), cfg.candidate_budget);
            if (walk == 0)
                derivation << "sample size=" << sample.size() << " distinct=" << distinct.size()
                           << " candidates=" << total << "\n";

            const auto outcome =
                detail::run_candidates(tree, sample, distinct, net_traces, derived.params,
                                       cfg.solver_max_iters, total, cfg.workers);
            best.candidates += total;
            best.infeasible += outcome.infeasible;
            best.unsolved += outcome.unsolved;
            best.feasible += outcome.feasible;

            if (!outcome.any_feasible) {
                if (cfg.derandomize) continue; // try the next walk
                break;
            }

            ProductAssignment assignment;
            assignment.rho.reserve(static_cast<std::size_t>(inst.n));
            for (int i = 0; i < inst.n; ++i)
                assignment.rho.push_back(core::state_from_traces(
                    outcome.best_x.data() + static_cast<std::size_t>(i) * stride, basis));
            const auto purified = mixing::purify_by_conditional_expectations(inst, assignment);
            const double value = core::assignment_value(inst, purified);

            if (!best_set || value > best.value) {
                best_set = true;
                best.value = value;
                best.alpha = outcome.alpha;
                best.assignment = purified;
                best.params = derived.params;
                best.sample = sample;
                best.best_candidate = outcome.best_candidate;
                best.net_size = net.size();
                best.net_delta = derived.delta;
                best.derandomized = cfg.derandomize;
                best.walk_id = walk;
                best.repetition = rep;
            }
            if (cfg.derandomize) break; // first feasible walk wins
        }
    }

    if (!best_set)
        throw AllInfeasibleError(
            "approximate: every candidate program was infeasible; the sampled estimates admit no "
            "product state within the error budget");

    best.derivation = derivation.str();
    best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return best;
}

// Reconstruct the linearized program of the winning candidate from a run
// report, using the same digit decoding as the candidate scan.
inline linearizer::LinearizedSDP rebuild_best_sdp(const HamiltonianInstance& inst,
                                                  const RunReport& report) {
    const auto tree = net_sampling::build_objective_tree(inst);
    const auto basis = core::build_basis(inst.d);
    const auto net = net_sampling::build_net(inst.d, report.net_delta);
    const std::size_t stride = static_cast<std::size_t>(inst.d) * inst.d;
    std::vector<int> distinct(report.sample);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::uint64_t> digits(distinct.size(), 0);
    std::uint64_t rem = report.best_candidate;
    for (std::size_t t = 0; t < digits.size(); ++t) {
        digits[t] = rem % net.size();
        rem /= net.size();
    }
    std::vector<double> traces(report.sample.size() * stride);
    for (std::size_t m = 0; m < report.sample.size(); ++m) {
        const std::size_t slot = static_cast<std::size_t>(
            std::lower_bound(distinct.begin(), distinct.end(), report.sample[m]) -
            distinct.begin());
        const core::Mat point = net.point(digits[slot]);
        for (std::size_t j = 0; j < stride; ++j)
            traces[m * stride + j] = core::trace_product_real(basis[j], point);
    }
    auto sdp = linearizer::linearize(tree, report.sample, traces.data(), report.params);
    sdp.sample_points = digits;
    return sdp;
}

} // namespace hamapprox::pipeline
