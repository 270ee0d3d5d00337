#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace hamapprox::exact_oracle {

using core::cxd;
using core::HamiltonianInstance;
using core::Mat;
using core::ProductAssignment;
using core::ValidationError;
using core::Vec;

struct ExactResult {
    double opt = 0.0;
    Vec state;
    double residual = 0.0;
};

inline ExactResult exact_opt(const HamiltonianInstance& inst) {
    core::validate_instance(inst);
    const Mat h = core::assemble_dense(inst);
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    ExactResult res;
    res.opt = es.eigenvalues()(es.eigenvalues().size() - 1);
    res.state = core::canonical_phase(es.eigenvectors().col(es.eigenvectors().cols() - 1));
    res.residual = (h * res.state - res.opt * res.state).norm();
    return res;
}

// Effective single-site operator M such that replacing the state at `site` by
// sigma changes the assignment value by Tr(M sigma) plus a constant collected
// from terms not touching the site.
inline Mat local_effective_hamiltonian(const HamiltonianInstance& inst,
                                       const ProductAssignment& a, int site) {
    if (site < 0 || site >= inst.n) throw ValidationError("site out of range");
    const int d = inst.d;
    Mat m = Mat::Zero(d, d);
    std::vector<int> rd, cd;
    for (const auto& term : inst.terms) {
        const auto it = std::find(term.support.begin(), term.support.end(), site);
        if (it == term.support.end()) continue;
        const int slot = static_cast<int>(it - term.support.begin());
        const int k = static_cast<int>(term.support.size());
        const auto dim = core::ipow(d, k);
        rd.assign(static_cast<std::size_t>(k), 0);
        cd.assign(static_cast<std::size_t>(k), 0);
        for (std::int64_t r = 0; r < dim; ++r) {
            core::detail::site_digits(r, k, d, rd.data());
            for (std::int64_t c = 0; c < dim; ++c) {
                const cxd entry = term.matrix(r, c);
                if (entry == 0.0) continue;
                core::detail::site_digits(c, k, d, cd.data());
                cxd w = entry;
                for (int q = 0; q < k; ++q) {
                    if (q == slot) continue;
                    w *= a.rho[static_cast<std::size_t>(term.support[static_cast<std::size_t>(q)])](
                        cd[static_cast<std::size_t>(q)], rd[static_cast<std::size_t>(q)]);
                    if (w == 0.0) break;
                }
                m(rd[static_cast<std::size_t>(slot)], cd[static_cast<std::size_t>(slot)]) += w;
            }
        }
    }
    return m;
}

// Eigenvector of the largest eigenvalue; degenerate candidates within 1e-12
// are resolved by lexicographically largest canonical representative.
inline Vec top_eigenvector(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    const auto vals = es.eigenvalues();
    const double top = vals(vals.size() - 1);
    Vec best;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals(i) < top - 1e-12) continue;
        Vec cand = core::canonical_phase(es.eigenvectors().col(i));
        if (best.size() == 0 || core::lex_compare(cand, best) > 0) best = cand;
    }
    return best;
}

// One pass of site-by-site conditional maximization; value never decreases.
inline double ascend_assignment(const HamiltonianInstance& inst, ProductAssignment& a,
                                int max_sweeps = 500, double tol = 1e-10) {
    double value = core::assignment_value(inst, a);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int site = 0; site < inst.n; ++site) {
            const Mat m = local_effective_hamiltonian(inst, a, site);
            const Vec v = top_eigenvector(m);
            a.rho[static_cast<std::size_t>(site)] = v * v.adjoint();
        }
        const double next = core::assignment_value(inst, a);
        if (next <= value + tol) { value = std::max(value, next); break; }
        value = next;
    }
    return value;
}

// Hyperspherical parametrization of a pure qudit state from d-1 polar angles
// in [0, pi/2] and d-1 phases in [0, 2 pi).
inline Vec pure_state_from_angles(int d, const double* theta, const double* phi) {
    Vec v(d);
    double prefix = 1.0;
    for (int i = 0; i < d; ++i) {
        double amp = prefix;
        if (i < d - 1) amp *= std::cos(theta[i]);
        v(i) = amp;
        if (i < d - 1) prefix *= std::sin(theta[i]);
    }
    for (int i = 1; i < d; ++i) v(i) *= std::exp(cxd(0.0, phi[i - 1]));
    return v;
}

inline Vec random_pure_state(util::Rng& rng, int d) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = cxd(rng.normal(), rng.normal());
    v /= v.norm();
    return core::canonical_phase(v);
}

struct ProductOptOptions {
    int resolution = 8;
    int ascent_starts = 32;
    int max_sweeps = 500;
    std::uint64_t seed = 12345;
    std::uint64_t grid_budget = 30000000;
    bool refine = true;
};

struct ProductOptResult {
    double value = 0.0;
    ProductAssignment assignment;
    std::string method;
};

namespace detail {

inline std::vector<Vec> grid_site_states(int d, int resolution) {
    std::vector<Vec> pts;
    const int angles = d - 1;
    std::vector<int> tdig(static_cast<std::size_t>(angles), 0);
    std::vector<int> pdig(static_cast<std::size_t>(angles), 0);
    std::vector<double> theta(static_cast<std::size_t>(angles), 0.0);
    std::vector<double> phi(static_cast<std::size_t>(angles), 0.0);
    const auto tcount = core::ipow(resolution, angles);
    const auto pcount = core::ipow(resolution, angles);
    pts.reserve(static_cast<std::size_t>(tcount * pcount));
    for (std::int64_t ti = 0; ti < tcount; ++ti) {
        std::int64_t r = ti;
        for (int a = 0; a < angles; ++a) { tdig[static_cast<std::size_t>(a)] = static_cast<int>(r % resolution); r /= resolution; }
        for (int a = 0; a < angles; ++a)
            theta[static_cast<std::size_t>(a)] =
                (0.5 * M_PI) * tdig[static_cast<std::size_t>(a)] / (resolution - 1);
        for (std::int64_t pi_ = 0; pi_ < pcount; ++pi_) {
            r = pi_;
            for (int a = 0; a < angles; ++a) { pdig[static_cast<std::size_t>(a)] = static_cast<int>(r % resolution); r /= resolution; }
            for (int a = 0; a < angles; ++a)
                phi[static_cast<std::size_t>(a)] =
                    (2.0 * M_PI) * pdig[static_cast<std::size_t>(a)] / resolution;
            pts.push_back(pure_state_from_angles(d, theta.data(), phi.data()));
        }
    }
    return pts;
}

} // namespace detail

inline ProductOptResult brute_force_product_opt(const HamiltonianInstance& inst,
                                                const ProductOptOptions& opts = {}) {
    core::validate_instance(inst);
    if (opts.resolution < 4) throw ValidationError("grid resolution must be at least 4");
    ProductOptResult best;
    best.value = -1.0;
    std::string best_method = "coordinate-ascent";

    const auto points = detail::grid_site_states(inst.d, opts.resolution);
    const double pcount = static_cast<double>(points.size());
    double combos = 1.0;
    for (int i = 0; i < inst.n; ++i) combos *= pcount;
    const bool grid_ok = inst.n <= 6 && combos <= static_cast<double>(opts.grid_budget);

    if (grid_ok) {
        // Per-term lookup over support point ids keeps the sweep cheap.
        const int k = inst.k;
        double table_size = 1.0;
        for (int i = 0; i < k; ++i) table_size *= pcount;
        std::vector<std::vector<double>> tables;
        const bool use_tables = table_size <= 4194304.0;
        if (use_tables) {
            tables.reserve(inst.terms.size());
            for (const auto& term : inst.terms) {
                std::vector<double> tab(static_cast<std::size_t>(table_size));
                std::vector<int> ids(static_cast<std::size_t>(k), 0);
                for (std::size_t flat = 0; flat < tab.size(); ++flat) {
                    std::size_t r = flat;
                    for (int q = 0; q < k; ++q) { ids[static_cast<std::size_t>(q)] = static_cast<int>(r % points.size()); r /= points.size(); }
                    Vec v = points[static_cast<std::size_t>(ids[0])];
                    for (int q = 1; q < k; ++q) {
                        const Vec& w = points[static_cast<std::size_t>(ids[static_cast<std::size_t>(q)])];
                        Vec merged(v.size() * w.size());
                        for (Eigen::Index a = 0; a < v.size(); ++a)
                            merged.segment(a * w.size(), w.size()) = v(a) * w;
                        v = std::move(merged);
                    }
                    tab[flat] = (v.adjoint() * term.matrix * v)(0).real();
                }
                tables.push_back(std::move(tab));
            }
        }
        std::vector<int> assign(static_cast<std::size_t>(inst.n), 0);
        std::vector<int> best_assign;
        double best_grid = -1.0;
        while (true) {
            double value = 0.0;
            for (std::size_t t = 0; t < inst.terms.size(); ++t) {
                const auto& sup = inst.terms[t].support;
                if (use_tables) {
                    std::size_t flat = 0, stride = 1;
                    for (int q = 0; q < k; ++q) {
                        flat += static_cast<std::size_t>(assign[static_cast<std::size_t>(sup[static_cast<std::size_t>(q)])]) * stride;
                        stride *= points.size();
                    }
                    value += tables[t][flat];
                } else {
                    Vec v = points[static_cast<std::size_t>(assign[static_cast<std::size_t>(sup[0])])];
                    for (int q = 1; q < k; ++q) {
                        const Vec& w = points[static_cast<std::size_t>(assign[static_cast<std::size_t>(sup[static_cast<std::size_t>(q)])])];
                        Vec merged(v.size() * w.size());
                        for (Eigen::Index a = 0; a < v.size(); ++a)
                            merged.segment(a * w.size(), w.size()) = v(a) * w;
                        v = std::move(merged);
                    }
                    value += (v.adjoint() * inst.terms[t].matrix * v)(0).real();
                }
            }
            if (value > best_grid) {
                best_grid = value;
                best_assign = assign;
            }
            std::size_t pos = assign.size();
            while (pos > 0) {
                if (++assign[pos - 1] < static_cast<int>(points.size())) break;
                assign[pos - 1] = 0;
                --pos;
            }
            if (pos == 0) break;
        }
        std::vector<Vec> states;
        states.reserve(best_assign.size());
        for (int id : best_assign) states.push_back(points[static_cast<std::size_t>(id)]);
        ProductAssignment a = core::pure_assignment(states);
        double refined = best_grid;
        if (opts.refine) refined = ascend_assignment(inst, a, opts.max_sweeps);
        best.value = refined;
        best.assignment = a;
        best_method = "grid";
    }

    util::Rng rng(opts.seed);
    for (int s = 0; s < opts.ascent_starts; ++s) {
        std::vector<Vec> states;
        states.reserve(static_cast<std::size_t>(inst.n));
        for (int i = 0; i < inst.n; ++i) states.push_back(random_pure_state(rng, inst.d));
        ProductAssignment a = core::pure_assignment(states);
        const double v = ascend_assignment(inst, a, opts.max_sweeps);
        if (v > best.value) {
            best.value = v;
            best.assignment = a;
            best_method = "coordinate-ascent";
        }
    }
    best.method = best_method;
    return best;
}

} // namespace hamapprox::exact_oracle
