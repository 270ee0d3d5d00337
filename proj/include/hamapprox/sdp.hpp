#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "exact.hpp"
#include "linearize.hpp"

namespace hamapprox::sdp_solver {

using core::Mat;
using linearizer::LinearizedSDP;

enum class SolveStatus { optimal, infeasible, max_iterations };

inline const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        default: return "max_iterations";
    }
}

struct SolveOptions {
    double eps_sdp = 1e-6;
    int max_iters = 60000;
    int feas_iters = 20000;
    double mu0 = 8.0;
    std::ostream* trace = nullptr;              // CSV: iteration,objective,violation
    std::vector<double>* merit_log = nullptr;   // merit value per main-loop iteration
};

struct SdpSolution {
    SolveStatus status = SolveStatus::optimal;
    core::ProductAssignment assignment;
    double objective_value = 0.0;
    double max_violation = 0.0;
    int iterations = 0;
    std::vector<double> x;              // final trace variables, stride d^2
    std::vector<double> multipliers_lo; // per constraint, zero when bound absent
    std::vector<double> multipliers_up;
};

struct Workspace {
    std::vector<double> x, step, grad, vals, ylo, yup;
    core::HermitianBasis basis;
    int basis_d = 0;
};

namespace detail {

inline double row_value(const linearizer::LinearConstraint& row, const double* x,
                        std::size_t stride) {
    double v = 0.0;
    for (const auto& t : row.coeffs)
        v += t.coeff * x[static_cast<std::size_t>(t.site) * stride + static_cast<std::size_t>(t.basis)];
    return v;
}

inline double max_violation(const LinearizedSDP& sdp, const std::vector<double>& vals) {
    double worst = 0.0;
    for (std::size_t c = 0; c < sdp.constraints.size(); ++c) {
        const auto& row = sdp.constraints[c];
        if (row.lower) worst = std::max(worst, *row.lower - vals[c]);
        if (row.upper) worst = std::max(worst, vals[c] - *row.upper);
    }
    return worst;
}

inline void eval_rows(const LinearizedSDP& sdp, const double* x, std::size_t stride,
                      std::vector<double>& vals) {
    vals.resize(sdp.constraints.size());
    for (std::size_t c = 0; c < sdp.constraints.size(); ++c)
        vals[c] = row_value(sdp.constraints[c], x, stride);
}

// Project the spectrum of a candidate density matrix onto the probability
// simplex (Euclidean projection, preserving eigenvectors).
inline void simplex_project(Eigen::VectorXd& lam) {
    const int m = static_cast<int>(lam.size());
    std::vector<double> sorted(lam.data(), lam.data() + m);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cum = 0.0, theta = 0.0;
    int rho = 0;
    for (int i = 0; i < m; ++i) {
        cum += sorted[static_cast<std::size_t>(i)];
        const double t = (cum - 1.0) / (i + 1);
        if (sorted[static_cast<std::size_t>(i)] - t > 0.0) {
            rho = i + 1;
            theta = t;
        }
    }
    if (rho == 0) theta = (cum - 1.0) / m;
    for (int i = 0; i < m; ++i) lam[i] = std::max(lam[i] - theta, 0.0);
}

// Exact Euclidean projection of one site block onto the trace vectors of
// density matrices. For d = 2 the set is the unit Bloch ball; in general we
// project the reconstructed matrix by eigenvalue simplex projection.
inline void project_block(double* x, const core::HermitianBasis& basis, Mat& scratch) {
    const int d = basis.d;
    const std::size_t stride = static_cast<std::size_t>(d) * d;
    if (d == 2) {
        x[0] = 1.0;
        const double r = std::sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3]);
        if (r > 1.0) {
            const double inv = 1.0 / r;
            x[1] *= inv;
            x[2] *= inv;
            x[3] *= inv;
        }
        return;
    }
    scratch.setZero(d, d);
    for (std::size_t j = 0; j < stride; ++j) scratch += (0.5 * x[j]) * basis[j];
    scratch = ((scratch + scratch.adjoint()) * 0.5).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(scratch);
    Eigen::VectorXd lam = es.eigenvalues();
    simplex_project(lam);
    scratch.setZero();
    for (int i = 0; i < d; ++i)
        scratch += lam[i] * (es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint());
    for (std::size_t j = 0; j < stride; ++j)
        x[j] = core::trace_product_real(basis[j], scratch);
}

inline void project_all(std::vector<double>& x, int n, const core::HermitianBasis& basis,
                        Mat& scratch) {
    const std::size_t stride = static_cast<std::size_t>(basis.d) * basis.d;
    for (int i = 0; i < n; ++i) project_block(x.data() + static_cast<std::size_t>(i) * stride, basis, scratch);
}

// Per-block unconstrained maximizer of sum_j c_ij Tr(s_j rho_i): the top
// eigenvector of E_i = sum_j c_ij s_j.
inline void block_top_state(const double* c, const core::HermitianBasis& basis, Mat& scratch,
                            double* x_out) {
    const int d = basis.d;
    const std::size_t stride = static_cast<std::size_t>(d) * d;
    if (d == 2) {
        const double r = std::sqrt(c[1] * c[1] + c[2] * c[2] + c[3] * c[3]);
        x_out[0] = 1.0;
        if (r < 1e-300) {
            x_out[1] = 0.0;
            x_out[2] = 0.0;
            x_out[3] = 1.0; // |0><0|, matching the deterministic eigen tie-break
        } else {
            x_out[1] = c[1] / r;
            x_out[2] = c[2] / r;
            x_out[3] = c[3] / r;
        }
        return;
    }
    scratch.setZero(d, d);
    for (std::size_t j = 0; j < stride; ++j) scratch += c[j] * basis[j];
    const core::Vec top = exact_oracle::top_eigenvector(scratch);
    const Mat rho = top * top.adjoint();
    for (std::size_t j = 0; j < stride; ++j)
        x_out[j] = core::trace_product_real(basis[j], rho);
}

} // namespace detail

// Solve max c.x over products of single-site density matrices subject to the
// linear rows of the program, by projected gradient on an augmented
// Lagrangian. Deterministic: fixed initialization and fixed update order.
inline SdpSolution solve_sdp(const LinearizedSDP& sdp, const SolveOptions& opts = {},
                             Workspace* external_ws = nullptr) {
    Workspace local;
    Workspace& ws = external_ws ? *external_ws : local;
    if (ws.basis_d != sdp.d) {
        ws.basis = core::build_basis(sdp.d);
        ws.basis_d = sdp.d;
    }
    const int n = sdp.n;
    const std::size_t stride = static_cast<std::size_t>(sdp.d) * sdp.d;
    const std::size_t nv = static_cast<std::size_t>(n) * stride;
    const std::size_t nc = sdp.constraints.size();
    Mat scratch(sdp.d, sdp.d);

    SdpSolution sol;
    sol.multipliers_lo.assign(nc, 0.0);
    sol.multipliers_up.assign(nc, 0.0);

    auto finish = [&](SolveStatus status, const std::vector<double>& x, int iters) {
        sol.status = status;
        sol.x = x;
        sol.iterations = iters;
        sol.objective_value = 0.0;
        for (std::size_t v = 0; v < nv; ++v) sol.objective_value += sdp.objective[v] * x[v];
        detail::eval_rows(sdp, x.data(), stride, ws.vals);
        sol.max_violation = detail::max_violation(sdp, ws.vals);
        sol.assignment.rho.clear();
        sol.assignment.rho.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            sol.assignment.rho.push_back(
                core::state_from_traces(x.data() + static_cast<std::size_t>(i) * stride, ws.basis));
        return sol;
    };

    if (opts.trace) *opts.trace << "iteration,objective,violation\n";

    // Fast path: the unconstrained blockwise maximizer. If it already
    // satisfies every row, it is optimal for the program.
    ws.x.assign(nv, 0.0);
    for (int i = 0; i < n; ++i)
        detail::block_top_state(sdp.objective.data() + static_cast<std::size_t>(i) * stride,
                                ws.basis, scratch, ws.x.data() + static_cast<std::size_t>(i) * stride);
    detail::eval_rows(sdp, ws.x.data(), stride, ws.vals);
    if (detail::max_violation(sdp, ws.vals) <= 1e-9) {
        if (opts.trace) {
            double obj = 0.0;
            for (std::size_t v = 0; v < nv; ++v) obj += sdp.objective[v] * ws.x[v];
            *opts.trace << 0 << ',' << obj << ',' << detail::max_violation(sdp, ws.vals) << '\n';
        }
        return finish(SolveStatus::optimal, ws.x, 0);
    }

    // Smoothness constant of the penalty/feasibility gradients.
    double sum_row_sq = 0.0;
    for (const auto& row : sdp.constraints) {
        double s = 0.0;
        for (const auto& t : row.coeffs) s += t.coeff * t.coeff;
        sum_row_sq += s;
    }
    sum_row_sq = std::max(sum_row_sq, 1e-12);

    // Phase 1: minimize half the sum of squared violations from the maximally
    // mixed point. If the residual violation stays large the program is
    // declared infeasible.
    const double x0 = std::sqrt(2.0 / sdp.d);
    ws.x.assign(nv, 0.0);
    for (int i = 0; i < n; ++i) ws.x[static_cast<std::size_t>(i) * stride] = x0;
    ws.grad.assign(nv, 0.0);
    const double feas_step = 1.0 / sum_row_sq;
    double feas_viol = std::numeric_limits<double>::infinity();
    double phi_checkpoint = std::numeric_limits<double>::infinity();
    const int plateau_every = 2000;
    for (int it = 0; it < opts.feas_iters; ++it) {
        detail::eval_rows(sdp, ws.x.data(), stride, ws.vals);
        feas_viol = detail::max_violation(sdp, ws.vals);
        if (feas_viol <= 1e-9) break;
        double phi = 0.0;
        std::fill(ws.grad.begin(), ws.grad.end(), 0.0);
        for (std::size_t c = 0; c < nc; ++c) {
            const auto& row = sdp.constraints[c];
            double push = 0.0;
            if (row.lower && ws.vals[c] < *row.lower) push += *row.lower - ws.vals[c];
            if (row.upper && ws.vals[c] > *row.upper) push -= ws.vals[c] - *row.upper;
            if (push == 0.0) continue;
            phi += 0.5 * push * push;
            for (const auto& t : row.coeffs)
                ws.grad[static_cast<std::size_t>(t.site) * stride + static_cast<std::size_t>(t.basis)] +=
                    push * t.coeff;
        }
        // Phi is monotone under the 1/L step, so a plateau means the
        // squared-violation minimum has been reached.
        if (it % plateau_every == plateau_every - 1) {
            if (phi > phi_checkpoint - 1e-16 * std::max(phi_checkpoint, 1.0)) break;
            phi_checkpoint = phi;
        }
        for (std::size_t v = 0; v < nv; ++v) ws.x[v] += feas_step * ws.grad[v];
        detail::project_all(ws.x, n, ws.basis, scratch);
    }
    detail::eval_rows(sdp, ws.x.data(), stride, ws.vals);
    feas_viol = detail::max_violation(sdp, ws.vals);
    if (feas_viol > 1e-6) return finish(SolveStatus::infeasible, ws.x, 0);

    // Phase 2: augmented Lagrangian ascent from the feasible point.
    ws.ylo.assign(nc, 0.0);
    ws.yup.assign(nc, 0.0);
    double mu = opts.mu0;
    const double viol_tol = 1e-7;
    const int dual_every = 250;
    const int mu_every = 500;
    const int flat_window = 100;
    double checkpoint_viol = std::numeric_limits<double>::infinity();
    std::vector<double> obj_hist;
    obj_hist.reserve(static_cast<std::size_t>(opts.max_iters) + 1);

    int it = 0;
    bool converged = false;
    for (; it < opts.max_iters; ++it) {
        detail::eval_rows(sdp, ws.x.data(), stride, ws.vals);
        const double viol = detail::max_violation(sdp, ws.vals);
        double obj = 0.0;
        for (std::size_t v = 0; v < nv; ++v) obj += sdp.objective[v] * ws.x[v];
        obj_hist.push_back(obj);
        if (opts.trace) *opts.trace << it << ',' << obj << ',' << viol << '\n';
        if (opts.merit_log) {
            double merit = obj;
            for (std::size_t c = 0; c < nc; ++c) {
                const auto& row = sdp.constraints[c];
                if (row.lower) {
                    const double p = std::max(0.0, ws.ylo[c] / mu + *row.lower - ws.vals[c]);
                    merit -= 0.5 * mu * (p * p - (ws.ylo[c] / mu) * (ws.ylo[c] / mu));
                }
                if (row.upper) {
                    const double p = std::max(0.0, ws.yup[c] / mu + ws.vals[c] - *row.upper);
                    merit -= 0.5 * mu * (p * p - (ws.yup[c] / mu) * (ws.yup[c] / mu));
                }
            }
            opts.merit_log->push_back(merit);
        }
        if (it >= flat_window && viol <= viol_tol &&
            std::abs(obj - obj_hist[static_cast<std::size_t>(it - flat_window)]) <=
                opts.eps_sdp / 10.0) {
            converged = true;
            break;
        }
        if (it > 0 && it % dual_every == 0) {
            for (std::size_t c = 0; c < nc; ++c) {
                const auto& row = sdp.constraints[c];
                if (row.lower) ws.ylo[c] = std::max(0.0, ws.ylo[c] + mu * (*row.lower - ws.vals[c]));
                if (row.upper) ws.yup[c] = std::max(0.0, ws.yup[c] + mu * (ws.vals[c] - *row.upper));
            }
        }
        if (it > 0 && it % mu_every == 0) {
            if (viol > viol_tol && viol > 0.5 * checkpoint_viol) mu *= 2.0;
            checkpoint_viol = viol;
        }
        // Gradient of the augmented Lagrangian (ascent direction).
        for (std::size_t v = 0; v < nv; ++v) ws.grad[v] = sdp.objective[v];
        for (std::size_t c = 0; c < nc; ++c) {
            const auto& row = sdp.constraints[c];
            double push = 0.0;
            if (row.lower) {
                const double p = std::max(0.0, ws.ylo[c] / mu + *row.lower - ws.vals[c]);
                push += mu * p;
            }
            if (row.upper) {
                const double p = std::max(0.0, ws.yup[c] / mu + ws.vals[c] - *row.upper);
                push -= mu * p;
            }
            if (push == 0.0) continue;
            for (const auto& t : row.coeffs)
                ws.grad[static_cast<std::size_t>(t.site) * stride + static_cast<std::size_t>(t.basis)] +=
                    push * t.coeff;
        }
        const double step = 1.0 / (mu * sum_row_sq + 1e-12);
        for (std::size_t v = 0; v < nv; ++v) ws.x[v] += step * ws.grad[v];
        detail::project_all(ws.x, n, ws.basis, scratch);
    }

    // Refresh multipliers for duality diagnostics.
    detail::eval_rows(sdp, ws.x.data(), stride, ws.vals);
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& row = sdp.constraints[c];
        if (row.lower) sol.multipliers_lo[c] = std::max(0.0, ws.ylo[c] + mu * (*row.lower - ws.vals[c]));
        if (row.upper) sol.multipliers_up[c] = std::max(0.0, ws.yup[c] + mu * (ws.vals[c] - *row.upper));
    }
    return finish(converged ? SolveStatus::optimal : SolveStatus::max_iterations, ws.x, it);
}

// Weak-duality upper bound on the program value from nonnegative multipliers:
// max over product states of (c + A^T (ylo - yup)).x  plus  yup.u - ylo.l.
inline double dual_bound(const LinearizedSDP& sdp, const std::vector<double>& ylo,
                         const std::vector<double>& yup) {
    const std::size_t stride = static_cast<std::size_t>(sdp.d) * sdp.d;
    std::vector<double> z(sdp.objective.begin(), sdp.objective.end());
    double constant = 0.0;
    for (std::size_t c = 0; c < sdp.constraints.size(); ++c) {
        const auto& row = sdp.constraints[c];
        const double w = ylo[c] - yup[c];
        if (row.lower) constant -= ylo[c] * *row.lower;
        if (row.upper) constant += yup[c] * *row.upper;
        if (w == 0.0) continue;
        for (const auto& t : row.coeffs)
            z[static_cast<std::size_t>(t.site) * stride + static_cast<std::size_t>(t.basis)] +=
                w * t.coeff;
    }
    const auto basis = core::build_basis(sdp.d);
    Mat scratch(sdp.d, sdp.d);
    std::vector<double> xb(stride);
    double best = constant;
    for (int i = 0; i < sdp.n; ++i) {
        detail::block_top_state(z.data() + static_cast<std::size_t>(i) * stride, basis, scratch,
                                 xb.data());
        double bv = 0.0;
        for (std::size_t j = 0; j < stride; ++j) bv += z[static_cast<std::size_t>(i) * stride + j] * xb[j];
        best += bv;
    }
    return best;
}

} // namespace hamapprox::sdp_solver
