#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <vector>

#include "hamapprox/core.hpp"
#include "hamapprox/linearize.hpp"
#include "hamapprox/rng.hpp"
#include "hamapprox/sdp.hpp"

#include "test_util.hpp"

using namespace hamapprox;
using linearizer::LinearConstraint;
using linearizer::LinearizedSDP;
using sdp_solver::SolveOptions;
using sdp_solver::SolveStatus;

namespace {

LinearizedSDP bare_program(int n, int d) {
    LinearizedSDP sdp;
    sdp.n = n;
    sdp.d = d;
    sdp.k = 2;
    sdp.objective.assign(static_cast<std::size_t>(n) * d * d, 0.0);
    return sdp;
}

void add_row(LinearizedSDP& sdp, std::vector<linearizer::LinearTermRef> coeffs,
             std::optional<double> lower, std::optional<double> upper) {
    LinearConstraint row;
    row.level = 1;
    row.coeffs = std::move(coeffs);
    row.lower = lower;
    row.upper = upper;
    sdp.constraints.push_back(std::move(row));
}

double closed_form_unconstrained(const LinearizedSDP& sdp) {
    const auto basis = core::build_basis(sdp.d);
    const std::size_t stride = static_cast<std::size_t>(sdp.d) * sdp.d;
    double total = 0.0;
    for (int i = 0; i < sdp.n; ++i) {
        core::Mat e = core::Mat::Zero(sdp.d, sdp.d);
        for (std::size_t j = 0; j < stride; ++j)
            e += sdp.objective[static_cast<std::size_t>(i) * stride + j] * basis[j];
        Eigen::SelfAdjointEigenSolver<core::Mat> es(e);
        total += es.eigenvalues()(sdp.d - 1);
    }
    return total;
}

LinearizedSDP random_objective_program(util::Rng& rng, int n, int d) {
    auto sdp = bare_program(n, d);
    for (auto& v : sdp.objective) v = rng.normal();
    return sdp;
}

} // namespace

TEST(SdpSolve, UnconstrainedMatchesBlockwiseEigenvalueSum) {
    util::Rng rng(1001);
    for (int d : {2, 3}) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto sdp = random_objective_program(rng, 3, d);
            const auto sol = sdp_solver::solve_sdp(sdp);
            EXPECT_EQ(sol.status, SolveStatus::optimal);
            EXPECT_EQ(sol.iterations, 0);
            EXPECT_NEAR(sol.objective_value, closed_form_unconstrained(sdp), 1e-9);
            EXPECT_NO_THROW(core::validate_assignment(sol.assignment, sdp.n, sdp.d));
        }
    }
}

TEST(SdpSolve, EqualityPinForcesTheState) {
    auto sdp = bare_program(1, 2);
    sdp.objective[1] = 1.0; // maximize Tr(X rho)
    add_row(sdp, {{0, 3, 1.0}}, 0.5, 0.5); // Tr(Z rho) = 1/2
    const auto sol = sdp_solver::solve_sdp(sdp);
    EXPECT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_LE(sol.max_violation, 1e-7);
    EXPECT_NEAR(sol.objective_value, std::sqrt(0.75), 1e-4);
    EXPECT_NEAR(sol.assignment.rho[0](0, 0).real(), 0.75, 1e-3);
}

// Pinning Tr(Z rho) = 1 leaves a single feasible point at the vertex of the
// Bloch ball where no finite multiplier exists; a first order method cannot
// certify optimality there, but it must stay near the vertex.
TEST(SdpSolve, DegeneratePinStaysNearTheVertex) {
    auto sdp = bare_program(1, 2);
    sdp.objective[1] = 1.0;
    add_row(sdp, {{0, 3, 1.0}}, 1.0, 1.0);
    const auto sol = sdp_solver::solve_sdp(sdp);
    EXPECT_NE(sol.status, SolveStatus::infeasible);
    EXPECT_LE(sol.max_violation, 1e-5);
    EXPECT_GE(sol.objective_value, -1e-9);
    EXPECT_LE(sol.objective_value, 0.01);
    EXPECT_GE(sol.assignment.rho[0](0, 0).real(), 0.99);
}

TEST(SdpSolve, ActiveBoundsAreRespected) {
    {
        auto sdp = bare_program(1, 2);
        sdp.objective[3] = 1.0; // maximize Tr(Z rho)
        add_row(sdp, {{0, 3, 1.0}}, std::nullopt, 0.3);
        const auto sol = sdp_solver::solve_sdp(sdp);
        EXPECT_EQ(sol.status, SolveStatus::optimal);
        EXPECT_NEAR(sol.objective_value, 0.3, 1e-5);
    }
    {
        auto sdp = bare_program(1, 2);
        sdp.objective[1] = 1.0; // maximize Tr(X rho)
        add_row(sdp, {{0, 3, 1.0}}, 0.6, std::nullopt); // Tr(Z rho) >= 0.6
        const auto sol = sdp_solver::solve_sdp(sdp);
        EXPECT_EQ(sol.status, SolveStatus::optimal);
        EXPECT_NEAR(sol.objective_value, 0.8, 1e-4); // sqrt(1 - 0.36)
    }
}

TEST(SdpSolve, InfeasibleProgramsAreDetected) {
    {
        auto sdp = bare_program(1, 2);
        sdp.objective[1] = 1.0;
        add_row(sdp, {{0, 3, 1.0}}, 5.0, std::nullopt); // Tr(Z rho) >= 5
        const auto sol = sdp_solver::solve_sdp(sdp);
        EXPECT_EQ(sol.status, SolveStatus::infeasible);
        EXPECT_GT(sol.max_violation, 1e-6);
    }
    {
        auto sdp = bare_program(2, 2);
        sdp.objective[0] = 1.0;
        add_row(sdp, {{0, 3, 1.0}}, 0.9, std::nullopt);
        add_row(sdp, {{0, 3, 1.0}}, std::nullopt, -0.9);
        const auto sol = sdp_solver::solve_sdp(sdp);
        EXPECT_EQ(sol.status, SolveStatus::infeasible);
    }
}

TEST(SdpSolve, RandomConstrainedProgramsSandwichedByDuality) {
    util::Rng rng(2024);
    const auto basis = core::build_basis(2);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(2));
        auto sdp = random_objective_program(rng, n, 2);
        const auto anchor = testutil::random_mixed_assignment(rng, n, 2);
        const auto xa = core::trace_table(anchor, basis);
        for (int c = 0; c < 3; ++c) {
            std::vector<linearizer::LinearTermRef> coeffs;
            double anchored = 0.0;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < 4; ++j) {
                    const double w = rng.normal();
                    coeffs.push_back({i, j, w});
                    anchored += w * xa[static_cast<std::size_t>(i) * 4 + j];
                }
            }
            const double slack = 0.05 + 0.25 * rng.uniform();
            add_row(sdp, std::move(coeffs), anchored - slack, anchored + slack);
        }
        SolveOptions opts;
        opts.max_iters = 200000;
        const auto sol = sdp_solver::solve_sdp(sdp, opts);
        ASSERT_EQ(sol.status, SolveStatus::optimal) << "rep " << rep;
        EXPECT_LE(sol.max_violation, 1e-6);

        // The anchor is feasible, so the optimum cannot be below its value.
        double anchor_value = 0.0;
        for (std::size_t v = 0; v < sdp.objective.size(); ++v)
            anchor_value += sdp.objective[v] * xa[v];
        EXPECT_GE(sol.objective_value, anchor_value - 1e-6);

        // Weak duality with the returned multipliers sandwiches the optimum.
        const double db = sdp_solver::dual_bound(sdp, sol.multipliers_lo, sol.multipliers_up);
        EXPECT_LE(sol.objective_value, db + 1e-5) << "rep " << rep;
        EXPECT_LE(db - sol.objective_value, 1e-3) << "rep " << rep;

        // No random feasible product state may beat the reported optimum.
        util::Rng probe(777 + static_cast<std::uint64_t>(rep));
        for (int t = 0; t < 300; ++t) {
            const auto cand = testutil::random_mixed_assignment(probe, n, 2);
            const auto xc = core::trace_table(cand, basis);
            bool ok = true;
            for (const auto& row : sdp.constraints) {
                const double v = linearizer::constraint_value(row, xc.data(), 4);
                if ((row.lower && v < *row.lower) || (row.upper && v > *row.upper)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            double val = 0.0;
            for (std::size_t v = 0; v < sdp.objective.size(); ++v)
                val += sdp.objective[v] * xc[v];
            EXPECT_LE(val, sol.objective_value + 1e-6);
        }
    }
}

TEST(SdpSolve, QutritBlocksProjectCorrectly) {
    auto sdp = bare_program(1, 3);
    const auto basis = core::build_basis(3);
    // maximize Tr(D rho) for a diagonal D with spread eigenvalues, pinned by
    // an upper bound below the top eigenvalue
    core::Mat dmat = core::Mat::Zero(3, 3);
    dmat(0, 0) = 1.0;
    dmat(1, 1) = 0.25;
    dmat(2, 2) = -0.5;
    // c_j = Tr(D s_j) / 2 makes c.x equal Tr(D rho)
    for (std::size_t j = 0; j < 9; ++j)
        sdp.objective[j] = 0.5 * core::trace_product_real(basis[j], dmat);
    std::vector<linearizer::LinearTermRef> coeffs;
    for (int j = 0; j < 9; ++j)
        coeffs.push_back({0, j, sdp.objective[static_cast<std::size_t>(j)]});
    add_row(sdp, std::move(coeffs), std::nullopt, 0.6);
    const auto sol = sdp_solver::solve_sdp(sdp);
    EXPECT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_NEAR(sol.objective_value, 0.6, 1e-5);
    EXPECT_NO_THROW(core::validate_assignment(sol.assignment, 1, 3));
}

TEST(SdpSolve, DeterministicAcrossRunsAndWorkspaces) {
    util::Rng rng(31337);
    auto sdp = random_objective_program(rng, 2, 2);
    add_row(sdp, {{0, 3, 1.0}, {1, 3, 0.5}}, -0.25, 0.25);
    const auto a = sdp_solver::solve_sdp(sdp);
    const auto b = sdp_solver::solve_sdp(sdp);
    EXPECT_EQ(a.objective_value, b.objective_value);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ(a.status, b.status);

    sdp_solver::Workspace ws;
    util::Rng rng2(555);
    const auto other = random_objective_program(rng2, 3, 2);
    sdp_solver::solve_sdp(other, {}, &ws);
    const auto c = sdp_solver::solve_sdp(sdp, {}, &ws);
    EXPECT_EQ(c.objective_value, a.objective_value);
    EXPECT_EQ(c.iterations, a.iterations);
}

TEST(SdpSolve, MeritIsMonotoneBetweenDualUpdates) {
    auto sdp = bare_program(1, 2);
    sdp.objective[1] = 1.0;
    add_row(sdp, {{0, 3, 1.0}}, 0.6, std::nullopt);
    SolveOptions opts;
    std::vector<double> merit;
    opts.merit_log = &merit;
    const auto sol = sdp_solver::solve_sdp(sdp, opts);
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    ASSERT_GE(merit.size(), 100u);
    for (std::size_t it = 1; it < merit.size(); ++it) {
        if (it % 250 == 1) continue; // multipliers or mu may change at epoch edges
        EXPECT_GE(merit[it], merit[it - 1] - 1e-9) << "iteration " << it;
    }
}

TEST(SdpSolve, TraceStreamIsWellFormedCsv) {
    auto sdp = bare_program(1, 2);
    sdp.objective[3] = 1.0;
    add_row(sdp, {{0, 3, 1.0}}, std::nullopt, 0.25);
    SolveOptions opts;
    std::ostringstream trace;
    opts.trace = &trace;
    const auto sol = sdp_solver::solve_sdp(sdp, opts);
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    std::istringstream in(trace.str());
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, "iteration,objective,violation");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2) << line;
        ++rows;
    }
    EXPECT_EQ(rows, static_cast<std::size_t>(sol.iterations) + 1);
}

TEST(SdpSolve, IterationCapReturnsMaxIterations) {
    auto sdp = bare_program(1, 2);
    sdp.objective[1] = 1.0;
    add_row(sdp, {{0, 3, 1.0}}, 1.0, 1.0);
    SolveOptions opts;
    opts.max_iters = 5;
    const auto sol = sdp_solver::solve_sdp(sdp, opts);
    EXPECT_EQ(sol.status, SolveStatus::max_iterations);
    EXPECT_EQ(sol.iterations, 5);
    EXPECT_NO_THROW(core::validate_assignment(sol.assignment, 1, 2));
}

TEST(SdpSolve, SolutionInternallyConsistent) {
    util::Rng rng(99);
    auto sdp = random_objective_program(rng, 2, 2);
    add_row(sdp, {{0, 1, 1.0}, {1, 2, -0.5}}, -0.4, 0.4);
    const auto sol = sdp_solver::solve_sdp(sdp);
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    const auto basis = core::build_basis(2);
    const auto x = core::trace_table(sol.assignment, basis);
    double obj = 0.0;
    for (std::size_t v = 0; v < x.size(); ++v) obj += sdp.objective[v] * x[v];
    EXPECT_NEAR(obj, sol.objective_value, 1e-9);
}
