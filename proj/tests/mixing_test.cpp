#include <gtest/gtest.h>

#include "hamapprox/exact.hpp"
#include "hamapprox/mixing.hpp"
#include "test_util.hpp"

using namespace hamapprox;
using core::cxd;
using core::Mat;
using core::Vec;

namespace {

Vec epr_state() {
    Vec v = Vec::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    return v;
}

core::HamiltonianInstance epr_chain(int n) {
    core::HamiltonianInstance inst;
    inst.n = n;
    inst.d = 2;
    inst.k = 2;
    const Vec v = epr_state();
    for (int i = 0; i + 1 < n; ++i) {
        core::LocalTerm t;
        t.support = {i, i + 1};
        t.matrix = v * v.adjoint();
        inst.terms.push_back(t);
    }
    return inst;
}

Mat random_projector(testutil::Rng& rng, int dim, int rank) {
    Mat g = testutil::random_ginibre(rng, dim, rank);
    const Eigen::HouseholderQR<Mat> qr(g);
    const Mat q = qr.householderQ() * Mat::Identity(dim, rank);
    return q * q.adjoint();
}

Mat member_density(const std::vector<Vec>& member) {
    Mat rho = Mat::Ones(1, 1);
    for (const auto& v : member) rho = core::kron(rho, (v * v.adjoint()).eval());
    return rho;
}

} // namespace

TEST(Schmidt, EprDecomposition) {
    const auto cut = mixing::schmidt_decompose(epr_state(), 2);
    ASSERT_EQ(cut.coefficients.size(), 2u);
    EXPECT_NEAR(cut.coefficients[0], 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(cut.coefficients[1], 1.0 / std::sqrt(2.0), 1e-12);
    // reconstruction
    Vec back = Vec::Zero(4);
    for (std::size_t i = 0; i < cut.coefficients.size(); ++i) {
        Vec prod(4);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) prod(a * 2 + b) = cut.left[i](a) * cut.right[i](b);
        back += cut.coefficients[i] * prod;
    }
    EXPECT_LT((back - epr_state()).norm(), 1e-12);
}

TEST(Schmidt, GhzRightFactors) {
    Vec ghz = Vec::Zero(8);
    ghz(0) = ghz(7) = 1.0 / std::sqrt(2.0);
    const auto cut = mixing::schmidt_decompose(ghz, 2);
    ASSERT_EQ(cut.coefficients.size(), 2u);
    for (const auto& r : cut.right) {
        EXPECT_NEAR(r.norm(), 1.0, 1e-12);
        // right factors are |00> and |11>
        EXPECT_TRUE(std::abs(r(0)) > 1 - 1e-9 || std::abs(r(3)) > 1 - 1e-9);
    }
}

TEST(Schmidt, RandomStateReconstructionAndOrthonormality) {
    testutil::Rng rng(211);
    for (int n = 2; n <= 4; ++n) {
        const auto dim = core::ipow(2, n);
        Vec psi = testutil::random_pure(rng, static_cast<int>(dim));
        const auto cut = mixing::schmidt_decompose(psi, 2);
        double mass = 0.0;
        Vec back = Vec::Zero(dim);
        for (std::size_t i = 0; i < cut.coefficients.size(); ++i) {
            mass += cut.coefficients[i] * cut.coefficients[i];
            for (int a = 0; a < 2; ++a)
                back.segment(a * (dim / 2), dim / 2) += cut.coefficients[i] * cut.left[i](a) * cut.right[i];
            for (std::size_t j = i + 1; j < cut.coefficients.size(); ++j) {
                EXPECT_LT(std::abs(cut.left[i].dot(cut.left[j])), 1e-10);
                EXPECT_LT(std::abs(cut.right[i].dot(cut.right[j])), 1e-10);
            }
        }
        EXPECT_NEAR(mass, 1.0, 1e-10);
        EXPECT_LT((back - psi).norm(), 1e-10);
    }
}

TEST(MixingStep, LosesAtMostFactorDOnCrossingProjectors) {
    testutil::Rng rng(223);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec psi = testutil::random_pure(rng, 4);
        const auto step = mixing::mixing_step(psi, 2);
        Mat mix = Mat::Zero(4, 4);
        for (std::size_t i = 0; i < step.p.size(); ++i) {
            Vec prod(4);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) prod(a * 2 + b) = step.head[i](a) * step.tail[i](b);
            mix += step.p[i] * (prod * prod.adjoint());
        }
        const Mat proj = random_projector(rng, 4, 1 + static_cast<int>(rng.below(3)));
        const double pure_val = (psi.adjoint() * proj * psi)(0).real();
        const double mix_val = core::trace_product_real(proj, mix);
        EXPECT_GE(mix_val, 0.5 * pure_val - 1e-10);
    }
}

TEST(MixingStep, EqualityOnNonCrossingProjectors) {
    testutil::Rng rng(227);
    const Vec psi = testutil::random_pure(rng, 4);
    const auto step = mixing::mixing_step(psi, 2);
    const Mat p_tail = random_projector(rng, 2, 1);
    const Mat proj = core::kron(Mat::Identity(2, 2), p_tail);
    double mix_val = 0.0;
    for (std::size_t i = 0; i < step.p.size(); ++i)
        mix_val += step.p[i] * (step.tail[i].adjoint() * p_tail * step.tail[i])(0).real();
    EXPECT_NEAR(mix_val, (psi.adjoint() * proj * psi)(0).real(), 1e-10);
}

TEST(Rsd, EnsembleIsValidAndOrthogonal) {
    testutil::Rng rng(229);
    const Vec psi = testutil::random_pure(rng, 16);
    const auto ens = mixing::rsd_mixture(psi, 4, 2);
    ASSERT_FALSE(ens.members.empty());
    EXPECT_LE(ens.members.size(), 8u);
    double mass = 0.0;
    for (double p : ens.p) {
        EXPECT_GT(p, 0.0);
        mass += p;
    }
    EXPECT_NEAR(mass, 1.0, 1e-9);
    EXPECT_FALSE(ens.truncated);
    for (const auto& member : ens.members) {
        ASSERT_EQ(member.size(), 4u);
        for (const auto& v : member) EXPECT_NEAR(v.norm(), 1.0, 1e-10);
    }
    for (std::size_t a = 0; a < ens.members.size(); ++a) {
        for (std::size_t b = a + 1; b < ens.members.size(); ++b) {
            cxd overlap = 1.0;
            for (std::size_t s = 0; s < 4; ++s)
                overlap *= ens.members[a][s].dot(ens.members[b][s]);
            EXPECT_LT(std::abs(overlap), 1e-8);
        }
    }
}

TEST(Rsd, MixtureDominatesLocalProjectors) {
    testutil::Rng rng(233);
    for (int rep = 0; rep < 10; ++rep) {
        const Vec psi = testutil::random_pure(rng, 16);
        const auto ens = mixing::rsd_mixture(psi, 4, 2);
        core::HamiltonianInstance inst;
        inst.n = 4;
        inst.d = 2;
        inst.k = 2;
        core::LocalTerm t;
        const int lo = static_cast<int>(rng.below(3));
        t.support = {lo, lo + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(3 - lo)))};
        t.matrix = random_projector(rng, 4, 1 + static_cast<int>(rng.below(3)));
        inst.terms.push_back(t);
        const double pure_val = core::global_value(inst, psi);
        double mix_val = 0.0;
        for (std::size_t i = 0; i < ens.members.size(); ++i)
            mix_val += ens.p[i] * core::assignment_value(inst, core::pure_assignment(ens.members[i]));
        EXPECT_GE(mix_val, 0.5 * pure_val - 1e-9) << "support " << t.support[0] << "," << t.support[1];
    }
}

TEST(Rsd, BestMemberOfEprPairHitsHalf) {
    const auto inst = epr_chain(2);
    const auto top = exact_oracle::exact_opt(inst);
    const auto ens = mixing::rsd_mixture(top.state, 2, 2);
    const auto best = mixing::best_product_member(inst, ens);
    EXPECT_NEAR(best.value, 0.5, 1e-10);
    EXPECT_NEAR(top.opt, 1.0, 1e-12);
}

TEST(Rsd, BestMemberAchievesMixingGuarantee) {
    for (int n = 3; n <= 5; ++n) {
        const auto inst = epr_chain(n);
        const auto top = exact_oracle::exact_opt(inst);
        const auto ens = mixing::rsd_mixture(top.state, n, 2);
        const auto best = mixing::best_product_member(inst, ens);
        EXPECT_GE(best.value, top.opt / 2.0 - 1e-9) << "n=" << n;
        EXPECT_LE(best.value, top.opt + 1e-9);
    }
}

TEST(Rsd, RandomInstancesSatisfyGuarantee) {
    testutil::Rng rng(239);
    for (int rep = 0; rep < 5; ++rep) {
        const auto inst = testutil::random_instance(rng, 4, 2, 2, 5);
        const auto top = exact_oracle::exact_opt(inst);
        const auto ens = mixing::rsd_mixture(top.state, 4, 2);
        const auto best = mixing::best_product_member(inst, ens);
        EXPECT_GE(best.value, top.opt / 2.0 - 1e-9);
    }
}

TEST(Rsd, TruncationRenormalizes) {
    testutil::Rng rng(241);
    const Vec psi = testutil::random_pure(rng, 16);
    const auto ens = mixing::rsd_mixture(psi, 4, 2, 3);
    EXPECT_LE(ens.members.size(), 3u);
    double mass = 0.0;
    for (double p : ens.p) mass += p;
    EXPECT_NEAR(mass, 1.0, 1e-9);
    EXPECT_TRUE(ens.truncated);
    EXPECT_GT(ens.truncated_mass, 1e-6);
}

TEST(Rsd, OrderingPermutesDecomposition) {
    testutil::Rng rng(251);
    const Vec psi = testutil::random_pure(rng, 16);
    const std::vector<int> order = {3, 1, 0, 2};
    const auto ens = mixing::rsd_mixture(psi, 4, 2, 4096, order);
    double mass = 0.0;
    for (double p : ens.p) mass += p;
    EXPECT_NEAR(mass, 1.0, 1e-9);
    // the mixture still reproduces the state's local marginals on average
    const auto inst = epr_chain(4);
    double mix_val = 0.0;
    for (std::size_t i = 0; i < ens.members.size(); ++i)
        mix_val += ens.p[i] * core::assignment_value(inst, core::pure_assignment(ens.members[i]));
    EXPECT_GE(mix_val, core::global_value(inst, psi) / 2.0 - 1e-9);
    EXPECT_THROW(mixing::rsd_mixture(psi, 4, 2, 4096, {0, 1, 2, 2}), core::ValidationError);
}

TEST(BestMember, TieBreaksToLowestIndex) {
    const auto inst = epr_chain(2);
    mixing::ProductEnsemble ens;
    Vec zero = Vec::Zero(2);
    zero(0) = 1.0;
    Vec one = Vec::Zero(2);
    one(1) = 1.0;
    ens.p = {0.5, 0.5};
    ens.members = {{zero, zero}, {one, one}}; // both have value 1/2
    const auto best = mixing::best_product_member(inst, ens);
    EXPECT_EQ(best.index, 0u);
}

TEST(Purify, NeverLosesValueAndYieldsPureStates) {
    testutil::Rng rng(257);
    for (int rep = 0; rep < 6; ++rep) {
        const auto inst = testutil::random_instance(rng, 4, 2, 2, 5);
        const auto a = testutil::random_mixed_assignment(rng, 4, 2);
        const double before = core::assignment_value(inst, a);
        const auto pure = mixing::purify_by_conditional_expectations(inst, a);
        const double after = core::assignment_value(inst, pure);
        EXPECT_GE(after, before - 1e-9);
        for (const auto& rho : pure.rho)
            EXPECT_NEAR((rho * rho).trace().real(), 1.0, 1e-9);
    }
}

TEST(Purify, QuditMixedAssignment) {
    testutil::Rng rng(263);
    const auto inst = testutil::random_instance(rng, 3, 3, 2, 3);
    const auto a = testutil::random_mixed_assignment(rng, 3, 3);
    const double before = core::assignment_value(inst, a);
    const auto pure = mixing::purify_by_conditional_expectations(inst, a);
    EXPECT_GE(core::assignment_value(inst, pure), before - 1e-9);
}
