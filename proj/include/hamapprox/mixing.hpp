#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "core.hpp"
#include "exact.hpp"

namespace hamapprox::mixing {

using core::HamiltonianInstance;
using core::Mat;
using core::ProductAssignment;
using core::ValidationError;
using core::Vec;

struct SchmidtCut {
    std::vector<double> coefficients; // descending, squared sums to 1
    std::vector<Vec> left;            // single-qudit states
    std::vector<Vec> right;           // remainder states
};

// Schmidt decomposition of a state on qudits (cut, ..., last) across the
// bipartition first qudit vs rest. The first qudit is the most significant
// digit of the index.
inline SchmidtCut schmidt_decompose(const Vec& tail, int d) {
    if (tail.size() % d != 0 || tail.size() < d * 2)
        throw ValidationError("schmidt_decompose: state must cover at least two qudits");
    const Eigen::Index rest = tail.size() / d;
    Mat m(d, rest);
    for (int a = 0; a < d; ++a)
        for (Eigen::Index r = 0; r < rest; ++r) m(a, r) = tail(a * rest + r);
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SchmidtCut cut;
    const auto& sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) <= 1e-12) break;
        Vec w = svd.matrixU().col(i);
        Vec v = svd.matrixV().col(i).conjugate();
        // canonical phase on the single-qudit factor, compensated on the rest
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            const double a = std::abs(w(j));
            if (a > 1e-12) {
                const auto factor = std::conj(w(j)) / a;
                w *= factor;
                v *= std::conj(factor);
                break;
            }
        }
        cut.coefficients.push_back(sv(i));
        cut.left.push_back(std::move(w));
        cut.right.push_back(std::move(v));
    }
    return cut;
}

struct MixingStep {
    std::vector<double> p;
    std::vector<Vec> head;
    std::vector<Vec> tail;
};

// One step of the recursive Schmidt decomposition: the ensemble
// {(a_i^2, w_i (x) v_i)} whose mixture loses at most a factor d on any
// projector crossing the first cut.
inline MixingStep mixing_step(const Vec& psi, int d) {
    const SchmidtCut cut = schmidt_decompose(psi, d);
    MixingStep step;
    for (std::size_t i = 0; i < cut.coefficients.size(); ++i) {
        step.p.push_back(cut.coefficients[i] * cut.coefficients[i]);
        step.head.push_back(cut.left[i]);
        step.tail.push_back(cut.right[i]);
    }
    return step;
}

struct ProductEnsemble {
    std::vector<double> p;
    std::vector<std::vector<Vec>> members; // n single-qudit states each
    double truncated_mass = 0.0;
    bool truncated = false;
};

// Reorder qudits of an n-qudit state: output site p carries input site
// ordering[p].
inline Vec permute_state(const Vec& psi, int n, int d, const std::vector<int>& ordering) {
    const auto dim = core::ipow(d, n);
    if (psi.size() != dim) throw ValidationError("permute_state: wrong dimension");
    Vec out(dim);
    std::vector<int> digits(static_cast<std::size_t>(n));
    for (std::int64_t x = 0; x < dim; ++x) {
        core::detail::site_digits(x, n, d, digits.data());
        std::int64_t src = 0;
        std::vector<int> sdig(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p) sdig[static_cast<std::size_t>(ordering[static_cast<std::size_t>(p)])] = digits[static_cast<std::size_t>(p)];
        for (int p = 0; p < n; ++p) src = src * d + sdig[static_cast<std::size_t>(p)];
        out(x) = psi(src);
    }
    return out;
}

// Full recursive Schmidt decomposition of |psi><psi| into a product-state
// ensemble. Branches are processed breadth-first cut by cut; if the member
// count would exceed max_members the lowest-probability branches are dropped
// and the remaining mass renormalized.
inline ProductEnsemble rsd_mixture(const Vec& psi, int n, int d,
                                   std::size_t max_members = 4096,
                                   const std::vector<int>& ordering = {}) {
    const auto dim = core::ipow(d, n);
    if (psi.size() != dim) throw ValidationError("rsd_mixture: state has wrong dimension");
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw ValidationError("rsd_mixture: state is not normalized");
    if (max_members == 0) throw ValidationError("rsd_mixture: max_members must be positive");
    Vec work = psi;
    std::vector<int> order = ordering;
    if (!order.empty()) {
        if (static_cast<int>(order.size()) != n)
            throw ValidationError("rsd_mixture: ordering must be a permutation of all qudits");
        std::vector<int> check = order;
        std::sort(check.begin(), check.end());
        for (int i = 0; i < n; ++i)
            if (check[static_cast<std::size_t>(i)] != i)
                throw ValidationError("rsd_mixture: ordering must be a permutation of all qudits");
        work = permute_state(psi, n, d, order);
    }

    struct Branch {
        double p;
        std::vector<Vec> prefix;
        Vec tail;
    };
    std::vector<Branch> frontier;
    frontier.push_back({1.0, {}, work});
    ProductEnsemble ens;

    for (int cutpos = 1; cutpos < n; ++cutpos) {
        std::vector<Branch> next;
        for (auto& br : frontier) {
            const MixingStep step = mixing_step(br.tail, d);
            for (std::size_t i = 0; i < step.p.size(); ++i) {
                const double p = br.p * step.p[i];
                if (p < 1e-12) {
                    ens.truncated_mass += p;
                    continue;
                }
                Branch child;
                child.p = p;
                child.prefix = br.prefix;
                child.prefix.push_back(step.head[i]);
                child.tail = step.tail[i];
                next.push_back(std::move(child));
            }
        }
        double next_mass = 0.0;
        for (const auto& br : next) next_mass += br.p;
        if (next.size() > max_members) {
            std::vector<std::size_t> idx(next.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return next[a].p > next[b].p; });
            idx.resize(max_members);
            std::sort(idx.begin(), idx.end());
            std::vector<Branch> kept;
            kept.reserve(max_members);
            double kept_mass = 0.0;
            for (std::size_t i : idx) {
                kept_mass += next[i].p;
                kept.push_back(std::move(next[i]));
            }
            ens.truncated_mass += next_mass - kept_mass;
            for (auto& br : kept) br.p /= kept_mass;
            next = std::move(kept);
        } else if (next_mass > 0.0) {
            // renormalize away pruned mass so probabilities stay a distribution
            for (auto& br : next) br.p /= next_mass;
        }
        frontier = std::move(next);
    }

    for (auto& br : frontier) {
        std::vector<Vec> member = std::move(br.prefix);
        Vec last = br.tail;
        member.push_back(core::canonical_phase(last / last.norm()));
        if (!order.empty()) {
            std::vector<Vec> unpermuted(member.size());
            for (int p = 0; p < n; ++p)
                unpermuted[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = member[static_cast<std::size_t>(p)];
            member = std::move(unpermuted);
        }
        ens.p.push_back(br.p);
        ens.members.push_back(std::move(member));
    }
    ens.truncated = ens.truncated_mass > 1e-6;
    return ens;
}

struct BestMember {
    std::size_t index = 0;
    double value = 0.0;
    ProductAssignment assignment;
};

inline BestMember best_product_member(const HamiltonianInstance& inst,
                                      const ProductEnsemble& ens) {
    if (ens.members.empty()) throw ValidationError("best_product_member: empty ensemble");
    BestMember best;
    best.value = -1.0;
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
        ProductAssignment a = core::pure_assignment(ens.members[i]);
        const double v = core::assignment_value(inst, a);
        if (v > best.value) {
            best.value = v;
            best.index = i;
            best.assignment = std::move(a);
        }
    }
    return best;
}

// Round a mixed product assignment to a pure one without losing value: at
// each site, condition on the eigenvector of the local state that maximizes
// the conditional value, sweeping sites in order.
inline ProductAssignment purify_by_conditional_expectations(const HamiltonianInstance& inst,
                                                            const ProductAssignment& a) {
    core::validate_assignment(a, inst.n, inst.d);
    ProductAssignment cur = a;
    for (int site = 0; site < inst.n; ++site) {
        const Mat m = exact_oracle::local_effective_hamiltonian(inst, cur, site);
        Eigen::SelfAdjointEigenSolver<Mat> es(cur.rho[static_cast<std::size_t>(site)]);
        Vec best;
        double best_score = 0.0;
        for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
            if (es.eigenvalues()(j) <= 1e-12) continue;
            Vec cand = core::canonical_phase(es.eigenvectors().col(j));
            const double score = (cand.adjoint() * m * cand)(0).real();
            if (best.size() == 0 || score > best_score + 1e-12 ||
                (std::abs(score - best_score) <= 1e-12 && core::lex_compare(cand, best) > 0)) {
                best = cand;
                best_score = score;
            }
        }
        if (best.size() == 0) best = exact_oracle::top_eigenvector(cur.rho[static_cast<std::size_t>(site)]);
        cur.rho[static_cast<std::size_t>(site)] = best * best.adjoint();
    }
    return cur;
}

} // namespace hamapprox::mixing
