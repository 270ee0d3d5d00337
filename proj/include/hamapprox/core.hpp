#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hamapprox::core {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

inline bool is_hermitian(const Mat& m, double tol = 1e-12) {
    return (m - m.adjoint()).norm() <= tol * std::max(1.0, m.norm());
}

inline double min_eigenvalue(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double operator_norm(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double trace_product_real(const Mat& a, const Mat& b) {
    return a.cwiseProduct(b.transpose()).sum().real();
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Mat kron_list(const std::vector<Mat>& factors) {
    if (factors.empty()) return Mat::Identity(1, 1);
    Mat out = factors[0];
    for (std::size_t i = 1; i < factors.size(); ++i) out = kron(out, factors[i]);
    return out;
}

// Multiply a vector by conj(phase of its first nonzero entry) so that entry
// becomes real positive. Zero vectors are returned untouched.
inline Vec canonical_phase(const Vec& v, double tol = 1e-12) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > tol) return v * (std::conj(v(i)) / a);
    }
    return v;
}

// Lexicographic comparison of complex vectors by (re, im) entry pairs with a
// small slop so that ties caused by round-off are stable.
inline int lex_compare(const Vec& a, const Vec& b, double tol = 1e-12) {
    for (Eigen::Index i = 0; i < std::min(a.size(), b.size()); ++i) {
        if (a(i).real() < b(i).real() - tol) return -1;
        if (a(i).real() > b(i).real() + tol) return 1;
        if (a(i).imag() < b(i).imag() - tol) return -1;
        if (a(i).imag() > b(i).imag() + tol) return 1;
    }
    return 0;
}

// Orthogonal Hermitian basis for d x d matrices with Tr(s_i s_j) = 2 delta_ij.
// Element 0 is sqrt(2/d) I, followed for each index pair p < q (lexicographic)
// by the symmetric and antisymmetric off-diagonal elements, then the d - 1
// diagonal elements. For d = 2 this is exactly [I, X, Y, Z].
struct HermitianBasis {
    int d = 0;
    std::vector<Mat> elements;

    int size() const { return static_cast<int>(elements.size()); }
    const Mat& operator[](int j) const { return elements[static_cast<std::size_t>(j)]; }
};

inline HermitianBasis build_basis(int d) {
    if (d < 2) throw ValidationError("basis dimension must be at least 2");
    HermitianBasis b;
    b.d = d;
    b.elements.reserve(static_cast<std::size_t>(d) * d);
    b.elements.push_back(std::sqrt(2.0 / d) * Mat::Identity(d, d));
    for (int p = 0; p < d; ++p) {
        for (int q = p + 1; q < d; ++q) {
            Mat x = Mat::Zero(d, d);
            x(p, q) = 1.0;
            x(q, p) = 1.0;
            b.elements.push_back(x);
            Mat y = Mat::Zero(d, d);
            y(p, q) = cxd(0.0, -1.0);
            y(q, p) = cxd(0.0, 1.0);
            b.elements.push_back(y);
        }
    }
    for (int l = 1; l < d; ++l) {
        Mat h = Mat::Zero(d, d);
        const double scale = std::sqrt(2.0 / (static_cast<double>(l) * (l + 1)));
        for (int m = 0; m < l; ++m) h(m, m) = scale;
        h(l, l) = -scale * l;
        b.elements.push_back(h);
    }
    return b;
}

struct LocalTerm {
    std::vector<int> support; // 0-indexed sites, strictly increasing
    Mat matrix;               // d^k x d^k, Hermitian, PSD, norm <= 1
};

struct HamiltonianInstance {
    int n = 0;
    int d = 2;
    int k = 1;
    std::vector<LocalTerm> terms;
};

inline void validate_instance(const HamiltonianInstance& inst) {
    if (inst.n < 1) throw ValidationError("instance requires n >= 1");
    if (inst.d < 2) throw ValidationError("instance requires d >= 2");
    if (inst.k < 1 || inst.k > inst.n) throw ValidationError("instance requires 1 <= k <= n");
    const auto dim = ipow(inst.d, inst.k);
    std::vector<std::vector<int>> seen;
    for (std::size_t t = 0; t < inst.terms.size(); ++t) {
        const auto& term = inst.terms[t];
        const std::string where = "term " + std::to_string(t);
        if (static_cast<int>(term.support.size()) != inst.k)
            throw ValidationError(where + ": support size must equal k");
        for (std::size_t i = 0; i < term.support.size(); ++i) {
            if (term.support[i] < 0 || term.support[i] >= inst.n)
                throw ValidationError(where + ": support site out of range");
            if (i > 0 && term.support[i] <= term.support[i - 1])
                throw ValidationError(where + ": support must be strictly increasing");
        }
        if (term.matrix.rows() != dim || term.matrix.cols() != dim)
            throw ValidationError(where + ": matrix must be d^k x d^k");
        if (!is_hermitian(term.matrix, 1e-12))
            throw ValidationError(where + ": matrix must be Hermitian");
        if (min_eigenvalue(term.matrix) < -1e-10)
            throw ValidationError(where + ": matrix must be positive semidefinite");
        if (operator_norm(term.matrix) > 1.0 + 1e-10)
            throw ValidationError(where + ": matrix norm must be at most 1");
        seen.push_back(term.support);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        throw ValidationError("duplicate term supports are not allowed");
}

// Coefficients r of a k-local term in the tensor product basis,
// M = sum_j r[j_1..j_k] s_{j_k} (x) ... (x) s_{j_1}.
// Flat storage index is sum_l j_l (d^2)^(l-1), so j_1 varies fastest. Level l
// pairs with support slot k + 1 - l: level 1 acts on the largest site of the
// support, level k on the smallest.
struct CoeffTensor {
    int d = 0;
    int k = 0;
    std::vector<double> r;

    std::size_t index(const int* j) const {
        const std::size_t dd = static_cast<std::size_t>(d) * d;
        std::size_t idx = 0;
        std::size_t stride = 1;
        for (int l = 0; l < k; ++l) {
            idx += static_cast<std::size_t>(j[l]) * stride;
            stride *= dd;
        }
        return idx;
    }

    double norm2() const {
        double s = 0.0;
        for (double v : r) s += v * v;
        return std::sqrt(s);
    }
};

// Site of an instance term acted on by decomposition level l (1-based).
inline int level_site(const std::vector<int>& support, int l) {
    return support[support.size() - static_cast<std::size_t>(l)];
}

inline CoeffTensor decompose_term(const Mat& matrix, const HermitianBasis& basis, int k) {
    const int d = basis.d;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    const auto dim = ipow(d, k);
    if (matrix.rows() != dim || matrix.cols() != dim)
        throw ValidationError("decompose_term: matrix must be d^k x d^k");
    CoeffTensor c;
    c.d = d;
    c.k = k;
    std::size_t total = 1;
    for (int l = 0; l < k; ++l) total *= dd;
    c.r.assign(total, 0.0);
    std::vector<int> j(static_cast<std::size_t>(k), 0); // j[l-1] = j_l
    std::vector<int> xd(static_cast<std::size_t>(k), 0), yd(static_cast<std::size_t>(k), 0);
    const double scale = 1.0 / static_cast<double>(ipow(2, k));
    for (std::size_t flat = 0; flat < total; ++flat) {
        // Tr(M K) with K = s_{j_k} (x) ... (x) s_{j_1}; tensor slot p holds
        // s_{j_{k+1-p}} with slot 1 the most significant digit.
        cxd tr = 0.0;
        for (std::int64_t x = 0; x < dim; ++x) {
            std::int64_t rem = x;
            for (int p = k - 1; p >= 0; --p) { xd[static_cast<std::size_t>(p)] = static_cast<int>(rem % d); rem /= d; }
            for (std::int64_t y = 0; y < dim; ++y) {
                const cxd mxy = matrix(x, y);
                if (mxy == 0.0) continue;
                rem = y;
                for (int p = k - 1; p >= 0; --p) { yd[static_cast<std::size_t>(p)] = static_cast<int>(rem % d); rem /= d; }
                cxd kyx = 1.0;
                for (int p = 0; p < k; ++p) {
                    const int jl = j[static_cast<std::size_t>(k - 1 - p)];
                    kyx *= basis[jl](yd[static_cast<std::size_t>(p)], xd[static_cast<std::size_t>(p)]);
                    if (kyx == 0.0) break;
                }
                tr += mxy * kyx;
            }
        }
        c.r[flat] = tr.real() * scale;
        std::size_t f = flat + 1;
        for (int l = 0; l < k; ++l) { j[static_cast<std::size_t>(l)] = static_cast<int>(f % dd); f /= dd; }
    }
    return c;
}

inline Mat reconstruct_term(const CoeffTensor& c, const HermitianBasis& basis) {
    const int d = basis.d;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    const auto dim = ipow(d, c.k);
    Mat out = Mat::Zero(dim, dim);
    std::vector<int> j(static_cast<std::size_t>(c.k), 0);
    for (std::size_t flat = 0; flat < c.r.size(); ++flat) {
        if (c.r[flat] != 0.0) {
            std::vector<Mat> slots;
            slots.reserve(static_cast<std::size_t>(c.k));
            for (int p = 0; p < c.k; ++p)
                slots.push_back(basis[j[static_cast<std::size_t>(c.k - 1 - p)]]);
            out += c.r[flat] * kron_list(slots);
        }
        std::size_t f = flat + 1;
        for (int l = 0; l < c.k; ++l) { j[static_cast<std::size_t>(l)] = static_cast<int>(f % dd); f /= dd; }
    }
    return out;
}

struct ProductAssignment {
    std::vector<Mat> rho; // one d x d density matrix per qudit
};

inline void validate_assignment(const ProductAssignment& a, int n, int d, double tol = 1e-9) {
    if (static_cast<int>(a.rho.size()) != n)
        throw ValidationError("assignment must provide one state per qudit");
    for (int i = 0; i < n; ++i) {
        const Mat& m = a.rho[static_cast<std::size_t>(i)];
        if (m.rows() != d || m.cols() != d)
            throw ValidationError("assignment state " + std::to_string(i) + " has wrong dimension");
        if (!is_hermitian(m, tol))
            throw ValidationError("assignment state " + std::to_string(i) + " is not Hermitian");
        if (std::abs(m.trace().real() - 1.0) > tol || std::abs(m.trace().imag()) > tol)
            throw ValidationError("assignment state " + std::to_string(i) + " does not have unit trace");
        if (min_eigenvalue(m) < -tol)
            throw ValidationError("assignment state " + std::to_string(i) + " is not positive semidefinite");
    }
}

inline ProductAssignment pure_assignment(const std::vector<Vec>& states) {
    ProductAssignment a;
    a.rho.reserve(states.size());
    for (const auto& v : states) a.rho.push_back(v * v.adjoint());
    return a;
}

inline double assignment_value(const HamiltonianInstance& inst, const ProductAssignment& a) {
    validate_assignment(a, inst.n, inst.d);
    double total = 0.0;
    for (const auto& term : inst.terms) {
        std::vector<Mat> factors;
        factors.reserve(term.support.size());
        for (int s : term.support) factors.push_back(a.rho[static_cast<std::size_t>(s)]);
        total += trace_product_real(term.matrix, kron_list(factors));
    }
    return total;
}

// Trace table X[i][j] = Tr(s_j rho_i), stored site-major with row stride d^2.
inline std::vector<double> trace_table(const ProductAssignment& a, const HermitianBasis& basis) {
    const std::size_t dd = static_cast<std::size_t>(basis.d) * basis.d;
    std::vector<double> x(a.rho.size() * dd, 0.0);
    for (std::size_t i = 0; i < a.rho.size(); ++i)
        for (std::size_t j = 0; j < dd; ++j)
            x[i * dd + j] = trace_product_real(basis[static_cast<int>(j)], a.rho[i]);
    return x;
}

inline Mat state_from_traces(const double* xi, const HermitianBasis& basis) {
    const int d = basis.d;
    Mat rho = Mat::Zero(d, d);
    for (int j = 0; j < d * d; ++j) rho += 0.5 * xi[j] * basis[j];
    return rho;
}

namespace detail {

inline void site_digits(std::int64_t x, int n, int d, int* out) {
    for (int i = n - 1; i >= 0; --i) { out[i] = static_cast<int>(x % d); x /= d; }
}

// Strides of each site in the global big-endian index (site 0 most significant).
inline std::vector<std::int64_t> site_strides(int n, int d) {
    std::vector<std::int64_t> s(static_cast<std::size_t>(n));
    std::int64_t cur = 1;
    for (int i = n - 1; i >= 0; --i) { s[static_cast<std::size_t>(i)] = cur; cur *= d; }
    return s;
}

// Enumerates global indices that project to local index `local` on `support`
// while the complement runs over all configurations. Calls fn(global_base)
// for each complement configuration, where global_base already contains the
// complement contribution; add local offsets on top.
template <typename Fn>
void for_each_complement(int n, int d, const std::vector<int>& support,
                         const std::vector<std::int64_t>& strides, Fn&& fn) {
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (std::find(support.begin(), support.end(), i) == support.end()) rest.push_back(i);
    const std::size_t m = rest.size();
    std::vector<int> conf(m, 0);
    while (true) {
        std::int64_t base = 0;
        for (std::size_t i = 0; i < m; ++i)
            base += static_cast<std::int64_t>(conf[i]) * strides[static_cast<std::size_t>(rest[i])];
        fn(base);
        std::size_t pos = m;
        while (pos > 0) {
            if (++conf[pos - 1] < d) break;
            conf[pos - 1] = 0;
            --pos;
        }
        if (pos == 0) break;
    }
}

} // namespace detail

// out += term applied to psi, treating the term as an operator on the full
// n-qudit space.
inline void apply_term(const HamiltonianInstance& inst, const LocalTerm& term,
                       const Vec& psi, Vec& out) {
    const int k = static_cast<int>(term.support.size());
    const auto strides = detail::site_strides(inst.n, inst.d);
    const auto dim = ipow(inst.d, k);
    std::vector<std::int64_t> local_offsets(static_cast<std::size_t>(dim));
    std::vector<int> digits(static_cast<std::size_t>(k));
    for (std::int64_t x = 0; x < dim; ++x) {
        detail::site_digits(x, k, inst.d, digits.data());
        std::int64_t off = 0;
        for (int p = 0; p < k; ++p)
            off += static_cast<std::int64_t>(digits[static_cast<std::size_t>(p)]) *
                   strides[static_cast<std::size_t>(term.support[static_cast<std::size_t>(p)])];
        local_offsets[static_cast<std::size_t>(x)] = off;
    }
    detail::for_each_complement(inst.n, inst.d, term.support, strides, [&](std::int64_t base) {
        for (std::int64_t r = 0; r < dim; ++r) {
            cxd acc = 0.0;
            for (std::int64_t c = 0; c < dim; ++c) {
                const cxd m = term.matrix(r, c);
                if (m != 0.0) acc += m * psi(base + local_offsets[static_cast<std::size_t>(c)]);
            }
            if (acc != 0.0) out(base + local_offsets[static_cast<std::size_t>(r)]) += acc;
        }
    });
}

inline Mat partial_trace_to_support(const Mat& rho, int n, int d,
                                    const std::vector<int>& support) {
    const int k = static_cast<int>(support.size());
    const auto strides = detail::site_strides(n, d);
    const auto dim = ipow(d, k);
    std::vector<std::int64_t> local_offsets(static_cast<std::size_t>(dim));
    std::vector<int> digits(static_cast<std::size_t>(k));
    for (std::int64_t x = 0; x < dim; ++x) {
        detail::site_digits(x, k, d, digits.data());
        std::int64_t off = 0;
        for (int p = 0; p < k; ++p)
            off += static_cast<std::int64_t>(digits[static_cast<std::size_t>(p)]) *
                   strides[static_cast<std::size_t>(support[static_cast<std::size_t>(p)])];
        local_offsets[static_cast<std::size_t>(x)] = off;
    }
    Mat out = Mat::Zero(dim, dim);
    detail::for_each_complement(n, d, support, strides, [&](std::int64_t base) {
        for (std::int64_t a = 0; a < dim; ++a)
            for (std::int64_t b = 0; b < dim; ++b)
                out(a, b) += rho(base + local_offsets[static_cast<std::size_t>(a)],
                                 base + local_offsets[static_cast<std::size_t>(b)]);
    });
    return out;
}

inline double global_value(const HamiltonianInstance& inst, const Vec& psi) {
    const auto dim = ipow(inst.d, inst.n);
    if (dim > (1 << 20)) throw ValidationError("global_value: d^n exceeds 2^20");
    if (psi.size() != dim) throw ValidationError("global_value: state has wrong dimension");
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw ValidationError("global_value: state is not normalized");
    double total = 0.0;
    Vec work(dim);
    for (const auto& term : inst.terms) {
        work.setZero();
        apply_term(inst, term, psi, work);
        total += psi.dot(work).real();
    }
    return total;
}

inline double global_value(const HamiltonianInstance& inst, const Mat& rho) {
    const auto dim = ipow(inst.d, inst.n);
    if (rho.rows() != dim || rho.cols() != dim)
        throw ValidationError("global_value: state has wrong dimension");
    if (std::abs(rho.trace().real() - 1.0) > 1e-10 || std::abs(rho.trace().imag()) > 1e-10)
        throw ValidationError("global_value: density matrix must have unit trace");
    if (!is_hermitian(rho, 1e-10)) throw ValidationError("global_value: density matrix must be Hermitian");
    double total = 0.0;
    for (const auto& term : inst.terms)
        total += trace_product_real(term.matrix,
                                    partial_trace_to_support(rho, inst.n, inst.d, term.support));
    return total;
}

inline Mat assemble_dense(const HamiltonianInstance& inst) {
    const auto dim = ipow(inst.d, inst.n);
    if (dim > (1 << 14)) throw ValidationError("assemble_dense: d^n exceeds 2^14");
    Mat h = Mat::Zero(dim, dim);
    const auto strides = detail::site_strides(inst.n, inst.d);
    for (const auto& term : inst.terms) {
        const int k = static_cast<int>(term.support.size());
        const auto tdim = ipow(inst.d, k);
        std::vector<std::int64_t> local_offsets(static_cast<std::size_t>(tdim));
        std::vector<int> digits(static_cast<std::size_t>(k));
        for (std::int64_t x = 0; x < tdim; ++x) {
            detail::site_digits(x, k, inst.d, digits.data());
            std::int64_t off = 0;
            for (int p = 0; p < k; ++p)
                off += static_cast<std::int64_t>(digits[static_cast<std::size_t>(p)]) *
                       strides[static_cast<std::size_t>(term.support[static_cast<std::size_t>(p)])];
            local_offsets[static_cast<std::size_t>(x)] = off;
        }
        detail::for_each_complement(inst.n, inst.d, term.support, strides, [&](std::int64_t base) {
            for (std::int64_t r = 0; r < tdim; ++r)
                for (std::int64_t c = 0; c < tdim; ++c)
                    h(base + local_offsets[static_cast<std::size_t>(r)],
                      base + local_offsets[static_cast<std::size_t>(c)]) += term.matrix(r, c);
        });
    }
    return h;
}

// Embed a j-local matrix (j = old_support.size()) into the sites new_support,
// which must contain old_support; identity acts on the added legs.
inline Mat embed_on_support(const Mat& matrix, int d,
                            const std::vector<int>& old_support,
                            const std::vector<int>& new_support) {
    const int k = static_cast<int>(new_support.size());
    const int j = static_cast<int>(old_support.size());
    const auto dim = ipow(d, k);
    std::vector<int> src_slot(static_cast<std::size_t>(k), -1);
    for (int p = 0; p < k; ++p) {
        auto it = std::find(old_support.begin(), old_support.end(), new_support[static_cast<std::size_t>(p)]);
        if (it != old_support.end())
            src_slot[static_cast<std::size_t>(p)] = static_cast<int>(it - old_support.begin());
    }
    Mat out = Mat::Zero(dim, dim);
    std::vector<int> rd(static_cast<std::size_t>(k)), cd(static_cast<std::size_t>(k));
    std::vector<int> ro(static_cast<std::size_t>(j)), co(static_cast<std::size_t>(j));
    for (std::int64_t r = 0; r < dim; ++r) {
        detail::site_digits(r, k, d, rd.data());
        for (std::int64_t c = 0; c < dim; ++c) {
            detail::site_digits(c, k, d, cd.data());
            bool diag_ok = true;
            for (int p = 0; p < k && diag_ok; ++p)
                if (src_slot[static_cast<std::size_t>(p)] < 0 &&
                    rd[static_cast<std::size_t>(p)] != cd[static_cast<std::size_t>(p)])
                    diag_ok = false;
            if (!diag_ok) continue;
            for (int p = 0; p < k; ++p) {
                const int s = src_slot[static_cast<std::size_t>(p)];
                if (s >= 0) {
                    ro[static_cast<std::size_t>(s)] = rd[static_cast<std::size_t>(p)];
                    co[static_cast<std::size_t>(s)] = cd[static_cast<std::size_t>(p)];
                }
            }
            std::int64_t rr = 0, cc = 0;
            for (int p = 0; p < j; ++p) {
                rr = rr * d + ro[static_cast<std::size_t>(p)];
                cc = cc * d + co[static_cast<std::size_t>(p)];
            }
            out(r, c) = matrix(rr, cc);
        }
    }
    return out;
}

} // namespace hamapprox::core
