#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"

namespace hamapprox::net_sampling {

using core::cxd;
using core::Mat;
using core::ValidationError;

// Discretization of the Hermitian matrices with entries ranging over [-1, 1]
// (diagonal) and the unit disk (off-diagonal). Points are indexed in mixed
// radix: the d diagonal digits first (diagonal (0,0) fastest), then the
// d(d-1)/2 upper off-diagonal digits in row-major pair order (0,1), (0,2), ...
struct DeltaNet {
    int d = 0;
    double delta = 0.0;
    std::vector<double> diag_values;  // ascending uniform grid on [-1, 1]
    std::vector<cxd> offdiag_values;  // in-disk grid points plus deduplicated ring projections

    int diag_count() const { return static_cast<int>(diag_values.size()); }
    int offdiag_count() const { return static_cast<int>(offdiag_values.size()); }
    int offdiag_entries() const { return d * (d - 1) / 2; }

    double size_estimate() const {
        double s = 1.0;
        for (int i = 0; i < d; ++i) s *= diag_count();
        for (int i = 0; i < offdiag_entries(); ++i) s *= offdiag_count();
        return s;
    }

    std::uint64_t size() const {
        const double s = size_estimate();
        if (s > 9.0e18) throw ValidationError("net is too large to index");
        return static_cast<std::uint64_t>(s + 0.5);
    }

    Mat point(std::uint64_t idx) const {
        Mat m = Mat::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            m(i, i) = diag_values[static_cast<std::size_t>(idx % diag_count())];
            idx /= static_cast<std::uint64_t>(diag_count());
        }
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const cxd z = offdiag_values[static_cast<std::size_t>(idx % offdiag_count())];
                idx /= static_cast<std::uint64_t>(offdiag_count());
                m(p, q) = z;
                m(q, p) = std::conj(z);
            }
        }
        return m;
    }

    std::uint64_t nearest_index(const Mat& rho) const {
        if (rho.rows() != d || rho.cols() != d)
            throw ValidationError("nearest_index: matrix has wrong dimension");
        std::uint64_t idx = 0;
        std::uint64_t stride = 1;
        for (int i = 0; i < d; ++i) {
            const double v = rho(i, i).real();
            std::size_t best = 0;
            double bestd = std::abs(diag_values[0] - v);
            for (std::size_t t = 1; t < diag_values.size(); ++t) {
                const double dd = std::abs(diag_values[t] - v);
                if (dd < bestd) { bestd = dd; best = t; }
            }
            idx += static_cast<std::uint64_t>(best) * stride;
            stride *= static_cast<std::uint64_t>(diag_count());
        }
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const cxd z = rho(p, q);
                std::size_t best = 0;
                double bestd = std::abs(offdiag_values[0] - z);
                for (std::size_t t = 1; t < offdiag_values.size(); ++t) {
                    const double dd = std::abs(offdiag_values[t] - z);
                    if (dd < bestd) { bestd = dd; best = t; }
                }
                idx += static_cast<std::uint64_t>(best) * stride;
                stride *= static_cast<std::uint64_t>(offdiag_count());
            }
        }
        return idx;
    }

    double nearest_distance(const Mat& rho) const {
        return (point(nearest_index(rho)) - rho).norm();
    }
};

inline DeltaNet build_net(int d, double delta, double point_budget = 16777216.0) {
    if (d < 2) throw ValidationError("build_net: d must be at least 2");
    if (delta <= 0.0) throw ValidationError("build_net: delta must be positive");
    DeltaNet net;
    net.d = d;
    net.delta = delta;
    const int mm = static_cast<int>(std::ceil(2.0 * d / delta));
    const int grid = std::max(2, mm);
    net.diag_values.reserve(static_cast<std::size_t>(grid));
    for (int t = 0; t < grid; ++t)
        net.diag_values.push_back(-1.0 + 2.0 * t / (grid - 1));
    std::vector<cxd> off;
    for (int tr = 0; tr < grid; ++tr) {
        const double re = -1.0 + 2.0 * tr / (grid - 1);
        for (int ti = 0; ti < grid; ++ti) {
            const double im = -1.0 + 2.0 * ti / (grid - 1);
            cxd z(re, im);
            const double a = std::abs(z);
            if (a > 1.0) z /= a; // project onto the unit circle
            off.push_back(z);
        }
    }
    std::sort(off.begin(), off.end(), [](const cxd& a, const cxd& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    for (const cxd& z : off) {
        bool dup = false;
        for (auto it = net.offdiag_values.rbegin(); it != net.offdiag_values.rend(); ++it) {
            if (z.real() - it->real() > 1e-12) break;
            if (std::abs(*it - z) <= 1e-12) { dup = true; break; }
        }
        if (!dup) net.offdiag_values.push_back(z);
    }
    const double total = net.size_estimate();
    if (total > point_budget)
        throw ValidationError("net size " + std::to_string(total) +
                              " exceeds point budget " + std::to_string(point_budget));
    return net;
}

} // namespace hamapprox::net_sampling
