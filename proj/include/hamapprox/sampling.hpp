#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace hamapprox::net_sampling {

using core::ValidationError;

struct SamplingParams {
    int d = 2;
    int k = 2;
    double f = 4.0;
    double g = 1.0;
    double delta = 0.5;
    double eps = 0.0;      // error budget handed to the linearization
    double eps_sdp = 0.0;  // accuracy demanded from the block solver
    std::uint64_t seed = 1;
    double C = 0.0;        // d^(k/2)
    double Delta = 0.0;    // sqrt(2) d (1 + delta)
};

inline double recursion_base(int d, double delta) {
    return std::sqrt(2.0) * d * (1.0 + delta);
}

inline SamplingParams make_sampling_params(int d, int k, double f, double g, double delta,
                                           double eps, double eps_sdp, std::uint64_t seed) {
    if (d < 2) throw ValidationError("sampling params require d >= 2");
    if (k < 1) throw ValidationError("sampling params require k >= 1");
    if (f <= 0.0 || g <= 0.0) throw ValidationError("sampling params require positive f and g");
    if (delta <= 0.0) throw ValidationError("sampling params require positive delta");
    if (eps < 0.0 || eps_sdp < 0.0) throw ValidationError("error budgets must be non-negative");
    SamplingParams p;
    p.d = d;
    p.k = k;
    p.f = f;
    p.g = g;
    p.delta = delta;
    p.eps = eps;
    p.eps_sdp = eps_sdp;
    p.seed = seed;
    p.C = std::pow(static_cast<double>(d), k / 2.0);
    p.Delta = recursion_base(d, delta);
    return p;
}

// Per-level deviation bound: eps_b = C (sqrt(f/g) + delta) (Delta^b - 1) / (Delta - 1).
inline double epsilon_b(int b, const SamplingParams& p) {
    if (b < 1 || b > p.k) throw ValidationError("epsilon_b: level out of range");
    const double c = p.C * (std::sqrt(p.f / p.g) + p.delta);
    return c * (std::pow(p.Delta, b) - 1.0) / (p.Delta - 1.0);
}

// Error parameter carried by the recursive call holding a level-m map when
// the top level starts from p.eps: eps^(m) = eps - c (Delta^k - Delta^m) / (Delta - 1).
// With p.eps = epsilon_b(k) this equals epsilon_b(m) exactly.
inline double eps_level(int m, const SamplingParams& p) {
    if (m < 1 || m > p.k) throw ValidationError("eps_level: level out of range");
    const double c = p.C * (std::sqrt(p.f / p.g) + p.delta);
    return p.eps - c * (std::pow(p.Delta, p.k) - std::pow(p.Delta, m)) / (p.Delta - 1.0);
}

// Number of qudit samples: g ceil(ln n), rounded up when g is fractional.
inline std::size_t sample_size(int n, double g) {
    if (n < 2) throw ValidationError("sample_size: n must be at least 2");
    if (g <= 0.0) throw ValidationError("sample_size: g must be positive");
    const double l = std::ceil(std::log(static_cast<double>(n)));
    return static_cast<std::size_t>(std::ceil(g * l - 1e-9));
}

// Uniform sample of qudit indices with replacement.
inline std::vector<int> sample_indices(int n, double g, std::uint64_t seed) {
    const std::size_t s = sample_size(n, g);
    util::Rng rng(seed);
    std::vector<int> out;
    out.reserve(s);
    for (std::size_t i = 0; i < s; ++i)
        out.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
    return out;
}

// Scaled sample sum (n/s) sum of the sampled values: the unbiased estimator
// of a sum of n bounded terms from s uniform draws with replacement.
inline double sampling_estimate(const std::vector<double>& sampled_values, int n) {
    if (sampled_values.empty()) throw ValidationError("sampling_estimate: empty sample");
    double s = 0.0;
    for (double v : sampled_values) s += v;
    return s * static_cast<double>(n) / static_cast<double>(sampled_values.size());
}

} // namespace hamapprox::net_sampling
