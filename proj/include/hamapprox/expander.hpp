#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core.hpp"
#include "sampling.hpp"

namespace hamapprox::pipeline {

// Margulis expander on Z_m x Z_m: an 8-regular multigraph with constant
// spectral gap. Vertex v = y * m + x.
inline std::array<std::uint64_t, 8> margulis_neighbors(std::uint64_t m, std::uint64_t v) {
    const std::uint64_t x = v % m;
    const std::uint64_t y = v / m;
    auto add = [m](std::uint64_t a, std::uint64_t b) { return (a + b) % m; };
    auto sub = [m](std::uint64_t a, std::uint64_t b) { return (a + m - b % m) % m; };
    const std::uint64_t two_y = (2 * y) % m;
    const std::uint64_t two_x = (2 * x) % m;
    return {
        add(x, two_y) + y * m,
        sub(x, two_y) + y * m,
        add(x, add(two_y, 1)) + y * m,
        sub(x, add(two_y, 1)) + y * m,
        x + add(y, two_x) * m,
        x + sub(y, two_x) * m,
        x + add(y, add(two_x, 1)) * m,
        x + sub(y, add(two_x, 1)) * m,
    };
}

inline std::uint64_t expander_side(int n) {
    if (n < 1) throw core::ValidationError("expander_side: n must be positive");
    std::uint64_t m = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (m * m < static_cast<std::uint64_t>(n)) ++m;
    return m;
}

// Number of distinct length-s walks: m^2 starts times 8 choices per step.
inline std::uint64_t walk_count(int n, double g) {
    const std::size_t s = net_sampling::sample_size(n, g);
    const std::uint64_t m = expander_side(n);
    const long double total =
        static_cast<long double>(m) * m * std::pow(8.0L, static_cast<long double>(s - 1));
    if (total > 9.0e18L) throw core::ValidationError("walk_count: too many walks to enumerate");
    std::uint64_t count = m * m;
    for (std::size_t i = 1; i < s; ++i) count *= 8;
    return count;
}

// Decode walk_id = start * 8^(s-1) + step digits (most significant first)
// into the visited qudit indices, reducing vertices mod n.
inline std::vector<int> derandomized_indices(int n, double g, std::uint64_t walk_id) {
    const std::size_t s = net_sampling::sample_size(n, g);
    const std::uint64_t m = expander_side(n);
    if (walk_id >= walk_count(n, g))
        throw core::ValidationError("derandomized_indices: walk id out of range");
    std::uint64_t steps = 1;
    for (std::size_t i = 1; i < s; ++i) steps *= 8;
    std::uint64_t v = walk_id / steps;
    std::uint64_t digits = walk_id % steps;
    std::vector<int> out;
    out.reserve(s);
    out.push_back(static_cast<int>(v % static_cast<std::uint64_t>(n)));
    for (std::size_t t = 1; t < s; ++t) {
        steps /= 8;
        const std::uint64_t choice = (digits / steps) % 8;
        v = margulis_neighbors(m, v)[static_cast<std::size_t>(choice)];
        out.push_back(static_cast<int>(v % static_cast<std::uint64_t>(n)));
    }
    return out;
}

} // namespace hamapprox::pipeline
