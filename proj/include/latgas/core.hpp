// Shared primitives: lattice coordinates, error types, small helpers.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace latgas {

// Compile-time cap on the lattice dimension. All built-in experiments use d <= 3.
inline constexpr int kMaxDim = 4;

// A lattice point of Z^d, padded with zeros beyond the active dimension.
using Coord = std::array<int, kMaxDim>;

inline Coord coord(int x0, int x1 = 0, int x2 = 0, int x3 = 0) { return {x0, x1, x2, x3}; }

inline Coord coord_zero() { return {0, 0, 0, 0}; }

inline Coord unit(int axis) {
    Coord e{};
    e[axis] = 1;
    return e;
}

inline Coord add(const Coord& a, const Coord& b) {
    Coord c{};
    for (int i = 0; i < kMaxDim; ++i) c[i] = a[i] + b[i];
    return c;
}

inline Coord sub(const Coord& a, const Coord& b) {
    Coord c{};
    for (int i = 0; i < kMaxDim; ++i) c[i] = a[i] - b[i];
    return c;
}

inline Coord negate(const Coord& a) {
    Coord c{};
    for (int i = 0; i < kMaxDim; ++i) c[i] = -a[i];
    return c;
}

inline int linf_norm(const Coord& a) {
    int m = 0;
    for (int v : a) m = std::max(m, v < 0 ? -v : v);
    return m;
}

inline int l1_norm(const Coord& a) {
    int s = 0;
    for (int v : a) s += (v < 0 ? -v : v);
    return s;
}

inline std::string to_string(const Coord& a, int dim) {
    std::string s = "(";
    for (int i = 0; i < dim; ++i) s += std::to_string(a[i]) + (i + 1 < dim ? "," : "");
    return s + ")";
}

// An unordered nearest-neighbor pair, stored with the lexicographically smaller
// endpoint first.
struct Bond {
    Coord a{};
    Coord b{};
};

inline Bond make_bond(Coord x, Coord y) {
    if (y < x) std::swap(x, y);
    return Bond{x, y};
}

inline bool operator==(const Bond& u, const Bond& v) { return u.a == v.a && u.b == v.b; }
inline bool operator<(const Bond& u, const Bond& v) {
    return u.a != v.a ? u.a < v.a : u.b < v.b;
}

// Error taxonomy shared with the CLI exit codes: configuration/domain problems
// map to exit code 2, iterative non-convergence to exit code 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : ConfigError {
    using ConfigError::ConfigError;
};

struct SizeError : ConfigError {
    using ConfigError::ConfigError;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binomial coefficients as double; exact for every value a 53-bit mantissa holds,
// which covers all subset-ranking uses in this project.
inline double binomial(int64_t n, int64_t k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int64_t i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

inline int64_t binomial_i(int64_t n, int64_t k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    int64_t r = 1;
    for (int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// chi(rho) = rho(1-rho), the variance of one Bernoulli(rho) occupation variable.
inline double compressibility(double rho) { return rho * (1.0 - rho); }

}  // namespace latgas
