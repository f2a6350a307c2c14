// Chaos calculus on Bernoulli fields: coefficient extraction T_n, multiple
// stochastic integrals I_n, Parseval / isometry checks, the level seminorm,
// and density derivatives of expectations.
//
// A ChaosCoeffs holds, per level n, a sparse table f_n indexed by sorted
// n-point site sets. The density rho is part of the value: coefficients taken
// at different densities must never be mixed.
#pragma once

#include <cmath>
#include <map>

#include "latgas/config_space.hpp"
#include "latgas/core.hpp"

namespace latgas {

using SiteSet = std::vector<Coord>;  // strictly sorted

struct ChaosCoeffs {
    int dim = 1;
    double rho = 0.5;
    std::vector<std::map<SiteSet, double>> levels;  // levels[n] : K_n -> R

    int max_level() const { return int(levels.size()) - 1; }

    double at(const SiteSet& y) const {
        const size_t n = y.size();
        if (n >= levels.size()) return 0.0;
        auto it = levels[n].find(y);
        return it == levels[n].end() ? 0.0 : it->second;
    }

    void set(const SiteSet& y, double v) {
        if (y.size() >= levels.size()) levels.resize(y.size() + 1);
        levels[y.size()][y] = v;
    }

    void add(const SiteSet& y, double v) {
        if (y.size() >= levels.size()) levels.resize(y.size() + 1);
        levels[y.size()][y] += v;
    }

    double level0() const { return levels.empty() ? 0.0 : at(SiteSet{}); }

    // Drop entries with |value| <= tol and empty trailing levels.
    void prune(double tol = 0.0) {
        for (auto& lvl : levels)
            for (auto it = lvl.begin(); it != lvl.end();)
                it = std::abs(it->second) <= tol ? lvl.erase(it) : std::next(it);
        while (!levels.empty() && levels.back().empty()) levels.pop_back();
    }
};

inline double l1_level_norm(const ChaosCoeffs& c, int n) {
    if (n < 0 || n > c.max_level()) return 0.0;
    double s = 0.0;
    for (const auto& [y, v] : c.levels[n]) s += std::abs(v);
    return s;
}

inline double l2_level_norm_sq(const ChaosCoeffs& c, int n) {
    if (n < 0 || n > c.max_level()) return 0.0;
    double s = 0.0;
    for (const auto& [y, v] : c.levels[n]) s += v * v;
    return s;
}

// ||| I_n(f_n) |||_n = l1 norm of the level-n table.
inline double triple_norm(const ChaosCoeffs& c, int n) { return l1_level_norm(c, n); }

// T_n F(Y) = E_rho[D_Y F] for every Y inside supp(F).
inline ChaosCoeffs chaos_coeffs(const LocalFunction& f, double rho) {
    if (f.support_size() > kMaxSupportBits)
        throw SizeError("chaos_coeffs: support exceeds dense-table limit");
    ChaosCoeffs out;
    out.dim = f.dim();
    out.rho = rho;
    const int n = f.support_size();
    const uint32_t subsets = uint32_t(1) << n;
    for (uint32_t ym = 0; ym < subsets; ++ym) {
        // difference out the sites of Y, average out the rest
        std::vector<double> table(f.table());
        int width = n;
        for (int i = n - 1; i >= 0; --i) {
            const size_t half = size_t(1) << (width - 1);
            const bool in_y = (ym >> i) & 1;
            for (size_t m = 0; m < half; ++m) {
                const double v0 = table[m];
                const double v1 = table[m | half];
                table[m] = in_y ? (v1 - v0) : ((1.0 - rho) * v0 + rho * v1);
            }
            table.resize(half);
            --width;
        }
        if (table[0] != 0.0) {
            SiteSet y;
            for (int i = 0; i < n; ++i)
                if ((ym >> i) & 1) y.push_back(f.support()[i]);
            out.set(y, table[0]);
        }
    }
    if (out.levels.empty()) out.levels.resize(1);
    return out;
}

// I_n(f_n) = sum_Y f_n(Y) eta_bar_Y at a single level.
inline LocalFunction multiple_integral(const ChaosCoeffs& c, int n) {
    std::set<Coord> union_sites;
    if (n <= c.max_level())
        for (const auto& [y, v] : c.levels[n])
            for (const Coord& x : y) union_sites.insert(x);
    std::vector<Coord> supp(union_sites.begin(), union_sites.end());
    if (supp.size() > kMaxSupportBits) throw SizeError("multiple_integral: support too large");
    LocalFunction acc = LocalFunction::constant(c.dim, 0.0).on_support(supp);
    if (n > c.max_level()) return acc;
    if (n == 0) return LocalFunction::constant(c.dim, c.level0());
    for (const auto& [y, v] : c.levels[n]) acc = acc + v * eta_bar_product(c.dim, y, c.rho);
    return acc;
}

// Full reconstruction sum_n I_n(T_n F).
inline LocalFunction chaos_reconstruct(const ChaosCoeffs& c) {
    LocalFunction acc = LocalFunction::constant(c.dim, c.level0());
    for (int n = 1; n <= c.max_level(); ++n) acc = acc + multiple_integral(c, n);
    return acc;
}

// <F^2>_rho - sum_n chi^n ||T_n F||^2_{l2}; zero when the expansion is exact.
inline double parseval_residual(const LocalFunction& f, double rho) {
    const BernoulliMeasure mu{rho};
    const double second_moment = expect(mu, f * f);
    const ChaosCoeffs c = chaos_coeffs(f, rho);
    const double chi = compressibility(rho);
    double sum = 0.0;
    double chin = 1.0;
    for (int n = 0; n <= c.max_level(); ++n) {
        sum += chin * l2_level_norm_sq(c, n);
        chin *= chi;
    }
    return second_moment - sum;
}

// d^n/drho^n E_rho[F] = n! * sum_Y T_n F(Y).
inline double rho_derivative(const LocalFunction& f, double rho, int order) {
    const ChaosCoeffs c = chaos_coeffs(f, rho);
    if (order > c.max_level()) return 0.0;
    double sum = 0.0;
    for (const auto& [y, v] : c.levels[order]) sum += v;
    double fact = 1.0;
    for (int i = 2; i <= order; ++i) fact *= i;
    return fact * sum;
}

}  // namespace latgas
