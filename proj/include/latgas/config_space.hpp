// Particle configurations and the elementary operator calculus on local
// functions: exchange/Kawasaki, Glauber derivatives, translations, affine
// statistics, and exact expectations under Bernoulli and canonical measures.
//
// A local function is stored as a dense value table over the configurations of
// its (sorted) support; bit i of a table index is the occupation of support
// site i. All operations are pure.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <set>

#include "latgas/core.hpp"
#include "latgas/lattice.hpp"

namespace latgas {

inline constexpr int kMaxSupportBits = 20;

class LocalFunction {
  public:
    LocalFunction() : dim_(1), support_(), table_{0.0} {}

    LocalFunction(int dim, std::vector<Coord> support, std::vector<double> table)
        : dim_(dim), support_(std::move(support)), table_(std::move(table)) {
        if (!std::is_sorted(support_.begin(), support_.end()))
            throw ConfigError("local function: support must be sorted");
        if (std::adjacent_find(support_.begin(), support_.end()) != support_.end())
            throw ConfigError("local function: duplicate support site");
        if (support_.size() > kMaxSupportBits)
            throw SizeError("local function: support exceeds dense-table limit");
        if (table_.size() != (size_t(1) << support_.size()))
            throw ConfigError("local function: table size mismatch");
    }

    static LocalFunction constant(int dim, double c) {
        return LocalFunction(dim, {}, {c});
    }

    // eta_x
    static LocalFunction occupation(int dim, const Coord& x) {
        return LocalFunction(dim, {x}, {0.0, 1.0});
    }

    // eta_x - rho
    static LocalFunction centered(int dim, const Coord& x, double rho) {
        return LocalFunction(dim, {x}, {-rho, 1.0 - rho});
    }

    int dim() const { return dim_; }
    const std::vector<Coord>& support() const { return support_; }
    const std::vector<double>& table() const { return table_; }
    int support_size() const { return int(support_.size()); }

    double value(uint32_t mask) const { return table_[mask]; }

    // Evaluate against an arbitrary configuration reader.
    double eval(const std::function<int(const Coord&)>& occ) const {
        uint32_t mask = 0;
        for (size_t i = 0; i < support_.size(); ++i)
            if (occ(support_[i])) mask |= (1u << i);
        return table_[mask];
    }

    double max_abs() const {
        double v = 0.0;
        for (double t : table_) v = std::max(v, std::abs(t));
        return v;
    }

    // The same function expressed on a larger support (drops nothing).
    LocalFunction on_support(const std::vector<Coord>& target) const {
        if (target == support_) return *this;
        std::vector<int> pos(support_.size());
        for (size_t i = 0; i < support_.size(); ++i) {
            auto it = std::lower_bound(target.begin(), target.end(), support_[i]);
            if (it == target.end() || *it != support_[i])
                throw ConfigError("on_support: target does not contain support");
            pos[i] = int(it - target.begin());
        }
        if (target.size() > kMaxSupportBits) throw SizeError("on_support: target too large");
        std::vector<double> table(size_t(1) << target.size());
        for (uint32_t m = 0; m < table.size(); ++m) {
            uint32_t sm = 0;
            for (size_t i = 0; i < pos.size(); ++i)
                if (m & (1u << pos[i])) sm |= (1u << i);
            table[m] = table_[sm];
        }
        return LocalFunction(dim_, target, std::move(table));
    }

    // Drop support sites the table provably does not depend on.
    LocalFunction trimmed(double tol = 0.0) const {
        std::vector<int> keep;
        for (size_t i = 0; i < support_.size(); ++i) {
            const uint32_t bit = 1u << i;
            bool depends = false;
            for (uint32_t m = 0; m < table_.size() && !depends; ++m)
                if (!(m & bit) && std::abs(table_[m | bit] - table_[m]) > tol) depends = true;
            if (depends) keep.push_back(int(i));
        }
        if (keep.size() == support_.size()) return *this;
        std::vector<Coord> supp;
        for (int i : keep) supp.push_back(support_[i]);
        std::vector<double> table(size_t(1) << keep.size());
        for (uint32_t m = 0; m < table.size(); ++m) {
            uint32_t big = 0;
            for (size_t i = 0; i < keep.size(); ++i)
                if (m & (1u << i)) big |= (1u << keep[i]);
            table[m] = table_[big];
        }
        return LocalFunction(dim_, std::move(supp), std::move(table));
    }

  private:
    int dim_;
    std::vector<Coord> support_;  // sorted
    std::vector<double> table_;   // size 1 << support_.size()
};

namespace detail {
inline std::vector<Coord> support_union(const std::vector<Coord>& a, const std::vector<Coord>& b) {
    std::vector<Coord> u;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
    return u;
}
}  // namespace detail

inline LocalFunction operator+(const LocalFunction& f, const LocalFunction& g) {
    auto u = detail::support_union(f.support(), g.support());
    LocalFunction fu = f.on_support(u), gu = g.on_support(u);
    std::vector<double> table(fu.table());
    for (size_t i = 0; i < table.size(); ++i) table[i] += gu.table()[i];
    return LocalFunction(f.dim(), u, std::move(table));
}

inline LocalFunction operator-(const LocalFunction& f, const LocalFunction& g) {
    auto u = detail::support_union(f.support(), g.support());
    LocalFunction fu = f.on_support(u), gu = g.on_support(u);
    std::vector<double> table(fu.table());
    for (size_t i = 0; i < table.size(); ++i) table[i] -= gu.table()[i];
    return LocalFunction(f.dim(), u, std::move(table));
}

inline LocalFunction operator*(double s, const LocalFunction& f) {
    std::vector<double> table(f.table());
    for (double& t : table) t *= s;
    return LocalFunction(f.dim(), f.support(), std::move(table));
}

inline LocalFunction operator*(const LocalFunction& f, const LocalFunction& g) {
    auto u = detail::support_union(f.support(), g.support());
    LocalFunction fu = f.on_support(u), gu = g.on_support(u);
    std::vector<double> table(fu.table());
    for (size_t i = 0; i < table.size(); ++i) table[i] *= gu.table()[i];
    return LocalFunction(f.dim(), u, std::move(table));
}

// pi_b F = F(eta^b) - F(eta); the support grows to supp(F) union b.
inline LocalFunction kawasaki(const Bond& b, const LocalFunction& f) {
    std::vector<Coord> ends = {b.a, b.b};
    std::sort(ends.begin(), ends.end());
    auto u = detail::support_union(f.support(), ends);
    LocalFunction fu = f.on_support(u);
    const int ia = int(std::lower_bound(u.begin(), u.end(), b.a) - u.begin());
    const int ib = int(std::lower_bound(u.begin(), u.end(), b.b) - u.begin());
    std::vector<double> table(fu.table().size());
    for (uint32_t m = 0; m < table.size(); ++m) {
        const int ba = (m >> ia) & 1, bb = (m >> ib) & 1;
        uint32_t swapped = m;
        if (ba != bb) swapped = m ^ (1u << ia) ^ (1u << ib);
        table[m] = fu.value(swapped) - fu.value(m);
    }
    return LocalFunction(f.dim(), u, std::move(table)).trimmed();
}

// D_x F = F(eta with x occupied) - F(eta with x vacant).
inline LocalFunction glauber(const Coord& x, const LocalFunction& f) {
    const auto& s = f.support();
    auto it = std::lower_bound(s.begin(), s.end(), x);
    if (it == s.end() || *it != x) return LocalFunction::constant(f.dim(), 0.0);
    const int ix = int(it - s.begin());
    std::vector<Coord> supp;
    for (size_t i = 0; i < s.size(); ++i)
        if (int(i) != ix) supp.push_back(s[i]);
    std::vector<double> table(size_t(1) << supp.size());
    for (uint32_t m = 0; m < table.size(); ++m) {
        const uint32_t low = m & ((1u << ix) - 1);
        const uint32_t high = (m >> ix) << (ix + 1);
        const uint32_t base = high | low;
        table[m] = f.value(base | (1u << ix)) - f.value(base);
    }
    return LocalFunction(f.dim(), std::move(supp), std::move(table));
}

// D_Y = product of D_x over x in Y.
inline LocalFunction glauber_multi(const std::vector<Coord>& y, const LocalFunction& f) {
    LocalFunction g = f;
    for (const Coord& x : y) g = glauber(x, g);
    return g;
}

// (tau_x F)(eta) = F(tau_x eta); support moves to supp(F) + x. When a torus is
// given the shifted sites wrap.
inline LocalFunction translate(const Coord& x, const LocalFunction& f,
                               const Torus* torus = nullptr) {
    std::vector<std::pair<Coord, int>> shifted;
    for (size_t i = 0; i < f.support().size(); ++i) {
        Coord c = add(f.support()[i], x);
        if (torus) c = torus->wrap(c);
        shifted.emplace_back(c, int(i));
    }
    std::sort(shifted.begin(), shifted.end());
    for (size_t i = 1; i < shifted.size(); ++i)
        if (shifted[i].first == shifted[i - 1].first)
            throw ConfigError("translate: support collision after wrap");
    std::vector<Coord> supp;
    std::vector<int> old_bit;
    for (auto& [c, i] : shifted) {
        supp.push_back(c);
        old_bit.push_back(i);
    }
    std::vector<double> table(f.table().size());
    for (uint32_t m = 0; m < table.size(); ++m) {
        uint32_t om = 0;
        for (size_t i = 0; i < old_bit.size(); ++i)
            if (m & (1u << i)) om |= (1u << old_bit[i]);
        table[m] = f.value(om);
    }
    return LocalFunction(f.dim(), std::move(supp), std::move(table));
}

// ell_{xi,Lambda}(eta) = sum_{x in Lambda} (xi . x) eta_x
inline LocalFunction affine(const std::array<double, kMaxDim>& xi,
                            const std::vector<Coord>& sites, int dim) {
    std::vector<Coord> supp(sites);
    std::sort(supp.begin(), supp.end());
    if (supp.size() > kMaxSupportBits) throw SizeError("affine: site set too large");
    std::vector<double> coeff(supp.size());
    for (size_t i = 0; i < supp.size(); ++i) {
        double c = 0.0;
        for (int k = 0; k < dim; ++k) c += xi[k] * supp[i][k];
        coeff[i] = c;
    }
    std::vector<double> table(size_t(1) << supp.size(), 0.0);
    for (uint32_t m = 0; m < table.size(); ++m) {
        double v = 0.0;
        for (size_t i = 0; i < supp.size(); ++i)
            if (m & (1u << i)) v += coeff[i];
        table[m] = v;
    }
    return LocalFunction(dim, std::move(supp), std::move(table));
}

// Product of centered occupations over Y.
inline LocalFunction eta_bar_product(int dim, const std::vector<Coord>& y, double rho) {
    LocalFunction f = LocalFunction::constant(dim, 1.0);
    for (const Coord& x : y) f = f * LocalFunction::centered(dim, x, rho);
    return f;
}

// --- measures ----------------------------------------------------------------

struct BernoulliMeasure {
    double rho = 0.5;
};

// Uniform over configurations of `region` with exactly `count` particles.
struct CanonicalMeasure {
    std::vector<Coord> region;  // sorted
    int count = 0;
};

inline double expect(const BernoulliMeasure& mu, const LocalFunction& f) {
    const auto& table = f.table();
    const int n = f.support_size();
    double total = 0.0;
    for (uint32_t m = 0; m < table.size(); ++m) {
        double w = 1.0;
        for (int i = 0; i < n; ++i) w *= (m & (1u << i)) ? mu.rho : (1.0 - mu.rho);
        total += w * table[m];
    }
    return total;
}

inline double expect(const CanonicalMeasure& mu, const LocalFunction& f) {
    std::vector<Coord> region(mu.region);
    std::sort(region.begin(), region.end());
    for (const Coord& x : f.support())
        if (!std::binary_search(region.begin(), region.end(), x))
            throw DomainError("canonical expect: support exceeds measured region");
    const int n = f.support_size();
    const int64_t outside = int64_t(region.size()) - n;
    const double denom = binomial(int64_t(region.size()), mu.count);
    if (denom == 0.0) throw DomainError("canonical expect: impossible particle count");
    double total = 0.0;
    for (uint32_t m = 0; m < f.table().size(); ++m) {
        const int k = __builtin_popcount(m);
        const double w = binomial(outside, mu.count - k) / denom;
        if (w != 0.0) total += w * f.value(m);
    }
    return total;
}

inline double variance(const BernoulliMeasure& mu, const LocalFunction& f) {
    const double mean = expect(mu, f);
    return expect(mu, f * f) - mean * mean;
}

inline double covariance(const BernoulliMeasure& mu, const LocalFunction& f,
                         const LocalFunction& g) {
    return expect(mu, f * g) - expect(mu, f) * expect(mu, g);
}

// Minimal support radius: the smallest L with supp(f) inside Lambda_L.
inline int support_radius(const LocalFunction& f) {
    int r = 0;
    for (const Coord& x : f.support()) r = std::max(r, linf_norm(x));
    return r;
}

}  // namespace latgas
