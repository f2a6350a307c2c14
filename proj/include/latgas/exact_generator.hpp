// Exact finite-state generators on torus configuration spaces: the rate-family
// generator L, the jump-kernel generator L-bar, Dirichlet forms and Sobolev
// seminorms, semigroup action with a rigorous truncation bound, and energy
// comparisons between the two operators.
#pragma once

#include <cmath>
#include <limits>
#include <ostream>

#include "latgas/config_space.hpp"
#include "latgas/core.hpp"
#include "latgas/expm.hpp"
#include "latgas/fock.hpp"
#include "latgas/heat_kernel.hpp"
#include "latgas/lattice.hpp"
#include "latgas/rates.hpp"
#include "latgas/rng.hpp"

namespace latgas {

// Either the full configuration space {0,1}^sites or one fixed-particle-count
// sector of it. States are occupancy bitmasks over torus site indices.
class StateSpace {
  public:
    static StateSpace full(const Torus& torus) {
        check(torus);
        StateSpace s(torus);
        s.sector_ = -1;
        s.dim_ = int64_t(1) << torus.num_sites();
        return s;
    }

    static StateSpace sector(const Torus& torus, int particle_count) {
        check(torus);
        StateSpace s(torus);
        const int64_t sites = torus.num_sites();
        if (particle_count < 0 || particle_count > sites)
            throw ConfigError("state space: particle count out of range");
        s.sector_ = particle_count;
        s.states_.reserve(size_t(binomial_i(sites, particle_count)));
        const uint32_t all = uint32_t((int64_t(1) << sites) - 1);
        for (uint32_t m = 0;; ++m) {
            if (__builtin_popcount(m) == particle_count) s.states_.push_back(m);
            if (m == all) break;
        }
        s.dim_ = int64_t(s.states_.size());
        return s;
    }

    const Torus& torus() const { return torus_; }
    int64_t dim() const { return dim_; }
    bool is_full() const { return sector_ < 0; }
    int particle_count() const { return sector_; }

    uint32_t mask_of(int64_t index) const {
        return is_full() ? uint32_t(index) : states_[size_t(index)];
    }

    int64_t index_of(uint32_t mask) const {
        if (is_full()) return int64_t(mask);
        auto it = std::lower_bound(states_.begin(), states_.end(), mask);
        return int64_t(it - states_.begin());
    }

    // Stationary weights: product Bernoulli(rho) on the full space, uniform on
    // a sector (the canonical ensemble).
    std::vector<double> weights(double rho) const {
        std::vector<double> w(static_cast<size_t>(dim_));
        if (is_full()) {
            const int64_t sites = torus_.num_sites();
            for (int64_t i = 0; i < dim_; ++i) {
                const int k = __builtin_popcount(uint32_t(i));
                w[size_t(i)] =
                    std::pow(rho, k) * std::pow(1.0 - rho, double(sites - k));
            }
        } else {
            std::fill(w.begin(), w.end(), 1.0 / double(dim_));
        }
        return w;
    }

  private:
    explicit StateSpace(const Torus& torus) : torus_(torus) {}
    static void check(const Torus& torus) {
        if (torus.num_sites() > kMaxSupportBits + 1)
            throw SizeError("state space: torus has too many sites for exact enumeration");
    }

    Torus torus_;
    int sector_ = -1;
    int64_t dim_ = 0;
    std::vector<uint32_t> states_;
};

// Row-compressed Markov generator: rows sum to zero, off-diagonals >= 0,
// symmetric with respect to the stationary weights.
struct SparseOperator {
    std::vector<int64_t> row_ptr;
    std::vector<int32_t> col;
    std::vector<double> val;
    double max_exit_rate = 0.0;

    int64_t dim() const { return int64_t(row_ptr.size()) - 1; }

    void apply(const std::vector<double>& in, std::vector<double>& out) const {
        out.assign(in.size(), 0.0);
        for (int64_t r = 0; r < dim(); ++r) {
            double acc = 0.0;
            for (int64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += val[k] * in[col[k]];
            out[r] = acc;
        }
    }

    std::vector<double> apply(const std::vector<double>& in) const {
        std::vector<double> out;
        apply(in, out);
        return out;
    }

    void export_coo(std::ostream& os) const {
        for (int64_t r = 0; r < dim(); ++r)
            for (int64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
                os << r << " " << col[k] << " " << val[k] << "\n";
    }
};

// (L F)(eta) = sum_bonds c_b(eta) (F(eta^b) - F(eta)). Bonds are the directed
// unit-step pairs of the torus, so side 2 carries bond multiplicity 2.
inline SparseOperator build_generator(const StateSpace& space, const RateFamily& rf) {
    const Torus& torus = space.torus();
    if (rf.dim() != torus.dim()) throw ConfigError("generator: dimension mismatch");
    if (space.dim() > (int64_t(1) << 21)) throw SizeError("generator: state space too large");

    // window gather tables per (site, axis)
    const int d = torus.dim();
    const int64_t sites = torus.num_sites();
    std::vector<std::vector<int>> window_ids(size_t(sites) * d);
    for (int64_t s = 0; s < sites; ++s) {
        const Coord x = torus.site(s);
        for (int axis = 0; axis < d; ++axis) {
            auto& ids = window_ids[size_t(s) * d + axis];
            for (const Coord& off : rf.window_offsets(axis))
                ids.push_back(int(torus.index(add(x, off))));
        }
    }

    SparseOperator op;
    op.row_ptr.push_back(0);
    std::vector<std::pair<int32_t, double>> row;
    for (int64_t idx = 0; idx < space.dim(); ++idx) {
        const uint32_t mask = space.mask_of(idx);
        row.clear();
        double exit = 0.0;
        for (int64_t s = 0; s < sites; ++s) {
            for (int axis = 0; axis < d; ++axis) {
                const int64_t nb = torus.neighbor(s, axis, +1);
                const int oa = (mask >> s) & 1, ob = (mask >> nb) & 1;
                if (oa == ob) continue;
                const auto& ids = window_ids[size_t(s) * d + axis];
                uint32_t wm = 0;
                for (size_t k = 0; k < ids.size(); ++k)
                    if ((mask >> ids[k]) & 1) wm |= (1u << k);
                const double rate = rf.window_table(axis)[wm];
                const uint32_t target = mask ^ (1u << s) ^ (1u << nb);
                row.emplace_back(int32_t(space.index_of(target)), rate);
                exit += rate;
            }
        }
        row.emplace_back(int32_t(idx), -exit);
        std::sort(row.begin(), row.end());
        size_t w = 0;
        for (size_t i = 0; i < row.size(); ++i) {
            if (w > 0 && row[w - 1].first == row[i].first)
                row[w - 1].second += row[i].second;
            else
                row[w++] = row[i];
        }
        for (size_t i = 0; i < w; ++i) {
            op.col.push_back(row[i].first);
            op.val.push_back(row[i].second);
        }
        op.row_ptr.push_back(int64_t(op.col.size()));
        op.max_exit_rate = std::max(op.max_exit_rate, exit);
    }
    return op;
}

// L-bar = (1/2) sum_x sum_y Q_{y-x} pi_{x,y}; each unordered pair {a,b} ends up
// with rate Q_{b-a}. Requires the kernel support to fit within half the torus.
inline SparseOperator build_sep_generator(const StateSpace& space, const JumpKernel& q) {
    const Torus& torus = space.torus();
    if (q.dim() != torus.dim()) throw ConfigError("sep generator: dimension mismatch");
    if (torus.side() <= 2 * q.radius())
        throw ConfigError("sep generator: kernel support wraps ambiguously on this torus");

    const int64_t sites = torus.num_sites();
    std::vector<std::vector<std::pair<int, double>>> jump_table(static_cast<size_t>(sites));
    for (int64_t s = 0; s < sites; ++s) {
        const Coord x = torus.site(s);
        for (const auto& [off, rate] : q.entries())
            jump_table[size_t(s)].emplace_back(int(torus.index(add(x, off))), 0.5 * rate);
    }

    SparseOperator op;
    op.row_ptr.push_back(0);
    std::vector<std::pair<int32_t, double>> row;
    for (int64_t idx = 0; idx < space.dim(); ++idx) {
        const uint32_t mask = space.mask_of(idx);
        row.clear();
        double exit = 0.0;
        for (int64_t s = 0; s < sites; ++s) {
            for (const auto& [target_site, half_rate] : jump_table[size_t(s)]) {
                const int oa = (mask >> s) & 1, ob = (mask >> target_site) & 1;
                if (oa == ob) continue;
                const uint32_t target = mask ^ (1u << s) ^ (1u << target_site);
                row.emplace_back(int32_t(space.index_of(target)), half_rate);
                exit += half_rate;
            }
        }
        row.emplace_back(int32_t(idx), -exit);
        std::sort(row.begin(), row.end());
        size_t w = 0;
        for (size_t i = 0; i < row.size(); ++i) {
            if (w > 0 && row[w - 1].first == row[i].first)
                row[w - 1].second += row[i].second;
            else
                row[w++] = row[i];
        }
        for (size_t i = 0; i < w; ++i) {
            op.col.push_back(row[i].first);
            op.val.push_back(row[i].second);
        }
        op.row_ptr.push_back(int64_t(op.col.size()));
        op.max_exit_rate = std::max(op.max_exit_rate, exit);
    }
    return op;
}

// --- functions on a state space -------------------------------------------------

inline std::vector<double> dense_of_local(const StateSpace& space, const LocalFunction& f) {
    const Torus& torus = space.torus();
    std::vector<int> site_ids;
    for (const Coord& c : f.support()) site_ids.push_back(int(torus.index(c)));
    std::vector<double> out(size_t(space.dim()));
    for (int64_t i = 0; i < space.dim(); ++i) {
        const uint32_t mask = space.mask_of(i);
        uint32_t fm = 0;
        for (size_t k = 0; k < site_ids.size(); ++k)
            if ((mask >> site_ids[k]) & 1) fm |= (1u << k);
        out[size_t(i)] = f.value(fm);
    }
    return out;
}

inline double inner(const std::vector<double>& w, const std::vector<double>& f,
                    const std::vector<double>& g) {
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * f[i] * g[i];
    return s;
}

inline double mean(const std::vector<double>& w, const std::vector<double>& f) {
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
    return s;
}

inline double variance(const std::vector<double>& w, const std::vector<double>& f) {
    const double m = mean(w, f);
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * (f[i] - m) * (f[i] - m);
    return s;
}

// <F (-L)^k F>_w with the power split to keep the result a true square for
// even k.
inline double sobolev_seminorm_sq(const SparseOperator& op, const std::vector<double>& w,
                                  const std::vector<double>& f, int k) {
    if (k < 0) throw ConfigError("sobolev: negative order");
    std::vector<double> left = f, right = f, tmp;
    const int a = k / 2, b = k - k / 2;
    for (int i = 0; i < a; ++i) {
        op.apply(left, tmp);
        for (double& v : tmp) v = -v;
        left.swap(tmp);
    }
    for (int i = 0; i < b; ++i) {
        op.apply(right, tmp);
        for (double& v : tmp) v = -v;
        right.swap(tmp);
    }
    return inner(w, left, right);
}

inline double dirichlet_form(const SparseOperator& op, const std::vector<double>& w,
                             const std::vector<double>& f) {
    return sobolev_seminorm_sq(op, w, f, 1);
}

// e^{tL} F with max-norm truncation error below tol.
inline std::vector<double> apply_semigroup(const SparseOperator& op, double t,
                                           std::vector<double> f, double tol = 1e-10) {
    auto apply = [&op](const std::vector<double>& in, std::vector<double>& out) {
        op.apply(in, out);
    };
    return uniformized_expm(apply, std::max(op.max_exit_rate, 1e-300), t, std::move(f), tol);
}

// pi_b F on a state space, for b the bond (site, site+e_axis).
inline std::vector<double> kawasaki_dense(const StateSpace& space, int64_t site, int axis,
                                          const std::vector<double>& f) {
    const Torus& torus = space.torus();
    const int64_t nb = torus.neighbor(site, axis, +1);
    std::vector<double> out(f.size());
    for (int64_t i = 0; i < space.dim(); ++i) {
        const uint32_t mask = space.mask_of(i);
        const int oa = (mask >> site) & 1, ob = (mask >> nb) & 1;
        if (oa == ob) {
            out[size_t(i)] = 0.0;
        } else {
            const uint32_t target = mask ^ (1u << site) ^ (1u << nb);
            out[size_t(i)] = f[size_t(space.index_of(target))] - f[size_t(i)];
        }
    }
    return out;
}

// sum over torus bonds of <(pi_b F)^2>_w
inline double gradient_energy(const StateSpace& space, const std::vector<double>& w,
                              const std::vector<double>& f) {
    double total = 0.0;
    const Torus& torus = space.torus();
    for (int64_t s = 0; s < torus.num_sites(); ++s)
        for (int axis = 0; axis < torus.dim(); ++axis) {
            const std::vector<double> g = kawasaki_dense(space, s, axis, f);
            total += inner(w, g, g);
        }
    return total;
}

// --- chaos coefficients of a dense state function -------------------------------

// D_x on a dense full-space vector; the result does not depend on bit x.
inline std::vector<double> glauber_dense(const StateSpace& space, int64_t site,
                                         const std::vector<double>& f) {
    if (!space.is_full()) throw ConfigError("glauber_dense: needs the full space");
    std::vector<double> out(f.size());
    const uint32_t bit = 1u << site;
    for (int64_t i = 0; i < space.dim(); ++i) {
        const uint32_t m = uint32_t(i);
        out[size_t(i)] = f[m | bit] - f[m & ~bit];
    }
    return out;
}

// T_n F for all site subsets up to max_level, keyed by torus coordinates.
inline ChaosCoeffs chaos_of_state_function(const StateSpace& space, double rho,
                                           const std::vector<double>& f, int max_level) {
    if (!space.is_full()) throw ConfigError("chaos: needs the full space");
    const Torus& torus = space.torus();
    const std::vector<double> w = space.weights(rho);
    ChaosCoeffs out;
    out.dim = torus.dim();
    out.rho = rho;
    out.levels.resize(max_level + 1);

    const int64_t sites = torus.num_sites();
    std::vector<int64_t> y;
    std::function<void(int64_t, int, const std::vector<double>&)> rec =
        [&](int64_t first, int level, const std::vector<double>& g) {
            SiteSet key;
            for (int64_t s : y) key.push_back(torus.site(s));
            std::sort(key.begin(), key.end());
            const double v = mean(w, g);
            if (v != 0.0) out.levels[key.size()][key] = v;
            if (level == max_level) return;
            for (int64_t s = first; s < sites; ++s) {
                y.push_back(s);
                rec(s + 1, level + 1, glauber_dense(space, s, g));
                y.pop_back();
            }
        };
    rec(0, 0, f);
    return out;
}

// I_n of the level-n part, embedded on the state space.
inline std::vector<double> dense_of_chaos_level(const StateSpace& space, const ChaosCoeffs& c,
                                                int n) {
    const Torus& torus = space.torus();
    std::vector<double> out(size_t(space.dim()), 0.0);
    if (n > c.max_level()) return out;
    if (n == 0) {
        std::fill(out.begin(), out.end(), c.level0());
        return out;
    }
    for (const auto& [y, v] : c.levels[n]) {
        std::vector<int> ids;
        for (const Coord& x : y) ids.push_back(int(torus.index(x)));
        for (int64_t i = 0; i < space.dim(); ++i) {
            const uint32_t mask = space.mask_of(i);
            double prod = v;
            for (int id : ids) prod *= (((mask >> id) & 1) ? 1.0 : 0.0) - c.rho;
            out[size_t(i)] += prod;
        }
    }
    return out;
}

// --- energy comparison -----------------------------------------------------------

struct EnergyComparison {
    double min_lower_ratio = 0.0;   // min over probes of <F(-Lbar)F> / sum_b <(pi_b F)^2>
    double max_upper_ratio = 0.0;   // max over probes of <F(-Lbar)F> / <F(-L)F>
    double moving_particle_bound = 0.0;  // (1/2) sum_y Q_y |y|_1^3
    int probes_used = 0;
    int probes_skipped = 0;
};

// Random local functions with small support, reproducible from the seed.
inline std::vector<LocalFunction> standard_probes(const Torus& torus, double rho,
                                                  uint64_t seed, int random_count = 100) {
    std::vector<LocalFunction> probes;
    const int d = torus.dim();
    for (int64_t s = 0; s < torus.num_sites(); ++s)
        probes.push_back(LocalFunction::centered(d, torus.site(s), rho));
    for (int64_t s = 0; s < torus.num_sites(); ++s) {
        const int64_t s2 = torus.neighbor(s, 0, +1);
        if (s2 == s) continue;
        probes.push_back(LocalFunction::centered(d, torus.site(s), rho) *
                         LocalFunction::centered(d, torus.site(s2), rho));
    }
    RngStream rng(seed, 0xC0FFEE);
    for (int i = 0; i < random_count; ++i) {
        const int nsup = 1 + int(rng.next_below(3));
        std::set<Coord> sup;
        while (int(sup.size()) < nsup) sup.insert(torus.site(int64_t(rng.next_below(uint64_t(torus.num_sites())))));
        std::vector<Coord> supp(sup.begin(), sup.end());
        std::vector<double> table(size_t(1) << supp.size());
        for (double& v : table) v = 2.0 * rng.next_double() - 1.0;
        probes.push_back(LocalFunction(d, supp, table));
    }
    return probes;
}

inline EnergyComparison energy_comparison(const StateSpace& space, const SparseOperator& op_l,
                                          const SparseOperator& op_lbar, const JumpKernel& q,
                                          double rho, uint64_t seed = 7) {
    const std::vector<double> w = space.weights(rho);
    EnergyComparison result;
    result.min_lower_ratio = std::numeric_limits<double>::infinity();
    result.max_upper_ratio = 0.0;
    for (const auto& [y, rate] : q.entries())
        result.moving_particle_bound += 0.5 * rate * std::pow(double(l1_norm(y)), 3.0);

    for (const LocalFunction& probe : standard_probes(space.torus(), rho, seed)) {
        const std::vector<double> f = dense_of_local(space, probe);
        const double grad = gradient_energy(space, w, f);
        const double e_l = dirichlet_form(op_l, w, f);
        const double e_lbar = dirichlet_form(op_lbar, w, f);
        if (grad < 1e-14 || e_l < 1e-14) {
            ++result.probes_skipped;  // constants-in-sector directions: 0/0 guarded
            continue;
        }
        ++result.probes_used;
        result.min_lower_ratio = std::min(result.min_lower_ratio, e_lbar / grad);
        result.max_upper_ratio = std::max(result.max_upper_ratio, e_lbar / e_l);
    }
    return result;
}

}  // namespace latgas
