// Bond jump-rate families c_b(eta): machine-checked validity (two-sided
// bounds, endpoint-role symmetry, endpoint independence) and O(1) tabulated
// evaluation for the simulation hot loop.
#pragma once

#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "latgas/config_space.hpp"
#include "latgas/core.hpp"
#include "latgas/lattice.hpp"

namespace latgas {

// A candidate rule before validation. fn(axis, reverse, mask) returns the rate
// c_{0,e}(eta) for e = +e_axis (reverse=false) or e = -e_axis (reverse=true);
// mask encodes the occupancies of the sorted window Lambda_r(0) u Lambda_r(e),
// endpoints included so that endpoint-dependent (invalid) rules are expressible.
struct RateRule {
    int dim = 1;
    int range = 1;
    double lambda = 1.0;
    std::function<double(int axis, bool reverse, uint32_t mask)> fn;
    std::string spec;  // identifier string, e.g. "kind=neighbor_weighted,a=0.5"
};

inline std::vector<Coord> rate_window_sites(int dim, int range, int axis, bool reverse) {
    Coord e = unit(axis);
    if (reverse) e = negate(e);
    std::set<Coord> s;
    Cube w0(dim, coord_zero(), 2 * range + 1);
    for (const Coord& x : w0.sites()) {
        s.insert(x);
        s.insert(add(x, e));
    }
    return std::vector<Coord>(s.begin(), s.end());
}

struct ValidationReport {
    bool ok = true;
    std::string failed_condition;  // "bounds", "endpoint-independence", "swap-symmetry"
    int axis = -1;
    uint32_t counterexample_mask = 0;
    std::vector<Coord> window;
    std::string detail;

    std::string to_string(int dim) const {
        if (ok) return "pass";
        std::ostringstream os;
        os << "fail(" << failed_condition << ") axis=" << axis << " window=[";
        for (size_t i = 0; i < window.size(); ++i)
            os << latgas::to_string(window[i], dim)
               << "=" << ((counterexample_mask >> i) & 1) << (i + 1 < window.size() ? " " : "");
        os << "] " << detail;
        return os.str();
    }
};

// Exhaustive check of the rate hypotheses over every window configuration.
inline ValidationReport validate_rule(const RateRule& rule) {
    ValidationReport rep;
    for (int axis = 0; axis < rule.dim; ++axis) {
        const auto wf = rate_window_sites(rule.dim, rule.range, axis, false);
        if (wf.size() > 24) throw SizeError("rate validation: window exceeds 24 sites");
        const auto wr = rate_window_sites(rule.dim, rule.range, axis, true);
        const Coord zero = coord_zero();
        const Coord e = unit(axis);
        const int i0 = int(std::lower_bound(wf.begin(), wf.end(), zero) - wf.begin());
        const int ie = int(std::lower_bound(wf.begin(), wf.end(), e) - wf.begin());
        // bit of (site - e) in the reverse window, for the swapped-role evaluation
        std::vector<int> rev_bit(wf.size());
        for (size_t i = 0; i < wf.size(); ++i) {
            Coord c = sub(wf[i], e);
            rev_bit[i] = int(std::lower_bound(wr.begin(), wr.end(), c) - wr.begin());
        }
        const uint32_t count = uint32_t(1) << wf.size();
        for (uint32_t m = 0; m < count; ++m) {
            const double c = rule.fn(axis, false, m);
            if (!(c >= 1.0 - 1e-12 && c <= rule.lambda + 1e-12)) {
                rep = {false, "bounds", axis, m, wf,
                       "rate " + std::to_string(c) + " outside [1, lambda]"};
                return rep;
            }
            for (int endpoint : {i0, ie}) {
                const double cf = rule.fn(axis, false, m ^ (1u << endpoint));
                if (std::abs(cf - c) > 1e-12) {
                    rep = {false, "endpoint-independence", axis, m, wf,
                           "rate changes when the occupancy of an endpoint flips"};
                    return rep;
                }
            }
            uint32_t mr = 0;
            for (size_t i = 0; i < wf.size(); ++i)
                if (m & (1u << i)) mr |= (1u << rev_bit[i]);
            const double cswap = rule.fn(axis, true, mr);
            if (std::abs(cswap - c) > 1e-12) {
                rep = {false, "swap-symmetry", axis, m, wf,
                       "c_{0,e}(eta) != c_{e,0}(eta)"};
                return rep;
            }
        }
    }
    return rep;
}

// A validated family with per-axis lookup tables over the reduced window (the
// window minus the two endpoints, which a valid rule cannot read).
class RateFamily {
  public:
    static RateFamily build(const RateRule& rule) {
        ValidationReport rep = validate_rule(rule);
        if (!rep.ok) throw ConfigError("invalid rate family: " + rep.to_string(rule.dim));
        RateFamily rf;
        rf.dim_ = rule.dim;
        rf.range_ = rule.range;
        rf.lambda_ = rule.lambda;
        rf.spec_ = rule.spec;
        rf.window_.resize(rule.dim);
        rf.table_.resize(rule.dim);
        for (int axis = 0; axis < rule.dim; ++axis) {
            const auto wf = rate_window_sites(rule.dim, rule.range, axis, false);
            const Coord zero = coord_zero();
            const Coord e = unit(axis);
            std::vector<Coord> red;
            std::vector<int> full_bit;
            for (size_t i = 0; i < wf.size(); ++i)
                if (wf[i] != zero && wf[i] != e) {
                    red.push_back(wf[i]);
                    full_bit.push_back(int(i));
                }
            std::vector<double> table(size_t(1) << red.size());
            for (uint32_t m = 0; m < table.size(); ++m) {
                uint32_t fm = 0;
                for (size_t i = 0; i < full_bit.size(); ++i)
                    if (m & (1u << i)) fm |= (1u << full_bit[i]);
                table[m] = rule.fn(axis, false, fm);
            }
            rf.window_[axis] = std::move(red);
            rf.table_[axis] = std::move(table);
        }
        return rf;
    }

    int dim() const { return dim_; }
    int range() const { return range_; }
    double lambda() const { return lambda_; }
    const std::string& spec() const { return spec_; }

    // Window offsets (relative to the lower bond endpoint) the rate reads.
    const std::vector<Coord>& window_offsets(int axis) const { return window_[axis]; }
    const std::vector<double>& window_table(int axis) const { return table_[axis]; }

    // Rate of the bond {x, x+e_axis} against an arbitrary occupancy reader.
    double evaluate(const Coord& x, int axis,
                    const std::function<int(const Coord&)>& occ) const {
        const auto& w = window_[axis];
        uint32_t m = 0;
        for (size_t i = 0; i < w.size(); ++i)
            if (occ(add(x, w[i]))) m |= (1u << i);
        return table_[axis][m];
    }

    // The same rate as a local function of the window occupancies (Z^d bond).
    LocalFunction rate_function(const Coord& x, int axis) const {
        const auto& w = window_[axis];
        std::vector<std::pair<Coord, int>> shifted;
        for (size_t i = 0; i < w.size(); ++i) shifted.emplace_back(add(x, w[i]), int(i));
        std::sort(shifted.begin(), shifted.end());
        std::vector<Coord> supp;
        std::vector<int> bit;
        for (auto& [c, i] : shifted) {
            supp.push_back(c);
            bit.push_back(i);
        }
        std::vector<double> tab(size_t(1) << supp.size());
        for (uint32_t m = 0; m < tab.size(); ++m) {
            uint32_t wm = 0;
            for (size_t i = 0; i < bit.size(); ++i)
                if (m & (1u << i)) wm |= (1u << bit[i]);
            tab[m] = table_[axis][wm];
        }
        return LocalFunction(dim_, std::move(supp), std::move(tab)).trimmed();
    }

    // true when c_b is the same constant for every bond and configuration
    bool is_constant() const {
        const double c0 = table_[0][0];
        for (const auto& t : table_)
            for (double v : t)
                if (v != c0) return false;
        return true;
    }

    double constant_rate() const {
        if (!is_constant()) throw ConfigError("constant_rate: family is not constant");
        return table_[0][0];
    }

  private:
    int dim_ = 1;
    int range_ = 1;
    double lambda_ = 1.0;
    std::string spec_;
    std::vector<std::vector<Coord>> window_;      // per axis, endpoints removed
    std::vector<std::vector<double>> table_;      // per axis, 2^|window| rates
};

// --- built-in families --------------------------------------------------------

inline RateRule ssep_rule(int dim) {
    RateRule r;
    r.dim = dim;
    r.range = 0;  // the constant rate reads no sites at all
    r.lambda = 1.0;
    r.spec = "kind=ssep";
    r.fn = [](int, bool, uint32_t) { return 1.0; };
    return r;
}

// c_{x,x+e} = 1 + a * (number of occupied range-1 window sites, endpoints
// excluded); the canonical non-gradient example.
inline RateRule neighbor_weighted_rule(int dim, double a) {
    if (a < 0.0 || a > 1.0) throw ConfigError("neighbor_weighted: need a in [0,1]");
    RateRule r;
    r.dim = dim;
    r.range = 1;
    const auto window = rate_window_sites(dim, 1, 0, false);
    r.lambda = 1.0 + a * double(window.size() - 2);
    {
        std::ostringstream os;
        os << "kind=neighbor_weighted,a=" << a;
        r.spec = os.str();
    }
    r.fn = [dim, a](int axis, bool reverse, uint32_t mask) {
        const auto w = rate_window_sites(dim, 1, axis, reverse);
        const Coord zero = coord_zero();
        Coord e = unit(axis);
        if (reverse) e = negate(e);
        double c = 1.0;
        for (size_t i = 0; i < w.size(); ++i)
            if (w[i] != zero && w[i] != e && (mask & (1u << i))) c += a;
        return c;
    };
    return r;
}

// Deliberately violates detailed balance by reading an endpoint; used to
// exercise the validator's counterexample path.
inline RateRule endpoint_dependent_rule(int dim) {
    RateRule r;
    r.dim = dim;
    r.range = 1;
    r.lambda = 2.0;
    r.spec = "kind=endpoint_dependent";
    r.fn = [dim](int axis, bool reverse, uint32_t mask) {
        const auto w = rate_window_sites(dim, 1, axis, reverse);
        const Coord zero = coord_zero();
        const int i0 = int(std::lower_bound(w.begin(), w.end(), zero) - w.begin());
        return 1.0 + ((mask >> i0) & 1);
    };
    return r;
}

// Parse "kind=...,param=value" identifiers used by experiment configs.
inline RateRule rule_from_spec(int dim, const std::string& spec) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("rate spec: expected key=value: " + item);
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    if (!kv.count("kind")) throw ConfigError("rate spec: missing kind");
    const std::string kind = kv["kind"];
    if (kind == "ssep") return ssep_rule(dim);
    if (kind == "neighbor_weighted") {
        if (!kv.count("a")) throw ConfigError("rate spec: neighbor_weighted needs a=...");
        return neighbor_weighted_rule(dim, std::stod(kv["a"]));
    }
    if (kind == "endpoint_dependent") return endpoint_dependent_rule(dim);
    throw ConfigError("rate spec: unknown kind " + kind);
}

}  // namespace latgas
