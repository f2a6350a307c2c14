// Kinetic Monte Carlo for the exclusion dynamics (rejection sampling with the
// per-bond cap lambda), the stationary two-point variance estimator, the
// translation-average regularization operator, and its time schedule.
#pragma once

#include <cmath>
#include <thread>

#include "latgas/config_space.hpp"
#include "latgas/core.hpp"
#include "latgas/fock.hpp"
#include "latgas/lattice.hpp"
#include "latgas/rates.hpp"
#include "latgas/rng.hpp"

namespace latgas {

// Occupancy bit-field over torus sites.
class PackedConfig {
  public:
    explicit PackedConfig(int64_t sites) : sites_(sites), words_((sites + 63) / 64, 0) {}

    int get(int64_t site) const { return (words_[size_t(site >> 6)] >> (site & 63)) & 1; }
    void set(int64_t site, int v) {
        const uint64_t bit = uint64_t(1) << (site & 63);
        if (v)
            words_[size_t(site >> 6)] |= bit;
        else
            words_[size_t(site >> 6)] &= ~bit;
    }
    void swap_sites(int64_t a, int64_t b) {
        const int va = get(a), vb = get(b);
        if (va != vb) {
            set(a, vb);
            set(b, va);
        }
    }
    int64_t sites() const { return sites_; }
    int64_t count() const {
        int64_t c = 0;
        for (uint64_t w : words_) c += __builtin_popcountll(w);
        return c;
    }

  private:
    int64_t sites_;
    std::vector<uint64_t> words_;
};

// An observable the simulator can evaluate on a packed configuration: a local
// function together with a translation average over a box of radius K
// (K = 0 means the bare function).
class Observable {
  public:
    Observable(const Torus& torus, const LocalFunction& u, int average_radius = 0)
        : base_(u), radius_(average_radius) {
        if (average_radius < 0) throw ConfigError("observable: negative average radius");
        const int d = torus.dim();
        Cube box(d, coord_zero(), 2 * average_radius + 1);
        for (const Coord& shift : box.sites()) {
            // gather list in support order; bit i of the mask is support site i
            std::vector<int64_t> ids;
            for (const Coord& c : u.support()) ids.push_back(torus.index(add(c, shift)));
            gather_.push_back(std::move(ids));
        }
        norm_ = 1.0 / double(gather_.size());
    }

    double eval(const PackedConfig& eta) const {
        double acc = 0.0;
        for (const auto& ids : gather_) {
            uint32_t mask = 0;
            for (size_t i = 0; i < ids.size(); ++i)
                if (eta.get(ids[i])) mask |= (1u << i);
            acc += base_.value(mask);
        }
        return acc * norm_;
    }

    const LocalFunction& base() const { return base_; }
    int average_radius() const { return radius_; }

  private:
    LocalFunction base_;
    int radius_;
    std::vector<std::vector<int64_t>> gather_;
    double norm_ = 1.0;
};

// R_K u = |Lambda_K|^{-1} sum_{x in Lambda_K} tau_x u as a dense local function
// (small K only; the simulator uses Observable instead).
inline LocalFunction regularize(const LocalFunction& u, int k, const Torus* torus = nullptr) {
    if (k < 0) throw ConfigError("regularize: negative radius");
    if (k == 0) return u;
    Cube box(u.dim(), coord_zero(), 2 * k + 1);
    LocalFunction acc = LocalFunction::constant(u.dim(), 0.0);
    for (const Coord& x : box.sites()) acc = acc + translate(x, u, torus);
    return (1.0 / double(box.volume())) * acc;
}

// Chaos coefficients of R_K u without materializing the big support:
// T_n(tau_x u)(Y) = T_n u(Y - x).
inline ChaosCoeffs chaos_of_regularized(const LocalFunction& u, double rho, int k,
                                        const Torus* torus = nullptr) {
    const ChaosCoeffs base = chaos_coeffs(u, rho);
    ChaosCoeffs out;
    out.dim = base.dim;
    out.rho = rho;
    out.levels.resize(base.levels.size());
    Cube box(u.dim(), coord_zero(), 2 * k + 1);
    const double norm = 1.0 / double(box.volume());
    for (int n = 0; n <= base.max_level(); ++n)
        for (const auto& [y, v] : base.levels[n])
            for (const Coord& x : box.sites()) {
                SiteSet shifted;
                for (const Coord& c : y)
                    shifted.push_back(torus ? torus->wrap(add(c, x)) : add(c, x));
                std::sort(shifted.begin(), shifted.end());
                out.add(shifted, norm * v);
            }
    out.prune(0.0);
    return out;
}

// Exact Var_rho[R_K u] from pair covariances: the number of displacement
// coincidences in Lambda_K^2 is a product of (2K+1-|h_i|) factors.
inline double regularized_variance(const LocalFunction& u, double rho, int k) {
    const BernoulliMeasure mu{rho};
    const int d = u.dim();
    const int side = 2 * k + 1;
    const int reach = 2 * support_radius(u);
    Cube displacements(d, coord_zero(), 2 * std::min(reach, 2 * k) + 1);
    double total = 0.0;
    for (const Coord& h : displacements.sites()) {
        double count = 1.0;
        for (int i = 0; i < d; ++i) {
            const int overlap = side - std::abs(h[i]);
            if (overlap <= 0) {
                count = 0.0;
                break;
            }
            count *= overlap;
        }
        if (count == 0.0) continue;
        total += count * covariance(mu, u, translate(h, u));
    }
    const double cells = std::pow(double(side), d);
    return total / (cells * cells);
}

// t_n = theta^n t_0, K_n = floor(t_n^{(1-eps)/2}), K(t) constant on [t_n, t_{n+1}).
struct RegularizationSchedule {
    double theta = 128.0;
    double epsilon = 0.1;
    int ell_u = 1;
    int dim = 1;
    double t0 = 0.0;

    RegularizationSchedule(int dim_, int ell_u_, double theta_ = 128.0, double epsilon_ = 0.1)
        : theta(theta_), epsilon(epsilon_), ell_u(ell_u_), dim(dim_) {
        if (theta <= 100.0) throw ConfigError("schedule: theta must exceed 100");
        if (epsilon <= 0.0 || epsilon >= 1.0) throw ConfigError("schedule: epsilon in (0,1)");
        t0 = std::max(10.0 * (1.0 + ell_u), 2.0 * (dim + 2) * theta);
    }

    double t_n(int n) const { return std::pow(theta, n) * t0; }

    int k_n(int n) const { return int(std::floor(std::pow(t_n(n), 0.5 * (1.0 - epsilon)))); }

    // K(t); times below t_0 use the first rung.
    int k_of(double t) const {
        if (t <= t0) return k_n(0);
        const int n = int(std::floor(std::log(t / t0) / std::log(theta)));
        return k_n(n);
    }
};

// --- kinetic Monte Carlo ----------------------------------------------------------

// Exclusion trajectory under rejection KMC: candidate events ring at rate
// lambda per directed bond; a candidate on bond b is accepted with probability
// c_b(eta)/lambda and applied when the endpoint occupancies differ. The state
// at the end of each evolve() is an exact draw of e^{tL}.
class Trajectory {
  public:
    Trajectory(const Torus& torus, const RateFamily& rf, double rho, uint64_t seed,
               uint64_t stream)
        : torus_(torus), rf_(rf), config_(torus.num_sites()), rng_(seed, stream) {
        if (rf.dim() != torus.dim()) throw ConfigError("trajectory: dimension mismatch");
        const int64_t sites = torus.num_sites();
        const int d = torus.dim();
        n_bonds_ = sites * d;
        // gather tables: bond endpoints and rate-window site ids per bond
        partner_.resize(size_t(n_bonds_));
        window_start_.resize(size_t(n_bonds_) + 1, 0);
        for (int64_t s = 0; s < sites; ++s)
            for (int axis = 0; axis < d; ++axis) {
                const int64_t b = s * d + axis;
                partner_[size_t(b)] = int32_t(torus.neighbor(s, axis, +1));
                window_start_[size_t(b) + 1] =
                    window_start_[size_t(b)] + int32_t(rf.window_offsets(axis).size());
            }
        window_ids_.resize(size_t(window_start_.back()));
        for (int64_t s = 0; s < sites; ++s)
            for (int axis = 0; axis < d; ++axis) {
                const int64_t b = s * d + axis;
                const Coord x = torus.site(s);
                int32_t w = window_start_[size_t(b)];
                for (const Coord& off : rf.window_offsets(axis))
                    window_ids_[size_t(w++)] = int32_t(torus.index(add(x, off)));
            }
        // skip the acceptance draw only when every rate equals the cap
        accept_always_ = true;
        for (int axis = 0; axis < d; ++axis)
            for (double v : rf.window_table(axis))
                if (v != rf.lambda()) accept_always_ = false;
        // integer acceptance thresholds per (axis, window pattern):
        // accept when u32 < floor(p 2^32), tie-broken exactly at equality
        thresh_start_.resize(size_t(d) + 1, 0);
        for (int axis = 0; axis < d; ++axis)
            thresh_start_[size_t(axis) + 1] =
                thresh_start_[size_t(axis)] + int64_t(rf.window_table(axis).size());
        thresh_floor_.resize(size_t(thresh_start_.back()));
        thresh_frac_.resize(size_t(thresh_start_.back()));
        for (int axis = 0; axis < d; ++axis) {
            const auto& table = rf.window_table(axis);
            for (size_t k = 0; k < table.size(); ++k) {
                const double scaled = (table[k] / rf.lambda()) * 4294967296.0;
                const double fl = std::floor(scaled);
                const size_t at = size_t(thresh_start_[size_t(axis)]) + k;
                thresh_floor_[at] = fl >= 4294967296.0 ? 0xFFFFFFFFu : uint32_t(fl);
                thresh_frac_[at] = scaled - fl;
                if (fl >= 4294967296.0) thresh_frac_[at] = 1.0;
            }
        }
        // bond id -> (site, axis) tables; avoids div/mod in the event loop
        bond_site_.resize(size_t(n_bonds_));
        bond_axis_.resize(size_t(n_bonds_));
        for (int64_t s = 0; s < sites; ++s)
            for (int axis = 0; axis < d; ++axis) {
                bond_site_[size_t(s * d + axis)] = int32_t(s);
                bond_axis_[size_t(s * d + axis)] = uint8_t(axis);
            }
        // stationary start
        for (int64_t s = 0; s < sites; ++s) config_.set(s, rng_.next_double() < rho ? 1 : 0);
    }

    const PackedConfig& config() const { return config_; }
    double time() const { return time_; }
    const Torus& torus() const { return torus_; }

    // Advance by dt. The number of candidate events on [0, dt] is
    // Poisson(lambda * bonds * dt); candidates are iid uniform bonds. The
    // acceptance test only runs when the swap would act (endpoints differ),
    // which leaves the law of the chain unchanged.
    void evolve(double dt) {
        if (dt < 0.0) throw DomainError("trajectory: negative time step");
        const double total_rate = rf_.lambda() * double(n_bonds_);
        const int64_t events = rng_.poisson(total_rate * dt);
        const uint64_t nb = uint64_t(n_bonds_);
        const uint64_t lemire_cut = (0x100000000ull - nb) % nb;  // bias strip of 32-bit pick
        for (int64_t e = 0; e < events; ++e) {
            // bond index from 32 bits via multiply-shift, exactly uniform
            uint64_t prod;
            do {
                prod = uint64_t(rng_.next_u32()) * nb;
            } while ((prod & 0xFFFFFFFFull) < lemire_cut);
            const int64_t b = int64_t(prod >> 32);
            const int64_t s = bond_site_[size_t(b)];
            const int64_t y = partner_[size_t(b)];
            const int ox = config_.get(s), oy = config_.get(y);
            if (ox == oy) continue;  // the swap acts trivially
            if (!accept_always_) {
                const int axis = bond_axis_[size_t(b)];
                uint32_t wm = 0;
                const int32_t w0 = window_start_[size_t(b)];
                const int32_t w1 = window_start_[size_t(b) + 1];
                for (int32_t w = w0; w < w1; ++w)
                    if (config_.get(window_ids_[size_t(w)])) wm |= (1u << (w - w0));
                const size_t at = size_t(thresh_start_[size_t(axis)]) + wm;
                const uint32_t u = rng_.next_u32();
                if (u >= thresh_floor_[at]) {
                    // boundary cell: accept with the exact fractional part
                    if (u > thresh_floor_[at] || rng_.next_double() >= thresh_frac_[at])
                        continue;
                }
            }
            config_.swap_sites(s, y);
        }
        time_ += dt;
    }

    // One thinning proposal from the current state without applying it;
    // returns the accepted bond id or -1. Used to test the kernel against the
    // exact generator row.
    int64_t propose_once() {
        const int64_t b = int64_t(rng_.next_below(uint64_t(n_bonds_)));
        const int64_t axis = b % torus_.dim();
        const int64_t s = b / torus_.dim();
        const int64_t y = partner_[size_t(b)];
        if (!accept_always_) {
            uint32_t wm = 0;
            const int32_t w0 = window_start_[size_t(b)];
            const int32_t w1 = window_start_[size_t(b) + 1];
            for (int32_t w = w0; w < w1; ++w)
                if (config_.get(window_ids_[size_t(w)])) wm |= (1u << (w - w0));
            const double rate = rf_.window_table(int(axis))[wm];
            if (rate < rf_.lambda() && rng_.next_double() * rf_.lambda() >= rate) return -1;
        }
        if (config_.get(s) == config_.get(y)) return -1;
        return b;
    }

  private:
    Torus torus_;
    const RateFamily& rf_;
    PackedConfig config_;
    RngStream rng_;
    double time_ = 0.0;
    int64_t n_bonds_ = 0;
    bool accept_always_ = true;
    std::vector<int32_t> partner_;
    std::vector<int32_t> window_start_;
    std::vector<int32_t> window_ids_;
    std::vector<int32_t> bond_site_;
    std::vector<uint8_t> bond_axis_;
    std::vector<int64_t> thresh_start_;
    std::vector<uint32_t> thresh_floor_;
    std::vector<double> thresh_frac_;
};

struct VarianceEstimate {
    double t = 0.0;
    double value = 0.0;
    double stderr_jack = 0.0;
    int64_t replicas = 0;
};

namespace detail {

// delete-one jackknife of the sample covariance
inline double jackknife_cov_stderr(const std::vector<double>& xs, const std::vector<double>& ys) {
    const int64_t n = int64_t(xs.size());
    if (n < 3) return 0.0;
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        sx += xs[size_t(i)];
        sy += ys[size_t(i)];
        sxy += xs[size_t(i)] * ys[size_t(i)];
    }
    std::vector<double> theta(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double x = xs[size_t(i)], y = ys[size_t(i)];
        theta[size_t(i)] =
            ((sxy - x * y) - (sx - x) * (sy - y) / double(n - 1)) / double(n - 2);
    }
    double tm = 0.0;
    for (double v : theta) tm += v;
    tm /= double(n);
    double acc = 0.0;
    for (double v : theta) acc += (v - tm) * (v - tm);
    return std::sqrt(acc * double(n - 1) / double(n));
}

}  // namespace detail

// Var_rho[P_t u] via the stationary two-point identity <(P_t u)^2> = <u P_2t u>:
// R independent stationary starts are each evolved to time 2t and the sample
// covariance of (u at 0, u at 2t) is returned with a jackknife error bar.
// Checkpoints lets one run serve a whole time grid (sorted, distinct).
struct VarianceRun {
    std::vector<VarianceEstimate> points;
};

inline VarianceRun estimate_variance_grid(const Torus& torus, const RateFamily& rf, double rho,
                                          const std::vector<double>& t_grid,
                                          const std::vector<Observable>& observables,
                                          int64_t replicas, uint64_t seed,
                                          bool enforce_horizon = true, int threads = 0) {
    if (t_grid.empty() || observables.size() != t_grid.size())
        throw ConfigError("variance estimator: one observable per grid time");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1])
            throw ConfigError("variance estimator: time grid must increase");
    const double horizon = (double(torus.side()) / 6.0) * (double(torus.side()) / 6.0) /
                           rf.lambda();
    if (enforce_horizon && t_grid.back() > horizon)
        throw DomainError("variance estimator: t exceeds the boundary-safe horizon (N/6)^2/lambda");
    if (replicas < 3) throw ConfigError("variance estimator: need at least 3 replicas");

    const size_t nt = t_grid.size();
    std::vector<std::vector<double>> x0(nt, std::vector<double>(size_t(replicas)));
    std::vector<std::vector<double>> xt(nt, std::vector<double>(size_t(replicas)));

    int hw = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    hw = int(std::min<int64_t>(hw, replicas));

    auto worker = [&](int64_t first, int64_t last) {
        for (int64_t r = first; r < last; ++r) {
            Trajectory traj(torus, rf, rho, seed, uint64_t(r));
            for (size_t k = 0; k < nt; ++k) x0[k][size_t(r)] = observables[k].eval(traj.config());
            double reached = 0.0;
            for (size_t k = 0; k < nt; ++k) {
                traj.evolve(2.0 * t_grid[k] - reached);
                reached = 2.0 * t_grid[k];
                xt[k][size_t(r)] = observables[k].eval(traj.config());
            }
        }
    };
    if (hw == 1) {
        worker(0, replicas);
    } else {
        std::vector<std::thread> pool;
        const int64_t chunk = (replicas + hw - 1) / hw;
        for (int i = 0; i < hw; ++i) {
            const int64_t first = i * chunk;
            const int64_t last = std::min(replicas, first + chunk);
            if (first >= last) break;
            pool.emplace_back(worker, first, last);
        }
        for (auto& th : pool) th.join();
    }

    VarianceRun run;
    for (size_t k = 0; k < nt; ++k) {
        double mx = 0.0, my = 0.0;
        for (int64_t r = 0; r < replicas; ++r) {
            mx += x0[k][size_t(r)];
            my += xt[k][size_t(r)];
        }
        mx /= double(replicas);
        my /= double(replicas);
        double cov = 0.0;
        for (int64_t r = 0; r < replicas; ++r)
            cov += (x0[k][size_t(r)] - mx) * (xt[k][size_t(r)] - my);
        cov /= double(replicas - 1);
        VarianceEstimate est;
        est.t = t_grid[k];
        est.value = cov;
        est.stderr_jack = detail::jackknife_cov_stderr(x0[k], xt[k]);
        est.replicas = replicas;
        run.points.push_back(est);
    }
    return run;
}

inline VarianceEstimate estimate_variance(const Torus& torus, const RateFamily& rf, double rho,
                                          const LocalFunction& u, double t, int64_t replicas,
                                          uint64_t seed, bool enforce_horizon = true,
                                          int threads = 0) {
    if (t == 0.0) {
        // degenerate grid: the estimator reduces to the sample variance of u
        Observable obs(torus, u, 0);
        std::vector<double> xs(static_cast<size_t>(replicas));
        for (int64_t r = 0; r < replicas; ++r) {
            Trajectory traj(torus, rf, rho, seed, uint64_t(r));
            xs[size_t(r)] = obs.eval(traj.config());
        }
        double m = 0.0;
        for (double v : xs) m += v;
        m /= double(replicas);
        double var = 0.0;
        for (double v : xs) var += (v - m) * (v - m);
        var /= double(replicas - 1);
        VarianceEstimate est;
        est.t = 0.0;
        est.value = var;
        est.stderr_jack = detail::jackknife_cov_stderr(xs, xs);
        est.replicas = replicas;
        return est;
    }
    VarianceRun run = estimate_variance_grid(torus, rf, rho, {t}, {Observable(torus, u, 0)},
                                             replicas, seed, enforce_horizon, threads);
    return run.points[0];
}

}  // namespace latgas
