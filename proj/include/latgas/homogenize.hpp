// Finite-volume cell problem for the exclusion dynamics: the variational
// energy nu_bar over affine-plus-local competitors, the corrector, the
// approximated diffusion matrix and conductivity, the centered flux with its
// cancellation diagnostic, and the two-scale expansion of linear statistics.
#pragma once

#include <cmath>
#include <unordered_map>

#include "latgas/config_space.hpp"
#include "latgas/core.hpp"
#include "latgas/exact_generator.hpp"
#include "latgas/fock.hpp"
#include "latgas/lattice.hpp"
#include "latgas/rates.hpp"
#include "latgas/smallmat.hpp"

namespace latgas {

// Sparse symmetric PSD quadratic form sum_pairs w (v_i - v_j)^2 / ... stored as
// graph-Laplacian pair terms: apply(v)_i = sum over pairs w (v_i - v_j).
struct PairForm {
    int64_t dim = 0;
    std::vector<std::tuple<int32_t, int32_t, double>> pairs;  // i < j, weight

    void compress() {
        std::sort(pairs.begin(), pairs.end(),
                  [](const auto& a, const auto& b) {
                      return std::get<0>(a) != std::get<0>(b)
                                 ? std::get<0>(a) < std::get<0>(b)
                                 : std::get<1>(a) < std::get<1>(b);
                  });
        size_t w = 0;
        for (size_t i = 0; i < pairs.size(); ++i) {
            if (w > 0 && std::get<0>(pairs[w - 1]) == std::get<0>(pairs[i]) &&
                std::get<1>(pairs[w - 1]) == std::get<1>(pairs[i]))
                std::get<2>(pairs[w - 1]) += std::get<2>(pairs[i]);
            else
                pairs[w++] = pairs[i];
        }
        pairs.resize(w);
    }

    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        out.assign(v.size(), 0.0);
        for (const auto& [i, j, w] : pairs) {
            const double diff = w * (v[i] - v[j]);
            out[i] += diff;
            out[j] -= diff;
        }
    }
};

namespace detail {

inline void project_constants(std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    for (double& x : v) x -= m;
}

// CG on the PSD pair form, constants projected out. Returns the relative
// residual actually reached; directions of vanishing curvature are deflated
// and counted in *extra_kernel.
inline double cg_solve(const PairForm& h, const std::vector<double>& rhs,
                       std::vector<double>& x, double rel_tol, int* extra_kernel) {
    const size_t n = rhs.size();
    x.assign(n, 0.0);
    std::vector<double> r = rhs, p, hp(n);
    project_constants(r);
    p = r;
    double rnorm2 = 0.0;
    for (double v : r) rnorm2 += v * v;
    const double rhs_norm = std::sqrt(rnorm2);
    if (rhs_norm == 0.0) return 0.0;
    const int max_iter = int(8 * n) + 200;
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(rnorm2) <= rel_tol * rhs_norm) break;
        h.apply(p, hp);
        project_constants(hp);
        double php = 0.0, pp = 0.0;
        for (size_t i = 0; i < n; ++i) {
            php += p[i] * hp[i];
            pp += p[i] * p[i];
        }
        if (php <= 1e-14 * pp) {
            // flat direction beyond the constants: remove it and restart
            if (extra_kernel) ++(*extra_kernel);
            double rp = 0.0;
            for (size_t i = 0; i < n; ++i) rp += r[i] * p[i];
            for (size_t i = 0; i < n; ++i) r[i] -= (rp / pp) * p[i];
            p = r;
            rnorm2 = 0.0;
            for (double v : r) rnorm2 += v * v;
            continue;
        }
        const double alpha = rnorm2 / php;
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        double rnew = 0.0;
        for (double v : r) rnew += v * v;
        const double beta = rnew / rnorm2;
        rnorm2 = rnew;
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return std::sqrt(rnorm2) / rhs_norm;
}

}  // namespace detail

struct CorrectorSolution {
    int dim = 1;
    double rho = 0.5;
    std::array<double, kMaxDim> direction{};  // the vector p
    Cube cube;
    LocalFunction corrector;  // phi, supported on the cube interior, mean zero
    double nu_bar = 0.0;
    double residual = 0.0;      // relative stationarity residual of the solve
    int extra_kernel_dim = 0;   // flat directions beyond constants, if any

    CorrectorSolution() : cube(1, coord_zero(), 1) {}
};

// Assembled quadratic data of one cell problem.
struct CellAssembly {
    std::vector<Coord> interior;
    PairForm hessian;              // H(phi,phi) = sum_b <c_b (pi_b phi)^2>
    std::vector<double> linear;    // g(psi)   = sum_b <c_b A_b pi_b psi>
    double affine_energy = 0.0;    // sum_b (1/2) <c_b A_b^2>
};

// Per-bond exact assembly: each bond's expectation runs over the bond's own
// dependency set (interior + endpoints + rate window), which the product
// structure of the measure makes exact.
inline CellAssembly assemble_cell_problem(const RateFamily& rf, double rho, const Cube& cube,
                                          const std::array<double, kMaxDim>& p) {
    const int d = cube.dim();
    if (rf.dim() != d) throw ConfigError("cell problem: dimension mismatch");
    CellAssembly out;
    out.interior = cube.interior();
    if (out.interior.size() > kMaxSupportBits)
        throw SizeError("cell problem: interior exceeds dense-table limit");
    const int64_t dim = int64_t(1) << out.interior.size();
    out.hessian.dim = dim;
    out.linear.assign(size_t(dim), 0.0);

    std::unordered_map<int64_t, double> pair_acc;

    for (const Coord& x : cube.sites()) {
        for (int axis = 0; axis < d; ++axis) {
            const Coord y = add(x, unit(axis));
            // dependency set of this bond: interior + endpoints + rate window
            std::set<Coord> dep(out.interior.begin(), out.interior.end());
            dep.insert(x);
            dep.insert(y);
            for (const Coord& off : rf.window_offsets(axis)) dep.insert(add(x, off));
            std::vector<Coord> sites(dep.begin(), dep.end());
            if (sites.size() > 24) throw SizeError("cell problem: bond dependency set too large");

            auto bit_of = [&sites](const Coord& c) {
                return int(std::lower_bound(sites.begin(), sites.end(), c) - sites.begin());
            };
            const int bx = bit_of(x), by = bit_of(y);
            std::vector<int> wbits;
            for (const Coord& off : rf.window_offsets(axis)) wbits.push_back(bit_of(add(x, off)));
            std::vector<int> ibits;
            for (const Coord& c : out.interior) ibits.push_back(bit_of(c));

            const double pa = p[axis];
            const uint64_t count = uint64_t(1) << sites.size();
            const double* rate_table = rf.window_table(axis).data();
            for (uint64_t m = 0; m < count; ++m) {
                const int ox = (m >> bx) & 1, oy = (m >> by) & 1;
                // the swap acts trivially when the endpoint occupancies agree
                if (ox == oy) continue;
                double w = 1.0;
                for (size_t i = 0; i < sites.size(); ++i)
                    w *= ((m >> i) & 1) ? rho : (1.0 - rho);
                uint32_t wm = 0;
                for (size_t i = 0; i < wbits.size(); ++i)
                    if ((m >> wbits[i]) & 1) wm |= (1u << i);
                const double c = rate_table[wm];
                const double a_b = pa * double(ox - oy);
                out.affine_energy += 0.5 * w * c * a_b * a_b;
                uint64_t sigma = 0, sigma_swapped = 0;
                const uint64_t ms = m ^ (uint64_t(1) << bx) ^ (uint64_t(1) << by);
                for (size_t i = 0; i < ibits.size(); ++i) {
                    if ((m >> ibits[i]) & 1) sigma |= (uint64_t(1) << i);
                    if ((ms >> ibits[i]) & 1) sigma_swapped |= (uint64_t(1) << i);
                }
                if (sigma == sigma_swapped) continue;
                out.linear[size_t(sigma_swapped)] += w * c * a_b;
                out.linear[size_t(sigma)] -= w * c * a_b;
                const int64_t lo = int64_t(std::min(sigma, sigma_swapped));
                const int64_t hi = int64_t(std::max(sigma, sigma_swapped));
                pair_acc[lo * dim + hi] += w * c;
            }
        }
    }
    out.hessian.pairs.reserve(pair_acc.size());
    for (const auto& [key, w] : pair_acc)
        out.hessian.pairs.emplace_back(int32_t(key / dim), int32_t(key % dim), w);
    out.hessian.compress();
    return out;
}

inline CorrectorSolution solve_cell_problem(const RateFamily& rf, double rho, const Cube& cube,
                                            const std::array<double, kMaxDim>& p,
                                            double rel_tol = 1e-9) {
    CellAssembly cell = assemble_cell_problem(rf, rho, cube, p);
    const int64_t dim = cell.hessian.dim;

    std::vector<double> rhs(cell.linear);
    for (double& v : rhs) v = -v;
    std::vector<double> phi;
    CorrectorSolution sol;
    sol.residual = detail::cg_solve(cell.hessian, rhs, phi, rel_tol, &sol.extra_kernel_dim);
    if (sol.residual > rel_tol * 10.0)
        throw ConvergenceError("cell problem: stationarity residual " +
                               std::to_string(sol.residual));

    // fix the additive constant: <phi>_rho = 0
    double mean_phi = 0.0;
    for (int64_t m = 0; m < dim; ++m) {
        double w = 1.0;
        for (size_t i = 0; i < cell.interior.size(); ++i)
            w *= ((m >> i) & 1) ? rho : (1.0 - rho);
        mean_phi += w * phi[size_t(m)];
    }
    for (double& v : phi) v -= mean_phi;

    double gphi = 0.0;
    for (int64_t m = 0; m < dim; ++m) gphi += cell.linear[size_t(m)] * phi[size_t(m)];
    const double energy = cell.affine_energy + 0.5 * gphi;

    sol.dim = cube.dim();
    sol.rho = rho;
    sol.direction = p;
    sol.cube = cube;
    sol.corrector = LocalFunction(cube.dim(), cell.interior, phi);
    sol.nu_bar = energy / (2.0 * compressibility(rho) * double(cube.volume()));
    return sol;
}

struct DiffusionEstimate {
    int dim = 1;
    double rho = 0.5;
    int side = 3;
    SymMat d_bar;          // Id <= D_bar <= 2 lambda Id
    SymMat conductivity;   // 2 chi D_bar
    std::array<double, kMaxDim> nu_axis{};      // nu_bar(e_i)
    std::array<double, kMaxDim> l2_phi{};       // <phi_{e_i}^2>
    int extra_kernel_dim = 0;
};

// D_bar_ii = 2 nu(e_i); off-diagonals by polarization of nu(p) = p.D p / 2.
inline DiffusionEstimate diffusion_matrix(const RateFamily& rf, double rho, const Cube& cube,
                                          std::vector<CorrectorSolution>* axis_solutions = nullptr) {
    const int d = rf.dim();
    DiffusionEstimate est;
    est.dim = d;
    est.rho = rho;
    est.side = cube.side();
    est.d_bar = SymMat::zero(d);
    for (int i = 0; i < d; ++i) {
        std::array<double, kMaxDim> p{};
        p[i] = 1.0;
        CorrectorSolution sol = solve_cell_problem(rf, rho, cube, p);
        est.nu_axis[i] = sol.nu_bar;
        est.l2_phi[i] = expect(BernoulliMeasure{rho}, sol.corrector * sol.corrector);
        est.extra_kernel_dim = std::max(est.extra_kernel_dim, sol.extra_kernel_dim);
        est.d_bar(i, i) = 2.0 * sol.nu_bar;
        if (axis_solutions) axis_solutions->push_back(std::move(sol));
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            std::array<double, kMaxDim> p{};
            p[i] = 1.0;
            p[j] = 1.0;
            CorrectorSolution sol = solve_cell_problem(rf, rho, cube, p);
            const double off = sol.nu_bar - est.nu_axis[i] - est.nu_axis[j];
            est.d_bar(i, j) = off;
            est.d_bar(j, i) = off;
            est.extra_kernel_dim = std::max(est.extra_kernel_dim, sol.extra_kernel_dim);
        }
    est.conductivity = (2.0 * compressibility(rho)) * est.d_bar;
    return est;
}

// eta_x - eta_y as a local function.
inline LocalFunction occupation_difference(int dim, const Coord& x, const Coord& y) {
    return LocalFunction::occupation(dim, x) - LocalFunction::occupation(dim, y);
}

struct FluxEntry {
    Coord x{};
    int axis = 0;
    LocalFunction flux;
};

// g_b = c_b pi_b(ell_{e_i} + phi) - pi_b ell_{D e_i} per enlarged bond of the cube.
inline std::vector<FluxEntry> centered_flux(const RateFamily& rf, const CorrectorSolution& sol,
                                            const SymMat& d_target) {
    const int d = sol.dim;
    int dir_axis = -1;
    for (int i = 0; i < d; ++i) {
        if (sol.direction[i] == 1.0 && dir_axis < 0)
            dir_axis = i;
        else if (sol.direction[i] != 0.0)
            throw ConfigError("centered_flux: solution must be for a coordinate direction");
    }
    if (dir_axis < 0) throw ConfigError("centered_flux: null direction");

    std::vector<FluxEntry> out;
    for (const Coord& x : sol.cube.sites()) {
        for (int axis = 0; axis < d; ++axis) {
            const Coord y = add(x, unit(axis));
            const LocalFunction grad_xy = occupation_difference(d, x, y);
            // pi_b (ell_{e_i} + phi) = 1{axis=i} (eta_x - eta_y) + pi_b phi
            LocalFunction pi_v = kawasaki(make_bond(x, y), sol.corrector);
            if (axis == dir_axis) pi_v = pi_v + grad_xy;
            LocalFunction flux = rf.rate_function(x, axis) * pi_v -
                                 d_target(axis, dir_axis) * grad_xy;
            out.push_back({x, axis, flux.trimmed(1e-14)});
        }
    }
    return out;
}

// Best constant sup_v sum_b <(pi_b v) g_b> / (sum_b <(pi_b v)^2>)^(1/2), i.e.
// the norm of the projection of the flux field onto the span of gradient
// fields, normalized by |cube|^(1/2).
inline double flux_dual_norm(const RateFamily& rf, const CorrectorSolution& sol,
                             const SymMat& d_target) {
    std::vector<FluxEntry> fluxes = centered_flux(rf, sol, d_target);
    double flux_mass = 0.0;
    for (const auto& e : fluxes) flux_mass += e.flux.max_abs();
    if (flux_mass < 1e-13) return 0.0;

    // test space: functions of every site any flux term or corrector reads
    std::set<Coord> dep(sol.corrector.support().begin(), sol.corrector.support().end());
    for (const auto& e : fluxes) {
        dep.insert(e.x);
        dep.insert(add(e.x, unit(e.axis)));
        for (const Coord& c : e.flux.support()) dep.insert(c);
    }
    std::vector<Coord> sites(dep.begin(), dep.end());
    if (sites.size() > 22) throw SizeError("flux_dual_norm: dependency set too large");
    const int64_t dim = int64_t(1) << sites.size();
    const double rho = sol.rho;

    std::vector<double> weight(static_cast<size_t>(dim));
    for (int64_t m = 0; m < dim; ++m) {
        double w = 1.0;
        for (size_t i = 0; i < sites.size(); ++i)
            w *= ((m >> i) & 1) ? rho : (1.0 - rho);
        weight[size_t(m)] = w;
    }

    PairForm gram;
    gram.dim = dim;
    std::vector<double> rhs(size_t(dim), 0.0);
    std::unordered_map<int64_t, double> pair_acc;

    for (const auto& entry : fluxes) {
        const Coord& x = entry.x;
        const Coord y = add(x, unit(entry.axis));
        const int bx = int(std::lower_bound(sites.begin(), sites.end(), x) - sites.begin());
        const int by = int(std::lower_bound(sites.begin(), sites.end(), y) - sites.begin());
        const LocalFunction flux_on = entry.flux.on_support(sites);
        for (int64_t m = 0; m < dim; ++m) {
            const int ox = (m >> bx) & 1, oy = (m >> by) & 1;
            if (ox == oy) continue;
            const int64_t ms = m ^ (int64_t(1) << bx) ^ (int64_t(1) << by);
            const double w = weight[size_t(m)];
            rhs[size_t(ms)] += w * flux_on.value(uint32_t(m));
            rhs[size_t(m)] -= w * flux_on.value(uint32_t(m));
            // the pair {m, m^b} is visited from both sides, accumulating
            // W(m) + W(m^b), which matches sum_m W (v(m^b) - v(m))^2
            const int64_t lo = std::min(m, ms), hi = std::max(m, ms);
            pair_acc[lo * dim + hi] += w;
        }
    }
    gram.pairs.reserve(pair_acc.size());
    for (const auto& [key, w] : pair_acc)
        gram.pairs.emplace_back(int32_t(key / dim), int32_t(key % dim), w);
    gram.compress();

    std::vector<double> v;
    int kernel = 0;
    detail::cg_solve(gram, rhs, v, 1e-9, &kernel);
    double dual_sq = 0.0;
    for (int64_t m = 0; m < dim; ++m) dual_sq += rhs[size_t(m)] * v[size_t(m)];
    return std::sqrt(std::max(dual_sq, 0.0)) / std::sqrt(double(sol.cube.volume()));
}

// --- two-scale expansion ---------------------------------------------------------

// G~ = I_1(g_t) + sum_z sum_i (avg slope of g_t on z+cube_m) tau_z phi_{e_i},
// embedded on the full configuration space of the torus. Requires 3^m | side.
inline std::vector<double> two_scale_expand(const StateSpace& space, double rho, int m,
                                            const std::vector<double>& g_t,
                                            const std::vector<LocalFunction>& correctors) {
    const Torus& torus = space.torus();
    if (!space.is_full()) throw ConfigError("two_scale_expand: needs the full space");
    if (int64_t(g_t.size()) != torus.num_sites())
        throw ConfigError("two_scale_expand: site function size mismatch");
    const int d = torus.dim();
    if (int(correctors.size()) != d)
        throw ConfigError("two_scale_expand: one corrector per direction required");
    const std::vector<Coord> centers = triadic_centers(m, torus);
    const Cube tile = Cube::triadic(d, coord_zero(), m);

    std::vector<double> out(size_t(space.dim()), 0.0);
    // level-1 part
    for (int64_t s = 0; s < torus.num_sites(); ++s) {
        if (g_t[size_t(s)] == 0.0) continue;
        for (int64_t i = 0; i < space.dim(); ++i) {
            const uint32_t mask = space.mask_of(i);
            out[size_t(i)] += g_t[size_t(s)] * ((((mask >> s) & 1) ? 1.0 : 0.0) - rho);
        }
    }
    // corrector terms, modulated by the tile-averaged slopes
    for (const Coord& z : centers) {
        for (int axis = 0; axis < d; ++axis) {
            double avg = 0.0;
            for (const Coord& c : tile.sites()) {
                const int64_t a = torus.index(add(z, c));
                const int64_t b = torus.index(add(add(z, c), unit(axis)));
                avg += g_t[size_t(b)] - g_t[size_t(a)];
            }
            avg /= double(tile.volume());
            if (avg == 0.0) continue;
            const LocalFunction phi_z = translate(z, correctors[size_t(axis)], &torus);
            const std::vector<double> dense = dense_of_local(space, phi_z);
            for (int64_t i = 0; i < space.dim(); ++i) out[size_t(i)] += avg * dense[size_t(i)];
        }
    }
    return out;
}

}  // namespace latgas
