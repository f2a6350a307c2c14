// Constructive realization of a target covariance matrix by a lattice jump
// kernel: integer-rounded eigendecomposition plus an axis/diagonal-pair
// decomposition of the remainder, then symmetrization.
#pragma once

#include <cmath>
#include <map>

#include "latgas/core.hpp"
#include "latgas/heat_kernel.hpp"
#include "latgas/smallmat.hpp"

namespace latgas {

struct DesignInput {
    SymMat target;          // symmetric, Id <= target <= bound * Id
    double bound = 0.0;     // optional; computed from eigenvalues when <= 0

    static DesignInput checked(const SymMat& m, double bound = 0.0) {
        if (symmetry_defect(m) > 1e-12)
            throw DomainError("walk design: target matrix not symmetric");
        EigenSym e = eigen_sym(m);
        if (e.value[0] < 1.0 - 1e-9)
            throw DomainError("walk design: target must dominate the identity");
        DesignInput in;
        in.target = m;
        double c = std::max(e.value[m.d - 1], 1.0);
        if (bound > 0.0) c = std::max(c, bound);
        // deterministic rounding of the ellipticity constant, up to 3 decimals
        in.bound = std::ceil(c * 1000.0 - 1e-9) / 1000.0;
        return in;
    }
};

// Builds Q with covariance(Q) = M, Q_{e_i} >= 1/4, and support inside
// Lambda_N for N = floor(4 C d^2) + 1 (the rounding step can place an exactly
// axis-aligned eigenvector at radius N, one past floor(4 C d^2)).
inline JumpKernel kernel_from_covariance(const DesignInput& in) {
    const int d = in.target.d;
    const double c_bound = in.bound;
    const int64_t n_round = int64_t(std::floor(4.0 * c_bound * d * d)) + 1;

    SymMat m_tilde = in.target - SymMat::identity(d);
    EigenSym eig = eigen_sym(m_tilde);

    std::map<Coord, double> q_raw;

    // integer-rounded rank-one pieces of the eigendecomposition
    SymMat realized = SymMat::zero(d);
    for (int i = 0; i < d; ++i) {
        double lam = eig.value[i];
        if (lam < -1e-9) throw DomainError("walk design: target minus identity not PSD");
        if (lam <= 0.0) continue;
        Coord p{};
        bool nonzero = false;
        for (int k = 0; k < d; ++k) {
            p[k] = int(std::floor(double(n_round) * eig.vector[i][k]));
            nonzero = nonzero || (p[k] != 0);
        }
        if (!nonzero) continue;
        const double lam_scaled = lam / double(n_round * n_round);
        q_raw[p] += lam_scaled;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) realized(a, b) += lam_scaled * p[a] * p[b];
    }

    // remainder along e_i +- e_j directions and the axes
    SymMat rem = in.target - realized;
    for (int i = 0; i < d; ++i) {
        double diag_residue = rem(i, i);
        for (int j = 0; j < d; ++j)
            if (j != i) diag_residue -= std::abs(rem(i, j));
        if (diag_residue < 0.5 - 1e-9)
            throw ConvergenceError(
                "walk design: remainder positivity failed at axis " + std::to_string(i));
        q_raw[unit(i)] += diag_residue;
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double w = std::abs(rem(i, j));
            if (w == 0.0) continue;
            Coord dir = unit(i);
            dir[j] = rem(i, j) > 0 ? 1 : -1;
            q_raw[dir] += w;
        }

    // symmetrize: Q_x = (Q~_x + Q~_{-x}) / 2
    std::map<Coord, double> q_sym;
    for (const auto& [x, w] : q_raw) {
        q_sym[x] += 0.5 * w;
        q_sym[negate(x)] += 0.5 * w;
    }
    return JumpKernel(d, std::move(q_sym));
}

inline JumpKernel kernel_from_covariance(const SymMat& m) {
    return kernel_from_covariance(DesignInput::checked(m));
}

// SEP kernel whose level-1 dynamics diffuses with matrix D: realize the
// covariance 2D (per-unit-time single-particle covariance is twice the
// diffusion matrix).
inline JumpKernel sep_for_diffusion(const SymMat& d_mat) {
    EigenSym e = eigen_sym(d_mat);
    if (e.value[0] < 1.0 - 1e-9)
        throw DomainError(
            "sep_for_diffusion: D must dominate the identity; rescale time units first");
    return kernel_from_covariance(DesignInput::checked(2.0 * d_mat));
}

// Support radius guaranteed by the construction.
inline int64_t design_support_bound(const DesignInput& in) {
    return int64_t(std::floor(4.0 * in.bound * in.target.d * in.target.d)) + 1;
}

// One-dimensional radius-2 realization: rate 1/2 on the unit steps, the rest
// of the covariance on the double steps. Useful on tori too small for the
// general construction (its support radius grows with the covariance bound).
inline JumpKernel compact_kernel_1d(double covariance_target) {
    if (covariance_target < 1.0 - 1e-12)
        throw DomainError("compact_kernel_1d: covariance must be at least 1");
    std::map<Coord, double> q;
    q[coord(1)] = 0.5;
    q[coord(-1)] = 0.5;
    const double q2 = (covariance_target - 1.0) / 8.0;
    if (q2 > 0.0) {
        q[coord(2)] = q2;
        q[coord(-2)] = q2;
    }
    return JumpKernel(1, std::move(q));
}

}  // namespace latgas
