// Semigroup action e^{tA} f for a Markov generator A, via uniformization:
// A = lam (P - I) with P a contraction in the max norm, so the Poisson-weighted
// series has a rigorous truncation bound |error|_inf <= |f|_inf * tail.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "latgas/core.hpp"

namespace latgas {

// apply(in, out) must compute out = A in. lam must dominate the largest exit
// rate (max_i |A_ii|). Substeps keep the Poisson weights representable.
template <typename Apply>
std::vector<double> uniformized_expm(const Apply& apply, double lam, double t,
                                     std::vector<double> f, double tol,
                                     int64_t max_terms_per_step = -1) {
    if (t < 0.0) throw DomainError("semigroup: negative time");
    if (t == 0.0 || lam <= 0.0) return f;

    const int substeps = std::max<int>(1, int(std::ceil(lam * t / 500.0)));
    const double dt = t / substeps;
    const double a = lam * dt;
    if (max_terms_per_step < 0)
        max_terms_per_step = int64_t(a + 20.0 * std::sqrt(a + 1.0) + 80.0);
    const double step_tol = tol / substeps;

    std::vector<double> cur(f.size()), next(f.size()), acc(f.size());
    for (int s = 0; s < substeps; ++s) {
        double log_w = -a;  // log of e^{-a} a^k / k!
        double tail = 1.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        cur = f;
        bool converged = false;
        for (int64_t k = 0; k <= max_terms_per_step; ++k) {
            const double w = std::exp(log_w);
            for (size_t i = 0; i < f.size(); ++i) acc[i] += w * cur[i];
            tail -= w;
            if (tail <= step_tol) {
                converged = true;
                break;
            }
            apply(cur, next);                       // next = A cur
            for (size_t i = 0; i < f.size(); ++i)   // cur = P cur = cur + A cur / lam
                next[i] = cur[i] + next[i] / lam;
            cur.swap(next);
            log_w += std::log(a) - std::log(double(k + 1));
        }
        if (!converged)
            throw ConvergenceError("semigroup: truncation tolerance unreachable");
        f = acc;
    }
    return f;
}

}  // namespace latgas
