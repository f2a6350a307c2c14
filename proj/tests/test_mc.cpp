#include <doctest.h>

#include <cmath>
#include <map>

#include "latgas/exact_generator.hpp"
#include "latgas/mc.hpp"

using namespace latgas;

TEST_CASE("frozen configurations never move") {
    Torus t(1, 8);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    // rho = 0 draws the empty configuration
    Trajectory traj(t, rf, 0.0, 5, 0);
    CHECK(traj.config().count() == 0);
    traj.evolve(10.0);
    CHECK(traj.config().count() == 0);
}

TEST_CASE("particle number is conserved along trajectories") {
    Torus t(2, 4);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(2, 0.3));
    Trajectory traj(t, rf, 0.5, 11, 3);
    const int64_t n0 = traj.config().count();
    for (int k = 0; k < 5; ++k) {
        traj.evolve(0.7);
        CHECK(traj.config().count() == n0);
    }
    CHECK(traj.time() == doctest::Approx(3.5));
}

TEST_CASE("trajectories are reproducible given (seed, stream)") {
    Torus t(1, 16);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    Trajectory a(t, rf, 0.5, 99, 4), b(t, rf, 0.5, 99, 4);
    a.evolve(3.0);
    b.evolve(3.0);
    for (int64_t s = 0; s < t.num_sites(); ++s) CHECK(a.config().get(s) == b.config().get(s));
}

TEST_CASE("thinning proposals reproduce the generator rates (N=6, a=0.5)") {
    // from a frozen configuration, accepted-proposal frequencies must match the
    // exact generator's jump rates within Monte Carlo error
    Torus t(1, 6);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    // fix a deterministic configuration 101100
    PackedConfig base(t.num_sites());
    for (int64_t s : {0, 2, 3}) base.set(s, 1);
    // rebuild a trajectory whose config matches by stepping the same bits
    // (Trajectory has no setter; emulate via a fresh one and direct counting)
    // accepted-proposal statistics依 the current state only, so count on `base`
    // using the public thinning kernel pieces: evaluate rates directly.
    StateSpace space = StateSpace::full(t);
    SparseOperator op = build_generator(space, rf);
    uint32_t mask = 0;
    for (int64_t s : {0, 2, 3}) mask |= (1u << s);
    // exact exit rates per bond from the generator row
    std::map<uint32_t, double> row_rates;
    const int64_t row = space.index_of(mask);
    for (int64_t k = op.row_ptr[row]; k < op.row_ptr[row + 1]; ++k)
        if (op.col[k] != row) row_rates[uint32_t(op.col[k])] += op.val[k];

    // Monte Carlo: propose single events from this frozen state
    const int64_t draws = 1000000;
    std::map<uint32_t, int64_t> counts;
    RngStream rng(21, 9);
    const int64_t n_bonds = t.num_sites();
    for (int64_t e = 0; e < draws; ++e) {
        const int64_t b = int64_t(rng.next_below(uint64_t(n_bonds)));
        const int64_t x = b;  // d = 1: bond index is the left site
        const int64_t y = t.neighbor(x, 0, +1);
        auto occ = [&](const Coord& c) { return int((mask >> t.index(c)) & 1); };
        const double rate = rf.evaluate(t.site(x), 0, occ);
        if (rng.next_double() * rf.lambda() >= rate) continue;
        if (occ(t.site(x)) == occ(t.site(y))) continue;
        const uint32_t target = mask ^ (1u << x) ^ (1u << y);
        ++counts[target];
    }
    // each accepted target has probability rate(target) / (lambda * n_bonds)
    const double denom = rf.lambda() * double(n_bonds);
    for (const auto& [target, rate] : row_rates) {
        const double p = rate / denom;
        const double expect_count = double(draws) * p;
        const double se = std::sqrt(double(draws) * p * (1.0 - p));
        CHECK(std::abs(double(counts[target]) - expect_count) <= 4.0 * se);
    }
}

TEST_CASE("long-run sector occupation is uniform (detailed balance)") {
    Torus t(1, 5);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    // scan streams until a stationary draw lands in the 2-particle sector
    uint64_t stream = 0;
    while (Trajectory(t, rf, 0.4, 33, stream).config().count() != 2) ++stream;
    Trajectory traj(t, rf, 0.4, 33, stream);
    // time-average the visit frequency of each 2-particle configuration
    std::map<uint32_t, double> occupation;
    const int steps = 200000;
    for (int k = 0; k < steps; ++k) {
        traj.evolve(1.0);
        uint32_t m = 0;
        for (int64_t s = 0; s < t.num_sites(); ++s)
            if (traj.config().get(s)) m |= (1u << s);
        occupation[m] += 1.0;
    }
    const double expect_visits = double(steps) / 10.0;  // C(5,2) = 10 states
    CHECK(occupation.size() == 10);
    for (const auto& [m, visits] : occupation)
        CHECK(std::abs(visits - expect_visits) <= 12.0 * std::sqrt(expect_visits));
}

TEST_CASE("variance estimator at t = 0 recovers the sample variance") {
    Torus t(1, 10);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    const double rho = 0.5;
    LocalFunction u = LocalFunction::occupation(1, coord(0));
    VarianceEstimate est = estimate_variance(t, rf, rho, u, 0.0, 40000, 17);
    // analytic value chi(rho)
    CHECK(std::abs(est.value - compressibility(rho)) <= 4.0 * est.stderr_jack);
    CHECK(est.stderr_jack > 0.0);
}

TEST_CASE("degenerate densities give zero variance") {
    Torus t(1, 10);
    RateFamily rf = RateFamily::build(ssep_rule(1));
    LocalFunction u = LocalFunction::occupation(1, coord(0));
    for (double rho : {0.0, 1.0}) {
        VarianceEstimate est = estimate_variance(t, rf, rho, u, 0.5, 500, 3);
        CHECK(est.value == doctest::Approx(0.0));
    }
}

TEST_CASE("estimator agrees with the exact semigroup (N=10, a=0.5)") {
    Torus t(1, 10);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    const double rho = 0.5;
    StateSpace space = StateSpace::full(t);
    SparseOperator op = build_generator(space, rf);
    const std::vector<double> w = space.weights(rho);
    LocalFunction u = LocalFunction::occupation(1, coord(0));
    const auto dense = dense_of_local(space, u);

    const double tt = 1.0;
    const auto pt = apply_semigroup(op, tt, dense, 1e-12);
    const double exact = variance(w, pt);
    // horizon (N/6)^2/lambda = 1.39 exceeds t = 1, so the default check passes
    VarianceEstimate est = estimate_variance(t, rf, rho, u, tt, 60000, 4242);
    CHECK(std::abs(est.value - exact) <= 3.0 * est.stderr_jack);
}

TEST_CASE("horizon guard") {
    Torus t(1, 10);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    LocalFunction u = LocalFunction::occupation(1, coord(0));
    CHECK_THROWS_AS(estimate_variance(t, rf, 0.5, u, 5.0, 100, 1), DomainError);
    // the same-torus oracle study may override it explicitly
    VarianceEstimate est = estimate_variance(t, rf, 0.5, u, 5.0, 100, 1, false);
    CHECK(est.replicas == 100);
}

TEST_CASE("regularization operator") {
    SUBCASE("K = 0 is the identity") {
        LocalFunction u = LocalFunction::occupation(1, coord(0));
        LocalFunction r = regularize(u, 0);
        CHECK((r - u).max_abs() == 0.0);
    }
    SUBCASE("K = 1 in d=1 averages the three translates") {
        LocalFunction u = LocalFunction::occupation(1, coord(0));
        LocalFunction r = regularize(u, 1);
        LocalFunction want =
            (1.0 / 3.0) * (LocalFunction::occupation(1, coord(-1)) +
                           LocalFunction::occupation(1, coord(0)) +
                           LocalFunction::occupation(1, coord(1)));
        CHECK((r - want).max_abs() <= 1e-15);
    }
    SUBCASE("mean preserved, variance reduced exactly") {
        const double rho = 0.3;
        BernoulliMeasure mu{rho};
        LocalFunction u = LocalFunction::occupation(1, coord(0));
        for (int k : {1, 2, 5}) {
            LocalFunction r = regularize(u, k);
            CHECK(expect(mu, r) == doctest::Approx(expect(mu, u)).epsilon(1e-13));
            // independence: Var[R_K eta_0] = chi / (2K+1)
            CHECK(variance(mu, r) ==
                  doctest::Approx(compressibility(rho) / double(2 * k + 1)).epsilon(1e-12));
            CHECK(regularized_variance(u, rho, k) ==
                  doctest::Approx(variance(mu, r)).epsilon(1e-12));
        }
    }
    SUBCASE("scaled variance stays bounded in K for built-in observables") {
        const double rho = 0.45;
        std::vector<LocalFunction> observables = {
            LocalFunction::occupation(1, coord(0)),
            LocalFunction::occupation(1, coord(0)) * LocalFunction::occupation(1, coord(1)),
            LocalFunction::centered(1, coord(0), rho) *
                LocalFunction::centered(1, coord(2), rho)};
        for (const LocalFunction& u : observables) {
            const double var0 = variance(BernoulliMeasure{rho}, u);
            const int ell = support_radius(u);
            for (int k = 1; k <= 32; ++k) {
                const double scaled =
                    regularized_variance(u, rho, k) * std::pow(2.0 * k + 1.0, 1.0);
                // bound shape: (2 ell_u + 1)^d Var[u]
                CHECK(scaled <= (2.0 * ell + 1.0) * var0 + 1e-12);
            }
        }
    }
    SUBCASE("triple norm never grows under regularization") {
        const double rho = 0.35;
        LocalFunction u = LocalFunction::occupation(1, coord(0)) *
                              LocalFunction::occupation(1, coord(1)) +
                          0.5 * LocalFunction::centered(1, coord(2), rho);
        ChaosCoeffs base = chaos_coeffs(u, rho);
        for (int k : {1, 2, 4, 8}) {
            ChaosCoeffs reg = chaos_of_regularized(u, rho, k);
            for (int n = 0; n <= base.max_level(); ++n)
                CHECK(triple_norm(reg, n) <= triple_norm(base, n) + 1e-12);
            // and the sparse route matches the dense one where the latter fits
            if (k <= 2) {
                ChaosCoeffs dense = chaos_coeffs(regularize(u, k), rho);
                for (int n = 0; n <= dense.max_level(); ++n)
                    CHECK(std::abs(triple_norm(reg, n) - triple_norm(dense, n)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("regularization schedule") {
    RegularizationSchedule sched(1, 1, 128.0, 0.1);
    CHECK(sched.t0 == doctest::Approx(std::max(20.0, 2.0 * 3.0 * 128.0)));
    // K(t) is the staircase value on [t_n, t_{n+1})
    CHECK(sched.k_of(sched.t0) == sched.k_n(0));
    CHECK(sched.k_of(sched.t_n(1) * 1.5) == sched.k_n(1));
    CHECK(sched.k_of(sched.t_n(3)) == sched.k_n(3));
    // nondecreasing rungs
    for (int n = 0; n < 6; ++n) CHECK(sched.k_n(n + 1) >= sched.k_n(n));
    CHECK_THROWS_AS(RegularizationSchedule(1, 1, 50.0, 0.1), ConfigError);
    CHECK_THROWS_AS(RegularizationSchedule(1, 1, 128.0, 1.5), ConfigError);
}

TEST_CASE("estimator unbiasedness over seeded runs") {
    // pooled over independent runs, the estimator mean matches the exact value
    Torus t(1, 8);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    const double rho = 0.4;
    StateSpace space = StateSpace::full(t);
    SparseOperator op = build_generator(space, rf);
    const std::vector<double> w = space.weights(rho);
    LocalFunction u = LocalFunction::occupation(1, coord(0));
    const auto dense = dense_of_local(space, u);
    const double tt = 0.5;
    const auto pt = apply_semigroup(op, tt, dense, 1e-12);
    const double exact = variance(w, pt);

    const int runs = 200;
    const int64_t reps = 800;
    double pooled_mean = 0.0, pooled_se_sq = 0.0;
    for (int r = 0; r < runs; ++r) {
        VarianceEstimate est = estimate_variance(t, rf, rho, u, tt, reps, 1000 + r);
        pooled_mean += est.value;
        pooled_se_sq += est.stderr_jack * est.stderr_jack;
    }
    pooled_mean /= runs;
    const double pooled_se = std::sqrt(pooled_se_sq) / runs;
    CHECK(std::abs(pooled_mean - exact) <= 3.0 * pooled_se);
}
