#include <doctest.h>

#include <cmath>
#include <sstream>

#include "latgas/exact_generator.hpp"
#include "latgas/walk_design.hpp"

using namespace latgas;

namespace {

std::vector<double> random_dense(RngStream& rng, int64_t dim) {
    std::vector<double> v(static_cast<size_t>(dim));
    for (double& x : v) x = 2.0 * rng.next_double() - 1.0;
    return v;
}

// Simpson quadrature of s -> |Gbar_s|^2_{H^{k+1}} on [tau, t]
double simpson_hk(const SparseOperator& op, const std::vector<double>& w,
                  const std::vector<double>& g_tau, double tau, double t, int k, int panels) {
    double acc = 0.0;
    const double h = (t - tau) / (2 * panels);
    std::vector<double> vals(size_t(2 * panels + 1));
    for (int i = 0; i <= 2 * panels; ++i) {
        const std::vector<double> gs = apply_semigroup(op, i * h, g_tau, 1e-12);
        vals[size_t(i)] = sobolev_seminorm_sq(op, w, gs, k + 1);
    }
    for (int i = 0; i < panels; ++i)
        acc += (h / 3.0) * (vals[size_t(2 * i)] + 4.0 * vals[size_t(2 * i + 1)] +
                            vals[size_t(2 * i + 2)]);
    return acc;
}

}  // namespace

TEST_CASE("SSEP generator on the 2-site torus, against hand enumeration") {
    // two sites, two wrapped bonds: L eta_0 = 2 (eta_1 - eta_0)
    Torus t(1, 2);
    StateSpace space = StateSpace::full(t);
    RateFamily ssep = RateFamily::build(ssep_rule(1));
    SparseOperator op = build_generator(space, ssep);
    std::vector<double> f = {0.0, 1.0, 0.0, 1.0};  // eta_0 over masks 00,01,10,11
    std::vector<double> lf = op.apply(f);
    // states: 00 -> 0, 01 -> 2(0-1) = -2, 10 -> 2(1-0) = 2, 11 -> 0
    CHECK(lf[0] == doctest::Approx(0.0));
    CHECK(lf[1] == doctest::Approx(-2.0));
    CHECK(lf[2] == doctest::Approx(2.0));
    CHECK(lf[3] == doctest::Approx(0.0));
}

TEST_CASE("generator annihilates constants and conserves particle number") {
    Torus t(1, 6);
    StateSpace space = StateSpace::full(t);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    SparseOperator op = build_generator(space, rf);
    std::vector<double> ones(size_t(space.dim()), 1.0);
    for (double v : op.apply(ones)) CHECK(std::abs(v) < 1e-13);
    std::vector<double> count(size_t(space.dim()));
    for (int64_t i = 0; i < space.dim(); ++i)
        count[size_t(i)] = double(__builtin_popcount(space.mask_of(i)));
    for (double v : op.apply(count)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("reversibility: <F(-L)G> = <G(-L)F> for random F, G") {
    Torus t(1, 8);
    StateSpace space = StateSpace::full(t);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    SparseOperator op = build_generator(space, rf);
    const std::vector<double> w = space.weights(0.37);
    RngStream rng(71, 11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = random_dense(rng, space.dim());
        const auto g = random_dense(rng, space.dim());
        const double a = inner(w, f, op.apply(g));
        const double b = inner(w, g, op.apply(f));
        CHECK(a == doctest::Approx(b).epsilon(1e-11));
    }
}

TEST_CASE("SEP generator closes every chaos level") {
    Torus t(1, 8);
    StateSpace space = StateSpace::full(t);
    const double rho = 0.4;
    JumpKernel q = JumpKernel::nearest_neighbor(1, 0.5);
    SparseOperator op = build_sep_generator(space, q);

    SUBCASE("Lbar 1 = 0") {
        std::vector<double> ones(size_t(space.dim()), 1.0);
        for (double v : op.apply(ones)) CHECK(std::abs(v) < 1e-13);
    }

    SUBCASE("level 1: Lbar I_1(delta_0) = I_1((1/2) Delta_Q delta_0)") {
        ChaosCoeffs c;
        c.dim = 1;
        c.rho = rho;
        c.set({coord(0)}, 1.0);
        const std::vector<double> f = dense_of_chaos_level(space, c, 1);
        const std::vector<double> lf = op.apply(f);
        // (1/2) Delta_Q delta_0 = (1/2)(delta_{-1} + delta_1) - delta_0
        ChaosCoeffs want;
        want.dim = 1;
        want.rho = rho;
        want.set({coord(0)}, -1.0);
        want.set({coord(1)}, 0.5);
        want.set({coord(7)}, 0.5);
        const std::vector<double> expect_dense = dense_of_chaos_level(space, want, 1);
        for (size_t i = 0; i < lf.size(); ++i)
            CHECK(lf[i] == doctest::Approx(expect_dense[i]).epsilon(1e-12));
    }

    SUBCASE("random level-2 kernels stay at level 2 to 1e-12") {
        RngStream rng(73, 12);
        for (int trial = 0; trial < 5; ++trial) {
            ChaosCoeffs c;
            c.dim = 1;
            c.rho = rho;
            for (int k = 0; k < 6; ++k) {
                std::set<Coord> y;
                while (y.size() < 2) y.insert(coord(int(rng.next_below(8))));
                c.add(SiteSet(y.begin(), y.end()), 2.0 * rng.next_double() - 1.0);
            }
            const std::vector<double> f = dense_of_chaos_level(space, c, 2);
            const std::vector<double> lf = op.apply(f);
            ChaosCoeffs back = chaos_of_state_function(space, rho, lf, 4);
            for (int n = 0; n <= back.max_level(); ++n) {
                if (n == 2) continue;
                CHECK(l1_level_norm(back, n) <= 1e-12);
            }
        }
    }
}

TEST_CASE("dirichlet form and sobolev seminorms") {
    Torus t(1, 4);
    StateSpace space = StateSpace::full(t);
    RateFamily ssep = RateFamily::build(ssep_rule(1));
    SparseOperator op = build_generator(space, ssep);
    const double rho = 0.3;
    const std::vector<double> w = space.weights(rho);

    SUBCASE("constants have zero energy") {
        std::vector<double> ones(size_t(space.dim()), 1.0);
        CHECK(dirichlet_form(op, w, ones) == doctest::Approx(0.0));
    }
    SUBCASE("centered occupation: two incident bonds, each contributing chi") {
        const std::vector<double> f =
            dense_of_local(space, LocalFunction::centered(1, coord(0), rho));
        CHECK(dirichlet_form(op, w, f) ==
              doctest::Approx(2.0 * compressibility(rho)).epsilon(1e-12));
    }
    SUBCASE("k = 0 recovers the squared L2 norm") {
        RngStream rng(79, 13);
        const auto f = random_dense(rng, space.dim());
        CHECK(sobolev_seminorm_sq(op, w, f, 0) == doctest::Approx(inner(w, f, f)));
    }
}

TEST_CASE("semigroup action") {
    Torus t(1, 8);
    StateSpace space = StateSpace::full(t);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    SparseOperator op = build_generator(space, rf);
    const double rho = 0.45;
    const std::vector<double> w = space.weights(rho);
    RngStream rng(83, 14);
    const auto f = random_dense(rng, space.dim());

    SUBCASE("t = 0 is the identity") {
        const auto g = apply_semigroup(op, 0.0, f);
        for (size_t i = 0; i < f.size(); ++i) CHECK(g[i] == f[i]);
    }
    SUBCASE("constants are fixed and the mean is conserved") {
        std::vector<double> ones(size_t(space.dim()), 2.5);
        const auto g = apply_semigroup(op, 1.7, ones, 1e-12);
        for (double v : g) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
        const auto h = apply_semigroup(op, 0.9, f, 1e-12);
        CHECK(mean(w, h) == doctest::Approx(mean(w, f)).epsilon(1e-10));
    }
    SUBCASE("variance decreases along the flow") {
        double prev = variance(w, f);
        for (int k = 1; k <= 10; ++k) {
            const auto g = apply_semigroup(op, 0.15 * k, f, 1e-11);
            const double v = variance(w, g);
            CHECK(v <= prev + 1e-10);
            prev = v;
        }
    }
    SUBCASE("semigroup symmetry <F P_t G> = <G P_t F>") {
        const auto g = random_dense(rng, space.dim());
        const auto pf = apply_semigroup(op, 0.8, f, 1e-12);
        const auto pg = apply_semigroup(op, 0.8, g, 1e-12);
        CHECK(inner(w, f, pg) == doctest::Approx(inner(w, g, pf)).epsilon(1e-9));
    }
    SUBCASE("the dirichlet form decreases along the flow") {
        double prev = dirichlet_form(op, w, f);
        for (int k = 1; k <= 6; ++k) {
            const auto g = apply_semigroup(op, 0.2 * k, f, 1e-11);
            const double e = dirichlet_form(op, w, g);
            CHECK(e <= prev + 1e-9);
            prev = e;
        }
    }
}

TEST_CASE("energy comparison between L and the matched SEP") {
    Torus t(1, 6);
    StateSpace space = StateSpace::full(t);
    const double rho = 0.5;
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    SparseOperator op_l = build_generator(space, rf);
    JumpKernel q = JumpKernel::nearest_neighbor(1, 0.5);
    SparseOperator op_lbar = build_sep_generator(space, q);

    EnergyComparison cmp = energy_comparison(space, op_l, op_lbar, q, rho);
    CHECK(cmp.probes_used > 50);
    CHECK(cmp.probes_skipped >= 0);
    CHECK(cmp.min_lower_ratio >= 0.125 - 1e-9);
    CHECK(cmp.max_upper_ratio > 0.0);
    CHECK(cmp.max_upper_ratio <= cmp.moving_particle_bound + 1e-9);
    MESSAGE("lower ratio " << cmp.min_lower_ratio << ", upper ratio " << cmp.max_upper_ratio
                           << ", moving-particle bound " << cmp.moving_particle_bound);
}

TEST_CASE("energy dissipation identity and interpolation bounds") {
    // |Gbar_t|^2_{Hk} + 2 int_tau^t |Gbar_s|^2_{Hk+1} ds = |Gbar_tau|^2_{Hk}
    Torus t(1, 6);
    StateSpace space = StateSpace::full(t);
    const double rho = 0.35;
    const std::vector<double> w = space.weights(rho);
    JumpKernel q = JumpKernel::nearest_neighbor(1, 0.5);
    SparseOperator op = build_sep_generator(space, q);
    RngStream rng(89, 15);
    auto g0 = random_dense(rng, space.dim());
    const double tau = 0.2, tend = 1.2;
    const auto g_tau = apply_semigroup(op, tau, g0, 1e-12);
    const auto g_t = apply_semigroup(op, tend - tau, g_tau, 1e-12);

    for (int k = 0; k <= 1; ++k) {
        const double lhs = sobolev_seminorm_sq(op, w, g_t, k) +
                           2.0 * simpson_hk(op, w, g_tau, tau, tend, k, 24);
        const double rhs = sobolev_seminorm_sq(op, w, g_tau, k);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
        // |Gbar_t|_{Hk+1} <= (t - tau)^{-1/2} |Gbar_tau|_{Hk}
        CHECK(std::sqrt(sobolev_seminorm_sq(op, w, g_t, k + 1)) <=
              std::sqrt(sobolev_seminorm_sq(op, w, g_tau, k) / (tend - tau)) + 1e-10);
    }
}

TEST_CASE("short-time SEP regularization of P_t") {
    // |Pbar_tau P_t F - P_t F| <= sqrt(C tau / t) |F| with the moving-particle C
    Torus t(1, 6);
    StateSpace space = StateSpace::full(t);
    const double rho = 0.5;
    const std::vector<double> w = space.weights(rho);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    SparseOperator op_l = build_generator(space, rf);
    JumpKernel q = JumpKernel::nearest_neighbor(1, 0.5);
    SparseOperator op_lbar = build_sep_generator(space, q);
    EnergyComparison cmp = energy_comparison(space, op_l, op_lbar, q, rho);

    RngStream rng(97, 16);
    for (int trial = 0; trial < 5; ++trial) {
        auto f = random_dense(rng, space.dim());
        const double fmean = mean(w, f);
        for (double& v : f) v -= fmean;
        const double fnorm = std::sqrt(inner(w, f, f));
        for (double tt : {0.5, 1.0, 2.0}) {
            const double tau = 0.05 * tt;
            const auto pt = apply_semigroup(op_l, tt, f, 1e-12);
            const auto reg = apply_semigroup(op_lbar, tau, pt, 1e-12);
            std::vector<double> diff(pt.size());
            for (size_t i = 0; i < pt.size(); ++i) diff[i] = reg[i] - pt[i];
            const double lhs = std::sqrt(inner(w, diff, diff));
            CHECK(lhs <= std::sqrt(cmp.moving_particle_bound * tau / tt) * fnorm + 1e-10);
        }
    }
}

TEST_CASE("triple norm contraction under the SEP semigroup") {
    Torus t(1, 8);
    StateSpace space = StateSpace::full(t);
    const double rho = 0.4;
    JumpKernel q = JumpKernel::nearest_neighbor(1, 0.5);
    SparseOperator op = build_sep_generator(space, q);
    RngStream rng(101, 17);
    for (int trial = 0; trial < 5; ++trial) {
        // mixed chaos data from a random local function on 5 sites
        std::vector<Coord> supp;
        for (int i = 0; i < 5; ++i) supp.push_back(coord(i));
        std::vector<double> table(32);
        for (double& v : table) v = 2.0 * rng.next_double() - 1.0;
        const std::vector<double> f =
            dense_of_local(space, LocalFunction(1, supp, table));
        const ChaosCoeffs before = chaos_of_state_function(space, rho, f, 2);
        const auto pf = apply_semigroup(op, 0.7 + trial * 0.3, f, 1e-13);
        const ChaosCoeffs after = chaos_of_state_function(space, rho, pf, 2);
        for (int n = 1; n <= 2; ++n)
            CHECK(triple_norm(after, n) <= triple_norm(before, n) + 1e-10);
    }
}

TEST_CASE("generalized Nash diagnostic is computed and logged") {
    Torus t(1, 8);
    StateSpace space = StateSpace::full(t);
    const double rho = 0.5;
    const double chi = compressibility(rho);
    const std::vector<double> w = space.weights(rho);
    JumpKernel q = JumpKernel::nearest_neighbor(1, 0.5);
    SparseOperator op = build_sep_generator(space, q);
    RngStream rng(103, 18);
    double worst = 0.0;
    for (int n = 1; n <= 2; ++n) {
        const double alpha = double(n) / (2.0 + double(n));  // nd/(2+nd), d = 1
        for (int trial = 0; trial < 10; ++trial) {
            ChaosCoeffs c;
            c.dim = 1;
            c.rho = rho;
            for (int k = 0; k < 4; ++k) {
                std::set<Coord> y;
                while (int(y.size()) < n) y.insert(coord(int(rng.next_below(8))));
                c.add(SiteSet(y.begin(), y.end()), 2.0 * rng.next_double() - 1.0);
            }
            const std::vector<double> f = dense_of_chaos_level(space, c, n);
            const double l2 = inner(w, f, f);
            const double energy = dirichlet_form(op, w, f);
            const double tn = triple_norm(c, n);
            if (energy <= 0.0 || tn <= 0.0) continue;
            const double denom = std::pow(chi, n * (1.0 - alpha)) * std::pow(energy, alpha) *
                                 std::pow(tn * tn, 1.0 - alpha);
            worst = std::max(worst, l2 / denom);
        }
    }
    MESSAGE("largest observed Nash ratio over probes: " << worst);
    CHECK(worst > 0.0);
}

TEST_CASE("sector restriction: canonical reversibility and binomial mixing") {
    Torus t(1, 6);
    StateSpace sector = StateSpace::sector(t, 3);
    CHECK(sector.dim() == 20);
    RateFamily rf = RateFamily::build(neighbor_weighted_rule(1, 0.5));
    SparseOperator op = build_generator(sector, rf);
    const std::vector<double> w = sector.weights(0.5);  // uniform
    RngStream rng(107, 19);
    const auto f = random_dense(rng, sector.dim());
    const auto g = random_dense(rng, sector.dim());
    CHECK(inner(w, f, op.apply(g)) == doctest::Approx(inner(w, g, op.apply(f))).epsilon(1e-11));
    // mixing sectors with binomial weights reproduces the Bernoulli expectation
    const double rho = 0.3;
    StateSpace full = StateSpace::full(t);
    const std::vector<double> wf = full.weights(rho);
    const LocalFunction u = LocalFunction::occupation(1, coord(0)) *
                            LocalFunction::occupation(1, coord(2));
    double mixed = 0.0;
    for (int k = 0; k <= 6; ++k) {
        StateSpace sec = StateSpace::sector(t, k);
        const double bin = binomial(6, k) * std::pow(rho, k) * std::pow(1.0 - rho, 6 - k);
        mixed += bin * mean(sec.weights(rho), dense_of_local(sec, u));
    }
    CHECK(mixed == doctest::Approx(mean(wf, dense_of_local(full, u))).epsilon(1e-12));
}

TEST_CASE("coordinate-list export preserves the zero row sums") {
    Torus t(1, 3);
    StateSpace space = StateSpace::full(t);
    SparseOperator op = build_generator(space, RateFamily::build(ssep_rule(1)));
    std::ostringstream os;
    op.export_coo(os);
    std::istringstream is(os.str());
    int64_t r, c;
    double v;
    double row_sums[8] = {0};
    int entries = 0;
    while (is >> r >> c >> v) {
        row_sums[r] += v;
        ++entries;
    }
    CHECK(entries == int(op.val.size()));
    for (double s : row_sums) CHECK(std::abs(s) < 1e-14);
}
