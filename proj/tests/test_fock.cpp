#include <doctest.h>

#include <cmath>

#include "latgas/fock.hpp"
#include "latgas/rng.hpp"

using namespace latgas;

namespace {

LocalFunction random_local(RngStream& rng, int dim, int n_sites, int box_radius) {
    std::set<Coord> sup;
    while (int(sup.size()) < n_sites) {
        Coord c{};
        for (int i = 0; i < dim; ++i)
            c[i] = int(rng.next_below(uint64_t(2 * box_radius + 1))) - box_radius;
        sup.insert(c);
    }
    std::vector<Coord> supp(sup.begin(), sup.end());
    std::vector<double> table(size_t(1) << supp.size());
    for (double& v : table) v = 2.0 * rng.next_double() - 1.0;
    return LocalFunction(dim, supp, table);
}

}  // namespace

TEST_CASE("chaos coefficient examples") {
    const double rho = 0.3;
    SUBCASE("centered occupation is pure level 1") {
        ChaosCoeffs c = chaos_coeffs(LocalFunction::centered(1, coord(0), rho), rho);
        CHECK(c.max_level() == 1);
        CHECK(c.level0() == doctest::Approx(0.0));
        CHECK(c.at({coord(0)}) == doctest::Approx(1.0));
    }
    SUBCASE("eta_0 eta_1") {
        LocalFunction f = LocalFunction::occupation(1, coord(0)) *
                          LocalFunction::occupation(1, coord(1));
        ChaosCoeffs c = chaos_coeffs(f, rho);
        CHECK(c.level0() == doctest::Approx(rho * rho));
        CHECK(c.at({coord(0)}) == doctest::Approx(rho));
        CHECK(c.at({coord(1)}) == doctest::Approx(rho));
        CHECK(c.at({coord(0), coord(1)}) == doctest::Approx(1.0));
    }
    SUBCASE("constants live at level 0 only") {
        ChaosCoeffs c = chaos_coeffs(LocalFunction::constant(1, 4.25), rho);
        CHECK(c.level0() == doctest::Approx(4.25));
        CHECK(c.max_level() == 0);
    }
}

TEST_CASE("multiple integral examples") {
    const double rho = 0.45;
    const double chi = compressibility(rho);
    BernoulliMeasure mu{rho};
    SUBCASE("level-1 delta gives the centered occupation, second moment chi") {
        ChaosCoeffs c;
        c.dim = 1;
        c.rho = rho;
        c.set({coord(0)}, 1.0);
        LocalFunction f = multiple_integral(c, 1);
        CHECK(expect(mu, f * f) == doctest::Approx(chi).epsilon(1e-13));
    }
    SUBCASE("level-2 delta: second moment chi^2") {
        ChaosCoeffs c;
        c.dim = 1;
        c.rho = rho;
        c.set({coord(0), coord(1)}, 1.0);
        LocalFunction f = multiple_integral(c, 2);
        CHECK(expect(mu, f * f) == doctest::Approx(chi * chi).epsilon(1e-13));
    }
    SUBCASE("different levels are orthogonal") {
        ChaosCoeffs c;
        c.dim = 1;
        c.rho = rho;
        c.set({coord(0)}, 0.7);
        c.set({coord(2)}, -0.2);
        c.set({coord(0), coord(1)}, 1.3);
        c.set({coord(2), coord(3)}, 0.4);
        LocalFunction f1 = multiple_integral(c, 1);
        LocalFunction f2 = multiple_integral(c, 2);
        CHECK(expect(mu, f1 * f2) == doctest::Approx(0.0).epsilon(1e-13));
    }
}

TEST_CASE("isometry on random levels") {
    RngStream rng(41, 5);
    for (int trial = 0; trial < 10; ++trial) {
        const double rho = 0.2 + 0.6 * rng.next_double();
        const double chi = compressibility(rho);
        ChaosCoeffs c;
        c.dim = 1;
        c.rho = rho;
        const int n = 1 + int(rng.next_below(2));
        for (int k = 0; k < 4; ++k) {
            std::set<Coord> y;
            while (int(y.size()) < n) y.insert(coord(int(rng.next_below(6))));
            c.add(SiteSet(y.begin(), y.end()), 2.0 * rng.next_double() - 1.0);
        }
        LocalFunction f = multiple_integral(c, n);
        const double lhs = expect(BernoulliMeasure{rho}, f * f);
        const double rhs = std::pow(chi, n) * l2_level_norm_sq(c, n);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("parseval") {
    SUBCASE("eta_0 eta_1 at rho = 0.3: both sides equal 0.09") {
        const double rho = 0.3;
        LocalFunction f = LocalFunction::occupation(1, coord(0)) *
                          LocalFunction::occupation(1, coord(1));
        CHECK(expect(BernoulliMeasure{rho}, f * f) == doctest::Approx(0.09).epsilon(1e-14));
        CHECK(parseval_residual(f, rho) == doctest::Approx(0.0).epsilon(1e-13));
    }
    SUBCASE("constants") {
        CHECK(parseval_residual(LocalFunction::constant(1, 3.0), 0.5) ==
              doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("20 random functions on 8 sites") {
        RngStream rng(43, 6);
        for (int trial = 0; trial < 20; ++trial) {
            const double rho = 0.1 + 0.8 * rng.next_double();
            LocalFunction f = random_local(rng, 1, 8, 6);
            const double moment = expect(BernoulliMeasure{rho}, f * f);
            CHECK(std::abs(parseval_residual(f, rho)) <= 1e-10 * std::max(moment, 1.0));
        }
    }
}

TEST_CASE("triple norm") {
    ChaosCoeffs c;
    c.dim = 1;
    c.rho = 0.5;
    c.set({coord(0)}, 1.0);
    CHECK(triple_norm(c, 1) == doctest::Approx(1.0));
    c.set({coord(1)}, -0.5);
    c.set({coord(2)}, 0.5);
    ChaosCoeffs two;
    two.dim = 1;
    two.rho = 0.5;
    two.set({coord(1)}, -0.5);
    two.set({coord(2)}, 0.5);
    CHECK(triple_norm(two, 1) == doctest::Approx(1.0));

    // random table against a sorted re-summation oracle
    RngStream rng(47, 7);
    ChaosCoeffs r;
    r.dim = 1;
    r.rho = 0.5;
    std::vector<double> vals;
    for (int k = 0; k < 30; ++k) {
        const double v = 2.0 * rng.next_double() - 1.0;
        r.set({coord(k), coord(k + 40)}, v);
        vals.push_back(std::abs(v));
    }
    std::sort(vals.begin(), vals.end());
    double oracle = 0.0;
    for (double v : vals) oracle += v;
    CHECK(triple_norm(r, 2) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(triple_norm(r, 2) >= std::sqrt(l2_level_norm_sq(r, 2)));
}

TEST_CASE("density derivatives") {
    SUBCASE("d/drho E[eta_0] = 1") {
        CHECK(rho_derivative(LocalFunction::occupation(1, coord(0)), 0.5, 1) ==
              doctest::Approx(1.0));
    }
    SUBCASE("d/drho E[eta_0 eta_1] = 2 rho at rho = 0.4") {
        LocalFunction f = LocalFunction::occupation(1, coord(0)) *
                          LocalFunction::occupation(1, coord(1));
        CHECK(rho_derivative(f, 0.4, 1) == doctest::Approx(0.8).epsilon(1e-13));
    }
    SUBCASE("matches central finite differences of rho -> E_rho[F]") {
        RngStream rng(53, 8);
        for (int trial = 0; trial < 8; ++trial) {
            const double rho = 0.25 + 0.5 * rng.next_double();
            LocalFunction f = random_local(rng, 1, 6, 4);
            for (int order = 1; order <= 2; ++order) {
                const double h = 1e-4;
                double fd;
                if (order == 1) {
                    fd = (expect(BernoulliMeasure{rho + h}, f) -
                          expect(BernoulliMeasure{rho - h}, f)) /
                         (2.0 * h);
                } else {
                    fd = (expect(BernoulliMeasure{rho + h}, f) -
                          2.0 * expect(BernoulliMeasure{rho}, f) +
                          expect(BernoulliMeasure{rho - h}, f)) /
                         (h * h);
                }
                const double exact = rho_derivative(f, rho, order);
                CHECK(exact == doctest::Approx(fd).epsilon(order == 1 ? 1e-6 : 1e-4));
            }
        }
    }
}

TEST_CASE("reconstruction is exact pointwise up to 12-site supports") {
    RngStream rng(59, 9);
    for (int trial = 0; trial < 6; ++trial) {
        const double rho = 0.2 + 0.6 * rng.next_double();
        const int n_sites = 4 + int(rng.next_below(9));  // up to 12
        LocalFunction f = random_local(rng, 1, n_sites, 8);
        LocalFunction rec = chaos_reconstruct(chaos_coeffs(f, rho));
        CHECK((rec - f).max_abs() <= 1e-11 * std::max(1.0, f.max_abs()));
    }
}

TEST_CASE("projection idempotence") {
    RngStream rng(61, 10);
    const double rho = 0.35;
    ChaosCoeffs c;
    c.dim = 1;
    c.rho = rho;
    for (int k = 0; k < 5; ++k) {
        std::set<Coord> y;
        while (y.size() < 2) y.insert(coord(int(rng.next_below(7))));
        c.add(SiteSet(y.begin(), y.end()), 2.0 * rng.next_double() - 1.0);
    }
    LocalFunction f = multiple_integral(c, 2);
    ChaosCoeffs back = chaos_coeffs(f, rho);
    for (int n = 0; n <= back.max_level(); ++n) {
        if (n == 2) continue;
        CHECK(l1_level_norm(back, n) <= 1e-12);
    }
    for (const auto& [y, v] : c.levels[2]) CHECK(back.at(y) == doctest::Approx(v).epsilon(1e-12));
}
