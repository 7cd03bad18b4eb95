#include <cmath>
#include <random>

#include "doctest.h"
#include "fwf/grid.hpp"

using namespace fwf;

TEST_CASE("grid midpoints") {
  const auto g = Grid1D::make(8);
  CHECK(g.dx == 0.125);
  CHECK(g.x.front() == doctest::Approx(g.dx / 2));
  CHECK(g.x.back() == doctest::Approx(1 - g.dx / 2));
  for (int i = 1; i < g.m; ++i) CHECK(g.x[i] > g.x[i - 1]);
  CHECK_THROWS_AS(Grid1D::make(0), ValidationError);
}

TEST_CASE("uniform mu") {
  for (int m : {1, 4, 37}) {
    const auto g = Grid1D::make(m);
    const auto mu = build_uniform_mu(g);
    double s = 0;
    for (double d : mu.density) {
      CHECK(d == 1.0);
      s += d * g.dx;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_NOTHROW(validate(g, mu));
  }
}

TEST_CASE("bottleneck mu") {
  SUBCASE("delta 1/8, ratio 1/2 at m=256") {
    const auto g = Grid1D::make(256);
    const auto mu = build_bottleneck_mu(g, 0.125, 0.5);
    int nb = 0;
    for (double d : mu.density) {
      if (std::abs(d - 4.0 / 7.0) < 1e-14) ++nb;
      else CHECK(d == doctest::Approx(8.0 / 7.0).epsilon(1e-14));
    }
    CHECK(nb == 64);
    CHECK_NOTHROW(validate(g, mu));
  }
  SUBCASE("ratio 1 is uniform") {
    const auto g = Grid1D::make(32);
    for (double d : build_bottleneck_mu(g, 0.2, 1.0).density) CHECK(d == doctest::Approx(1.0));
  }
  SUBCASE("range checks") {
    const auto g = Grid1D::make(8);
    CHECK_THROWS_AS(build_bottleneck_mu(g, 0.0, 0.5), ValidationError);
    CHECK_THROWS_AS(build_bottleneck_mu(g, 0.5, 0.5), ValidationError);
    CHECK_THROWS_AS(build_bottleneck_mu(g, 0.1, 0.0), ValidationError);
  }
}

TEST_CASE("equispaced nu") {
  const auto nu = build_equispaced_nu(4);
  CHECK(nu.y == std::vector<double>{0.125, 0.375, 0.625, 0.875});
  for (double w : nu.mass) CHECK(w == 0.25);
  CHECK_NOTHROW(validate(nu));
  const auto one = build_equispaced_nu(1);
  CHECK(one.y[0] == 0.5);
  CHECK(one.mass[0] == 1.0);
  CHECK_THROWS_AS(build_equispaced_nu(0), ValidationError);

  SpeciesSet dup{{0.5, 0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(validate(dup), ValidationError);
}

TEST_CASE("product coupling") {
  const auto g = Grid1D::make(2);
  const MarginalX mu{{0.5, 1.5}};
  const auto nu = build_equispaced_nu(2);
  const auto r = product_coupling(mu, nu);
  CHECK(r.r == std::vector<double>{0.5, 0.5, 1.5, 1.5});
  CHECK(marginal_residual(r, mu, nu, g).max() <= 1e-12);

  const auto g2 = Grid1D::make(64);
  const auto mu2 = build_bottleneck_mu(g2, 0.125, 0.5);
  const auto nu2 = build_equispaced_nu(8);
  const auto r2 = product_coupling(mu2, nu2);
  const auto xm = x_marginal(r2, nu2);
  for (int i = 0; i < 64; ++i) CHECK(xm[i] == doctest::Approx(mu2.density[i]).epsilon(1e-14));
  CHECK(marginal_residual(r2, mu2, nu2, g2).max() <= 1e-12);
}

TEST_CASE("flipped coupling") {
  const auto g = Grid1D::make(4);
  const auto mu = build_uniform_mu(g);
  const auto nu = build_equispaced_nu(2);
  const auto r = flipped_coupling(g, mu, nu);
  CHECK(r.r == std::vector<double>{0, 2, 0, 2, 2, 0, 2, 0});

  SUBCASE("m = n is anti-diagonal") {
    const auto g5 = Grid1D::make(5);
    const auto nu5 = build_equispaced_nu(5);
    const auto a = flipped_coupling(g5, build_uniform_mu(g5), nu5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK(a(i, j) == (i + j == 4 ? 5.0 : 0.0));
  }
  SUBCASE("marginals and reflection symmetry") {
    const auto g12 = Grid1D::make(12);
    const auto mu12 = build_uniform_mu(g12);
    for (int n : {1, 2, 3, 4, 6, 12}) {
      const auto nun = build_equispaced_nu(n);
      const auto f = flipped_coupling(g12, mu12, nun);
      CHECK(marginal_residual(f, mu12, nun, g12).max() <= 1e-12);
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < n; ++j) CHECK(f(i, j) == f(11 - i, n - 1 - j));
    }
  }
  SUBCASE("rejections") {
    const auto g6 = Grid1D::make(6);
    CHECK_THROWS_AS(flipped_coupling(g6, build_uniform_mu(g6), build_equispaced_nu(4)),
                    ValidationError);
    CHECK_THROWS_AS(flipped_coupling(g6, build_bottleneck_mu(g6, 0.2, 0.5), build_equispaced_nu(2)),
                    ValidationError);
  }
}

TEST_CASE("check_coupling and l1") {
  const auto g = Grid1D::make(4);
  const auto mu = build_uniform_mu(g);
  const auto nu = build_equispaced_nu(2);
  auto r = product_coupling(mu, nu);
  CHECK_NOTHROW(check_coupling(r, mu, nu, g, 1e-12));
  auto bad = r;
  bad(0, 0) += 0.1;
  CHECK_THROWS_AS(check_coupling(bad, mu, nu, g, 1e-6), ValidationError);
  bad = r;
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(check_coupling(bad, mu, nu, g, 1.0), ValidationError);
  CHECK_THROWS_AS(check_coupling(Coupling(3, 2, 1.0), mu, nu, g, 1.0), ValidationError);

  const auto f = flipped_coupling(g, mu, nu);
  // product vs flipped: every entry differs by 1 on cells of mass dx/2
  CHECK(l1_mass(r, f, g, nu) == doctest::Approx(1.0));
  CHECK(l1_mass(r, r, g, nu) == 0.0);
}

TEST_CASE("quadratic potential tables") {
  const auto g = Grid1D::make(16);
  const auto nu = build_equispaced_nu(3);
  const auto spec = EnergySpec::quadratic(g, nu, 0.01);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = g.x[i] - nu.y[j];
      CHECK(spec.V(i, j) == doctest::Approx(d * d / 2));
      CHECK(spec.V(i, j) >= 0);
      if (i > 0 && i < 15) {
        const double fd = (spec.V(i + 1, j) - spec.V(i - 1, j)) / (2 * g.dx);
        CHECK(std::abs(fd - spec.dV(i, j)) <= g.dx * g.dx);
      }
    }
  CHECK_THROWS_AS(EnergySpec::table(g, nu, 0.01, std::vector<double>(48, -1.0),
                                    std::vector<double>(48, 0.0)),
                  ValidationError);
  CHECK_THROWS_AS(EnergySpec::table(g, nu, 0.01, std::vector<double>(47, 1.0),
                                    std::vector<double>(47, 0.0)),
                  ValidationError);
  CHECK_THROWS_AS(EnergySpec::quadratic(g, nu, -1.0), ValidationError);
}
