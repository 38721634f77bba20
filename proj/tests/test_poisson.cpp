#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bfm/grid.hpp"
#include "bfm/poisson.hpp"
#include "support/oracles.hpp"

using bfm::Grid;
using bfm::Potential;
using bfm::ScalarField;
using bfm::SpectralPlan;

namespace {

constexpr double kPi = 3.14159265358979323846;

double stencil_eigenvalue(int k, int n) {
  return (2.0 - 2.0 * std::cos(kPi * k / n)) * static_cast<double>(n) * n;
}

ScalarField random_field(const Grid& g, unsigned seed, double lo = -1.0,
                         double hi = 1.0) {
  ScalarField f(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  for (auto& v : f.values) v = uni(rng);
  return f;
}

double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("cosine modes are eigenfunctions of the inverse", "[poisson]") {
  Grid g({64});
  SpectralPlan plan(g);
  ScalarField rhs(g);
  for (int j = 0; j < 64; ++j) rhs.values[j] = std::cos(kPi * g.coord(0, j));
  Potential u = plan.solve_neumann(rhs);
  const double lam = stencil_eigenvalue(1, 64);
  for (int j = 0; j < 64; ++j)
    CHECK(std::fabs(u.values[j] - rhs.values[j] / lam) < 1e-12);

  Grid g2({32, 16});
  SpectralPlan plan2(g2);
  ScalarField rhs2(g2);
  for (int i0 = 0; i0 < 32; ++i0)
    for (int i1 = 0; i1 < 16; ++i1)
      rhs2.values[g2.linear({i0, i1})] =
          std::cos(2.0 * kPi * g2.coord(0, i0)) * std::cos(3.0 * kPi * g2.coord(1, i1));
  Potential u2 = plan2.solve_neumann(rhs2);
  const double lam2 = stencil_eigenvalue(2, 32) + stencil_eigenvalue(3, 16);
  for (std::size_t i = 0; i < g2.size(); ++i)
    CHECK(std::fabs(u2.values[i] - rhs2.values[i] / lam2) < 1e-12);
}

TEST_CASE("applying the stencil recovers the mean-free right-hand side", "[poisson]") {
  for (const Grid& g : {Grid({33}), Grid({64, 64}), Grid({17, 29}), Grid({5, 7}),
                        Grid({32, 32, 32}), Grid({6, 9, 11})}) {
    SpectralPlan plan(g);
    ScalarField rhs = random_field(g, 1234 + g.size());
    Potential u = plan.solve_neumann(rhs);
    auto back = oracle::neg_laplacian(g.extents(), u.values);
    const double m = mean(rhs.values);
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      scale = std::max(scale, std::fabs(rhs.values[i] - m));
      worst = std::max(worst, std::fabs(back[i] - (rhs.values[i] - m)));
    }
    CHECK(worst <= 1e-10 * scale);
  }
}

TEST_CASE("solutions have zero mean and ignore constant shifts", "[poisson]") {
  Grid g({48, 24});
  SpectralPlan plan(g);
  ScalarField rhs = random_field(g, 99);
  Potential u = plan.solve_neumann(rhs);
  CHECK(std::fabs(mean(u.values)) < 1e-12);

  ScalarField shifted(g);
  for (std::size_t i = 0; i < g.size(); ++i) shifted.values[i] = rhs.values[i] + 7.5;
  Potential v = plan.solve_neumann(shifted);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::fabs(u.values[i] - v.values[i]) < 1e-12);
}

TEST_CASE("the inverse Laplacian is linear", "[poisson]") {
  Grid g({20, 20});
  SpectralPlan plan(g);
  ScalarField r1 = random_field(g, 5);
  ScalarField r2 = random_field(g, 6);
  ScalarField comb(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    comb.values[i] = 2.0 * r1.values[i] - 0.25 * r2.values[i];
  Potential u1 = plan.solve_neumann(r1);
  Potential u2 = plan.solve_neumann(r2);
  Potential uc = plan.solve_neumann(comb);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::fabs(uc.values[i] - (2.0 * u1.values[i] - 0.25 * u2.values[i])) < 1e-12);
}

TEST_CASE("homogeneous Sobolev norms of a single mode", "[poisson]") {
  Grid g({64});
  SpectralPlan plan(g);
  ScalarField f(g);
  for (int j = 0; j < 64; ++j) f.values[j] = std::cos(kPi * g.coord(0, j));
  const double lam = stencil_eigenvalue(1, 64);
  // Mode energy under the midpoint inner product is exactly 1/2.
  CHECK(plan.h1dot_norm_sq(f) == Catch::Approx(0.5 * lam).epsilon(1e-13));
  CHECK(plan.hm1dot_norm_sq(f) == Catch::Approx(0.5 / lam).epsilon(1e-13));
}

TEST_CASE("dual norm equals the pairing with the solution", "[poisson]") {
  for (const Grid& g : {Grid({40, 56}), Grid({12, 10, 8})}) {
    SpectralPlan plan(g);
    ScalarField r = random_field(g, 2024);
    Potential u = plan.solve_neumann(r);
    const double m = mean(r.values);
    double pairing = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      pairing += (r.values[i] - m) * u.values[i];
    pairing *= g.cell_volume();
    const double dual = plan.hm1dot_norm_sq(r);
    CHECK(std::fabs(dual - pairing) <= 1e-12 * std::max(1.0, std::fabs(dual)));
  }
}

TEST_CASE("pairing satisfies Cauchy-Schwarz between the dual norms", "[poisson]") {
  Grid g({24, 24});
  SpectralPlan plan(g);
  for (unsigned seed = 0; seed < 20; ++seed) {
    ScalarField f = random_field(g, 300 + seed);
    ScalarField r = random_field(g, 400 + seed);
    const double mf = mean(f.values);
    const double mr = mean(r.values);
    double pairing = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      pairing += (f.values[i] - mf) * (r.values[i] - mr);
    pairing *= g.cell_volume();
    const double bound =
        std::sqrt(plan.h1dot_norm_sq(f)) * std::sqrt(plan.hm1dot_norm_sq(r));
    CHECK(std::fabs(pairing) <= bound * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("plan rejects fields on other grids", "[poisson]") {
  SpectralPlan plan(Grid({16, 16}));
  ScalarField f(Grid({16, 8}));
  CHECK_THROWS_AS(plan.solve_neumann(f), bfm::GridMismatch);
  CHECK_THROWS_AS(plan.h1dot_norm_sq(f), bfm::GridMismatch);
}
