#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rieszfrac/renewal.hpp"

using namespace rieszfrac;

namespace {

RenewalSystem system_of(std::vector<real_ext> f, std::vector<real_ext> b) {
  RenewalSystem rs;
  rs.f = std::move(f);
  rs.b = std::move(b);
  return rs;
}

}  // namespace

TEST(Validate, Verdicts) {
  EXPECT_TRUE(validate(system_of({0, 1}, {1})).aperiodic());
  const auto v = validate(system_of({0, 0, 0.5L, 0, 0.5L}, {1}));
  EXPECT_FALSE(v.aperiodic());
  EXPECT_EQ(v.period, 2u);
  const real_ext phi = (1 + std::sqrt(5.0L)) / 2;
  const auto g = validate(system_of({0, 1 / phi, 1 / (phi * phi)}, {1}));
  EXPECT_TRUE(g.aperiodic());
  EXPECT_TRUE(g.mass_ok);
  EXPECT_FALSE(validate(system_of({0, 0.5L}, {1})).mass_ok);
  EXPECT_FALSE(validate(system_of({0, 1.5L, -0.5L}, {1})).nonnegative);
  EXPECT_THROW(validate(system_of({0, 0}, {1})), std::invalid_argument);
}

TEST(Iterate, Examples) {
  std::vector<real_ext> b;
  for (int n = 0; n <= 60; ++n) b.push_back(std::pow(2.0L, -n));
  const auto z = iterate(system_of({0, 1}, b), 60);
  for (int n = 0; n <= 60; ++n) EXPECT_NEAR(static_cast<double>(z[n]), 2.0 - std::pow(2.0, -n), 1e-15);

  const auto h = iterate(system_of({0, 0.5L, 0.5L}, {1}), 4);
  const std::vector<double> expect{1, 0.5, 0.75, 0.625, 0.6875};
  for (std::size_t n = 0; n < expect.size(); ++n) EXPECT_DOUBLE_EQ(static_cast<double>(h[n]), expect[n]);

  for (auto x : iterate(system_of({0, 0.5L, 0.5L}, {0}), 20)) EXPECT_EQ(x, 0);
}

TEST(Iterate, ZeroIndexTermIsSolvedAlgebraically) {
  // z_n = b_n + f0 z_n + f1 z_{n-1}
  const auto z = iterate(system_of({0.25L, 0.75L}, {1}), 30);
  EXPECT_NEAR(static_cast<double>(z[0]), 4.0 / 3, 1e-15);
  EXPECT_NEAR(static_cast<double>(z[1]), static_cast<double>(z[0]), 1e-15);
  EXPECT_THROW(iterate(system_of({1}, {1}), 3), std::invalid_argument);
}

TEST(Limit, Examples) {
  std::vector<real_ext> b;
  for (int n = 0; n <= 80; ++n) b.push_back(std::pow(2.0L, -n));
  EXPECT_NEAR(static_cast<double>(limit_estimate(system_of({0, 1}, b)).value), 2.0, 1e-15);

  const auto le = limit_estimate(system_of({0, 0.5L, 0.5L}, {1}), 60);
  EXPECT_NEAR(static_cast<double>(le.value), 2.0 / 3, 1e-15);
  EXPECT_LE(static_cast<double>(le.residual), 1e-10);
  EXPECT_THROW(limit_estimate(system_of({0, 0, 1}, {1})), std::domain_error);
}

TEST(Limit, TailBoundPropagates) {
  auto rs = system_of({0, 0.5L, 0.5L}, {1});
  rs.b_tail_bound = 0.003L;
  EXPECT_NEAR(static_cast<double>(limit_estimate(rs).uncertainty), 0.002, 1e-15);
}

TEST(Periodic, ParitySubsequencesSeparate) {
  const auto z = iterate(system_of({0, 0, 1}, {1}), 200);
  for (std::size_t n = 0; n <= 200; ++n) EXPECT_EQ(z[n], n % 2 == 0 ? 1 : 0);
  const auto w = iterate(system_of({0, 0, 0.5L, 0, 0.5L}, {1}), 400);
  EXPECT_GT(std::fabs(w[400] - w[399]), 0.1L);
}

TEST(Reconstruction, RecoversB) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<real_ext> f(6, 0);
    for (std::size_t k = 1; k < f.size(); ++k) f[k] = u(rng);
    const real_ext total = std::accumulate(f.begin(), f.end(), 0.0L);
    for (auto& x : f) x /= total;
    std::vector<real_ext> b;
    for (int n = 0; n < 40; ++n) b.push_back((u(rng) - 0.5) * std::pow(0.8L, n));
    const auto z = iterate(system_of(f, b), 120);
    const auto back = reconstruct_b(f, z);
    for (std::size_t n = 0; n < back.size(); ++n) {
      EXPECT_NEAR(static_cast<double>(back[n]), n < b.size() ? static_cast<double>(b[n]) : 0.0, 1e-12);
    }
  }
}

TEST(Convergence, RandomAperiodicSystems) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 1);
  std::uniform_int_distribution<std::size_t> support(1, 6);
  int cases = 0;
  while (cases < 100) {
    const std::size_t k = support(rng);
    std::vector<real_ext> f(k + 1, 0);
    std::size_t g = 0;
    for (std::size_t j = 1; j <= k; ++j) {
      if (j == k || u(rng) < 0.6) {
        f[j] = u(rng);
        g = std::gcd(g, j);
      }
    }
    if (g != 1) continue;
    const real_ext total = std::accumulate(f.begin(), f.end(), 0.0L);
    for (auto& x : f) x /= total;
    std::vector<real_ext> b;
    const real_ext q = 0.3L + 0.5L * u(rng);
    for (int n = 0; n < 200; ++n) b.push_back(std::pow(q, n) * (u(rng) - 0.3));
    const auto rs = system_of(f, b);
    const auto le = limit_estimate(rs, 500);
    EXPECT_LE(static_cast<double>(le.residual), 1e-8) << "case " << cases;
    EXPECT_LE(static_cast<double>(le.cauchy_width), 1e-8) << "case " << cases;
    ++cases;
  }
}

TEST(Telescoping, PartialSumIdentity) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<real_ext> f{0, u(rng), u(rng), 0, u(rng)};
    const real_ext total = std::accumulate(f.begin(), f.end(), 0.0L);
    for (auto& x : f) x /= total;
    std::vector<real_ext> b;
    for (int n = 0; n < 30; ++n) b.push_back(u(rng) - 0.5);
    const auto z = iterate(system_of(f, b), 60);
    real_ext partial = 0;
    for (std::size_t L = 0; L <= 60; ++L) {
      partial += L < b.size() ? b[L] : 0.0L;
      EXPECT_NEAR(static_cast<double>(telescoping_partial_sum(f, z, L)), static_cast<double>(partial), 1e-12);
    }
  }
}

TEST(Distribution, Parse) {
  const auto f = parse_distribution("1:0.5,2:0.5");
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[1], 0.5L);
  EXPECT_THROW(parse_distribution("1=0.5"), ParseError);
  EXPECT_THROW(parse_distribution("x:1"), ParseError);
}
