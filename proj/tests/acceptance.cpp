// Acceptance gate: one PASS/FAIL line per criterion; exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rieszfrac/asymptotics.hpp"
#include "rieszfrac/energy.hpp"
#include "rieszfrac/ifs.hpp"
#include "rieszfrac/packing.hpp"
#include "rieszfrac/renewal.hpp"

using namespace rieszfrac;

namespace {

struct Verdict {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail << "failed: " << what << "; ";
    ok = ok && cond;
  }
};

struct Criterion {
  int id;
  std::string title;
  double time_limit_s;
  std::function<void(Verdict&)> check;
};

Rational pow2(int k) { return pow_int(Rational(2), k); }

void fibonacci_table_exact(Verdict& v) {
  const auto sys = golden_cantor_system();
  const auto fib = fibonacci_numbers(16);
  const auto table = delta_table(sys, fib[16]);
  std::size_t checked = 0;
  for (int n = 3; n <= 16; ++n) {
    const Rational want = pow2(3 - n);
    for (std::size_t N = fib[static_cast<std::size_t>(n - 1)] + 1; N <= fib[static_cast<std::size_t>(n)]; ++N) {
      if (N < 2) continue;
      v.require(table.lower[N] == want && table.upper[N] == want,
                "delta(A," + std::to_string(N) + ") = [" + format_rational(table.lower[N]) + "," +
                    format_rational(table.upper[N]) + "]");
      ++checked;
    }
  }
  v.detail << checked << " values of N certified up to F_16=" << fib[16];
}

void distribution_function(Verdict& v) {
  const auto sys = golden_cantor_system();
  const auto fib = fibonacci_numbers(16);
  for (int n = 3; n <= 16; ++n) {
    const auto c = greedy_count(sys, pow2(3 - n));
    v.require(c.exact() && c.lower == fib[static_cast<std::size_t>(n)],
              "N(2^" + std::to_string(3 - n) + ") = " + std::to_string(c.lower));
  }
  v.detail << "N(2^{3-n}) = F_n for n = 3..16";
}

void counting_recursion(Verdict& v) {
  const auto golden = golden_cantor_system();
  const auto rg = count_recursion_check(golden, *exponent_structure(golden.ratios()), 0, 20);
  v.require(rg.passed(), "golden Cantor recursion");
  for (const auto& row : rg.rows) {
    if (row.n >= rg.J) {
      const auto& r1 = rg.rows[static_cast<std::size_t>(row.n - 1)];
      const auto& r2 = rg.rows[static_cast<std::size_t>(row.n - 2)];
      v.require(row.count_lower == r1.count_lower + r2.count_lower, "R_" + std::to_string(row.n));
    }
  }
  const auto cantor = middle_third_cantor_system();
  const auto rc = count_recursion_check(cantor, *exponent_structure(cantor.ratios()), 0, 20);
  v.require(rc.passed(), "middle-third recursion");
  for (const auto& row : rc.rows) {
    if (row.n >= rc.J) {
      v.require(row.count_lower == 2 * rc.rows[static_cast<std::size_t>(row.n - 1)].count_lower,
                "Cantor R_" + std::to_string(row.n));
    }
  }
  v.detail << "golden J=" << rg.J << ", middle-third J=" << rc.J << ", n up to 20";
}

void dimension(Verdict& v) {
  const std::vector<double> rs{0.25, 0.5};
  const double d = hausdorff_dimension(rs);
  const long double res = std::pow(4.0L, -static_cast<long double>(d)) + std::pow(2.0L, -static_cast<long double>(d)) - 1;
  v.require(std::fabs(res) <= 1e-14L, "Moran residual");
  v.require(std::fabs(d - 0.6942419136) <= 1e-9, "dimension value");
  char buf[96];
  std::snprintf(buf, sizeof buf, "d=%.12f residual=%.2Le", d, res);
  v.detail << buf;
}

const OscillationReport& oscillation20() {
  static const OscillationReport rep = [] {
    const auto sys = golden_cantor_system();
    return packing_oscillation(sys, *exponent_structure(sys.ratios()), 20);
  }();
  return rep;
}

void oscillation(Verdict& v) {
  const auto& rep = oscillation20();
  v.require(rep.warnings.empty(), "report warnings");
  v.require(rep.ratio >= 1.98 && rep.ratio <= 2.02, "ratio " + std::to_string(rep.ratio));
  v.detail << "ratio=" << rep.ratio << " over " << rep.blocks.size() << " blocks";
}

void packing_constant(Verdict& v) {
  const auto sys = golden_cantor_system();
  const auto rep = packing_oscillation(sys, *exponent_structure(sys.ratios()), 17);
  double worst = 0;
  int covered = 0;
  for (const auto& lc : rep.packing_constants) {
    if (lc.n > 16) continue;
    v.require(lc.c <= 0.99, "C_" + std::to_string(lc.n) + " = " + std::to_string(lc.c));
    worst = std::max(worst, lc.c);
    ++covered;
  }
  v.require(covered == 16 - rep.J + 1, "C_n missing for some n in [J,16]");
  v.detail << "max C_n=" << worst << " for n in [" << rep.J << ",16]";
}

void renewal(Verdict& v) {
  RenewalSystem rs;
  rs.f = {0, 0.5L, 0.5L};
  rs.b = {1};
  const auto z = iterate(rs, 500);
  v.require(std::fabs(z[500] - 2.0L / 3) <= 1e-10L, "z_500 vs 2/3");
  const auto le = limit_estimate(rs, 500);
  v.require(std::fabs(le.value - 2.0L / 3) <= 1e-15L, "limit estimate");
  v.require(le.residual <= 1e-10L, "limit matches iteration");
  RenewalSystem periodic;
  periodic.f = {0, 0, 1};
  periodic.b = {1};
  const auto w = iterate(periodic, 500);
  v.require(!validate(periodic).aperiodic(), "periodic verdict");
  v.require(w[500] - w[499] == 1.0L && w[498] == 1.0L && w[497] == 0.0L, "parity gap");
  v.detail << "|z_500-2/3|=" << static_cast<double>(std::fabs(z[500] - 2.0L / 3)) << ", parity gap "
           << static_cast<double>(w[500] - w[499]);
}

void oracle_equivalence(Verdict& v) {
  const std::vector<FractalSystem> systems{golden_cantor_system().to_general(),
                                           middle_third_cantor_system().to_general()};
  std::mt19937_64 rng(20240611);
  int instances = 0;
  double worst = 0;
  for (int i = 0; instances < 50; ++i) {
    const auto& sys = systems[static_cast<std::size_t>(i) % systems.size()];
    const int depth = std::uniform_int_distribution<int>(1, 5)(rng);
    const auto lat = prefractal_lattice(sys, depth);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    if (lat.size() < n || !within_bruteforce_guard(lat.size(), n)) continue;
    const double s = std::uniform_real_distribution<double>(0.5, 8.0)(rng);
    const double brute = min_energy_bruteforce(lat, n, s).energy;
    const double found = min_energy_search(lat, n, s, SearchOptions{8, static_cast<std::uint64_t>(i)}).config.energy;
    const double rel = std::fabs(found - brute) / brute;
    worst = std::max(worst, rel);
    v.require(rel <= 1e-12, "instance " + std::to_string(instances));
    ++instances;
  }
  v.detail << instances << " instances, max relative difference " << worst;
}

void subadditivity(Verdict& v) {
  const std::vector<std::pair<std::string, FractalSystem>> systems{
      {"golden", golden_cantor_system().to_general()}, {"middle-third", middle_third_cantor_system().to_general()}};
  int checks = 0;
  double worst = 0;
  for (const auto& [name, sys] : systems) {
    for (double s : {2.0, 4.0}) {
      for (std::size_t a = 1; a <= 4; ++a) {
        for (std::size_t b = 1; b <= 4; ++b) {
          const std::vector<std::size_t> parts{a, b};
          const auto rep = subadditivity_check(sys, s, parts, 4);
          const std::string tag = name + " s=" + std::to_string(static_cast<int>(s)) + " (" + std::to_string(a) +
                                  "," + std::to_string(b) + ")";
          v.require(rep.within_identity_ok(1e-10), tag + " I-term");
          v.require(rep.cross <= rep.cross_n2_bound * (1 + 1e-12), tag + " II-term");
          v.require(rep.inequality_ok(), tag + " bound");
          worst = std::max(worst, rep.within_rel_residual);
          ++checks;
        }
      }
    }
  }
  v.detail << checks << " constructions, max I-term residual " << worst;
}

void z_stabilisation(Verdict& v) {
  const auto cantor = middle_third_cantor_system();
  const auto st = *exponent_structure(cantor.ratios());
  const auto zs = z_sequence(cantor.to_general(), st, 2.0, 1, 6);
  v.require(zs.entries.size() == 7 && zs.warnings.empty(), "sequence computed through n=6");
  if (zs.entries.size() < 7) return;
  double lo = zs.entries[4].z, hi = lo;
  for (std::size_t k = 4; k <= 6; ++k) {
    lo = std::min(lo, zs.entries[k].z);
    hi = std::max(hi, zs.entries[k].z);
  }
  const double rel = (hi - lo) / zs.entries[6].z;
  v.require(rel <= 0.10, "Cauchy width " + std::to_string(rel));
  const auto rr = renewal_residuals(zs, st);
  v.require(rr.partial_sums_bounded, "partial sums of b_n");
  // non-divergence: increments of the partial sums shrink over the tail
  for (std::size_t k = 4; k < rr.partial_sums.size(); ++k) {
    v.require(std::fabs(rr.b[k]) <= std::fabs(rr.b[k - 1]) + 1e-12L, "partial-sum increments");
  }
  v.detail << "z_4..z_6 relative width " << rel << ", partial sum " << static_cast<double>(rr.partial_sums.back())
           << " <= bound " << static_cast<double>(rr.partial_sum_bound);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Fibonacci packing table exact for n=3..16", 30, fibonacci_table_exact},
      {2, "distribution function N(2^{3-n}) = F_n", 10, distribution_function},
      {3, "counting recursion on [J,20]", 10, counting_recursion},
      {4, "dimension of the golden Cantor system", 1, dimension},
      {5, "oscillation ratio in [1.98,2.02] at n_max=20", 30, oscillation},
      {6, "constant C_n <= 0.99 on [J,16]", 30, packing_constant},
      {7, "renewal limit 2/3 and periodic parity gap", 1, renewal},
      {8, "exchange search equals exhaustive search on 50 instances", 120, oracle_equivalence},
      {9, "splitting construction for s in {2,4}, parts up to (4,4)", 60, subadditivity},
      {10, "z-sequence stabilisation on the middle-third Cantor set", 600, z_stabilisation},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.check(v);
    } catch (const std::exception& e) {
      v.ok = false;
      v.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.time_limit_s) {
      v.ok = false;
      v.detail << "; exceeded time limit " << c.time_limit_s << " s";
    }
    if (!v.ok) ++failures;
    std::printf("%s [%d] %s (%.2f s): %s\n", v.ok ? "PASS" : "FAIL", c.id, c.title.c_str(), secs,
                v.detail.str().c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
