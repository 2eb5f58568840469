#pragma once

// Normalised sequences delta(A,N) N^{1/d} and E(N) / N^{1+s/d}: block
// structure of their oscillation, the constant C_n = delta(A, R_n + 1) / r^n,
// and the large-s comparison between energy and packing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rieszfrac/energy.hpp"
#include "rieszfrac/ifs.hpp"
#include "rieszfrac/packing.hpp"

namespace rieszfrac {

struct BlockExtrema {
  std::size_t id = 0;
  std::size_t first_n = 0;
  std::size_t last_n = 0;
  std::string delta;   // exact value when resolved, else "[lo,hi]"
  double min = 0.0;
  double max = 0.0;
  bool conclusive = true;
};

struct SeriesPoint {
  std::size_t n = 0;
  double value = 0.0;  // delta(A,N) N^{1/d}
  std::size_t block = 0;
};

struct PackingConstant {
  int n = 0;
  std::size_t count = 0;  // R_n
  double c = 0.0;         // delta(A, R_n + 1) / r^n, from the upper bound
};

struct OscillationReport {
  std::string quantity;
  double d = 0.0;
  std::vector<BlockExtrema> blocks;
  std::vector<SeriesPoint> series;
  double liminf_estimate = 0.0;  // min over the last `window` complete blocks
  double limsup_estimate = 0.0;  // max over the same window
  double ratio = 0.0;
  std::size_t window = 3;
  int J = 0;
  std::vector<PackingConstant> packing_constants;
  double packing_constant_max = 0.0;
  std::vector<std::string> warnings;

  bool empty() const { return blocks.empty(); }
};

/// Tabulates delta(A,N) N^{1/d} for 2 <= N <= R_{n_max} = N(r^{n_max}),
/// splits it into maximal runs of constant delta, and reports the spread over
/// the last three complete runs together with C_n for n in [J, n_max).
template <class Scalar>
OscillationReport packing_oscillation(const LineSystem<Scalar>& sys, const ExponentStructure& st,
                                      int n_max, int depth_max = default_depth<Scalar>()) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  OscillationReport rep;
  rep.quantity = "delta(A,N)*N^(1/d)";
  rep.d = sys.dimension();
  const Scalar base = detail::structure_base(sys, st);

  std::vector<CountBounds<Scalar>> counts;
  Scalar t(1);
  for (int n = 0; n <= n_max; ++n) {
    auto c = greedy_count(sys, t, depth_max);
    c.witness.clear();
    counts.push_back(std::move(c));
    t *= base;
  }
  {
    Scalar p = base;
    int k = 1;
    while (!(p < sys.sigma())) {
      p *= base;
      ++k;
    }
    rep.J = std::max(k, st.max_exponent());
  }
  const std::size_t n_top = counts.back().lower;
  if (n_top < 3) {
    rep.warnings.push_back("n_max too small: no complete block of constant delta");
    return rep;
  }
  const auto table = delta_table(sys, n_top, depth_max);
  const double inv_d = 1.0 / rep.d;

  for (std::size_t n = 2; n <= n_top;) {
    BlockExtrema blk;
    blk.id = rep.blocks.size();
    blk.first_n = n;
    blk.conclusive = table.exact(n);
    std::size_t end = n;
    while (end + 1 <= n_top && table.lower[end + 1] == table.lower[n] && table.upper[end + 1] == table.upper[n]) ++end;
    blk.last_n = end;
    blk.delta = blk.conclusive ? to_string(table.lower[n])
                               : "[" + to_string(table.lower[n]) + "," + to_string(table.upper[n]) + "]";
    blk.min = std::numeric_limits<double>::infinity();
    blk.max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = n; k <= end; ++k) {
      const double v = to_double(table.lower[k]) * std::pow(static_cast<double>(k), inv_d);
      rep.series.push_back({k, v, blk.id});
      blk.min = std::min(blk.min, v);
      blk.max = std::max(blk.max, v);
    }
    rep.blocks.push_back(blk);
    n = end + 1;
  }

  // n_top = N(r^{n_max}) closes its block, so every block is complete.
  const std::size_t complete = rep.blocks.size();
  if (complete < 2) {
    rep.warnings.push_back("fewer than two blocks; no tail estimate");
  } else {
    const std::size_t first = complete > rep.window ? complete - rep.window : 0;
    rep.liminf_estimate = std::numeric_limits<double>::infinity();
    rep.limsup_estimate = 0.0;
    for (std::size_t b = first; b < complete; ++b) {
      if (!rep.blocks[b].conclusive) rep.warnings.push_back("tail block " + std::to_string(b) + " inconclusive");
      rep.liminf_estimate = std::min(rep.liminf_estimate, rep.blocks[b].min);
      rep.limsup_estimate = std::max(rep.limsup_estimate, rep.blocks[b].max);
    }
    rep.ratio = rep.limsup_estimate / rep.liminf_estimate;
  }

  Scalar rn = pow_int(base, rep.J);
  for (int n = rep.J; n < n_max; ++n) {
    const std::size_t r = counts[static_cast<std::size_t>(n)].lower;
    if (!counts[static_cast<std::size_t>(n)].exact() || r + 1 > n_top) break;
    PackingConstant lc;
    lc.n = n;
    lc.count = r;
    lc.c = to_double(Scalar(table.upper[r + 1] / rn));
    rep.packing_constants.push_back(lc);
    rep.packing_constant_max = std::max(rep.packing_constant_max, lc.c);
    rn *= base;
  }
  return rep;
}

struct EnergyTail {
  std::size_t ell = 0;
  double tail = 0.0;          // last z_n
  double cauchy_width = 0.0;  // max - min over the last three z_n
  double relative_width = 0.0;
  std::vector<double> widths;  // width of each trailing 3-window, oldest first
};

struct EnergyOscillationReport {
  double s = 0.0;
  double d = 0.0;
  std::vector<EnergyTail> per_ell;
  double spread = 0.0;  // max - min of tails across ell
  double spread_ratio = 1.0;
  bool upper_bound_based = true;
};

/// Per-ell stabilisation of z_n and the spread of the stabilised values
/// across ell. All numbers derive from energy upper bounds.
inline EnergyOscillationReport energy_oscillation(std::span<const ZSequence> seqs) {
  if (seqs.empty()) throw std::invalid_argument("no z-sequences supplied");
  EnergyOscillationReport rep;
  rep.s = seqs.front().s;
  rep.d = seqs.front().d;
  if (!(rep.s > rep.d)) throw std::invalid_argument("energy oscillation needs s > d");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& zs : seqs) {
    if (!(zs.s > zs.d)) throw std::invalid_argument("energy oscillation needs s > d");
    if (zs.s != rep.s) throw std::invalid_argument("z-sequences disagree on s");
    if (zs.entries.empty()) throw std::invalid_argument("empty z-sequence");
    EnergyTail t;
    t.ell = zs.ell;
    t.tail = zs.entries.back().z;
    for (std::size_t end = 3; end <= zs.entries.size(); ++end) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (std::size_t k = end - 3; k < end; ++k) {
        mn = std::min(mn, zs.entries[k].z);
        mx = std::max(mx, zs.entries[k].z);
      }
      t.widths.push_back(mx - mn);
    }
    t.cauchy_width = t.widths.empty() ? 0.0 : t.widths.back();
    t.relative_width = t.tail > 0 ? t.cauchy_width / t.tail : 0.0;
    lo = std::min(lo, t.tail);
    hi = std::max(hi, t.tail);
    rep.per_ell.push_back(std::move(t));
  }
  rep.spread = hi - lo;
  rep.spread_ratio = lo > 0 ? hi / lo : 1.0;
  return rep;
}

struct BorodachovRow {
  double s = 0.0;
  double energy_side = 0.0;   // (max_N E(N) / N^{1+s/d})^{1/s}
  double packing_side = 0.0;  // 1 / min_N delta(A,N) N^{1/d}
  double gap = 0.0;
  bool low_confidence = false;
};

struct BorodachovTable {
  std::size_t n_max = 0;
  std::vector<BorodachovRow> rows;
  bool packing_exact = false;

  bool gap_shrinking() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (!(rows[i].gap < rows[i - 1].gap)) return false;
    }
    return true;
  }
};

/// Compares (sup_N E(N)/N^{1+s/d})^{1/s} with 1/(inf_N delta(A,N) N^{1/d})
/// over 2 <= N <= n_max for each s (sorted ascending). Energies are best
/// lattice values at the given depth; delta comes from the exact table.
template <class Scalar>
BorodachovTable borodachov_diagnostic(const LineSystem<Scalar>& sys, std::vector<double> s_list,
                                      std::size_t n_max, int depth, const SearchOptions& opt = {}) {
  if (n_max < 2) throw std::invalid_argument("N_max must be >= 2");
  std::sort(s_list.begin(), s_list.end());
  BorodachovTable out;
  out.n_max = n_max;
  const double d = sys.dimension();
  const auto deltas = delta_table(sys, n_max);
  out.packing_exact = deltas.all_exact();
  double inf_packing = std::numeric_limits<double>::infinity();
  for (std::size_t n = 2; n <= n_max; ++n) {
    inf_packing = std::min(inf_packing, to_double(deltas.lower[n]) * std::pow(static_cast<double>(n), 1.0 / d));
  }
  const PointSet lattice = prefractal_lattice(sys.to_general(), depth);
  for (double s : s_list) {
    BorodachovRow row;
    row.s = s;
    double best_log = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 2; n <= n_max; ++n) {
      const double e = best_lattice_config(lattice, n, s, opt).energy;
      const double lg = std::log(e) - (1.0 + s / d) * std::log(static_cast<double>(n));
      best_log = std::max(best_log, lg);
    }
    row.energy_side = std::exp(best_log / s);
    row.packing_side = 1.0 / inf_packing;
    row.gap = std::fabs(row.energy_side - row.packing_side);
    row.low_confidence = n_max <= 2;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace rieszfrac
