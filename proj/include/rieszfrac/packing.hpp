#pragma once

// Best-packing distance delta(A,N) and its distribution function
// N(t) = max{N : delta(A,N) >= t} on orientation-preserving line systems.
//
// Lower bounds come from the left-to-right greedy sweep, which yields a
// maximum t-separated subset of a closed set on the line. Upper bounds come
// from an occupancy dynamic program: any N-point configuration splits over the
// disjoint depth-1 cylinders, and the part inside psi_m(A) is a scaled copy of
// a configuration in A.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rieszfrac/errors.hpp"
#include "rieszfrac/ifs.hpp"
#include "rieszfrac/lattice.hpp"
#include "rieszfrac/rational.hpp"
#include "rieszfrac/word.hpp"

namespace rieszfrac {

template <class Scalar>
constexpr int default_depth() {
  return ScalarTraits<Scalar>::exact ? 64 : 40;
}

inline constexpr std::size_t kMaxSweepCount = 50'000'000;

template <class Scalar>
struct CertifiedPoint {
  Scalar lo;
  Scalar hi;
  Word witness;  // cylinder containing the point

  bool exact() const { return lo == hi; }
};

namespace detail {

template <class Scalar>
std::optional<CertifiedPoint<Scalar>> least_point_rec(const LineSystem<Scalar>& sys,
                                                      const Scalar& a, std::size_t depth_max,
                                                      const Affine1D<Scalar>& f, Word& w,
                                                      std::size_t depth) {
  const Scalar hi = f(sys.hull().hi);
  if (hi < a) return std::nullopt;
  Scalar lo = f(sys.hull().lo);
  // min psi_w(A) = psi_w(min A) and max psi_w(A) = psi_w(max A)
  if (!(lo < a)) return CertifiedPoint<Scalar>{lo, std::move(lo), w};
  if (hi == a) return CertifiedPoint<Scalar>{hi, hi, w};
  if (depth >= depth_max) return CertifiedPoint<Scalar>{a, hi, w};
  for (std::size_t m : sys.left_to_right()) {
    w.letters.push_back(m);
    auto found = least_point_rec(sys, a, depth_max, f.then_inner(sys.map(m)), w, depth + 1);
    w.letters.pop_back();
    if (found) return found;
  }
  // hi itself is a point of A that is >= a, so some child must answer.
  throw InternalError("least_point_at_least: cylinder search lost its witness");
}

}  // namespace detail

/// Smallest point of psi_root(A) that is >= a. Exact (lo == hi) when the
/// search reaches a cylinder whose left endpoint is >= a, or whose right
/// endpoint equals a, within depth_max levels below `root`; otherwise a
/// certified interval [a, hi] of a depth_max cylinder.
template <class Scalar>
std::optional<CertifiedPoint<Scalar>> least_point_at_least(const LineSystem<Scalar>& sys,
                                                           const Scalar& a,
                                                           int depth_max = default_depth<Scalar>(),
                                                           const Word& root = {}) {
  if (depth_max < 1) throw std::invalid_argument("depth_max must be >= 1");
  Word w = root;
  return detail::least_point_rec(sys, a, static_cast<std::size_t>(depth_max), sys.compose(root), w,
                                 0);
}

// Bounds on N(t). `witness` is a t-separated subset of A of size `lower`.
template <class Scalar>
struct CountBounds {
  Scalar t;
  std::size_t lower = 0;
  std::size_t upper = 0;
  std::vector<Scalar> witness;

  bool exact() const { return lower == upper; }
};

namespace detail {

// One left-to-right depth-first pass over the cylinders below psi_root. The
// cylinders are disjoint and visited in order, so taking the least point of
// each cylinder that clears `next` reproduces the greedy sweep while sharing
// the descent between consecutive points.
template <class Scalar>
class GreedySweep {
 public:
  GreedySweep(const LineSystem<Scalar>& sys, const Scalar& t, std::size_t depth_max, bool optimistic,
              std::size_t max_count, std::vector<Scalar>* points)
      : sys_(sys), t_(t), depth_max_(depth_max), optimistic_(optimistic), max_count_(max_count),
        points_(points) {}

  void run(const Affine1D<Scalar>& root, const Scalar& start) {
    take(start);
    visit(root, 0);
  }

  std::size_t count() const { return count_; }
  bool all_exact() const { return all_exact_; }

 private:
  void take(const Scalar& x) {
    if (++count_ > max_count_) {
      throw BudgetError("greedy sweep exceeded " + std::to_string(max_count_) + " points");
    }
    if (points_) points_->push_back(x);
    next_ = x + t_;
  }

  void visit(const Affine1D<Scalar>& f, std::size_t depth) {
    const Scalar hi = f(sys_.hull().hi);
    if (hi < next_) return;
    const Scalar lo = f(sys_.hull().lo);
    if (!(lo < next_)) {
      take(lo);
      if (hi < next_) return;
    }
    if (hi == next_) {
      take(hi);
      return;
    }
    if (depth >= depth_max_) {
      // unresolved: the least point lies in [next, hi]
      all_exact_ = false;
      take(optimistic_ ? Scalar(next_) : hi);
      return;
    }
    for (std::size_t m : sys_.left_to_right()) {
      visit(f.then_inner(sys_.map(m)), depth + 1);
    }
  }

  const LineSystem<Scalar>& sys_;
  const Scalar& t_;
  std::size_t depth_max_;
  bool optimistic_;
  std::size_t max_count_;
  std::vector<Scalar>* points_;
  Scalar next_{};
  std::size_t count_ = 0;
  bool all_exact_ = true;
};

}  // namespace detail

/// Left-to-right greedy sweep at separation t inside psi_root(A).
///
/// The pessimistic sweep steps to the right end of each unresolved interval
/// (a genuine point of A) and gives the lower bound; if any step was
/// unresolved, an optimistic sweep stepping to the left ends gives the upper
/// bound.
template <class Scalar>
CountBounds<Scalar> greedy_count(const LineSystem<Scalar>& sys, const Scalar& t,
                                 int depth_max = default_depth<Scalar>(), const Word& root = {},
                                 std::size_t max_count = kMaxSweepCount) {
  if (!(t > 0)) throw std::invalid_argument("greedy_count needs t > 0");
  if (depth_max < 1) throw std::invalid_argument("depth_max must be >= 1");
  CountBounds<Scalar> out;
  out.t = t;
  const auto f = sys.compose(root);
  const Scalar start = f(sys.hull().lo);
  const auto depth = static_cast<std::size_t>(depth_max);
  detail::GreedySweep<Scalar> low(sys, t, depth, false, max_count, &out.witness);
  low.run(f, start);
  out.lower = low.count();
  if (low.all_exact()) {
    out.upper = out.lower;
    return out;
  }
  detail::GreedySweep<Scalar> high(sys, t, depth, true, max_count, nullptr);
  high.run(f, start);
  out.upper = high.count();
  return out;
}

// ---------------------------------------------------------------------------
// Occupancy dynamic program for upper bounds on delta(A,N)

/// Real number extended with -inf (infeasible) and +inf (unconstrained).
template <class Scalar>
struct Extended {
  enum Kind : std::int8_t { neg_inf = 0, finite = 1, pos_inf = 2 };
  Kind kind = neg_inf;
  Scalar value{};

  static Extended lowest() { return {neg_inf, Scalar{}}; }
  static Extended highest() { return {pos_inf, Scalar{}}; }
  static Extended of(Scalar v) { return {finite, std::move(v)}; }

  bool is_finite() const { return kind == finite; }

  friend bool operator<(const Extended& a, const Extended& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.kind == finite && a.value < b.value;
  }
  friend bool operator==(const Extended& a, const Extended& b) {
    return a.kind == b.kind && (a.kind != finite || a.value == b.value);
  }
};

template <class Scalar>
const Extended<Scalar>& ext_min(const Extended<Scalar>& a, const Extended<Scalar>& b) {
  return b < a ? b : a;
}
template <class Scalar>
const Extended<Scalar>& ext_max(const Extended<Scalar>& a, const Extended<Scalar>& b) {
  return a < b ? b : a;
}

/// Upper bounds ub(N) >= delta(A,N), grown incrementally.
///
/// ub(2) = diam(A). For N >= 3, ub(N) is the maximum over compositions
/// (n_1..n_M) of N with every n_m < N of min{ r_m ub(n_m) : n_m >= 2 }, or
/// diam(A) when no part reaches 2. Suffix tables over maps k..M-1 make each
/// new N cost O(M log N): the inner objective is the minimum of a
/// nonincreasing and a nondecreasing function of n_k, so its maximum sits at
/// their crossing.
template <class Scalar>
class PackingTable {
 public:
  using Ext = Extended<Scalar>;

  explicit PackingTable(const LineSystem<Scalar>& sys)
      : ratios_(sys.exact_ratios()), diam_(sys.diameter()), m_(sys.size()) {
    full_.assign(m_ + 1, {});
    excl_.assign(m_ + 1, {});
    for (std::size_t k = 0; k <= m_; ++k) {
      full_[k].push_back(Ext::highest());  // n = 0: empty composition
      full_[k].push_back(k < m_ ? Ext::highest() : Ext::lowest());
      excl_[k].push_back(Ext::highest());
      excl_[k].push_back(Ext::lowest());
    }
    ub_.push_back(Ext::highest());
    ub_.push_back(Ext::highest());  // delta(A,1) = +inf sentinel
  }

  std::size_t size() const noexcept { return ub_.size() - 1; }

  void extend_to(std::size_t n_max) {
    while (ub_.size() <= n_max) push_next();
  }

  /// ub(n) for n >= 2.
  const Scalar& upper(std::size_t n) {
    if (n < 2) throw std::invalid_argument("delta(A,N) upper bound needs N >= 2");
    extend_to(n);
    return ub_[n].value;
  }

  /// Lexicographically smallest composition attaining ub(n).
  std::vector<std::size_t> composition(std::size_t n) {
    if (n < 2) throw std::invalid_argument("composition needs N >= 2");
    extend_to(n);
    const Ext& target = excl_[0][n];
    std::vector<std::size_t> parts;
    std::size_t rem = n;
    for (std::size_t k = 0; k < m_; ++k) {
      bool placed = false;
      for (std::size_t j = 0; j <= std::min(rem, n - 1); ++j) {
        const Ext& rest = (rem - j == n) ? excl_[k + 1][n] : full_[k + 1][rem - j];
        if (!(ext_min(term(k, j), rest) < target)) {
          parts.push_back(j);
          rem -= j;
          placed = true;
          break;
        }
      }
      if (!placed) throw InternalError("packing DP certificate reconstruction failed");
    }
    return parts;
  }

 private:
  Ext term(std::size_t k, std::size_t j) const {
    if (j <= 1) return Ext::highest();
    return Ext::of(ratios_[k] * ub_[j].value);
  }

  void push_next() {
    const std::size_t n = ub_.size();
    for (std::size_t k = 0; k <= m_; ++k) excl_[k].push_back(Ext::lowest());
    for (std::size_t kk = m_; kk-- > 0;) {
      auto inner = [&](std::size_t j) -> const Ext& {
        return j == 0 ? excl_[kk + 1][n] : full_[kk + 1][n - j];
      };
      auto g = [&](std::size_t j) { return ext_min(term(kk, j), inner(j)); };
      // smallest j in [0, n-1] with inner(j) >= term(j)
      std::size_t lo = 0, hi = n;
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (inner(mid) < term(kk, mid)) lo = mid + 1; else hi = mid;
      }
      Ext best = Ext::lowest();
      if (lo == n) {
        best = g(n - 1);
      } else {
        best = g(lo);
        if (lo > 0) best = ext_max(best, g(lo - 1));
      }
      excl_[kk][n] = best;
    }
    Ext ub = excl_[0][n];
    if (ub.kind == Ext::pos_inf) ub = Ext::of(diam_);
    if (ub.kind == Ext::neg_inf) throw InternalError("packing DP found no composition");
    ub_.push_back(ub);
    for (std::size_t k = 0; k <= m_; ++k) {
      Ext v = excl_[k][n];
      for (std::size_t j = k; j < m_; ++j) v = ext_max(v, Ext::of(ratios_[j] * ub.value));
      full_[k].push_back(std::move(v));
    }
  }

  std::vector<Scalar> ratios_;
  Scalar diam_;
  std::size_t m_;
  std::vector<Ext> ub_;
  std::vector<std::vector<Ext>> full_;  // [k][n]: maps k..M-1, all compositions
  std::vector<std::vector<Ext>> excl_;  // [k][n]: same, every part < n
};

template <class Scalar>
struct PackingBounds {
  std::size_t n = 0;
  Scalar lower{};
  Scalar upper{};
  std::vector<Scalar> witness;             // N points of A, min gap >= lower
  std::vector<std::size_t> composition;    // DP occupancy certificate for upper

  bool exact() const { return lower == upper; }
};

template <class Scalar>
Scalar min_gap_sorted(const std::vector<Scalar>& xs) {
  Scalar best = xs.at(1) - xs.at(0);
  for (std::size_t i = 2; i < xs.size(); ++i) {
    const Scalar g = xs[i] - xs[i - 1];
    if (g < best) best = g;
  }
  return best;
}

namespace detail {

template <class Scalar>
Scalar midpoint(const Scalar& a, const Scalar& b) {
  return (a + b) / 2;
}

// Tightens [lower, upper] for delta(A,N) by bisecting on t with greedy counts.
// Feasible t yield realised witnesses; certified-infeasible t lower the upper
// bound. Stops early once the bounds meet.
template <class Scalar>
void bisect_delta(const LineSystem<Scalar>& sys, PackingBounds<Scalar>& pb, int depth_max,
                  int steps = 60) {
  const std::size_t n = pb.n;
  auto accept = [&](const CountBounds<Scalar>& c) {
    std::vector<Scalar> pts(c.witness.begin(), c.witness.begin() + static_cast<std::ptrdiff_t>(n));
    const Scalar gap = min_gap_sorted(pts);
    if (pb.witness.empty() || pb.lower < gap) {
      pb.lower = gap;
      pb.witness = std::move(pts);
    }
  };
  Scalar lo_t = pb.lower;
  Scalar hi_t = pb.upper;
  for (int it = 0; it < steps && pb.lower < pb.upper; ++it) {
    const Scalar mid = pb.witness.empty() && it == 0 ? hi_t / 2 : midpoint(lo_t, hi_t);
    if (!(mid > 0)) break;
    const auto c = greedy_count(sys, mid, depth_max);
    if (c.lower >= n) {
      accept(c);
      lo_t = std::max(mid, pb.lower);
    } else if (c.upper < n) {
      if (mid < pb.upper) pb.upper = mid;
      hi_t = mid;
    } else {
      hi_t = mid;  // undecided at this depth: look lower for a witness
    }
  }
  if (pb.witness.empty()) {
    // Fall back on the farthest-point witness of a shallow lattice.
    throw InternalError("no feasible packing witness found for N=" + std::to_string(n));
  }
}

}  // namespace detail

/// Certified bounds on delta(A,N) using a shared DP table.
template <class Scalar>
PackingBounds<Scalar> packing_distance_bounds(const LineSystem<Scalar>& sys, PackingTable<Scalar>& table,
                                              std::size_t n, int depth_max = default_depth<Scalar>()) {
  if (n < 2) throw std::invalid_argument("delta(A,N) needs N >= 2");
  PackingBounds<Scalar> pb;
  pb.n = n;
  pb.upper = table.upper(n);
  pb.composition = table.composition(n);
  const auto c = greedy_count(sys, pb.upper, depth_max);
  if (c.lower >= n) {
    pb.witness.assign(c.witness.begin(), c.witness.begin() + static_cast<std::ptrdiff_t>(n));
    pb.lower = min_gap_sorted(pb.witness);
    if (pb.upper < pb.lower) throw InternalError("greedy witness beats the DP upper bound");
    return pb;
  }
  pb.lower = Scalar(0);
  detail::bisect_delta(sys, pb, depth_max);
  return pb;
}

template <class Scalar>
PackingBounds<Scalar> packing_distance_bounds(const LineSystem<Scalar>& sys, std::size_t n,
                                              int depth_max = default_depth<Scalar>()) {
  PackingTable<Scalar> table(sys);
  return packing_distance_bounds(sys, table, n, depth_max);
}

/// Bounds on delta(A,N) for every 2 <= N <= n_max. One greedy sweep serves
/// each run of N sharing the same DP value.
template <class Scalar>
struct DeltaTable {
  std::vector<Scalar> lower;  // indexed by N; entries 0 and 1 unused
  std::vector<Scalar> upper;

  std::size_t n_max() const { return lower.empty() ? 0 : lower.size() - 1; }
  bool exact(std::size_t n) const { return lower.at(n) == upper.at(n); }
  bool all_exact() const {
    for (std::size_t n = 2; n < lower.size(); ++n) {
      if (!exact(n)) return false;
    }
    return true;
  }
};

template <class Scalar>
DeltaTable<Scalar> delta_table(const LineSystem<Scalar>& sys, std::size_t n_max,
                               int depth_max = default_depth<Scalar>()) {
  if (n_max < 2) throw std::invalid_argument("delta table needs n_max >= 2");
  PackingTable<Scalar> table(sys);
  table.extend_to(n_max);
  DeltaTable<Scalar> out;
  out.lower.assign(n_max + 1, Scalar(0));
  out.upper.assign(n_max + 1, Scalar(0));
  std::size_t n = 2;
  while (n <= n_max) {
    const Scalar v = table.upper(n);
    std::size_t end = n;
    while (end + 1 <= n_max && table.upper(end + 1) == v) ++end;
    const auto c = greedy_count(sys, v, depth_max);
    for (std::size_t k = n; k <= end; ++k) {
      out.upper[k] = v;
      if (c.lower >= k) {
        out.lower[k] = v;
      } else {
        const auto pb = packing_distance_bounds(sys, table, k, depth_max);
        out.lower[k] = pb.lower;
        out.upper[k] = pb.upper;
      }
    }
    n = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counting recursion R_n = sum_m R_{n - i_m}

enum class RecursionStatus { excluded, ok, violated, inconclusive };

inline const char* to_string(RecursionStatus s) {
  switch (s) {
    case RecursionStatus::excluded: return "excluded";
    case RecursionStatus::ok: return "ok";
    case RecursionStatus::violated: return "violated";
    case RecursionStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

struct RecursionRow {
  int n = 0;
  std::size_t count_lower = 0;  // R_n = N(r^n)
  std::size_t count_upper = 0;
  std::size_t predicted = 0;    // sum_m R_{n - i_m}
  RecursionStatus status = RecursionStatus::excluded;
};

struct RecursionReport {
  int L = 0;  // min{k >= 1 : r^k < sigma}
  int J = 0;  // max(L, i_1..i_M)
  std::vector<RecursionRow> rows;
  std::optional<int> first_violation;
  bool inconclusive = false;

  bool passed() const { return !first_violation && !inconclusive; }
};

namespace detail {

template <class Scalar>
Scalar structure_base(const LineSystem<Scalar>& sys, const ExponentStructure& st) {
  if constexpr (ScalarTraits<Scalar>::exact) {
    auto b = exact_base(sys, st);
    if (!b) throw DependenceError("ratios are not exact powers of a common rational base");
    return *b;
  } else {
    (void)sys;
    return st.base;
  }
}

}  // namespace detail

/// Checks R_n = sum_m R_{n-i_m} for n in [n_lo, n_hi], n >= J, where each
/// R_n = N(r^n) comes from an independent greedy sweep.
template <class Scalar>
RecursionReport count_recursion_check(const LineSystem<Scalar>& sys, const ExponentStructure& st,
                                      int n_lo, int n_hi, int depth_max = default_depth<Scalar>()) {
  if (n_lo < 0 || n_hi < n_lo) throw std::invalid_argument("bad n range");
  const Scalar base = detail::structure_base(sys, st);
  RecursionReport rep;
  {
    Scalar p = base;
    int k = 1;
    while (!(p < sys.sigma())) {
      p *= base;
      ++k;
    }
    rep.L = k;
  }
  rep.J = std::max(rep.L, st.max_exponent());

  std::vector<CountBounds<Scalar>> counts;
  Scalar t(1);
  for (int n = 0; n <= n_hi; ++n) {
    auto c = greedy_count(sys, t, depth_max);
    c.witness.clear();
    c.witness.shrink_to_fit();
    counts.push_back(std::move(c));
    t *= base;
  }
  for (int n = n_lo; n <= n_hi; ++n) {
    RecursionRow row;
    row.n = n;
    row.count_lower = counts[n].lower;
    row.count_upper = counts[n].upper;
    if (n < rep.J) {
      row.status = RecursionStatus::excluded;
      rep.rows.push_back(row);
      continue;
    }
    bool resolved = counts[n].exact();
    for (int e : st.exponents) {
      resolved = resolved && counts[n - e].exact();
      row.predicted += counts[n - e].lower;
    }
    if (!resolved) {
      row.status = RecursionStatus::inconclusive;
      rep.inconclusive = true;
    } else if (row.predicted == row.count_lower) {
      row.status = RecursionStatus::ok;
    } else {
      row.status = RecursionStatus::violated;
      if (!rep.first_violation) rep.first_violation = n;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Farthest-point witness and the Fibonacci example

template <class Scalar>
struct LinePacking {
  std::vector<Scalar> points;  // sorted
  Scalar min_dist;
};

/// N-point subset of the depth lattice chosen by farthest-point traversal;
/// its minimum gap is a valid lower bound for delta(A,N).
template <class Scalar>
LinePacking<Scalar> farthest_point_heuristic(const LineSystem<Scalar>& sys, std::size_t n, int depth) {
  if (n < 2) throw std::invalid_argument("farthest-point heuristic needs N >= 2");
  const auto lattice = prefractal_lattice(sys, depth);
  auto dist = [&](std::size_t i, std::size_t j) -> Scalar {
    return lattice[i] < lattice[j] ? Scalar(lattice[j] - lattice[i]) : Scalar(lattice[i] - lattice[j]);
  };
  auto idx = farthest_point_indices(lattice.size(), n, dist);
  LinePacking<Scalar> out;
  for (std::size_t i : idx) out.points.push_back(lattice[i]);
  std::sort(out.points.begin(), out.points.end());
  out.min_dist = min_gap_sorted(out.points);
  return out;
}

struct FibonacciRow {
  int n = 0;
  std::uint64_t fib = 0;   // F_n
  Rational delta;          // 2^{3-n}
  bool certified = false;  // lower == upper == 2^{3-n} on all of (F_{n-1}, F_n]
};

inline std::vector<std::uint64_t> fibonacci_numbers(int n_max) {
  std::vector<std::uint64_t> f(static_cast<std::size_t>(std::max(n_max, 2)) + 1, 0);
  f[1] = 1;
  f[2] = 1;
  for (int k = 3; k <= n_max; ++k) f[k] = f[k - 1] + f[k - 2];
  return f;
}

/// delta(A,N) = 2^{3-n} on every block (F_{n-1}, F_n] for the system
/// x/4, x/2 + 1/2, certified with exact rational bounds. Throws on mismatch.
inline std::vector<FibonacciRow> fibonacci_table(int n_max) {
  if (n_max < 3) throw std::invalid_argument("fibonacci table needs n_max >= 3");
  if (n_max > 60) throw BudgetError("fibonacci table limited to n <= 60");
  const auto sys = golden_cantor_system();
  const auto fib = fibonacci_numbers(n_max);
  const auto table = delta_table(sys, static_cast<std::size_t>(fib[n_max]));
  std::vector<FibonacciRow> rows;
  for (int n = 3; n <= n_max; ++n) {
    FibonacciRow row;
    row.n = n;
    row.fib = fib[n];
    row.delta = pow_int(Rational(1, 2), n - 3);
    row.certified = true;
    for (std::uint64_t k = fib[n - 1] + 1; k <= fib[n]; ++k) {
      if (!(table.lower[k] == row.delta && table.upper[k] == row.delta)) row.certified = false;
    }
    if (!row.certified) {
      throw InternalError("Fibonacci block n=" + std::to_string(n) +
                          " does not certify delta = " + format_rational(row.delta));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rieszfrac
