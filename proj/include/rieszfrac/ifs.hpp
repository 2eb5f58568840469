#pragma once

// Similitudes, self-similar systems, the Moran dimension equation, detection
// of dependent contraction ratios, and cylinder geometry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rieszfrac/errors.hpp"
#include "rieszfrac/rational.hpp"
#include "rieszfrac/word.hpp"

namespace rieszfrac {

// ---------------------------------------------------------------------------
// Dimension

/// Solves sum_m r_m^d = 1 by bisection on [1e-9, ambient_dim].
///
/// d -> sum r_m^d is strictly decreasing, so bisection always converges; the
/// sum is evaluated in long double so the residual reaches double round-off.
inline double hausdorff_dimension(std::span<const double> ratios, int ambient_dim = 1) {
  if (ratios.size() < 2) throw std::invalid_argument("need at least two maps");
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("contraction ratio outside (0,1)");
  }
  auto moran = [&](long double d) {
    long double sum = 0;
    for (double r : ratios) sum += std::pow(static_cast<long double>(r), d);
    return sum - 1.0L;
  };
  long double lo = 1e-9L;
  long double hi = static_cast<long double>(ambient_dim);
  if (moran(hi) > 0) {
    throw std::invalid_argument("ratios too large for ambient dimension " +
                                std::to_string(ambient_dim));
  }
  if (moran(lo) < 0) throw InternalError("Moran equation has no root above 1e-9");
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (lo + hi);
    if (moran(mid) > 0) lo = mid; else hi = mid;
  }
  // Pick whichever double neighbour has the smaller residual.
  double best = static_cast<double>(0.5L * (lo + hi));
  long double best_res = std::fabs(moran(best));
  for (double cand : {std::nextafter(best, 0.0), std::nextafter(best, 2.0 * best)}) {
    const long double res = std::fabs(moran(cand));
    if (res < best_res) { best = cand; best_res = res; }
  }
  if (best_res > 1e-14L) throw InternalError("dimension bisection did not converge");
  return best;
}

// ---------------------------------------------------------------------------
// Dependent ratios r_k = r^{i_k}

struct ExponentStructure {
  double base = 0.0;            // r in (0,1)
  std::vector<int> exponents;   // i_1..i_M, gcd 1
  bool gcd_normalized = true;
  int common_factor = 1;        // g divided out of the raw exponents

  int max_exponent() const { return *std::max_element(exponents.begin(), exponents.end()); }
};

struct AmbiguityError : Error {
  explicit AmbiguityError(const std::string& what) : Error(ErrorKind::dependence, what) {}
};

inline constexpr int kMaxExponent = 64;

/// Detects r_k = r^{i_k} with integer exponents up to 64.
///
/// Each log r_k / log r_1 is matched against every fraction p/q with q <= 64;
/// a fraction fits when r_1^{p/q} reproduces r_k within relative tolerance
/// tol. Returns nullopt (independent) when some ratio has no fit, and throws
/// AmbiguityError when two distinct fractions fit the same ratio.
inline std::optional<ExponentStructure> exponent_structure(std::span<const double> ratios,
                                                           double tol = 1e-10) {
  if (ratios.size() < 2) throw std::invalid_argument("need at least two ratios");
  if (!(tol > 0)) throw std::invalid_argument("tolerance must be positive");
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("contraction ratio outside (0,1)");
  }
  const double log_r1 = std::log(ratios[0]);
  std::vector<std::pair<std::int64_t, std::int64_t>> fracs;  // reduced p/q per ratio
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const double x = std::log(ratios[k]) / log_r1;
    std::set<std::pair<std::int64_t, std::int64_t>> fits;
    for (std::int64_t q = 1; q <= kMaxExponent; ++q) {
      const std::int64_t p = std::llround(x * static_cast<double>(q));
      if (p < 1) continue;
      const double approx = std::exp(log_r1 * static_cast<double>(p) / static_cast<double>(q));
      if (std::fabs(approx / ratios[k] - 1.0) <= tol) {
        const std::int64_t g = std::gcd(p, q);
        fits.emplace(p / g, q / g);
      }
    }
    if (fits.empty()) return std::nullopt;
    if (fits.size() > 1) {
      throw AmbiguityError("tolerance " + format_double(tol) +
                           " admits several exponent structures for ratio " +
                           format_double(ratios[k]));
    }
    fracs.push_back(*fits.begin());
  }
  std::int64_t denom_lcm = 1;
  for (const auto& [p, q] : fracs) denom_lcm = std::lcm(denom_lcm, q);
  std::vector<std::int64_t> raw;
  for (const auto& [p, q] : fracs) raw.push_back(p * (denom_lcm / q));
  std::int64_t g = 0;
  for (std::int64_t e : raw) g = std::gcd(g, e);

  ExponentStructure out;
  out.common_factor = static_cast<int>(g);
  for (std::int64_t e : raw) {
    if (e / g > kMaxExponent) return std::nullopt;
    out.exponents.push_back(static_cast<int>(e / g));
  }
  out.base = std::exp(log_r1 * static_cast<double>(g) / static_cast<double>(denom_lcm));
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    const double rebuilt = std::pow(out.base, out.exponents[k]);
    if (std::fabs(rebuilt / ratios[k] - 1.0) > std::max(tol, 1e-13)) return std::nullopt;
  }
  return out;
}

/// Exact base r with r^{i_k} == r_k, built from a Bezout combination of the
/// exponents. Any such r is rational when the ratios are.
inline std::optional<Rational> exact_base(std::span<const Rational> ratios,
                                          const ExponentStructure& st) {
  if (ratios.size() != st.exponents.size()) return std::nullopt;
  // coeffs . exponents == g, maintained through iterated extended gcd
  std::vector<long> coeffs(ratios.size(), 0);
  long g = st.exponents[0];
  coeffs[0] = 1;
  for (std::size_t k = 1; k < ratios.size(); ++k) {
    long a0 = 1, b0 = 0, a1 = 0, b1 = 1;
    long x = g, y = st.exponents[k];
    while (y != 0) {
      const long q = x / y;
      std::tie(x, y) = std::make_pair(y, x - q * y);
      std::tie(a0, a1) = std::make_pair(a1, a0 - q * a1);
      std::tie(b0, b1) = std::make_pair(b1, b0 - q * b1);
    }
    for (std::size_t j = 0; j < k; ++j) coeffs[j] *= a0;
    coeffs[k] = b0;
    g = x;
  }
  if (g != 1) return std::nullopt;
  Rational base = 1;
  for (std::size_t k = 0; k < ratios.size(); ++k) base *= pow_int(ratios[k], coeffs[k]);
  if (!(base > 0 && base < 1)) return std::nullopt;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    if (pow_int(base, st.exponents[k]) != ratios[k]) return std::nullopt;
  }
  return base;
}

// ---------------------------------------------------------------------------
// General similitudes in R^p

struct Similitude {
  double ratio = 0.5;
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;

  Eigen::Index dim() const { return translation.size(); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    return ratio * (rotation * x) + translation;
  }

  Eigen::VectorXd fixed_point() const {
    const Eigen::Index p = dim();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - ratio * rotation;
    return a.partialPivLu().solve(translation);
  }

  void validate() const {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("contraction ratio outside (0,1)");
    if (rotation.rows() != dim() || rotation.cols() != dim()) {
      throw std::invalid_argument("rotation shape does not match translation");
    }
    const Eigen::MatrixXd gram = rotation.transpose() * rotation;
    const double err = (gram - Eigen::MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff();
    if (err > 1e-12) throw std::invalid_argument("rotation is not orthogonal");
  }
};

struct Ball {
  Eigen::VectorXd center;
  double radius = 0.0;

  bool contains(const Ball& other, double slack = 1e-12) const {
    return (center - other.center).norm() + other.radius <= radius + slack;
  }
  bool contains(const Eigen::VectorXd& x, double slack = 1e-12) const {
    return (center - x).norm() <= radius + slack;
  }
};

class FractalSystem {
 public:
  FractalSystem(std::vector<Similitude> maps, std::optional<double> sigma = {},
                std::uint64_t check_seed = 0x5eed)
      : maps_(std::move(maps)) {
    if (maps_.size() < 2) throw std::invalid_argument("a fractal system needs at least two maps");
    dim_ = static_cast<int>(maps_[0].dim());
    if (dim_ < 1) throw std::invalid_argument("ambient dimension must be >= 1");
    for (const auto& m : maps_) {
      if (m.dim() != dim_) throw std::invalid_argument("maps disagree on ambient dimension");
      m.validate();
    }
    std::vector<double> rs = ratios();
    dimension_ = hausdorff_dimension(rs, dim_);

    // Invariant ball: centred at the mean fixed point, radius large enough
    // that every map sends it into itself.
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dim_);
    for (const auto& m : maps_) c += m.fixed_point();
    c /= static_cast<double>(maps_.size());
    double radius = 0.0;
    for (const auto& m : maps_) radius = std::max(radius, (m(c) - c).norm() / (1.0 - m.ratio));
    hull_ = Ball{c, radius};

    if (sigma) {
      if (!(*sigma > 0)) throw SeparationError("separation gap must be positive");
      sigma_ = *sigma;
      check_sigma(check_seed);
    } else {
      sigma_ = certified_gap(default_gap_depth());
      if (!(sigma_ > 0)) {
        throw SeparationError("cannot certify separation of depth-1 cylinders; supply sigma");
      }
    }
  }

  std::size_t size() const noexcept { return maps_.size(); }
  int ambient_dim() const noexcept { return dim_; }
  const std::vector<Similitude>& maps() const noexcept { return maps_; }
  const Similitude& map(std::size_t m) const { return maps_.at(m); }
  double sigma() const noexcept { return sigma_; }
  double dimension() const noexcept { return dimension_; }
  const Ball& hull() const noexcept { return hull_; }

  std::vector<double> ratios() const {
    std::vector<double> rs;
    for (const auto& m : maps_) rs.push_back(m.ratio);
    return rs;
  }

  double word_ratio(const Word& w) const {
    w.check_alphabet(size());
    double r = 1.0;
    for (std::size_t l : w.letters) r *= maps_[l].ratio;
    return r;
  }

  Eigen::VectorXd point_of_word(const Word& w, const Eigen::VectorXd& anchor) const {
    w.check_alphabet(size());
    Eigen::VectorXd x = anchor;
    for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it) x = maps_[*it](x);
    return x;
  }

  Ball cylinder_hull(const Word& w) const {
    return Ball{point_of_word(w, hull_.center), word_ratio(w) * hull_.radius};
  }

  /// Lower bound on the distance between distinct depth-1 cylinders, from the
  /// hull balls of all depth-`depth` sub-cylinders.
  double certified_gap(int depth) const {
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    std::vector<std::pair<std::size_t, Ball>> cells;
    std::vector<Word> frontier{Word{}};
    for (int k = 0; k < depth; ++k) {
      std::vector<Word> next;
      for (const auto& w : frontier) {
        for (std::size_t m = 0; m < size(); ++m) next.push_back(w.extended(m));
      }
      frontier = std::move(next);
    }
    for (const auto& w : frontier) cells.emplace_back(w.letters.front(), cylinder_hull(w));
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      for (std::size_t j = i + 1; j < cells.size(); ++j) {
        if (cells[i].first == cells[j].first) continue;
        const double d = (cells[i].second.center - cells[j].second.center).norm() -
                         cells[i].second.radius - cells[j].second.radius;
        gap = std::min(gap, d);
      }
    }
    return gap;
  }

 private:
  int default_gap_depth() const {
    int depth = 1;
    double cells = static_cast<double>(size());
    while (depth < 6 && cells * static_cast<double>(size()) <= 1024.0) {
      cells *= static_cast<double>(size());
      ++depth;
    }
    return depth;
  }

  // Monte-Carlo sanity check of a user-supplied sigma: random depth-6
  // cylinder points from different first-level branches must stay >= sigma.
  void check_sigma(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
    std::vector<Eigen::VectorXd> anchors;
    for (const auto& m : maps_) anchors.push_back(m.fixed_point());
    auto random_word = [&](std::size_t first) {
      Word w;
      w.letters.push_back(first);
      for (int k = 1; k < 6; ++k) w.letters.push_back(pick(rng));
      return w;
    };
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      if (a == b) b = (b + 1) % size();
      const auto x = point_of_word(random_word(a), anchors[pick(rng)]);
      const auto y = point_of_word(random_word(b), anchors[pick(rng)]);
      if ((x - y).norm() < sigma_ * (1.0 - 1e-12)) {
        throw SeparationError("sampled points of distinct cylinders are closer than sigma=" +
                              format_double(sigma_));
      }
    }
  }

  std::vector<Similitude> maps_;
  int dim_ = 1;
  double sigma_ = 0.0;
  double dimension_ = 0.0;
  Ball hull_;
};

// ---------------------------------------------------------------------------
// Orientation-preserving maps on the line, exact or floating

template <class Scalar>
struct Interval {
  Scalar lo;
  Scalar hi;

  Scalar width() const { return hi - lo; }
  bool contains(const Scalar& x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

template <class Scalar>
struct LineMap {
  Scalar ratio;
  Scalar translation;

  Scalar operator()(const Scalar& x) const { return ratio * x + translation; }
  Scalar fixed_point() const { return translation / (Scalar(1) - ratio); }
};

// x -> scale * x + offset
template <class Scalar>
struct Affine1D {
  Scalar scale{1};
  Scalar offset{0};

  Scalar operator()(const Scalar& x) const { return scale * x + offset; }
  Affine1D then_inner(const LineMap<Scalar>& m) const {
    return Affine1D{scale * m.ratio, scale * m.translation + offset};
  }
};

/// Hull of A for orientation-preserving line maps: [min fixed point, max fixed point].
template <class Scalar>
Interval<Scalar> line_hull(const std::vector<LineMap<Scalar>>& maps) {
  Scalar lo = maps.front().fixed_point();
  Scalar hi = lo;
  for (const auto& m : maps) {
    const Scalar f = m.fixed_point();
    if (f < lo) lo = f;
    if (hi < f) hi = f;
  }
  return {lo, hi};
}

/// Minimum gap between the depth-1 cylinder hulls; throws SeparationError
/// when two of them overlap or touch.
template <class Scalar>
Scalar line_separation_gap(const std::vector<LineMap<Scalar>>& maps) {
  const Interval<Scalar> h = line_hull(maps);
  std::vector<Interval<Scalar>> cells;
  for (const auto& m : maps) cells.push_back({m(h.lo), m(h.hi)});
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
  std::optional<Scalar> gap;
  for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
    const Scalar g = cells[i + 1].lo - cells[i].hi;
    if (!(g > 0)) {
      throw SeparationError("depth-1 cylinder hulls [" + to_string(cells[i].lo) + "," +
                            to_string(cells[i].hi) + "] and [" + to_string(cells[i + 1].lo) +
                            "," + to_string(cells[i + 1].hi) + "] are not separated");
    }
    if (!gap || g < *gap) gap = g;
  }
  return *gap;
}

template <class Scalar>
class LineSystem {
 public:
  using scalar_type = Scalar;

  explicit LineSystem(std::vector<LineMap<Scalar>> maps, std::optional<Scalar> sigma = {})
      : maps_(std::move(maps)) {
    if (maps_.size() < 2) throw std::invalid_argument("a fractal system needs at least two maps");
    for (const auto& m : maps_) {
      if (!(m.ratio > 0 && m.ratio < 1)) {
        throw std::invalid_argument("contraction ratio outside (0,1): " + to_string(m.ratio));
      }
    }
    hull_ = line_hull(maps_);
    sigma_ = line_separation_gap(maps_);
    if (sigma) {
      if (!(*sigma > 0) || sigma_ < *sigma) {
        throw SeparationError("supplied sigma " + to_string(*sigma) +
                              " exceeds the depth-1 gap " + to_string(sigma_));
      }
      sigma_ = *sigma;
    }
    dimension_ = hausdorff_dimension(ratios(), 1);
    order_.resize(maps_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return maps_[a](hull_.lo) < maps_[b](hull_.lo);
    });
  }

  std::size_t size() const noexcept { return maps_.size(); }
  const std::vector<LineMap<Scalar>>& maps() const noexcept { return maps_; }
  const LineMap<Scalar>& map(std::size_t m) const { return maps_.at(m); }
  const Interval<Scalar>& hull() const noexcept { return hull_; }
  Scalar diameter() const { return hull_.hi - hull_.lo; }
  const Scalar& sigma() const noexcept { return sigma_; }
  double dimension() const noexcept { return dimension_; }
  // Map indices sorted by the position of their depth-1 cylinder.
  const std::vector<std::size_t>& left_to_right() const noexcept { return order_; }

  std::vector<double> ratios() const {
    std::vector<double> rs;
    for (const auto& m : maps_) rs.push_back(rieszfrac::to_double(m.ratio));
    return rs;
  }

  std::vector<Scalar> exact_ratios() const {
    std::vector<Scalar> rs;
    for (const auto& m : maps_) rs.push_back(m.ratio);
    return rs;
  }

  Affine1D<Scalar> compose(const Word& w) const {
    w.check_alphabet(size());
    Affine1D<Scalar> a;
    for (std::size_t l : w.letters) a = a.then_inner(maps_[l]);
    return a;
  }

  Scalar word_ratio(const Word& w) const { return compose(w).scale; }

  Interval<Scalar> cylinder_hull(const Word& w) const {
    const auto a = compose(w);
    return {a(hull_.lo), a(hull_.hi)};
  }

  Scalar point_of_word(const Word& w, const Scalar& anchor) const { return compose(w)(anchor); }

  FractalSystem to_general() const {
    std::vector<Similitude> out;
    for (const auto& m : maps_) {
      Similitude s;
      s.ratio = rieszfrac::to_double(m.ratio);
      s.rotation = Eigen::MatrixXd::Identity(1, 1);
      s.translation = Eigen::VectorXd::Constant(1, rieszfrac::to_double(m.translation));
      out.push_back(std::move(s));
    }
    return FractalSystem(std::move(out), rieszfrac::to_double(sigma_));
  }

  LineSystem<double> to_floating() const {
    std::vector<LineMap<double>> out;
    for (const auto& m : maps_) {
      out.push_back({rieszfrac::to_double(m.ratio), rieszfrac::to_double(m.translation)});
    }
    return LineSystem<double>(std::move(out));
  }

 private:
  std::vector<LineMap<Scalar>> maps_;
  Interval<Scalar> hull_{};
  Scalar sigma_{};
  double dimension_ = 0.0;
  std::vector<std::size_t> order_;
};

/// Depth-1 separation constant. For line systems it is exact (the hull
/// endpoints are points of A); `depth` only has to be >= 1.
template <class Scalar>
Scalar separation_gap(const LineSystem<Scalar>& sys, int depth = 1) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  return sys.sigma();
}

inline double separation_gap(const FractalSystem& sys, int depth) {
  return std::max(sys.sigma(), sys.certified_gap(depth));
}

/// Exact base for a line system whose ratios are rational.
inline std::optional<Rational> exact_base(const LineSystem<Rational>& sys,
                                          const ExponentStructure& st) {
  const auto rs = sys.exact_ratios();
  return exact_base(std::span<const Rational>(rs), st);
}

// Common systems used throughout the tests and the CLI.
inline LineSystem<Rational> golden_cantor_system() {
  return LineSystem<Rational>({{Rational(1, 4), Rational(0)}, {Rational(1, 2), Rational(1, 2)}});
}

inline LineSystem<Rational> middle_third_cantor_system() {
  return LineSystem<Rational>({{Rational(1, 3), Rational(0)}, {Rational(1, 3), Rational(2, 3)}});
}

}  // namespace rieszfrac
