#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rieszfrac/errors.hpp"
#include "rieszfrac/ifs.hpp"

namespace rieszfrac {

// Points in R^p stored row-major in one contiguous buffer.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}

  static PointSet from_line(std::span<const double> xs) {
    PointSet ps(1);
    ps.coords_.assign(xs.begin(), xs.end());
    return ps;
  }

  template <class Scalar>
  static PointSet from_line_exact(const std::vector<Scalar>& xs) {
    PointSet ps(1);
    for (const auto& x : xs) ps.coords_.push_back(rieszfrac::to_double(x));
    return ps;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return coords_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }

  void push_back(std::span<const double> x) {
    if (x.size() != dim_) throw std::invalid_argument("point dimension mismatch");
    coords_.insert(coords_.end(), x.begin(), x.end());
  }
  void push_back(const Eigen::VectorXd& x) {
    push_back(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  PointSet subset(std::span<const std::size_t> idx) const {
    PointSet out(dim_);
    for (std::size_t i : idx) out.push_back((*this)[i]);
    return out;
  }

  Eigen::VectorXd vec(std::size_t i) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = coords_[i * dim_ + k];
    return v;
  }

  const std::vector<double>& raw() const noexcept { return coords_; }

 private:
  std::size_t dim_ = 1;
  std::vector<double> coords_;
};

inline double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) return std::fabs(a[0] - b[0]);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double min_pairwise_distance(const PointSet& ps) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) best = std::min(best, distance(ps[i], ps[j]));
  }
  return best;
}

inline constexpr std::size_t kMaxLatticeSize = std::size_t{1} << 24;

namespace detail {

inline void check_lattice_budget(std::size_t maps, int depth) {
  if (depth < 0) throw std::invalid_argument("lattice depth must be >= 0");
  double size = static_cast<double>(maps);
  for (int k = 0; k < depth; ++k) size *= static_cast<double>(maps);
  if (size > static_cast<double>(kMaxLatticeSize)) {
    throw BudgetError("prefractal lattice at depth " + std::to_string(depth) + " exceeds " +
                      std::to_string(kMaxLatticeSize) + " points");
  }
}

}  // namespace detail

/// Images of the map fixed points under every depth-`depth` word, sorted and
/// deduplicated. Every point lies in A; the lattice at depth D contains the
/// lattice at depth D-1 because each fixed point is its own image.
template <class Scalar>
std::vector<Scalar> prefractal_lattice(const LineSystem<Scalar>& sys, int depth) {
  detail::check_lattice_budget(sys.size(), depth);
  std::vector<Scalar> level;
  for (const auto& m : sys.maps()) level.push_back(m.fixed_point());
  for (int k = 0; k < depth; ++k) {
    std::vector<Scalar> next;
    next.reserve(level.size() * sys.size());
    for (const auto& m : sys.maps()) {
      for (const auto& x : level) next.push_back(m(x));
    }
    level = std::move(next);
  }
  std::sort(level.begin(), level.end());
  level.erase(std::unique(level.begin(), level.end()), level.end());
  return level;
}

inline PointSet prefractal_lattice(const FractalSystem& sys, int depth) {
  detail::check_lattice_budget(sys.size(), depth);
  std::vector<Eigen::VectorXd> level;
  for (const auto& m : sys.maps()) level.push_back(m.fixed_point());
  for (int k = 0; k < depth; ++k) {
    std::vector<Eigen::VectorXd> next;
    next.reserve(level.size() * sys.size());
    for (const auto& m : sys.maps()) {
      for (const auto& x : level) next.push_back(m(x));
    }
    level = std::move(next);
  }
  std::sort(level.begin(), level.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  PointSet out(static_cast<std::size_t>(sys.ambient_dim()));
  const double tol = 1e-12 * std::max(1.0, sys.hull().radius);
  for (std::size_t i = 0; i < level.size(); ++i) {
    if (i > 0 && (level[i] - level[i - 1]).norm() <= tol) continue;
    out.push_back(level[i]);
  }
  return out;
}

/// Greedy farthest-point traversal over `count` candidates: start at index 0,
/// then repeatedly add the candidate whose distance to the chosen set is
/// largest (lowest index on ties). `dist(i, j)` may return any ordered type.
template <class Dist>
std::vector<std::size_t> farthest_point_indices(std::size_t count, std::size_t n, Dist dist) {
  if (n > count) {
    throw std::invalid_argument("lattice has " + std::to_string(count) + " points, fewer than N=" +
                                std::to_string(n));
  }
  if (n == 0) return {};
  using D = decltype(dist(std::size_t{0}, std::size_t{0}));
  std::vector<std::size_t> chosen{0};
  std::vector<bool> taken(count, false);
  taken[0] = true;
  std::vector<D> near(count);
  for (std::size_t j = 0; j < count; ++j) near[j] = dist(0, j);
  while (chosen.size() < n) {
    std::size_t best = count;
    for (std::size_t j = 0; j < count; ++j) {
      if (taken[j]) continue;
      if (best == count || near[best] < near[j]) best = j;
    }
    chosen.push_back(best);
    taken[best] = true;
    for (std::size_t j = 0; j < count; ++j) {
      const D d = dist(best, j);
      if (d < near[j]) near[j] = d;
    }
  }
  return chosen;
}

}  // namespace rieszfrac
