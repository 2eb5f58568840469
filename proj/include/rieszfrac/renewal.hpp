#pragma once

// Discrete renewal equation z_n = b_n + sum_{k=0}^n f_k z_{n-k}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rieszfrac/errors.hpp"

namespace rieszfrac {

using real_ext = long double;

struct RenewalSystem {
  std::vector<real_ext> f;      // f[0..K], nonnegative, sum 1
  std::vector<real_ext> b;      // b[0..]; entries past the end are zero
  real_ext b_tail_bound = 0.0L; // certified bound on sum of |b_n| past b.size()-1

  std::size_t max_support() const {
    for (std::size_t k = f.size(); k-- > 0;) {
      if (f[k] > 0) return k;
    }
    return 0;
  }
  real_ext b_at(std::size_t n) const { return n < b.size() ? b[n] : 0.0L; }
};

struct RenewalVerdict {
  real_ext mass = 0.0L;
  bool mass_ok = false;
  bool nonnegative = false;
  std::size_t period = 0;  // gcd of {n : f_n > 0}

  bool aperiodic() const { return period == 1; }
  bool valid() const { return mass_ok && nonnegative; }
};

/// Checks sum f = 1, f >= 0, and the gcd of the support (1 means aperiodic;
/// larger values mean the limit may fail to exist).
inline RenewalVerdict validate(const RenewalSystem& sys) {
  RenewalVerdict v;
  v.nonnegative = true;
  bool any = false;
  for (std::size_t n = 0; n < sys.f.size(); ++n) {
    if (sys.f[n] < 0) v.nonnegative = false;
    v.mass += sys.f[n];
    if (sys.f[n] > 0) {
      any = true;
      v.period = std::gcd(v.period, n);
    }
  }
  if (!any) throw std::invalid_argument("renewal distribution f has empty support");
  v.mass_ok = std::fabs(v.mass - 1.0L) <= 1e-12L;
  return v;
}

/// Forward recursion. The k = 0 term is moved to the left-hand side, so
/// f_0 < 1 is required.
inline std::vector<real_ext> iterate(const RenewalSystem& sys, std::size_t n_max) {
  const real_ext f0 = sys.f.empty() ? 0.0L : sys.f[0];
  if (!(f0 < 1.0L)) throw std::invalid_argument("degenerate renewal system: f_0 >= 1");
  const std::size_t kmax = sys.max_support();
  std::vector<real_ext> z(n_max + 1, 0.0L);
  for (std::size_t n = 0; n <= n_max; ++n) {
    real_ext acc = sys.b_at(n);
    for (std::size_t k = 1; k <= std::min(n, kmax); ++k) acc += sys.f[k] * z[n - k];
    z[n] = acc / (1.0L - f0);
  }
  return z;
}

/// b_n = z_n - sum_{k<=n} f_k z_{n-k}.
inline std::vector<real_ext> reconstruct_b(const std::vector<real_ext>& f,
                                           const std::vector<real_ext>& z) {
  std::vector<real_ext> b(z.size(), 0.0L);
  for (std::size_t n = 0; n < z.size(); ++n) {
    real_ext acc = z[n];
    for (std::size_t k = 0; k <= n && k < f.size(); ++k) acc -= f[k] * z[n - k];
    b[n] = acc;
  }
  return b;
}

/// Right-hand side of the partial-sum identity
///   sum_{n<=L} b_n = sum_{k<=L} z_k * (sum_{n > L-k} f_n),
/// which holds whenever sum f = 1. Only the last max-support terms survive.
inline real_ext telescoping_partial_sum(const std::vector<real_ext>& f,
                                        const std::vector<real_ext>& z, std::size_t L) {
  std::vector<real_ext> tail(f.size() + 1, 0.0L);  // tail[j] = sum_{n >= j} f_n
  for (std::size_t j = f.size(); j-- > 0;) tail[j] = tail[j + 1] + f[j];
  real_ext acc = 0.0L;
  for (std::size_t k = 0; k <= L && k < z.size(); ++k) {
    const std::size_t j = L - k + 1;
    if (j < tail.size()) acc += z[k] * tail[j];
  }
  return acc;
}

struct LimitEstimate {
  real_ext value = 0.0L;        // sum b / mu
  real_ext uncertainty = 0.0L;  // b_tail_bound / mu
  real_ext mu = 0.0L;           // sum n f_n
  real_ext z_last = 0.0L;
  real_ext residual = 0.0L;     // |z_{n_max} - value|
  real_ext cauchy_width = 0.0L; // max - min of z over the last max-support entries
};

inline LimitEstimate limit_estimate(const RenewalSystem& sys, std::size_t n_max = 500) {
  const auto verdict = validate(sys);
  if (!verdict.aperiodic()) {
    throw std::domain_error("renewal limit refused: support of f has gcd " +
                            std::to_string(verdict.period) + ", the limit need not exist");
  }
  LimitEstimate out;
  for (std::size_t n = 0; n < sys.f.size(); ++n) out.mu += static_cast<real_ext>(n) * sys.f[n];
  if (!(out.mu > 0)) throw std::domain_error("renewal limit undefined: mean of f is zero");
  const real_ext total = std::accumulate(sys.b.begin(), sys.b.end(), 0.0L);
  out.value = total / out.mu;
  out.uncertainty = sys.b_tail_bound / out.mu;
  const auto z = iterate(sys, n_max);
  out.z_last = z.back();
  out.residual = std::fabs(out.z_last - out.value);
  const std::size_t window = std::max<std::size_t>(1, sys.max_support());
  const auto first = z.end() - static_cast<std::ptrdiff_t>(std::min(window, z.size()));
  const auto [mn, mx] = std::minmax_element(first, z.end());
  out.cauchy_width = *mx - *mn;
  return out;
}

/// Parses "k:v,k:v" into a dense f vector.
inline std::vector<real_ext> parse_distribution(const std::string& text) {
  std::vector<real_ext> f;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ParseError("expected k:value in '" + item + "'");
    std::size_t k = 0;
    real_ext v = 0;
    try {
      k = static_cast<std::size_t>(std::stoul(item.substr(0, colon)));
      v = std::stold(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ParseError("malformed entry '" + item + "'");
    }
    if (f.size() <= k) f.resize(k + 1, 0.0L);
    f[k] += v;
  }
  if (f.empty()) throw ParseError("empty distribution");
  return f;
}

}  // namespace rieszfrac
