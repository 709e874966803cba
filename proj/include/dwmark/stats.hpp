// Copyright (c) 2026 dwmark contributors
// SPDX-License-Identifier: Apache-2.0
//
// Statistical primitives for membership detection: Student-t machinery built
// on the regularized incomplete beta function, one-sided paired and Welch
// t-tests, tail winsorization, rank AUROC and a one-sample KS test against
// Uniform(0,1).
//
// Conventions used throughout:
//   * all t-test p-values are LOWER-tail one-sided probabilities,
//   * p-values are floored at 1e-300 (flagged degenerate where that comes
//     from a zero-variance input), and the natural-log value is carried
//     alongside so reports survive underflow.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dwmark/common.hpp"

namespace dwmark::stats {

inline constexpr double kMinP = 1e-300;

// ---------------------------------------------------------------------------
// Regularized incomplete beta I_x(a, b)
// ---------------------------------------------------------------------------

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// I_x(a, b), absolute error well below 1e-10 over the t-test range.
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw invalid_argument("regularized_incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0))
    throw invalid_argument("regularized_incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * detail::betacf(a, b, x) / a;
  }
  return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

// ---------------------------------------------------------------------------
// Student-t and normal tails
// ---------------------------------------------------------------------------

// Lower-tail CDF of Student's t with df > 0 (df need not be an integer;
// Welch-Satterthwaite produces fractional df).
inline double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw invalid_argument("student_t_cdf: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t < 0.0 ? 0.0 : 1.0;
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
  return t < 0.0 ? half_tail : 1.0 - half_tail;
}

// Natural log of the lower-tail CDF. Below ~1e-280 the linear computation
// underflows, so we switch to the power-law tail of the t density:
//   P(T < -t) ~ C(df) * t^(-df) / df,
//   ln C = lgamma((df+1)/2) - lgamma(df/2) - ln(pi)/2 + (df/2) ln(df)
// (leading term only; relative error O(df/t^2), fine for log-scale reports).
inline double student_t_cdf_ln(double t, double df) {
  const double p = student_t_cdf(t, df);
  if (p >= 1e-280) return std::log(p);
  const double at = std::fabs(t);
  const double ln_c = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                      0.5 * std::log(M_PI) + 0.5 * df * std::log(df);
  return ln_c - df * std::log(at) - std::log(df);
}

// Upper-tail probability of the standard normal.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / M_SQRT2); }

// ---------------------------------------------------------------------------
// t-tests
// ---------------------------------------------------------------------------

struct TestResult {
  double statistic = 0.0;   // t statistic (+-inf when variance degenerates)
  double df = 0.0;          // degrees of freedom
  double p_one_sided = 1.0; // lower-tail p, floored at kMinP
  double ln_p = 0.0;        // natural log of the (unfloored) p-value
  std::size_t n = 0;        // paired: #pairs; welch: total sample count
  double mean_diff = 0.0;   // paired: mean(d); welch: mean(a) - mean(b)
  double sd_diff = 0.0;     // paired: sd(d); welch: std error of the mean diff
  bool degenerate = false;  // zero-variance input handled by the fixed rule
};

// One-sided paired t-test of H1: mean(d) < 0.
//   t = mean(d) / (sd(d) / sqrt(n)),  df = n - 1,  p = P(T_df < t).
// Zero spread is resolved deterministically: p = 1 when mean >= 0, else the
// p floor, with the degenerate flag set.
inline TestResult paired_t_test(std::span<const double> d) {
  const std::size_t n = d.size();
  if (n < 2) throw invalid_argument("paired_t_test: need at least 2 differences");
  TestResult r;
  r.n = n;
  r.df = static_cast<double>(n - 1);
  r.mean_diff = mean_of(d);
  r.sd_diff = std::sqrt(sample_variance(d));
  if (r.sd_diff == 0.0) {
    r.degenerate = true;
    if (r.mean_diff < 0.0) {
      r.statistic = -std::numeric_limits<double>::infinity();
      r.p_one_sided = kMinP;
      r.ln_p = std::log(kMinP);
    } else {
      r.statistic = r.mean_diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      r.p_one_sided = 1.0;
      r.ln_p = 0.0;
    }
    return r;
  }
  r.statistic = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(n)));
  r.ln_p = student_t_cdf_ln(r.statistic, r.df);
  r.p_one_sided = std::max(student_t_cdf(r.statistic, r.df), kMinP);
  return r;
}

// One-sided Welch t-test of H1: mean(a) < mean(b). Unequal variances,
// Welch-Satterthwaite degrees of freedom.
inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw invalid_argument("welch_t_test: need at least 2 samples per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  TestResult r;
  r.n = a.size() + b.size();
  r.mean_diff = ma - mb;
  const double se2 = va / na + vb / nb;
  r.sd_diff = std::sqrt(se2);
  if (se2 == 0.0) {
    r.degenerate = true;
    r.df = na + nb - 2.0;
    if (r.mean_diff < 0.0) {
      r.statistic = -std::numeric_limits<double>::infinity();
      r.p_one_sided = kMinP;
      r.ln_p = std::log(kMinP);
    } else {
      r.statistic = r.mean_diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      r.p_one_sided = 1.0;
      r.ln_p = 0.0;
    }
    return r;
  }
  r.statistic = r.mean_diff / r.sd_diff;
  const double ra = va / na;
  const double rb = vb / nb;
  r.df = se2 * se2 / (ra * ra / (na - 1.0) + rb * rb / (nb - 1.0));
  r.ln_p = student_t_cdf_ln(r.statistic, r.df);
  r.p_one_sided = std::max(student_t_cdf(r.statistic, r.df), kMinP);
  return r;
}

// ---------------------------------------------------------------------------
// Winsorization
// ---------------------------------------------------------------------------

// How the "top" entries are picked and capped.
//   abs_winsorize:          the ceil(fraction*n) entries with largest |v| become
//                           sign(v) * T, where T is the largest |v| left over.
//   signed_upper_winsorize: the ceil(fraction*n) largest values (signed) become
//                           the largest value left over.
enum class ClipRule { abs_winsorize, signed_upper_winsorize };

// Returns a copy of `values` with the selected tail capped. Order is
// preserved. fraction must lie in [0, 1); at least one entry always survives
// to define the cap.
inline std::vector<double> winsorize_top(std::span<const double> values, double fraction,
                                         ClipRule rule = ClipRule::abs_winsorize) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw invalid_argument("winsorize_top: fraction must lie in [0, 1)");
  std::vector<double> out(values.begin(), values.end());
  const std::size_t n = out.size();
  if (n == 0) return out;
  // ceil(fraction*n), guarding against FP wobble on exact multiples.
  std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (k == 0) return out;
  k = std::min(k, n - 1);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const bool by_abs = rule == ClipRule::abs_winsorize;
  // Sort clip candidates first; ties break on index so the pick is stable.
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    const double vi = by_abs ? std::fabs(out[i]) : out[i];
    const double vj = by_abs ? std::fabs(out[j]) : out[j];
    if (vi != vj) return vi > vj;
    return i < j;
  });
  double cap;  // largest surviving magnitude (or value) defines the cap
  if (by_abs) {
    cap = 0.0;
    for (std::size_t i = k; i < n; ++i) cap = std::max(cap, std::fabs(out[idx[i]]));
    for (std::size_t i = 0; i < k; ++i) {
      const double v = out[idx[i]];
      out[idx[i]] = v < 0.0 ? -cap : (v > 0.0 ? cap : 0.0);
    }
  } else {
    cap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = k; i < n; ++i) cap = std::max(cap, out[idx[i]]);
    for (std::size_t i = 0; i < k; ++i) out[idx[i]] = cap;
  }
  return out;
}

// ---------------------------------------------------------------------------
// AUROC (Mann-Whitney with average ranks; ties count 1/2)
// ---------------------------------------------------------------------------

inline double auroc(std::span<const double> members, std::span<const double> nonmembers) {
  if (members.empty() || nonmembers.empty())
    throw invalid_argument("auroc: both groups must be non-empty");
  struct Item {
    double v;
    bool member;
  };
  std::vector<Item> all;
  all.reserve(members.size() + nonmembers.size());
  for (double v : members) all.push_back({v, true});
  for (double v : nonmembers) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

  double rank_sum_members = 0.0;
  std::size_t i = 0;
  const std::size_t n = all.size();
  while (i < n) {
    std::size_t j = i;
    while (j < n && all[j].v == all[i].v) ++j;
    // 1-based ranks i+1 .. j share the average rank.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (all[t].member) rank_sum_members += avg_rank;
    i = j;
  }
  const double nm = static_cast<double>(members.size());
  const double nn = static_cast<double>(nonmembers.size());
  const double u = rank_sum_members - nm * (nm + 1.0) / 2.0;
  return u / (nm * nn);
}

// ---------------------------------------------------------------------------
// One-sample KS test against Uniform(0, 1)
// ---------------------------------------------------------------------------

inline double ks_uniform_statistic(std::span<const double> samples) {
  if (samples.empty()) throw invalid_argument("ks_uniform_statistic: empty input");
  std::vector<double> s(samples.begin(), samples.end());
  for (double x : s)
    if (!(x >= 0.0 && x <= 1.0))
      throw invalid_argument("ks_uniform_statistic: samples must lie in [0, 1]");
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double lo = s[i] - static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n - s[i];
    d = std::max({d, lo, hi});
  }
  return d;
}

// Asymptotic Kolmogorov tail (Stephens' small-sample correction):
//   lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D
//   Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
inline double ks_uniform_pvalue(double d_statistic, std::size_t n) {
  if (n == 0) throw invalid_argument("ks_uniform_pvalue: n must be positive");
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d_statistic;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double ks_uniform_pvalue(std::span<const double> samples) {
  return ks_uniform_pvalue(ks_uniform_statistic(samples), samples.size());
}

}  // namespace dwmark::stats
