#ifndef RSCRUB_ROBUSTCORE_HPP
#define RSCRUB_ROBUSTCORE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rscrub/types.hpp"

namespace rscrub {

// Consistency constant of the MAD for the Gaussian standard deviation.
inline constexpr double kMadScale = 1.4826;

namespace detail {

template <typename Derived>
std::vector<typename Derived::Scalar> to_std_vector(const Eigen::DenseBase<Derived>& s) {
  std::vector<typename Derived::Scalar> out(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s.derived().coeff(i);
  return out;
}

template <typename Scalar>
Scalar median_inplace(std::vector<Scalar>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const Scalar upper = v[mid];
  if (n % 2 == 1) return upper;
  const Scalar lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / Scalar(2);
}

// Type-7 quantile (linear interpolation between order statistics at p(n-1)).
template <typename Scalar>
Scalar quantile_inplace(std::vector<Scalar>& v, double prob) {
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  const double pos = prob * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const Scalar a = v[lo];
  if (hi == lo || frac == 0.0) return a;
  const Scalar b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + static_cast<Scalar>(frac) * (b - a);
}

}  // namespace detail

template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& s) {
  if (s.size() < 1) throw PreconditionError("median: empty series");
  auto v = detail::to_std_vector(s);
  return detail::median_inplace(v);
}

// Empirical quantile, type-7 convention. prob in [0, 1].
template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& s, double prob) {
  if (s.size() < 1) throw PreconditionError("quantile: empty series");
  if (!(prob >= 0.0 && prob <= 1.0)) throw PreconditionError("quantile: probability outside [0, 1]");
  auto v = detail::to_std_vector(s);
  return detail::quantile_inplace(v, prob);
}

inline double quantile(std::vector<double> v, double prob) {
  if (v.empty()) throw PreconditionError("quantile: empty series");
  if (!(prob >= 0.0 && prob <= 1.0)) throw PreconditionError("quantile: probability outside [0, 1]");
  return detail::quantile_inplace(v, prob);
}

// Median absolute deviation from the median; times 1.4826 when `scaled`.
// A constant series yields 0.
template <typename Derived>
typename Derived::Scalar mad(const Eigen::DenseBase<Derived>& s, bool scaled) {
  using Scalar = typename Derived::Scalar;
  if (s.size() < 2) throw PreconditionError("mad: series needs at least 2 values");
  auto v = detail::to_std_vector(s);
  const Scalar m = detail::median_inplace(v);
  for (auto& x : v) x = std::abs(x - m);
  const Scalar raw = detail::median_inplace(v);
  return scaled ? static_cast<Scalar>(kMadScale) * raw : raw;
}

// Fourth standardized moment minus 3, with mean and population-style standard
// deviation taken over the same T points.
template <typename Derived>
typename Derived::Scalar excess_kurtosis(const Eigen::DenseBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  if (s.size() < 4) throw PreconditionError("excess_kurtosis: series needs at least 4 values");
  const auto n = static_cast<Scalar>(s.size());
  const Scalar mean = s.derived().sum() / n;
  const auto centered = (s.derived().array() - mean);
  const Scalar m2 = centered.square().sum() / n;
  if (!(m2 > Scalar(0))) throw DegenerateError("excess_kurtosis: constant series");
  const Scalar m4 = centered.square().square().sum() / n;
  return m4 / (m2 * m2) - Scalar(3);
}

// ---------------------------------------------------------------------------
// Robust detrending

inline constexpr double kBisquareTuning = 4.685;

// Removes a polynomial trend of the given degree, fitted by IRLS with Tukey
// bisquare weights, and rescales the residuals to median 0 and scaled MAD 1.
template <typename Derived>
VectorX_t<typename Derived::Scalar> robust_detrend(const Eigen::MatrixBase<Derived>& s, int degree) {
  using Scalar = typename Derived::Scalar;
  using Vec = VectorX_t<Scalar>;
  using Mat = MatrixX_t<Scalar>;
  const Index n = s.size();
  if (degree < 0) throw PreconditionError("robust_detrend: negative degree");
  if (n <= degree + 2) throw PreconditionError("robust_detrend: series too short for degree " + std::to_string(degree));

  Mat design(n, degree + 1);
  for (Index t = 0; t < n; ++t) {
    const Scalar u = n > 1 ? Scalar(2) * Scalar(t) / Scalar(n - 1) - Scalar(1) : Scalar(0);
    Scalar power = 1;
    for (int d = 0; d <= degree; ++d) {
      design(t, d) = power;
      power *= u;
    }
  }

  const Vec y = s;
  Vec coef = design.colPivHouseholderQr().solve(y);
  for (int iter = 0; iter < 20; ++iter) {
    const Vec resid = y - design * coef;
    const Scalar scale = mad(resid, true);
    if (!(scale > Scalar(0))) break;
    Vec sqrt_w(n);
    for (Index t = 0; t < n; ++t) {
      const Scalar u = resid(t) / (static_cast<Scalar>(kBisquareTuning) * scale);
      sqrt_w(t) = std::abs(u) < Scalar(1) ? Scalar(1) - u * u : Scalar(0);
    }
    const Vec next = (sqrt_w.asDiagonal() * design).colPivHouseholderQr().solve(sqrt_w.cwiseProduct(y));
    const Scalar change = (next - coef).cwiseAbs().maxCoeff();
    coef = next;
    if (change < Scalar(1e-8) * (Scalar(1) + coef.cwiseAbs().maxCoeff())) break;
  }

  Vec resid = y - design * coef;
  resid.array() -= median(resid);
  const Scalar scale = mad(resid, true);
  const Scalar spread = (y.array() - median(y)).abs().maxCoeff();
  if (!(scale > Scalar(1e-10) * std::max(Scalar(1), spread)))
    throw DegenerateError("robust_detrend: residual MAD is zero (series is an exact polynomial trend)");
  return resid / scale;
}

// ---------------------------------------------------------------------------
// Robust power transform toward central normality

enum class TransformFamily { yeo_johnson, identity };

struct TransformParams {
  TransformFamily family = TransformFamily::identity;
  double lambda = 1.0;
  double pre_center = 0.0;   // input is standardized with these before the power map
  double pre_scale = 1.0;
  double post_center = 0.0;  // power-mapped values are standardized with these
  double post_scale = 1.0;
  bool fallback = false;  // true when the fit failed and identity was used
};

inline constexpr double kLambdaMin = -4.0;
inline constexpr double kLambdaMax = 4.0;
inline constexpr double kLambdaStep = 0.05;
inline constexpr double kCentralFraction = 0.8;

template <typename Scalar>
Scalar yeo_johnson(Scalar x, double lambda) {
  const auto l = static_cast<Scalar>(lambda);
  if (x >= Scalar(0)) {
    const Scalar lx = std::log1p(x);
    return std::abs(lambda) < 1e-12 ? lx : std::expm1(l * lx) / l;
  }
  const Scalar lx = std::log1p(-x);
  const Scalar two_minus = Scalar(2) - l;
  return std::abs(2.0 - lambda) < 1e-12 ? -lx : -std::expm1(two_minus * lx) / two_minus;
}

template <typename Scalar>
struct TransformResult {
  VectorX_t<Scalar> values;
  TransformParams params;
};

namespace detail {

// Gaussian profile negative log-likelihood of the Yeo-Johnson transformed
// values over a fixed index set, including the log-Jacobian of the power map.
// Location and scale are the ML estimates on that set.
template <typename Scalar>
double trimmed_yj_nll(const std::vector<Scalar>& z, const std::vector<std::size_t>& keep, double log_jac_sum,
                      double lambda) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i : keep) {
    const auto y = static_cast<double>(yeo_johnson(z[i], lambda));
    sum += y;
    sum_sq += y * y;
  }
  const auto m = static_cast<double>(keep.size());
  const double mean = sum / m;
  const double var = sum_sq / m - mean * mean;
  if (!(var > 0.0) || !std::isfinite(var)) return std::numeric_limits<double>::infinity();
  const double nll = 0.5 * m * std::log(var) - (lambda - 1.0) * log_jac_sum;
  return std::isfinite(nll) ? nll : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Strictly monotone Yeo-Johnson transform with lambda chosen on a grid by a
// trimmed likelihood over the central 80% of the data, followed by median/MAD
// standardization. Outliers stay in the tails because they never enter the fit.
template <typename Derived>
TransformResult<typename Derived::Scalar> robust_transform(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  const Index n = s.size();
  if (n < 20) throw PreconditionError("robust_transform: series needs at least 20 values");

  TransformParams params;
  params.pre_center = static_cast<double>(median(s));
  params.pre_scale = static_cast<double>(mad(s, true));
  if (!(params.pre_scale > 0.0)) throw DegenerateError("robust_transform: MAD is zero");

  std::vector<Scalar> z(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    z[static_cast<std::size_t>(i)] =
        (s(i) - static_cast<Scalar>(params.pre_center)) / static_cast<Scalar>(params.pre_scale);

  // Central observations by rank: the lowest and highest (1 - kCentralFraction)/2
  // are trimmed. The set is invariant under every monotone map, so all lambdas
  // are compared on the same observations.
  std::vector<std::size_t> order(z.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  const double tail = 0.5 * (1.0 - kCentralFraction) * static_cast<double>(n);
  const auto first = static_cast<std::size_t>(std::floor(tail));
  const auto last = static_cast<std::size_t>(n) - first;
  const std::vector<std::size_t> keep(order.begin() + static_cast<std::ptrdiff_t>(first),
                                      order.begin() + static_cast<std::ptrdiff_t>(last));
  // log YJ'(z; lambda) = (lambda - 1) * sign(z) * log1p(|z|)
  double log_jac_sum = 0.0;
  for (std::size_t i : keep)
    log_jac_sum += (z[i] >= Scalar(0) ? 1.0 : -1.0) * std::log1p(std::abs(static_cast<double>(z[i])));

  double best_nll = std::numeric_limits<double>::infinity();
  double best_lambda = 1.0;
  const int steps = static_cast<int>(std::lround((kLambdaMax - kLambdaMin) / kLambdaStep));
  for (int k = 0; k <= steps; ++k) {
    const double lambda = kLambdaMin + kLambdaStep * k;
    const double nll = detail::trimmed_yj_nll(z, keep, log_jac_sum, lambda);
    if (nll < best_nll) {
      best_nll = nll;
      best_lambda = lambda;
    }
  }

  VectorX_t<Scalar> out(n);
  if (std::isfinite(best_nll)) {
    params.family = TransformFamily::yeo_johnson;
    params.lambda = best_lambda;
    for (Index i = 0; i < n; ++i) out(i) = yeo_johnson(z[static_cast<std::size_t>(i)], best_lambda);
  } else {
    params.family = TransformFamily::identity;
    params.lambda = 1.0;
    params.fallback = true;
    for (Index i = 0; i < n; ++i) out(i) = z[static_cast<std::size_t>(i)];
  }

  params.post_center = static_cast<double>(median(out));
  params.post_scale = static_cast<double>(mad(out, true));
  if (!(params.post_scale > 0.0)) throw DegenerateError("robust_transform: transformed MAD is zero");
  out = (out.array() - static_cast<Scalar>(params.post_center)) / static_cast<Scalar>(params.post_scale);
  return {std::move(out), params};
}

// ---------------------------------------------------------------------------
// Univariate outlier detection and imputation

// Indices t with |s[t] - median| > mad_cut * 1.4826 * MAD (unscaled MAD).
template <typename Derived>
IndexSet detect_univariate_outliers(const Eigen::DenseBase<Derived>& s, double mad_cut) {
  using Scalar = typename Derived::Scalar;
  const Scalar raw = mad(s, false);
  if (!(raw > Scalar(0))) throw DegenerateError("detect_univariate_outliers: MAD is zero; skip or flag this component");
  const Scalar m = median(s);
  const double band = mad_cut * kMadScale * static_cast<double>(raw);
  IndexSet out;
  for (Index t = 0; t < s.size(); ++t)
    if (static_cast<double>(std::abs(s.derived().coeff(t) - m)) > band) out.push_back(t);
  return out;
}

// Replaces each outlier by the mean of the nearest preceding and nearest
// following non-outlier. At the series ends the single available donor is used.
template <typename Derived>
VectorX_t<typename Derived::Scalar> impute_univariate(const Eigen::MatrixBase<Derived>& s, const IndexSet& outliers) {
  using Scalar = typename Derived::Scalar;
  const Index n = s.size();
  std::vector<bool> is_outlier(static_cast<std::size_t>(n), false);
  for (Index t : outliers) {
    if (t < 0 || t >= n) throw PreconditionError("impute_univariate: outlier index out of range");
    is_outlier[static_cast<std::size_t>(t)] = true;
  }
  if (std::find(is_outlier.begin(), is_outlier.end(), false) == is_outlier.end())
    throw DegenerateError("impute_univariate: every observation is an outlier");

  // prev[t] / next[t]: nearest non-outlier index strictly before / after t, or -1.
  std::vector<Index> prev(static_cast<std::size_t>(n), -1), next(static_cast<std::size_t>(n), -1);
  for (Index t = 1, last = -1; t < n; ++t) {
    if (!is_outlier[static_cast<std::size_t>(t - 1)]) last = t - 1;
    prev[static_cast<std::size_t>(t)] = last;
  }
  for (Index t = n - 2, last = -1; t >= 0; --t) {
    if (!is_outlier[static_cast<std::size_t>(t + 1)]) last = t + 1;
    next[static_cast<std::size_t>(t)] = last;
  }

  VectorX_t<Scalar> out = s;
  for (Index t : outliers) {
    const Index a = prev[static_cast<std::size_t>(t)];
    const Index b = next[static_cast<std::size_t>(t)];
    if (a >= 0 && b >= 0)
      out(t) = (s(a) + s(b)) / Scalar(2);
    else
      out(t) = s(a >= 0 ? a : b);
  }
  return out;
}

// Per-column outcome of impute_matrix.
struct ColumnImputation {
  IndexSet outliers;
  TransformParams transform;
  bool passed_through = false;  // degenerate column copied unchanged
  std::string message;          // reason when passed_through
};

struct ImputedMatrix {
  Matrix values;  // X0: transformed columns with univariate outliers imputed
  std::vector<ColumnImputation> columns;
};

// Column-wise robust_transform -> detect_univariate_outliers -> impute_univariate.
// Degenerate columns are copied unchanged and flagged; throws only if every
// column is degenerate.
ImputedMatrix impute_matrix(const Matrix& x, double mad_cut);

}  // namespace rscrub

#endif  // RSCRUB_ROBUSTCORE_HPP
