#ifndef RSCRUB_MCD_HPP
#define RSCRUB_MCD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rscrub/parallel.hpp"
#include "rscrub/rng.hpp"
#include "rscrub/types.hpp"

namespace rscrub {

// Subset size with maximal breakdown point: floor((n + p + 1) / 2).
inline Index default_h(Index n, Index p) { return (n + p + 1) / 2; }

// Factor turning the raw h-subset covariance into a consistent estimate of
// the Gaussian covariance: (h/n) / P(chi2_{p+2} < chi2_p^{-1}(h/n)). 1 when h = n.
double mcd_consistency_factor(Index n, Index p, Index h);

struct McdOptions {
  Index h = 0;  // 0 selects default_h(n, p)
  int n_starts = 500;
  int initial_csteps = 2;
  int shortlist = 10;
  int max_csteps = 100;
  double tolerance = 1e-9;  // relative determinant change that ends the C-steps
  int max_retries = 10;     // regenerations of a start whose subset is singular
  bool consistency_correction = true;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct McdFitT {
  IndexSet included;  // S1, |S1| = h
  IndexSet excluded;  // S2, complement of S1
  VectorX_t<Scalar> mean;
  MatrixX_t<Scalar> covariance;      // raw_covariance * consistency_factor
  MatrixX_t<Scalar> raw_covariance;  // sample covariance of S1, divisor h - 1
  Scalar determinant = 0;            // det(covariance)
  Scalar raw_log_determinant = 0;    // log det(raw_covariance), the MCD objective
  Scalar consistency_factor = 1;
  Index n = 0;
  Index p = 0;
  Index h = 0;
};

template <typename Scalar>
struct RdSeriesT {
  VectorX_t<Scalar> distances;
  McdFitT<Scalar> fit;
};

using McdFit = McdFitT<double>;
using RdSeries = RdSeriesT<double>;

namespace mcd_detail {

template <typename Scalar>
struct SubsetStats {
  VectorX_t<Scalar> mean;
  MatrixX_t<Scalar> covariance;
  Eigen::LLT<MatrixX_t<Scalar>> llt;
  Scalar log_det = 0;
  bool singular = true;
};

template <typename Scalar>
SubsetStats<Scalar> subset_stats(const MatrixX_t<Scalar>& x, const IndexSet& subset) {
  const auto m = static_cast<Index>(subset.size());
  MatrixX_t<Scalar> rows(m, x.cols());
  for (Index i = 0; i < m; ++i) rows.row(i) = x.row(subset[static_cast<std::size_t>(i)]);
  SubsetStats<Scalar> st;
  st.mean = rows.colwise().mean().transpose();
  rows.rowwise() -= st.mean.transpose();
  st.covariance = (rows.adjoint() * rows) / Scalar(m > 1 ? m - 1 : 1);
  st.llt.compute(st.covariance);
  if (st.llt.info() != Eigen::Success) return st;
  const VectorX_t<Scalar> diag = st.llt.matrixLLT().diagonal();
  const Scalar scale = std::sqrt(st.covariance.diagonal().maxCoeff());
  if (!(scale > Scalar(0)) || !(diag.minCoeff() > Scalar(1e-10) * scale)) return st;
  st.log_det = Scalar(2) * diag.array().log().sum();
  st.singular = false;
  return st;
}

// Squared Mahalanobis distances of all rows w.r.t. (mean, L L^T).
template <typename Scalar>
VectorX_t<Scalar> mahalanobis_sq(const MatrixX_t<Scalar>& x, const VectorX_t<Scalar>& mean,
                                 const Eigen::LLT<MatrixX_t<Scalar>>& llt) {
  MatrixX_t<Scalar> centered = (x.rowwise() - mean.transpose()).transpose();
  llt.matrixL().solveInPlace(centered);
  return centered.colwise().squaredNorm().transpose();
}

// Indices of the h smallest values, ties broken by lowest index; sorted.
template <typename Scalar>
IndexSet smallest(const VectorX_t<Scalar>& d2, Index h) {
  std::vector<Index> order(static_cast<std::size_t>(d2.size()));
  std::iota(order.begin(), order.end(), Index{0});
  auto less = [&](Index a, Index b) { return d2(a) < d2(b) || (d2(a) == d2(b) && a < b); };
  if (h < d2.size()) std::nth_element(order.begin(), order.begin() + h, order.end(), less);
  order.resize(static_cast<std::size_t>(h));
  std::sort(order.begin(), order.end());
  return order;
}

template <typename Scalar>
struct Candidate {
  IndexSet subset;
  SubsetStats<Scalar> stats;
  bool ok = false;
};

template <typename Scalar>
IndexSet random_subset(Index n, Index size, Rng& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < size; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(size));
  return pool;
}

// One random start: (p+1)-subset, grown until nonsingular, expanded to h rows,
// then `csteps` concentration steps.
template <typename Scalar>
Candidate<Scalar> run_start(const MatrixX_t<Scalar>& x, Index h, int csteps, Rng& rng) {
  const Index n = x.rows();
  const Index p = x.cols();
  Candidate<Scalar> cand;
  IndexSet seed = random_subset<Scalar>(n, p + 1, rng);
  SubsetStats<Scalar> st = subset_stats(x, seed);
  while (st.singular && static_cast<Index>(seed.size()) < n) {
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Index extra = pick(rng);
    while (std::find(seed.begin(), seed.end(), extra) != seed.end()) extra = (extra + 1) % n;
    seed.push_back(extra);
    st = subset_stats(x, seed);
  }
  if (st.singular) return cand;
  IndexSet subset = smallest(mahalanobis_sq(x, st.mean, st.llt), h);
  st = subset_stats(x, subset);
  if (st.singular) return cand;
  for (int k = 0; k < csteps; ++k) {
    IndexSet next = smallest(mahalanobis_sq(x, st.mean, st.llt), h);
    if (next == subset) break;
    SubsetStats<Scalar> next_st = subset_stats(x, next);
    if (next_st.singular) return cand;
    subset = std::move(next);
    st = std::move(next_st);
  }
  cand.subset = std::move(subset);
  cand.stats = std::move(st);
  cand.ok = true;
  return cand;
}

template <typename Scalar>
McdFitT<Scalar> make_fit(const MatrixX_t<Scalar>& x, IndexSet included, const SubsetStats<Scalar>& st,
                         bool consistency_correction) {
  McdFitT<Scalar> fit;
  fit.n = x.rows();
  fit.p = x.cols();
  fit.h = static_cast<Index>(included.size());
  std::vector<bool> in(static_cast<std::size_t>(fit.n), false);
  for (Index i : included) in[static_cast<std::size_t>(i)] = true;
  for (Index i = 0; i < fit.n; ++i)
    if (!in[static_cast<std::size_t>(i)]) fit.excluded.push_back(i);
  fit.included = std::move(included);
  fit.mean = st.mean;
  fit.raw_covariance = st.covariance;
  fit.raw_log_determinant = st.log_det;
  fit.consistency_factor =
      consistency_correction ? static_cast<Scalar>(mcd_consistency_factor(fit.n, fit.p, fit.h)) : Scalar(1);
  fit.covariance = st.covariance * fit.consistency_factor;
  fit.determinant = std::exp(st.log_det + Scalar(fit.p) * std::log(fit.consistency_factor));
  return fit;
}

}  // namespace mcd_detail

// Concentration step: the h rows closest (Mahalanobis) to the mean/covariance
// of `subset`. The covariance determinant of the result never exceeds the
// determinant of `subset`.
template <typename Scalar>
IndexSet c_step(const MatrixX_t<Scalar>& x, const IndexSet& subset) {
  if (subset.empty()) throw PreconditionError("c_step: empty subset");
  const auto st = mcd_detail::subset_stats(x, subset);
  if (st.singular) throw DegenerateError("c_step: subset covariance is singular");
  return mcd_detail::smallest(mcd_detail::mahalanobis_sq(x, st.mean, st.llt), static_cast<Index>(subset.size()));
}

// Sample covariance determinant of the rows in `subset` (divisor |subset| - 1).
template <typename Scalar>
Scalar subset_determinant(const MatrixX_t<Scalar>& x, const IndexSet& subset) {
  const auto st = mcd_detail::subset_stats(x, subset);
  return st.singular ? st.covariance.determinant() : std::exp(st.log_det);
}

// FastMCD. Deterministic given options.seed; each start draws from its own
// derived stream so the result does not depend on thread count.
template <typename Scalar>
McdFitT<Scalar> fast_mcd(const MatrixX_t<Scalar>& x, const McdOptions& opt = {}) {
  using namespace mcd_detail;
  const Index n = x.rows();
  const Index p = x.cols();
  if (p < 1) throw PreconditionError("fast_mcd: need at least one column");
  if (n <= p + 1) throw PreconditionError("fast_mcd: need n > p + 1 (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
  if (!x.allFinite()) throw PreconditionError("fast_mcd: non-finite values");
  const Index h = opt.h == 0 ? default_h(n, p) : opt.h;
  if (h < default_h(n, p) || h > n)
    throw PreconditionError("fast_mcd: h=" + std::to_string(h) + " outside [" + std::to_string(default_h(n, p)) + ", " +
                            std::to_string(n) + "]");
  if (opt.n_starts < 1) throw PreconditionError("fast_mcd: n_starts must be positive");

  if (h == n) {
    IndexSet all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    auto st = subset_stats(x, all);
    if (st.singular) throw DegenerateError("fast_mcd: sample covariance is singular");
    return make_fit(x, std::move(all), st, opt.consistency_correction);
  }

  std::vector<Candidate<Scalar>> starts(static_cast<std::size_t>(opt.n_starts));
  parallel_for(starts.size(), [&](std::size_t s) {
    Rng rng = make_rng(opt.seed, s);
    for (int attempt = 0; attempt <= opt.max_retries && !starts[s].ok; ++attempt)
      starts[s] = run_start(x, h, opt.initial_csteps, rng);
  });

  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < starts.size(); ++s)
    if (starts[s].ok) order.push_back(s);
  if (order.empty()) throw DegenerateError("fast_mcd: every start produced a singular subset covariance");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return starts[a].stats.log_det < starts[b].stats.log_det; });

  std::vector<std::size_t> shortlist;
  for (std::size_t s : order) {
    if (static_cast<int>(shortlist.size()) >= opt.shortlist) break;
    const bool dup = std::any_of(shortlist.begin(), shortlist.end(),
                                 [&](std::size_t t) { return starts[t].subset == starts[s].subset; });
    if (!dup) shortlist.push_back(s);
  }

  std::vector<Candidate<Scalar>> finals(shortlist.size());
  parallel_for(shortlist.size(), [&](std::size_t k) {
    Candidate<Scalar> cand = starts[shortlist[k]];
    for (int it = 0; it < opt.max_csteps; ++it) {
      IndexSet next = smallest(mahalanobis_sq(x, cand.stats.mean, cand.stats.llt), h);
      if (next == cand.subset) break;
      SubsetStats<Scalar> next_st = subset_stats(x, next);
      if (next_st.singular) break;
      const Scalar change = std::abs(std::expm1(next_st.log_det - cand.stats.log_det));
      cand.subset = std::move(next);
      cand.stats = std::move(next_st);
      if (change < static_cast<Scalar>(opt.tolerance)) break;
    }
    finals[k] = std::move(cand);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < finals.size(); ++k)
    if (finals[k].stats.log_det < finals[best].stats.log_det) best = k;
  return make_fit(x, std::move(finals[best].subset), finals[best].stats, opt.consistency_correction);
}

// Robust distances sqrt((x - mean)^T Sigma^{-1} (x - mean)) via a Cholesky
// factor of the fit covariance.
template <typename Scalar>
RdSeriesT<Scalar> robust_distances(const MatrixX_t<Scalar>& x, const McdFitT<Scalar>& fit) {
  if (x.cols() != fit.mean.size())
    throw PreconditionError("robust_distances: data has " + std::to_string(x.cols()) + " columns, fit has " +
                            std::to_string(fit.mean.size()));
  Eigen::LLT<MatrixX_t<Scalar>> llt(fit.covariance);
  if (llt.info() != Eigen::Success) throw DegenerateError("robust_distances: fit covariance is not positive definite");
  RdSeriesT<Scalar> out;
  out.distances = mcd_detail::mahalanobis_sq(x, fit.mean, llt).cwiseSqrt();
  out.fit = fit;
  return out;
}

}  // namespace rscrub

#endif  // RSCRUB_MCD_HPP
