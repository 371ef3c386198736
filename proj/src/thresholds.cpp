#include "rscrub/thresholds.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "rscrub/parallel.hpp"
#include "rscrub/robustcore.hpp"

namespace rscrub {

namespace {

void check_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError(std::string(where) + ": alpha must lie in (0, 1)");
}

}  // namespace

std::string to_string(ThresholdMethod m) {
  switch (m) {
    case ThresholdMethod::theoretical: return "theoretical";
    case ThresholdMethod::empirical: return "empirical";
    case ThresholdMethod::bootstrap_lb: return "bootstrap_lb";
  }
  return "unknown";
}

ThresholdMethod threshold_method_from_string(const std::string& s) {
  if (s == "theoretical") return ThresholdMethod::theoretical;
  if (s == "empirical") return ThresholdMethod::empirical;
  if (s == "bootstrap_lb") return ThresholdMethod::bootstrap_lb;
  throw PreconditionError("unknown threshold method: " + s);
}

WishartDof hardin_rocke_dof(Index n, Index p, Index h) {
  using boost::math::chi_squared;
  using boost::math::cdf;
  if (n <= p || p < 1 || h < 1 || h >= n) throw PreconditionError("hardin_rocke_dof: need n > p and 1 <= h < n");
  const auto pd = static_cast<double>(p);
  const double alpha = static_cast<double>(h) / static_cast<double>(n);
  const double q = boost::math::quantile(chi_squared(pd), alpha);
  const double c_alpha = alpha / cdf(chi_squared(pd + 2.0), q);
  const double c2 = -0.5 * cdf(chi_squared(pd + 2.0), q);
  const double c3 = -0.5 * cdf(chi_squared(pd + 4.0), q);
  const double c4 = 3.0 * c3;
  const double b1 = c_alpha * (c3 - c4) / alpha;
  const double b2 = 0.5 + c_alpha / alpha * (c3 - q / pd * (c2 + 0.5 * (1.0 - alpha)));
  const double v1 = (1.0 - alpha) * b1 * b1 * (alpha * std::pow(c_alpha * q / pd - 1.0, 2) - 1.0) -
                    2.0 * c3 * c_alpha * c_alpha * (3.0 * std::pow(b1 - pd * b2, 2) + (pd + 2.0) * b2 * (2.0 * b1 - pd * b2));
  const double v2 = static_cast<double>(n) * std::pow(b1 * (b1 - pd * b2) * (1.0 - alpha), 2) * c_alpha * c_alpha;
  const double v = v1 / v2;
  WishartDof dof;
  dof.asymptotic = 2.0 / (c_alpha * c_alpha * v);
  dof.predicted = dof.asymptotic * std::exp(0.725 - 0.00663 * pd - 0.0780 * std::log(static_cast<double>(n)));
  return dof;
}

ThresholdEstimate theoretical_cutoff(Index n, Index p, Index h, double alpha, bool consistency_corrected) {
  check_alpha(alpha, "theoretical_cutoff");
  const WishartDof dof = hardin_rocke_dof(n, p, h);
  const double m = dof.predicted;
  const auto pd = static_cast<double>(p);
  if (!(m > pd))
    throw DegenerateError("theoretical_cutoff: degrees of freedom " + std::to_string(m) + " <= p (n=" +
                          std::to_string(n) + ", p=" + std::to_string(p) + ")");
  const double f = boost::math::quantile(boost::math::fisher_f(pd, m - pd + 1.0), 1.0 - alpha);
  double rd2 = f * pd * m / (m - pd + 1.0);
  if (!consistency_corrected) rd2 *= mcd_consistency_factor(n, p, h);
  ThresholdEstimate est;
  est.cutoff = std::sqrt(rd2);
  est.method = ThresholdMethod::theoretical;
  est.alpha = alpha;
  est.dof = m;
  return est;
}

ThresholdEstimate empirical_cutoff(const RdSeries& rds, double alpha) {
  check_alpha(alpha, "empirical_cutoff");
  if (rds.distances.size() < 1) throw PreconditionError("empirical_cutoff: no distances");
  ThresholdEstimate est;
  est.cutoff = quantile(rds.distances, 1.0 - alpha);
  est.method = ThresholdMethod::empirical;
  est.alpha = alpha;
  return est;
}

ThresholdEstimate empirical_cutoff(const Matrix& x0, double alpha, const McdOptions& mcd) {
  const McdFit fit = fast_mcd(x0, mcd);
  return empirical_cutoff(robust_distances(x0, fit), alpha);
}

std::vector<double> bootstrap_quantiles(const Matrix& x0, const McdFit& fit, double alpha, int reps,
                                        std::uint64_t seed, IncludedDraws draws) {
  check_alpha(alpha, "bootstrap_quantiles");
  if (reps < 1) throw PreconditionError("bootstrap_quantiles: reps must be positive");
  if (x0.cols() != fit.p || x0.rows() != fit.n) throw PreconditionError("bootstrap_quantiles: fit does not match data");
  if (fit.excluded.empty()) throw PreconditionError("bootstrap_quantiles: no excluded observations (h = n)");

  Eigen::LLT<Matrix> llt(fit.covariance);
  if (llt.info() != Eigen::Success) throw DegenerateError("bootstrap_quantiles: fit covariance is not positive definite");

  // Whitened rows w_i = L^{-1}(x_i - mean). With replicate mean m_b the squared
  // distance is |w_i - d_b|^2 where d_b is the mean of the resampled included w's.
  Matrix w = (x0.rowwise() - fit.mean.transpose()).transpose();
  llt.matrixL().solveInPlace(w);
  const Vector w_sq = w.colwise().squaredNorm().transpose();

  const std::size_t n_in = draws == IncludedDraws::total ? static_cast<std::size_t>(fit.n) : fit.included.size();
  const std::size_t n = n_in + fit.excluded.size();
  const double pos = (1.0 - alpha) * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);

  std::vector<double> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    std::vector<Index> sample(n);
    std::uniform_int_distribution<std::size_t> pick_in(0, fit.included.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_out(0, fit.excluded.size() - 1);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_in; ++i) sample[k++] = fit.included[pick_in(rng)];
    for (std::size_t i = 0; i < fit.excluded.size(); ++i) sample[k++] = fit.excluded[pick_out(rng)];

    Vector shift = Vector::Zero(w.rows());
    for (std::size_t i = 0; i < n_in; ++i) shift += w.col(sample[i]);
    shift /= static_cast<double>(n_in);
    const Vector proj = shift.transpose() * w;  // w_i . d_b for every original row
    const double shift_sq = shift.squaredNorm();

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Index r = sample[i];
      d2[i] = std::max(0.0, w_sq(r) - 2.0 * proj(r) + shift_sq);
    }
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(lo), d2.end());
    const double a = std::sqrt(d2[lo]);
    double q = a;
    if (frac > 0.0 && lo + 1 < n) {
      const double next = std::sqrt(*std::min_element(d2.begin() + static_cast<std::ptrdiff_t>(lo) + 1, d2.end()));
      q = a + frac * (next - a);
    }
    out[b] = q;
  });
  return out;
}

std::vector<double> bootstrap_quantiles(const Matrix& x0, double alpha, int reps, std::uint64_t seed,
                                        const McdOptions& mcd, IncludedDraws draws) {
  check_alpha(alpha, "bootstrap_quantiles");
  if (x0.rows() > 0 && (x0.rowwise() - x0.row(0)).cwiseAbs().maxCoeff() == 0.0)
    return std::vector<double>(static_cast<std::size_t>(std::max(reps, 0)), 0.0);
  const McdFit fit = fast_mcd(x0, mcd);
  return bootstrap_quantiles(x0, fit, alpha, reps, seed, draws);
}

ThresholdEstimate bootstrap_lb_cutoff(const std::vector<double>& replicates, double ci_level, double alpha) {
  if (replicates.empty()) throw PreconditionError("bootstrap_lb_cutoff: no replicates");
  if (!(ci_level >= 0.5 && ci_level < 1.0)) throw PreconditionError("bootstrap_lb_cutoff: ci_level must lie in [0.5, 1)");
  ThresholdEstimate est;
  est.cutoff = quantile(replicates, 0.5 * (1.0 - ci_level));
  est.method = ThresholdMethod::bootstrap_lb;
  est.alpha = alpha;
  est.ci_level = ci_level;
  est.replicates = replicates;
  return est;
}

Flags apply_cutoff(const Vector& distances, double cutoff) {
  Flags flags(static_cast<std::size_t>(distances.size()));
  for (Index i = 0; i < distances.size(); ++i) flags[static_cast<std::size_t>(i)] = distances(i) > cutoff;
  return flags;
}

}  // namespace rscrub
