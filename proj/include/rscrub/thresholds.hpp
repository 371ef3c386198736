#ifndef RSCRUB_THRESHOLDS_HPP
#define RSCRUB_THRESHOLDS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rscrub/mcd.hpp"
#include "rscrub/types.hpp"

namespace rscrub {

enum class ThresholdMethod { theoretical, empirical, bootstrap_lb };

std::string to_string(ThresholdMethod m);
ThresholdMethod threshold_method_from_string(const std::string& s);

// An RD cutoff (RD scale, not RD^2) and how it was obtained.
struct ThresholdEstimate {
  double cutoff = 0.0;
  ThresholdMethod method = ThresholdMethod::empirical;
  double alpha = 0.01;
  double ci_level = 0.0;             // bootstrap_lb only
  double dof = 0.0;                  // theoretical only: predicted covariance degrees of freedom m
  std::vector<double> replicates;    // bootstrap_lb only: the B quantile replicates
};

// Degrees of freedom of the Wishart approximation to the MCD covariance:
// Croux-Haesbroeck asymptotic value and the Hardin-Rocke small-sample prediction.
struct WishartDof {
  double asymptotic = 0.0;
  double predicted = 0.0;
};

WishartDof hardin_rocke_dof(Index n, Index p, Index h);

// (1 - alpha) quantile of the scaled-F approximation to the distances of
// observations outside the MCD subset:
//   RD^2 ~ p m / (m - p + 1) * F(p, m - p + 1)
// for RDs from the consistency-corrected covariance. With
// `consistency_corrected` false the cutoff is expressed for the raw covariance.
ThresholdEstimate theoretical_cutoff(Index n, Index p, Index h, double alpha, bool consistency_corrected = true);

// (1 - alpha) empirical quantile of the given distances.
ThresholdEstimate empirical_cutoff(const RdSeries& rds, double alpha);

// Fits MCD on the imputed matrix and returns the (1 - alpha) quantile of its RDs.
ThresholdEstimate empirical_cutoff(const Matrix& x0, double alpha, const McdOptions& mcd);

// Number of draws taken from the included rows in each bootstrap replicate.
// `total` draws n (one per observation, uniform over S1); `subset` draws |S1| = h.
// The excluded rows always receive |S2| = n - h draws.
enum class IncludedDraws { total, subset };

// Bootstrap distribution of the (1 - alpha) RD quantile. Included and
// excluded rows of `fit` are resampled separately with replacement; each
// replicate recomputes the mean from its resampled included rows, keeps the
// fit covariance fixed, and takes the quantile over the union of both
// resamples. Replicate b uses stream b derived from `seed`.
std::vector<double> bootstrap_quantiles(const Matrix& x0, const McdFit& fit, double alpha, int reps,
                                        std::uint64_t seed, IncludedDraws draws = IncludedDraws::total);

// Same, fitting MCD on x0 first. Identical rows give B zeros.
std::vector<double> bootstrap_quantiles(const Matrix& x0, double alpha, int reps, std::uint64_t seed,
                                        const McdOptions& mcd, IncludedDraws draws = IncludedDraws::total);

// Lower bound of the bootstrap CI: the (1 - ci_level)/2 quantile of the replicates.
ThresholdEstimate bootstrap_lb_cutoff(const std::vector<double>& replicates, double ci_level, double alpha = 0.01);

// flag[i] = distances[i] > cutoff.
Flags apply_cutoff(const Vector& distances, double cutoff);
inline Flags apply_cutoff(const RdSeries& rds, const ThresholdEstimate& t) { return apply_cutoff(rds.distances, t.cutoff); }

}  // namespace rscrub

#endif  // RSCRUB_THRESHOLDS_HPP
