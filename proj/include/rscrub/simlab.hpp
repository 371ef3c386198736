#ifndef RSCRUB_SIMLAB_HPP
#define RSCRUB_SIMLAB_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rscrub/matio.hpp"
#include "rscrub/report.hpp"
#include "rscrub/thresholds.hpp"
#include "rscrub/types.hpp"

namespace rscrub {

Matrix gen_iid_gaussian(Index n, Index p, std::uint64_t seed);

// Independent stationary Gaussian AR(1) columns with unit marginal variance
// (innovation variance 1 - phi^2), 200 burn-in steps discarded.
Matrix gen_ar1(Index n, Index p, double phi, std::uint64_t seed);

enum class NoiseModel { iid_gaussian, ar1 };

std::string to_string(NoiseModel m);
NoiseModel noise_model_from_string(const std::string& s);

struct SimConfig {
  Index n = 1000;
  Index p = 5;
  NoiseModel model = NoiseModel::iid_gaussian;
  double phi = 0.0;
  int replicates = 100;
  double alpha = 0.01;
  std::uint64_t seed = 0;

  int bootstrap_reps = 1000;
  double ci_level = 0.95;  // bootstrap_lb level
  int mcd_starts = 500;
  bool detrend = true;
  IncludedDraws bootstrap_draws = IncludedDraws::total;

  void validate() const;
};

struct FprResult {
  std::vector<double> per_replicate_fpr;
  double mean_fpr = 0.0;
  ThresholdMethod method = ThresholdMethod::empirical;
};

// Per replicate: generate outlier-free data, run the scrub pipeline on all p
// columns (no kurtosis selection) and record the flagged fraction under each
// requested method. One pipeline run per replicate serves every method.
std::vector<FprResult> fpr_experiment(const SimConfig& sim, const std::vector<ThresholdMethod>& methods);
FprResult fpr_experiment(const SimConfig& sim, ThresholdMethod method);

// Columns: replicate, then one FPR column per result.
Table fpr_table(const std::vector<FprResult>& results);

// Gaussian components with artifact bursts: at each burst volume the first
// `artifact_columns` columns receive a spike of random sign and magnitude in
// [0.75, 1.5] * amplitude.
struct BurstData {
  Matrix data;
  IndexSet bursts;
};

BurstData gen_burst_components(Index t, Index q, Index n_bursts, Index artifact_columns, double amplitude,
                               std::uint64_t seed);

// Node time series with a two-factor connectivity structure plus a shared
// spatial artifact pattern added at the burst volumes.
struct MacSubject {
  Matrix data;
  Flags truth;
};

MacSubject gen_mac_subject(Index t, Index nodes, Index n_bursts, double amplitude, std::uint64_t seed);

// Fisher z of the Pearson correlation of every node pair (i < j, row-major
// upper triangle), over the rows not dropped.
Vector fisher_z_fc(const Matrix& x, const Flags& drop);

struct MacConfig {
  Index n_subjects = 10;
  Index n_nodes = 20;
  int n_permutations = 100;
  std::string scrub_method = "empirical";

  void validate() const;
};

// The r-th random removal of k of t volumes for a subject, as used by mac().
Flags random_removal(Index t, Index k, std::uint64_t seed, std::size_t subject, int r);

// Mean absolute change: (1/SP) sum_s sum_p |(1/R) sum_r dz_rsp| with
// dz = z(flags removed) - z(same count removed at random). Subjects are taken
// from `subjects`; cfg.n_nodes must match their width.
double mac(const std::vector<Matrix>& subjects, const std::vector<Flags>& flags, const MacConfig& cfg,
           std::uint64_t seed);

// MAC of pipeline flags, ground-truth flags and random flags of matched count
// on synthetic subjects, for each burst count.
struct MacStudy {
  MacConfig cfg;
  Index t = 400;
  std::vector<Index> burst_counts{5, 10, 20};
  double amplitude = 6.0;
  std::uint64_t seed = 0;
  RunConfig scrub_config;
};

// Columns: bursts, method, censoring_rate, mac.
Table mac_table(const MacStudy& study);

}  // namespace rscrub

#endif  // RSCRUB_SIMLAB_HPP
