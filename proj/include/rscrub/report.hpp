#ifndef RSCRUB_REPORT_HPP
#define RSCRUB_REPORT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rscrub/mcd.hpp"
#include "rscrub/robustcore.hpp"
#include "rscrub/thresholds.hpp"
#include "rscrub/types.hpp"

namespace rscrub {

// Which cutoffs a run computes. `all` reports every method and flags with the
// empirical one.
enum class ThresholdSelection { empirical, bootstrap_lb, theoretical, all };

std::string to_string(ThresholdSelection s);
ThresholdSelection threshold_selection_from_string(const std::string& s);

enum class ComponentSource { external_ica, internal_pca, raw_lowdim };

std::string to_string(ComponentSource s);
ComponentSource component_source_from_string(const std::string& s);

struct RunConfig {
  double alpha = 0.01;
  int bootstrap_reps = 1000;
  std::vector<double> ci_levels{0.50, 0.80, 0.95};
  std::uint64_t seed = 0;
  double kurtosis_quantile = 0.99;
  double mad_cut = 4.0;
  int detrend_degree = 2;
  ThresholdSelection threshold_method = ThresholdSelection::all;

  bool select_components = true;  // kurtosis selection; off for already selected data
  bool detrend = true;
  int mcd_starts = 500;
  bool consistency_correction = true;
  IncludedDraws bootstrap_draws = IncludedDraws::total;

  // Throws PreconditionError on the first violated invariant.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

struct ScrubReport {
  static constexpr int kSchema = 1;

  Flags flags;                     // flags[t] <=> rds.distances[t] > active cutoff
  RdSeries rds;                    // RDs of the detrended selected original data
  std::vector<ThresholdEstimate> thresholds;
  std::size_t active_threshold = 0;  // index into thresholds used for flags
  std::vector<Index> selected_components;
  std::vector<double> kurtosis_values;  // one per input component
  double kurtosis_cutoff = 0.0;         // null quantile used for selection (0 when skipped)
  ComponentSource source = ComponentSource::raw_lowdim;
  RunConfig config;
  std::vector<ColumnImputation> diagnostics;  // one per selected component
  std::vector<std::string> warnings;
  std::optional<Vector> artifact_map;

  const ThresholdEstimate& active() const { return thresholds.at(active_threshold); }
  Index observations() const { return static_cast<Index>(flags.size()); }
  std::size_t flagged_count() const;
  double flagged_fraction() const;
};

}  // namespace rscrub

#endif  // RSCRUB_REPORT_HPP
