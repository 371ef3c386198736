#include "rscrub/report.hpp"

#include <algorithm>

namespace rscrub {

std::string to_string(ThresholdSelection s) {
  switch (s) {
    case ThresholdSelection::empirical: return "empirical";
    case ThresholdSelection::bootstrap_lb: return "bootstrap_lb";
    case ThresholdSelection::theoretical: return "theoretical";
    case ThresholdSelection::all: return "all";
  }
  return "unknown";
}

ThresholdSelection threshold_selection_from_string(const std::string& s) {
  if (s == "empirical") return ThresholdSelection::empirical;
  if (s == "bootstrap_lb") return ThresholdSelection::bootstrap_lb;
  if (s == "theoretical") return ThresholdSelection::theoretical;
  if (s == "all") return ThresholdSelection::all;
  throw PreconditionError("unknown threshold method: " + s);
}

std::string to_string(ComponentSource s) {
  switch (s) {
    case ComponentSource::external_ica: return "external_ica";
    case ComponentSource::internal_pca: return "internal_pca";
    case ComponentSource::raw_lowdim: return "raw_lowdim";
  }
  return "unknown";
}

ComponentSource component_source_from_string(const std::string& s) {
  if (s == "external_ica") return ComponentSource::external_ica;
  if (s == "internal_pca") return ComponentSource::internal_pca;
  if (s == "raw_lowdim") return ComponentSource::raw_lowdim;
  throw PreconditionError("unknown component source: " + s);
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) throw PreconditionError("config: alpha must lie in (0, 0.5)");
  if (bootstrap_reps < 100) throw PreconditionError("config: bootstrap_reps must be at least 100");
  for (double c : ci_levels)
    if (!(c >= 0.5 && c < 1.0)) throw PreconditionError("config: every ci_level must lie in [0.5, 1)");
  if (!(kurtosis_quantile > 0.0 && kurtosis_quantile < 1.0))
    throw PreconditionError("config: kurtosis_quantile must lie in (0, 1)");
  if (!(mad_cut > 0.0)) throw PreconditionError("config: mad_cut must be positive");
  if (detrend_degree < 0 || detrend_degree > 5) throw PreconditionError("config: detrend_degree must lie in [0, 5]");
  if (mcd_starts < 1) throw PreconditionError("config: mcd_starts must be positive");
  if (threshold_method == ThresholdSelection::bootstrap_lb && ci_levels.empty())
    throw PreconditionError("config: bootstrap_lb needs at least one ci_level");
}

std::size_t ScrubReport::flagged_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

double ScrubReport::flagged_fraction() const {
  return flags.empty() ? 0.0 : static_cast<double>(flagged_count()) / static_cast<double>(flags.size());
}

}  // namespace rscrub
