#ifndef RSCRUB_SCRUB_HPP
#define RSCRUB_SCRUB_HPP

#include <optional>
#include <vector>

#include "rscrub/report.hpp"
#include "rscrub/types.hpp"

namespace rscrub {

// T x Q component time courses, optionally with their Q x V spatial maps.
struct ComponentMatrix {
  Matrix data;
  ComponentSource source = ComponentSource::raw_lowdim;
  std::optional<Matrix> spatial;
  std::vector<std::string> labels;

  Index observations() const { return data.rows(); }
  Index components() const { return data.cols(); }
};

struct ReduceOptions {
  std::optional<Index> target_q;  // fixed number of components; otherwise by variance
  double variance_fraction = 0.9;
  bool raw_lowdim = false;  // input already holds low-dimensional components
};

// Pass-through for low-dimensional input flagged raw_lowdim, otherwise the
// top-q principal component scores of the column-centered input (spatial maps
// are the matching right singular vectors).
ComponentMatrix reduce_dimension(const Matrix& y, const ReduceOptions& opt = {});

// Upper `q_level` quantile of excess kurtosis of T i.i.d. Gaussian values,
// estimated by Monte Carlo with a fixed internal seed and cached per T.
double kurtosis_null_quantile(Index t, double q_level);

struct KurtosisSelection {
  ComponentMatrix selected;
  std::vector<Index> indices;   // selected input columns, ascending
  std::vector<double> kurtosis; // excess kurtosis of every input column
  double cutoff = 0.0;
  bool fallback = false;        // nothing exceeded the cutoff; kept the maximum
};

// Keeps the columns whose excess kurtosis exceeds the null quantile.
KurtosisSelection select_high_kurtosis(const ComponentMatrix& cm, double q_level);

// Full pipeline: selection, detrending, MCD on the original selected data,
// univariate imputation, threshold estimation and flagging. Deterministic
// given (input, config).
ScrubReport scrub(const ComponentMatrix& cm, const RunConfig& config);
ScrubReport scrub(const Matrix& y, const RunConfig& config, const ReduceOptions& reduce);

// Mean over flagged volumes of |A*[t, :] S*|, with A* and S* restricted to the
// selected components. Empty optional when nothing is flagged; throws
// UnsupportedError without spatial maps.
std::optional<Vector> artifact_map(const ScrubReport& report, const ComponentMatrix& cm);

}  // namespace rscrub

#endif  // RSCRUB_SCRUB_HPP
