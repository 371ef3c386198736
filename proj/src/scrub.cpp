#include "rscrub/scrub.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

#include <Eigen/SVD>

#include "rscrub/parallel.hpp"
#include "rscrub/rng.hpp"
#include "rscrub/robustcore.hpp"

namespace rscrub {

namespace {

constexpr std::uint64_t kKurtosisNullSeed = 0x6b757274ULL;
constexpr int kKurtosisNullDraws = 5000;

// Runs f, re-throwing anything that is not already stage-tagged under `stage`.
template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

Matrix select_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

McdOptions mcd_options(const RunConfig& cfg, std::string_view stream) {
  McdOptions opt;
  opt.n_starts = cfg.mcd_starts;
  opt.consistency_correction = cfg.consistency_correction;
  opt.seed = derive_seed(cfg.seed, stream);
  return opt;
}

}  // namespace

ComponentMatrix reduce_dimension(const Matrix& y, const ReduceOptions& opt) {
  const Index t = y.rows();
  if (t < 20) throw PreconditionError("reduce_dimension: need at least 20 observations");
  if (y.cols() < 1) throw PreconditionError("reduce_dimension: no columns");
  if (!y.allFinite()) throw PreconditionError("reduce_dimension: non-finite input");

  ComponentMatrix cm;
  if (opt.raw_lowdim) {
    if (y.cols() > t / 2)
      throw PreconditionError("reduce_dimension: raw_lowdim input needs cols <= rows / 2 (got " +
                              std::to_string(y.cols()) + " x " + std::to_string(t) + ")");
    cm.data = y;
    cm.source = ComponentSource::raw_lowdim;
    return cm;
  }
  if (!(opt.variance_fraction > 0.0 && opt.variance_fraction <= 1.0))
    throw PreconditionError("reduce_dimension: variance_fraction must lie in (0, 1]");

  const Matrix centered = y.rowwise() - y.colwise().mean();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = sv.size() > 0 ? sv(0) * static_cast<double>(std::max(y.rows(), y.cols())) *
                                         std::numeric_limits<double>::epsilon()
                                   : 0.0;
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  if (rank == 0) throw DegenerateError("reduce_dimension: input has rank 0 after centering");

  Index q = 0;
  if (opt.target_q) {
    q = *opt.target_q;
    if (q < 1) throw PreconditionError("reduce_dimension: target_q must be positive");
    if (q > rank)
      throw DegenerateError("reduce_dimension: target_q " + std::to_string(q) + " exceeds rank " +
                            std::to_string(rank));
  } else {
    const Vector var = sv.head(rank).array().square();
    const double total = var.sum();
    double cum = 0.0;
    while (q < rank) {
      cum += var(q++);
      if (cum >= opt.variance_fraction * total * (1.0 - 1e-12)) break;
    }
  }
  if (q >= t) throw DegenerateError("reduce_dimension: need fewer components than observations");

  cm.data = svd.matrixU().leftCols(q) * sv.head(q).asDiagonal();
  cm.spatial = svd.matrixV().leftCols(q).transpose();
  cm.source = ComponentSource::internal_pca;
  return cm;
}

double kurtosis_null_quantile(Index t, double q_level) {
  if (t < 4) throw PreconditionError("kurtosis_null_quantile: need at least 4 observations");
  if (!(q_level > 0.0 && q_level < 1.0)) throw PreconditionError("kurtosis_null_quantile: q_level must lie in (0, 1)");

  static std::mutex mu;
  static std::map<Index, std::vector<double>> cache;
  std::vector<double> draws;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(t);
    if (it != cache.end()) return quantile(it->second, q_level);
  }
  draws.resize(kKurtosisNullDraws);
  parallel_for(draws.size(), [&](std::size_t i) {
    Rng rng = make_rng(kKurtosisNullSeed, i);
    std::normal_distribution<double> normal;
    Vector s(t);
    for (Index k = 0; k < t; ++k) s(k) = normal(rng);
    draws[i] = excess_kurtosis(s);
  });
  std::sort(draws.begin(), draws.end());
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache.emplace(t, std::move(draws)).first->second;
  return quantile(slot, q_level);
}

KurtosisSelection select_high_kurtosis(const ComponentMatrix& cm, double q_level) {
  const Index q = cm.components();
  if (q < 1) throw PreconditionError("select_high_kurtosis: no components");
  KurtosisSelection sel;
  sel.kurtosis.resize(static_cast<std::size_t>(q));
  for (Index j = 0; j < q; ++j) {
    try {
      sel.kurtosis[static_cast<std::size_t>(j)] = excess_kurtosis(cm.data.col(j));
    } catch (const DegenerateError&) {
      sel.kurtosis[static_cast<std::size_t>(j)] = -std::numeric_limits<double>::infinity();
    }
  }
  sel.cutoff = kurtosis_null_quantile(cm.observations(), q_level);
  for (Index j = 0; j < q; ++j)
    if (sel.kurtosis[static_cast<std::size_t>(j)] > sel.cutoff) sel.indices.push_back(j);
  if (sel.indices.empty()) {
    const auto best = std::max_element(sel.kurtosis.begin(), sel.kurtosis.end()) - sel.kurtosis.begin();
    sel.indices.push_back(static_cast<Index>(best));
    sel.fallback = true;
  }
  sel.selected.source = cm.source;
  sel.selected.data = select_columns(cm.data, sel.indices);
  if (cm.spatial) sel.selected.spatial = select_rows(*cm.spatial, sel.indices);
  if (!cm.labels.empty())
    for (Index j : sel.indices) sel.selected.labels.push_back(cm.labels.at(static_cast<std::size_t>(j)));
  return sel;
}

ScrubReport scrub(const ComponentMatrix& cm, const RunConfig& config) {
  config.validate();
  if (cm.spatial && cm.spatial->rows() != cm.components())
    throw StageError("input", "spatial maps must have one row per component");

  ScrubReport report;
  report.config = config;
  report.source = cm.source;

  // Component selection.
  Matrix x;
  in_stage("select", [&] {
    if (cm.observations() < 20) throw PreconditionError("need at least 20 observations");
    if (!cm.data.allFinite()) throw PreconditionError("non-finite component values");
    if (config.select_components) {
      KurtosisSelection sel = select_high_kurtosis(cm, config.kurtosis_quantile);
      report.selected_components = sel.indices;
      report.kurtosis_values = sel.kurtosis;
      report.kurtosis_cutoff = sel.cutoff;
      if (sel.fallback)
        report.warnings.push_back("no component exceeded the kurtosis null quantile; kept component " +
                                  std::to_string(sel.indices.front()));
      x = std::move(sel.selected.data);
    } else {
      for (Index j = 0; j < cm.components(); ++j) {
        report.selected_components.push_back(j);
        try {
          report.kurtosis_values.push_back(excess_kurtosis(cm.data.col(j)));
        } catch (const DegenerateError&) {
          report.kurtosis_values.push_back(-std::numeric_limits<double>::infinity());
        }
      }
      x = cm.data;
    }
    if (x.cols() >= x.rows()) throw PreconditionError("need more observations than selected components");
  });

  in_stage("detrend", [&] {
    if (!config.detrend) return;
    for (Index j = 0; j < x.cols(); ++j) x.col(j) = robust_detrend(x.col(j), config.detrend_degree);
  });

  const Index n = x.rows();
  const Index p = x.cols();
  const Index h = default_h(n, p);

  in_stage("mcd", [&] {
    const McdFit fit = fast_mcd(x, mcd_options(config, "mcd-original"));
    report.rds = robust_distances(x, fit);
  });

  const bool want_theoretical =
      config.threshold_method == ThresholdSelection::theoretical || config.threshold_method == ThresholdSelection::all;
  const bool want_empirical =
      config.threshold_method == ThresholdSelection::empirical || config.threshold_method == ThresholdSelection::all;
  const bool want_bootstrap =
      config.threshold_method == ThresholdSelection::bootstrap_lb || config.threshold_method == ThresholdSelection::all;

  Matrix x0;
  if (want_empirical || want_bootstrap) {
    in_stage("impute", [&] {
      ImputedMatrix im = impute_matrix(x, config.mad_cut);
      for (std::size_t j = 0; j < im.columns.size(); ++j)
        if (im.columns[j].passed_through)
          report.warnings.push_back("component " + std::to_string(report.selected_components[j]) +
                                    " passed through imputation unchanged: " + im.columns[j].message);
      report.diagnostics = std::move(im.columns);
      x0 = std::move(im.values);
    });
  }

  in_stage("threshold", [&] {
    if (want_theoretical) {
      // The asymptotic dof formula has a pole in (p, h/n); when it collapses
      // below p only a theoretical-only run is fatal.
      try {
        report.thresholds.push_back(theoretical_cutoff(n, p, h, config.alpha, config.consistency_correction));
      } catch (const DegenerateError& e) {
        if (config.threshold_method == ThresholdSelection::theoretical) throw;
        report.warnings.push_back(std::string("theoretical threshold skipped: ") + e.what());
      }
    }
    if (want_empirical || want_bootstrap) {
      const McdFit fit0 = fast_mcd(x0, mcd_options(config, "mcd-imputed"));
      if (want_empirical) report.thresholds.push_back(empirical_cutoff(robust_distances(x0, fit0), config.alpha));
      if (want_bootstrap) {
        std::vector<double> reps;
        if (fit0.excluded.empty())
          throw PreconditionError("bootstrap needs excluded observations (h = n)");
        reps = bootstrap_quantiles(x0, fit0, config.alpha, config.bootstrap_reps, derive_seed(config.seed, "bootstrap"),
                                   config.bootstrap_draws);
        for (double level : config.ci_levels) report.thresholds.push_back(bootstrap_lb_cutoff(reps, level, config.alpha));
      }
    }
  });

  in_stage("flag", [&] {
    std::size_t active = 0;
    bool found = false;
    const ThresholdMethod want = config.threshold_method == ThresholdSelection::theoretical  ? ThresholdMethod::theoretical
                                 : config.threshold_method == ThresholdSelection::bootstrap_lb ? ThresholdMethod::bootstrap_lb
                                                                                               : ThresholdMethod::empirical;
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
      const ThresholdEstimate& t = report.thresholds[i];
      if (t.method != want) continue;
      // bootstrap_lb flags with the highest configured level (95% by default).
      if (!found || t.ci_level > report.thresholds[active].ci_level) active = i;
      found = true;
    }
    if (!found) throw Error("no threshold computed for the requested method");
    report.active_threshold = active;
    report.flags = apply_cutoff(report.rds, report.thresholds[active]);
  });
  return report;
}

ScrubReport scrub(const Matrix& y, const RunConfig& config, const ReduceOptions& reduce) {
  const ComponentMatrix cm = in_stage("reduce", [&] { return reduce_dimension(y, reduce); });
  return scrub(cm, config);
}

std::optional<Vector> artifact_map(const ScrubReport& report, const ComponentMatrix& cm) {
  if (!cm.spatial) throw UnsupportedError("artifact_map: component matrix has no spatial maps");
  if (static_cast<Index>(report.flags.size()) != cm.observations())
    throw PreconditionError("artifact_map: report and component matrix differ in observation count");
  if (cm.spatial->rows() != cm.components())
    throw PreconditionError("artifact_map: spatial maps must have one row per component");
  for (Index j : report.selected_components)
    if (j < 0 || j >= cm.components()) throw PreconditionError("artifact_map: selected component out of range");

  const Matrix a = select_columns(cm.data, report.selected_components);
  const Matrix s = select_rows(*cm.spatial, report.selected_components);
  Vector acc = Vector::Zero(s.cols());
  std::size_t count = 0;
  for (std::size_t t = 0; t < report.flags.size(); ++t) {
    if (!report.flags[t]) continue;
    acc += (a.row(static_cast<Index>(t)) * s).transpose().cwiseAbs();
    ++count;
  }
  if (count == 0) return std::nullopt;
  return Vector(acc / static_cast<double>(count));
}

}  // namespace rscrub
