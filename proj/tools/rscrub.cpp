// rscrub command-line interface.
//   exit 0: success, 1: usage error, 2: runtime error

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rscrub/matio.hpp"
#include "rscrub/scrub.hpp"
#include "rscrub/simlab.hpp"

namespace {

using namespace rscrub;

struct ScrubArgs {
  std::string input, out, spatial, artifact_out, flags_out, reduce = "auto";
  std::string method = "all";
  double alpha = 0.01, kurtosis_q = 0.99, mad_cut = 4.0, variance = 0.9;
  int reps = 1000, detrend_degree = 2, starts = 500, target_q = 0;
  std::vector<double> ci_levels{0.50, 0.80, 0.95};
  bool no_detrend = false, no_select = false;
};

struct FprArgs {
  std::string model = "iid", out, summary;
  std::vector<std::string> methods{"theoretical"};
  double phi = 0.0, alpha = 0.01, ci = 0.95;
  int reps = 100, boot_reps = 1000, n = 1000, p = 5, starts = 500;
  bool no_detrend = false;
};

struct MacArgs {
  std::string out, method = "empirical";
  int nodes = 20, subjects = 10, perms = 100, t = 400;
  std::vector<int> bursts{5, 10, 20};
  double amplitude = 6.0;
};

struct PlotArgs {
  std::string report, out, replicates_out;
};

std::string summary_line(const ScrubReport& r) {
  std::ostringstream ss;
  ss << "flagged " << r.flagged_count() << " of " << r.observations() << " observations ("
     << format_number(r.flagged_fraction()) << ") with " << to_string(r.active().method) << " cutoff "
     << format_number(r.active().cutoff) << "; " << r.selected_components.size() << " component(s) selected";
  return ss.str();
}

int run_scrub(const ScrubArgs& a, std::uint64_t seed) {
  RunConfig cfg;
  cfg.alpha = a.alpha;
  cfg.bootstrap_reps = a.reps;
  cfg.ci_levels = a.ci_levels;
  cfg.seed = seed;
  cfg.kurtosis_quantile = a.kurtosis_q;
  cfg.mad_cut = a.mad_cut;
  cfg.detrend_degree = a.detrend_degree;
  cfg.detrend = !a.no_detrend;
  cfg.select_components = !a.no_select;
  cfg.mcd_starts = a.starts;
  cfg.threshold_method = threshold_selection_from_string(a.method);

  const DenseMatrix y = load_matrix(a.input);
  ComponentMatrix cm;
  if (!a.spatial.empty()) {
    const DenseMatrix s = load_matrix(a.spatial);
    if (s.rows() != y.cols())
      throw PreconditionError("spatial maps have " + std::to_string(s.rows()) + " rows but the input has " +
                              std::to_string(y.cols()) + " components");
    cm.data = y.values;
    cm.spatial = s.values;
    cm.source = ComponentSource::external_ica;
  } else {
    ReduceOptions ro;
    ro.variance_fraction = a.variance;
    if (a.target_q > 0) ro.target_q = a.target_q;
    ro.raw_lowdim = a.reduce == "none" || (a.reduce == "auto" && y.cols() <= y.rows() / 2);
    cm = reduce_dimension(y.values, ro);
  }
  cm.labels = y.col_labels;

  ScrubReport report = scrub(cm, cfg);
  if (!a.artifact_out.empty()) {
    report.artifact_map = artifact_map(report, cm);
    if (!report.artifact_map) {
      report.warnings.push_back("no flagged volumes; artifact map not written");
      std::cerr << "warning: no flagged volumes; artifact map not written\n";
    } else {
      DenseMatrix m;
      m.values = *report.artifact_map;
      m.col_labels = {"intensity"};
      save_matrix(m, a.artifact_out, MatrixFormat::delimited);
    }
  }
  save_report(report, a.out);
  if (!a.flags_out.empty()) {
    Table t;
    t.header = {"t", "rd", "flag"};
    for (std::size_t i = 0; i < report.flags.size(); ++i)
      t.add_row({std::to_string(i), format_number(report.rds.distances(static_cast<Index>(i))),
                 report.flags[i] ? "1" : "0"});
    save_table(t, a.flags_out);
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << summary_line(report) << "\n";
  return 0;
}

int run_fpr(const FprArgs& a, std::uint64_t seed) {
  SimConfig sim;
  sim.n = a.n;
  sim.p = a.p;
  sim.model = noise_model_from_string(a.model);
  sim.phi = a.phi;
  sim.replicates = a.reps;
  sim.alpha = a.alpha;
  sim.seed = seed;
  sim.bootstrap_reps = a.boot_reps;
  sim.ci_level = a.ci;
  sim.mcd_starts = a.starts;
  sim.detrend = !a.no_detrend;
  if (sim.model == NoiseModel::iid_gaussian && a.phi != 0.0) throw PreconditionError("--phi requires --model ar1");

  std::vector<ThresholdMethod> methods;
  for (const auto& m : a.methods) {
    if (m == "all") {
      methods = {ThresholdMethod::theoretical, ThresholdMethod::empirical, ThresholdMethod::bootstrap_lb};
      break;
    }
    methods.push_back(threshold_method_from_string(m));
  }
  const auto results = fpr_experiment(sim, methods);
  save_table(fpr_table(results), a.out);

  Table summary;
  summary.header = {"method", "model", "phi", "n", "p", "replicates", "mean_fpr", "min_fpr", "max_fpr"};
  for (const auto& r : results) {
    const auto [lo, hi] = std::minmax_element(r.per_replicate_fpr.begin(), r.per_replicate_fpr.end());
    summary.add_row({to_string(r.method), to_string(sim.model), format_number(sim.phi), std::to_string(sim.n),
                     std::to_string(sim.p), std::to_string(sim.replicates), format_number(r.mean_fpr),
                     format_number(*lo), format_number(*hi)});
  }
  if (!a.summary.empty()) save_table(summary, a.summary);
  std::cout << table_to_string(summary);
  return 0;
}

int run_mac(const MacArgs& a, std::uint64_t seed) {
  MacStudy study;
  study.cfg.n_nodes = a.nodes;
  study.cfg.n_subjects = a.subjects;
  study.cfg.n_permutations = a.perms;
  study.cfg.scrub_method = a.method;
  study.t = a.t;
  study.burst_counts.assign(a.bursts.begin(), a.bursts.end());
  study.amplitude = a.amplitude;
  study.seed = seed;
  study.scrub_config.threshold_method = threshold_selection_from_string(a.method);
  study.scrub_config.seed = seed;
  const Table t = mac_table(study);
  save_table(t, a.out);
  std::cout << table_to_string(t);
  return 0;
}

int run_plot(const PlotArgs& a) {
  const ScrubReport r = load_report(a.report);
  Table t;
  t.header = {"t", "rd", "flag"};
  for (const auto& th : r.thresholds) {
    std::string name = "cutoff_" + to_string(th.method);
    if (th.method == ThresholdMethod::bootstrap_lb) name += "_" + std::to_string(static_cast<int>(th.ci_level * 100 + 0.5));
    t.header.push_back(name);
  }
  t.header.push_back("cutoff_active");
  for (std::size_t i = 0; i < r.flags.size(); ++i) {
    std::vector<std::string> row{std::to_string(i), format_number(r.rds.distances(static_cast<Index>(i))),
                                 r.flags[i] ? "1" : "0"};
    for (const auto& th : r.thresholds) row.push_back(format_number(th.cutoff));
    row.push_back(format_number(r.active().cutoff));
    t.add_row(std::move(row));
  }
  save_table(t, a.out);
  if (!a.replicates_out.empty()) {
    const auto it = std::find_if(r.thresholds.begin(), r.thresholds.end(),
                                 [](const ThresholdEstimate& e) { return !e.replicates.empty(); });
    if (it == r.thresholds.end()) throw PreconditionError("report has no bootstrap replicates");
    Table b;
    b.header = {"replicate", "quantile"};
    for (std::size_t i = 0; i < it->replicates.size(); ++i)
      b.add_row({std::to_string(i), format_number(it->replicates[i])});
    save_table(b, a.replicates_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust multivariate outlier detection for artifact scrubbing"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random stream")->capture_default_str();

  const auto method_check = CLI::IsMember({"empirical", "bootstrap_lb", "theoretical", "all"});

  ScrubArgs sa;
  auto* scrub_cmd = app.add_subcommand("scrub", "Flag outlying observations of a T x Q (or T x V) matrix");
  scrub_cmd->add_option("--input", sa.input, "Input matrix (.csv/.tsv delimited or .bin)")->required()->check(CLI::ExistingFile);
  scrub_cmd->add_option("--out", sa.out, "Report path (JSON)")->required();
  scrub_cmd->add_option("--seed", seed, "Seed for every random stream");
  scrub_cmd->add_option("--alpha", sa.alpha, "Nominal outlier rate")->check(CLI::Range(1e-9, 0.5))->capture_default_str();
  scrub_cmd->add_option("--method", sa.method, "Flagging threshold")->check(method_check)->capture_default_str();
  scrub_cmd->add_option("--reps", sa.reps, "Bootstrap replicates")->check(CLI::Range(100, 1000000))->capture_default_str();
  scrub_cmd->add_option("--ci-levels", sa.ci_levels, "Bootstrap CI levels")->delimiter(',')->capture_default_str();
  scrub_cmd->add_option("--kurtosis-quantile", sa.kurtosis_q, "Null quantile for component selection")->capture_default_str();
  scrub_cmd->add_option("--mad-cut", sa.mad_cut, "Univariate outlier cut in MAD units")->capture_default_str();
  scrub_cmd->add_option("--detrend-degree", sa.detrend_degree, "Polynomial detrend degree")->capture_default_str();
  scrub_cmd->add_flag("--no-detrend", sa.no_detrend, "Skip robust detrending");
  scrub_cmd->add_flag("--no-select", sa.no_select, "Use all components (skip kurtosis selection)");
  scrub_cmd->add_option("--mcd-starts", sa.starts, "FastMCD random starts")->check(CLI::PositiveNumber)->capture_default_str();
  scrub_cmd->add_option("--reduce", sa.reduce, "Dimension handling")->check(CLI::IsMember({"auto", "none", "pca"}))->capture_default_str();
  scrub_cmd->add_option("--target-q", sa.target_q, "PCA components (0 = by variance)");
  scrub_cmd->add_option("--variance", sa.variance, "PCA cumulative variance fraction")->capture_default_str();
  scrub_cmd->add_option("--spatial", sa.spatial, "Q x V spatial maps for the input components")->check(CLI::ExistingFile);
  scrub_cmd->add_option("--artifact-map", sa.artifact_out, "Write the artifact intensity map (one column)");
  scrub_cmd->add_option("--flags-out", sa.flags_out, "Write t,rd,flag as CSV");

  FprArgs fa;
  auto* fpr_cmd = app.add_subcommand("simulate-fpr", "False positive rates on outlier-free simulated data");
  fpr_cmd->add_option("--out", fa.out, "Per-replicate FPR table (CSV)")->required();
  fpr_cmd->add_option("--seed", seed, "Seed for every random stream");
  fpr_cmd->add_option("--summary", fa.summary, "Summary table (CSV)");
  fpr_cmd->add_option("--model", fa.model, "Noise model")->check(CLI::IsMember({"iid", "ar1"}))->capture_default_str();
  fpr_cmd->add_option("--phi", fa.phi, "AR(1) coefficient")->check(CLI::Range(-0.999, 0.999))->capture_default_str();
  fpr_cmd->add_option("--reps", fa.reps, "Replicates")->check(CLI::PositiveNumber)->capture_default_str();
  fpr_cmd->add_option("--method", fa.methods, "Threshold method(s)")->delimiter(',')->check(method_check)->capture_default_str();
  fpr_cmd->add_option("--n", fa.n, "Observations per replicate")->capture_default_str();
  fpr_cmd->add_option("--p", fa.p, "Dimensions")->capture_default_str();
  fpr_cmd->add_option("--alpha", fa.alpha, "Nominal outlier rate")->check(CLI::Range(1e-9, 0.5))->capture_default_str();
  fpr_cmd->add_option("--boot-reps", fa.boot_reps, "Bootstrap replicates")->check(CLI::Range(100, 1000000))->capture_default_str();
  fpr_cmd->add_option("--ci", fa.ci, "Bootstrap CI level for the lower bound")->capture_default_str();
  fpr_cmd->add_option("--mcd-starts", fa.starts, "FastMCD random starts")->check(CLI::PositiveNumber)->capture_default_str();
  fpr_cmd->add_flag("--no-detrend", fa.no_detrend, "Skip robust detrending");

  MacArgs ma;
  auto* mac_cmd = app.add_subcommand("mac", "Mean absolute change on synthetic subjects with burst artifacts");
  mac_cmd->add_option("--out", ma.out, "MAC table (CSV)")->required();
  mac_cmd->add_option("--seed", seed, "Seed for every random stream");
  mac_cmd->add_option("--nodes", ma.nodes, "Nodes per subject")->check(CLI::Range(3, 100000))->capture_default_str();
  mac_cmd->add_option("--subjects", ma.subjects, "Subjects")->check(CLI::PositiveNumber)->capture_default_str();
  mac_cmd->add_option("--perms", ma.perms, "Random removals per subject")->check(CLI::Range(10, 1000000))->capture_default_str();
  mac_cmd->add_option("--t", ma.t, "Volumes per subject")->capture_default_str();
  mac_cmd->add_option("--bursts", ma.bursts, "Burst counts")->delimiter(',')->capture_default_str();
  mac_cmd->add_option("--amplitude", ma.amplitude, "Burst amplitude (noise sd units)")->capture_default_str();
  mac_cmd->add_option("--method", ma.method, "Scrubbing threshold")->check(method_check)->capture_default_str();

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("emit-plotdata", "RD values and cutoffs from a report as plot-ready CSV");
  plot_cmd->add_option("--report", pa.report, "Report written by scrub")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", pa.out, "Output CSV")->required();
  plot_cmd->add_option("--replicates-out", pa.replicates_out, "Bootstrap quantile replicates (CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 1;
  }

  try {
    if (*scrub_cmd) return run_scrub(sa, seed);
    if (*fpr_cmd) return run_fpr(fa, seed);
    if (*mac_cmd) return run_mac(ma, seed);
    if (*plot_cmd) return run_plot(pa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
