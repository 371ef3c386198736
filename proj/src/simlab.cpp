#include "rscrub/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rscrub/parallel.hpp"
#include "rscrub/rng.hpp"
#include "rscrub/scrub.hpp"

namespace rscrub {

namespace {

constexpr Index kBurnIn = 200;

// k distinct indices out of [0, n), ascending.
IndexSet sample_without_replacement(Index n, Index k, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  IndexSet out(idx.begin(), idx.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

Flags random_flags(Index n, Index k, Rng& rng) {
  Flags f(static_cast<std::size_t>(n), false);
  for (Index i : sample_without_replacement(n, k, rng)) f[static_cast<std::size_t>(i)] = true;
  return f;
}

Index count(const Flags& f) { return static_cast<Index>(std::count(f.begin(), f.end(), true)); }

}  // namespace

Matrix gen_iid_gaussian(Index n, Index p, std::uint64_t seed) {
  if (n < 1 || p < 1) throw PreconditionError("gen_iid_gaussian: n and p must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  return x;
}

Matrix gen_ar1(Index n, Index p, double phi, std::uint64_t seed) {
  if (n < 1 || p < 1) throw PreconditionError("gen_ar1: n and p must be positive");
  if (!(std::abs(phi) < 1.0)) throw PreconditionError("gen_ar1: |phi| must be < 1");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(1.0 - phi * phi);
  Matrix x(n, p);
  for (Index j = 0; j < p; ++j) {
    double v = normal(rng);
    for (Index i = 0; i < kBurnIn; ++i) v = phi * v + sd * normal(rng);
    for (Index i = 0; i < n; ++i) {
      v = phi * v + sd * normal(rng);
      x(i, j) = v;
    }
  }
  return x;
}

std::string to_string(NoiseModel m) { return m == NoiseModel::ar1 ? "ar1" : "iid"; }

NoiseModel noise_model_from_string(const std::string& s) {
  if (s == "iid" || s == "iid_gaussian") return NoiseModel::iid_gaussian;
  if (s == "ar1") return NoiseModel::ar1;
  throw PreconditionError("unknown noise model: " + s);
}

void SimConfig::validate() const {
  if (n < 20 || p < 1 || p >= n) throw PreconditionError("simulation: need n >= 20 and 1 <= p < n");
  if (!(std::abs(phi) < 1.0)) throw PreconditionError("simulation: |phi| must be < 1");
  if (replicates < 1) throw PreconditionError("simulation: replicates must be at least 1");
  if (!(alpha > 0.0 && alpha < 0.5)) throw PreconditionError("simulation: alpha must lie in (0, 0.5)");
  if (!(ci_level >= 0.5 && ci_level < 1.0)) throw PreconditionError("simulation: ci_level must lie in [0.5, 1)");
}

std::vector<FprResult> fpr_experiment(const SimConfig& sim, const std::vector<ThresholdMethod>& methods) {
  sim.validate();
  if (methods.empty()) throw PreconditionError("fpr_experiment: no methods");
  const auto has = [&](ThresholdMethod m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };

  RunConfig base;
  base.alpha = sim.alpha;
  base.bootstrap_reps = std::max(sim.bootstrap_reps, 100);
  base.ci_levels = {sim.ci_level};
  base.select_components = false;
  base.detrend = sim.detrend;
  base.mcd_starts = sim.mcd_starts;
  base.bootstrap_draws = sim.bootstrap_draws;
  if (methods.size() == 1)
    base.threshold_method = has(ThresholdMethod::theoretical)   ? ThresholdSelection::theoretical
                            : has(ThresholdMethod::empirical)   ? ThresholdSelection::empirical
                                                                : ThresholdSelection::bootstrap_lb;
  else
    base.threshold_method = ThresholdSelection::all;
  if (base.threshold_method == ThresholdSelection::all && !has(ThresholdMethod::bootstrap_lb))
    base.bootstrap_reps = 100;  // computed but unused; keep it cheap

  const std::uint64_t data_seed = derive_seed(sim.seed, "sim-data");
  const std::uint64_t pipe_seed = derive_seed(sim.seed, "sim-pipeline");
  const auto reps = static_cast<std::size_t>(sim.replicates);
  std::vector<std::vector<double>> fpr(methods.size(), std::vector<double>(reps));

  parallel_for(reps, [&](std::size_t r) {
    try {
      const Matrix x = sim.model == NoiseModel::ar1 ? gen_ar1(sim.n, sim.p, sim.phi, derive_seed(data_seed, r))
                                                    : gen_iid_gaussian(sim.n, sim.p, derive_seed(data_seed, r));
      RunConfig cfg = base;
      cfg.seed = derive_seed(pipe_seed, r);
      ComponentMatrix cm;
      cm.data = x;
      const ScrubReport rep = scrub(cm, cfg);
      for (std::size_t k = 0; k < methods.size(); ++k) {
        const auto it = std::find_if(rep.thresholds.begin(), rep.thresholds.end(),
                                     [&](const ThresholdEstimate& t) { return t.method == methods[k]; });
        const Flags f = apply_cutoff(rep.rds, *it);
        fpr[k][r] = static_cast<double>(count(f)) / static_cast<double>(sim.n);
      }
    } catch (const std::exception& e) {
      throw Error("replicate " + std::to_string(r) + ": " + e.what());
    }
  });

  std::vector<FprResult> out;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    FprResult res;
    res.method = methods[k];
    res.per_replicate_fpr = std::move(fpr[k]);
    res.mean_fpr = std::accumulate(res.per_replicate_fpr.begin(), res.per_replicate_fpr.end(), 0.0) /
                   static_cast<double>(reps);
    out.push_back(std::move(res));
  }
  return out;
}

FprResult fpr_experiment(const SimConfig& sim, ThresholdMethod method) {
  return fpr_experiment(sim, std::vector<ThresholdMethod>{method}).front();
}

Table fpr_table(const std::vector<FprResult>& results) {
  Table t;
  t.header.push_back("replicate");
  for (const auto& r : results) t.header.push_back(to_string(r.method));
  const std::size_t reps = results.empty() ? 0 : results.front().per_replicate_fpr.size();
  for (std::size_t i = 0; i < reps; ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (const auto& r : results) row.push_back(format_number(r.per_replicate_fpr.at(i)));
    t.add_row(std::move(row));
  }
  return t;
}

BurstData gen_burst_components(Index t, Index q, Index n_bursts, Index artifact_columns, double amplitude,
                               std::uint64_t seed) {
  if (n_bursts < 0 || n_bursts > t) throw PreconditionError("gen_burst_components: burst count out of range");
  if (artifact_columns < 1 || artifact_columns > q)
    throw PreconditionError("gen_burst_components: artifact_columns must lie in [1, q]");
  BurstData out;
  out.data = gen_iid_gaussian(t, q, derive_seed(seed, "burst-noise"));
  Rng rng = make_rng(seed, "burst-events");
  out.bursts = sample_without_replacement(t, n_bursts, rng);
  std::uniform_real_distribution<double> mag(0.75, 1.5);
  std::bernoulli_distribution sign;
  for (Index v : out.bursts)
    for (Index j = 0; j < artifact_columns; ++j) out.data(v, j) += (sign(rng) ? 1.0 : -1.0) * amplitude * mag(rng);
  return out;
}

MacSubject gen_mac_subject(Index t, Index nodes, Index n_bursts, double amplitude, std::uint64_t seed) {
  if (nodes < 3) throw PreconditionError("gen_mac_subject: need at least 3 nodes");
  if (n_bursts < 0 || n_bursts > t) throw PreconditionError("gen_mac_subject: burst count out of range");
  Rng rng = make_rng(seed, "mac-structure");
  std::normal_distribution<double> normal;
  Matrix loadings(nodes, 2);
  for (Index i = 0; i < nodes; ++i)
    for (Index k = 0; k < 2; ++k) loadings(i, k) = 0.7 * normal(rng);
  Vector pattern(nodes);
  for (Index i = 0; i < nodes; ++i) pattern(i) = 1.0 + 0.5 * normal(rng);

  MacSubject s;
  s.data = gen_iid_gaussian(t, 2, derive_seed(seed, "mac-factors")) * loadings.transpose() +
           gen_iid_gaussian(t, nodes, derive_seed(seed, "mac-noise"));
  s.truth.assign(static_cast<std::size_t>(t), false);
  std::uniform_real_distribution<double> mag(0.75, 1.5);
  std::bernoulli_distribution sign;
  for (Index v : sample_without_replacement(t, n_bursts, rng)) {
    s.truth[static_cast<std::size_t>(v)] = true;
    s.data.row(v) += ((sign(rng) ? 1.0 : -1.0) * amplitude * mag(rng)) * pattern.transpose();
  }
  return s;
}

Vector fisher_z_fc(const Matrix& x, const Flags& drop) {
  if (static_cast<Index>(drop.size()) != x.rows()) throw PreconditionError("fisher_z_fc: flag length differs from T");
  const Index keep = x.rows() - count(drop);
  if (keep < 10) throw DegenerateError("fisher_z_fc: fewer than 10 volumes remain");
  Matrix kept(keep, x.cols());
  for (Index i = 0, k = 0; i < x.rows(); ++i)
    if (!drop[static_cast<std::size_t>(i)]) kept.row(k++) = x.row(i);
  kept.rowwise() -= kept.colwise().mean();
  const Matrix cov = kept.transpose() * kept;
  const Vector sd = cov.diagonal().cwiseSqrt();
  const Index n = x.cols();
  Vector z(n * (n - 1) / 2);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      if (!(sd(i) > 0.0 && sd(j) > 0.0)) throw DegenerateError("fisher_z_fc: constant node series");
      const double r = std::clamp(cov(i, j) / (sd(i) * sd(j)), -1.0 + 1e-15, 1.0 - 1e-15);
      z(k++) = std::atanh(r);
    }
  return z;
}

Flags random_removal(Index t, Index k, std::uint64_t seed, std::size_t subject, int r) {
  if (k < 0 || k > t) throw PreconditionError("random_removal: count out of range");
  Rng rng = make_rng(derive_seed(derive_seed(seed, "mac-removal"), subject), static_cast<std::uint64_t>(r));
  return random_flags(t, k, rng);
}

void MacConfig::validate() const {
  if (n_subjects < 1) throw PreconditionError("mac: need at least one subject");
  if (n_nodes < 3) throw PreconditionError("mac: need at least 3 nodes");
  if (n_permutations < 10) throw PreconditionError("mac: need at least 10 permutations");
}

double mac(const std::vector<Matrix>& subjects, const std::vector<Flags>& flags, const MacConfig& cfg,
           std::uint64_t seed) {
  if (subjects.empty() || subjects.size() != flags.size())
    throw PreconditionError("mac: need one flag array per subject");
  if (cfg.n_nodes < 3) throw PreconditionError("mac: need at least 3 nodes");
  if (cfg.n_permutations < 1) throw PreconditionError("mac: need at least one permutation");
  std::vector<double> per_subject(subjects.size());
  parallel_for(subjects.size(), [&](std::size_t s) {
    const Matrix& x = subjects[s];
    if (x.cols() != cfg.n_nodes) throw PreconditionError("mac: subject width differs from n_nodes");
    const Vector z_scrub = fisher_z_fc(x, flags[s]);
    const Index k = count(flags[s]);
    Vector mean_dz = Vector::Zero(z_scrub.size());
    for (int r = 0; r < cfg.n_permutations; ++r) mean_dz += z_scrub - fisher_z_fc(x, random_removal(x.rows(), k, seed, s, r));
    mean_dz /= static_cast<double>(cfg.n_permutations);
    per_subject[s] = mean_dz.cwiseAbs().mean();
  });
  return std::accumulate(per_subject.begin(), per_subject.end(), 0.0) / static_cast<double>(subjects.size());
}

Table mac_table(const MacStudy& study) {
  study.cfg.validate();
  study.scrub_config.validate();
  Table table;
  table.header = {"bursts", "method", "censoring_rate", "mac"};
  const auto ns = static_cast<std::size_t>(study.cfg.n_subjects);
  for (std::size_t level = 0; level < study.burst_counts.size(); ++level) {
    const Index bursts = study.burst_counts[level];
    const std::uint64_t level_seed = derive_seed(study.seed, level);
    std::vector<Matrix> data(ns);
    std::vector<Flags> truth(ns), scrubbed(ns), random(ns);
    parallel_for(ns, [&](std::size_t s) {
      MacSubject sub = gen_mac_subject(study.t, study.cfg.n_nodes, bursts, study.amplitude,
                                       derive_seed(derive_seed(level_seed, "mac-data"), s));
      ComponentMatrix cm;
      cm.data = sub.data;
      RunConfig rc = study.scrub_config;
      rc.seed = derive_seed(derive_seed(level_seed, "mac-scrub"), s);
      scrubbed[s] = scrub(cm, rc).flags;
      Rng rng = make_rng(derive_seed(level_seed, "mac-random-flags"), s);
      random[s] = random_flags(study.t, count(scrubbed[s]), rng);
      data[s] = std::move(sub.data);
      truth[s] = std::move(sub.truth);
    });
    const auto rate = [&](const std::vector<Flags>& f) {
      double total = 0.0;
      for (const auto& x : f) total += static_cast<double>(count(x)) / static_cast<double>(x.size());
      return total / static_cast<double>(f.size());
    };
    const std::uint64_t mac_seed = derive_seed(level_seed, "mac-permutations");
    const std::pair<const char*, const std::vector<Flags>*> rows[] = {
        {"ground_truth", &truth}, {"rd_scrub", &scrubbed}, {"random", &random}};
    for (const auto& [name, f] : rows)
      table.add_row({std::to_string(bursts), name, format_number(rate(*f)),
                     format_number(mac(data, *f, study.cfg, mac_seed))});
  }
  return table;
}

}  // namespace rscrub
