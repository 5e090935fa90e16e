#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pmc/parallel.hpp"
#include "pmc/pipeline.hpp"
#include "pmc/rng.hpp"
#include "pmc/simlab/dgp.hpp"
#include "pmc/simlab/ols.hpp"
#include "pmc/simlab/oracle.hpp"

namespace pmc {

struct McSettings {
  DgpConfig dgp;
  EstimatorSettings estimator;
  int replications = 20;
  std::uint64_t seed = 1;
  unsigned jobs = 1;              // replications in flight
  bool oracle = false;            // true gamma instead of a first-stage fit (oracle-logit only)
  bool run_estimator = true;      // false: first stage only
  bool first_stage_mse = false;   // compare G(gamma_hat) with G(gamma) for the three smoothers
  bool compare_ols = false;       // OLS and OLS-FE directions
  // Set estimates for each c_hat on the same data and first stage. Empty: estimator.c_hat.
  std::vector<CHat> c_hat_grid;

  std::vector<CHat> c_hats() const { return c_hat_grid.empty() ? std::vector<CHat>{estimator.c_hat} : c_hat_grid; }

  void validate() const {
    if (replications < 1) throw ValidationError("replications must be at least 1");
    dgp.validate();
    if (oracle && dgp.design != Design::oracle_logit)
      throw ValidationError("oracle gamma requires the oracle-logit design");
    if (first_stage_mse && (oracle || !(scale_location_design(dgp.design) || dgp.design == Design::oracle_logit)))
      throw ValidationError(std::string("first-stage MSE needs a fitted gamma on a design with known gamma, not ") +
                            to_string(dgp.design));
  }
};

// One set estimate of a replication.
struct SetRecord {
  double c_hat = 0.0;  // threshold applied to the averaged criterion
  std::vector<double> beta_lower, beta_upper, beta_mid;
  bool covered = false;  // beta_0 inside the set enclosure
  bool converged = false;
  int rounds = 0;
  std::size_t evaluations = 0;
  double q_min = 0.0;
};

struct ReplicationRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<SetRecord> sets;  // one per c_hat of McSettings::c_hats()
  int ties = 0;
  std::array<double, 3> mse{};  // indicator, positive part, adjusted normal CDF
  std::vector<double> ols, ols_fe;
  std::string ols_error, ols_fe_error;
  double seconds = 0.0;
};

// Aggregates over successful replications. beta_0 is taken on the sphere with
// its sign aligned to each replication's midpoint estimate for the bias, width
// and error metrics; sign and coverage rates use the estimates as returned.
struct McReport {
  std::string method;
  std::string c_hat;  // nominal c_hat, empty for OLS
  int requested = 0, completed = 0, failed = 0;
  std::vector<double> bias_mid, bias_upper, bias_lower, mean_width;
  double rmse_mid = 0, rmse_upper = 0, rmse_lower = 0;
  double mnd_mid = 0, mnd_upper = 0, mnd_lower = 0;
  double mad = 0;  // sum_d |bias_mid_d|
  double sign_rate = 0, coverage_rate = 0, converged_rate = 0;
  int ties = 0;
};

inline bool all_signs_match(const std::vector<double>& estimate, const std::vector<double>& truth) {
  for (std::size_t d = 0; d < truth.size(); ++d) {
    if (truth[d] == 0.0) continue;
    if (!(estimate[d] * truth[d] > 0.0)) return false;
  }
  return true;
}

namespace detail {

struct Bounds {
  const std::vector<double>* lower;
  const std::vector<double>* upper;
  const std::vector<double>* mid;
  bool covered;
  bool converged;
};

inline McReport aggregate(const std::string& method, int requested, const std::vector<Bounds>& runs, int failed,
                          const std::vector<double>& beta0, int ties) {
  McReport r;
  r.method = method;
  r.requested = requested;
  r.failed = failed;
  r.completed = static_cast<int>(runs.size());
  r.ties = ties;
  const std::size_t D = beta0.size();
  r.bias_mid.assign(D, 0.0);
  r.bias_upper.assign(D, 0.0);
  r.bias_lower.assign(D, 0.0);
  r.mean_width.assign(D, 0.0);
  if (runs.empty()) return r;
  const double m = static_cast<double>(runs.size());
  double sq_mid = 0, sq_up = 0, sq_lo = 0;
  for (const auto& b : runs) {
    double dot = 0.0;
    for (std::size_t d = 0; d < D; ++d) dot += (*b.mid)[d] * beta0[d];
    const double sign = dot < 0.0 ? -1.0 : 1.0;
    double nm = 0, nu = 0, nl = 0;
    for (std::size_t d = 0; d < D; ++d) {
      const double t = sign * beta0[d];
      const double em = (*b.mid)[d] - t, eu = (*b.upper)[d] - t, el = (*b.lower)[d] - t;
      r.bias_mid[d] += em / m;
      r.bias_upper[d] += eu / m;
      r.bias_lower[d] += el / m;
      r.mean_width[d] += ((*b.upper)[d] - (*b.lower)[d]) / m;
      nm += em * em;
      nu += eu * eu;
      nl += el * el;
    }
    sq_mid += nm / m;
    sq_up += nu / m;
    sq_lo += nl / m;
    r.mnd_mid += std::sqrt(nm) / m;
    r.mnd_upper += std::sqrt(nu) / m;
    r.mnd_lower += std::sqrt(nl) / m;
    r.sign_rate += all_signs_match(*b.mid, beta0) ? 1.0 / m : 0.0;
    r.coverage_rate += b.covered ? 1.0 / m : 0.0;
    r.converged_rate += b.converged ? 1.0 / m : 0.0;
  }
  r.rmse_mid = std::sqrt(sq_mid);
  r.rmse_upper = std::sqrt(sq_up);
  r.rmse_lower = std::sqrt(sq_lo);
  for (double b : r.bias_mid) r.mad += std::abs(b);
  return r;
}

}  // namespace detail

struct FirstStageSummary {
  std::array<double, 3> mean_mse{}, max_mse{};
  int replications = 0;
};

struct McRun {
  McSettings settings;
  std::vector<ReplicationRecord> records;
  std::vector<McReport> estimator;  // one per c_hat
  std::optional<McReport> ols, ols_fe;
  std::optional<FirstStageSummary> first_stage;
};

// Seed of replication r: derive_seed(master, r). Within a replication the DGP
// uses that seed and the first stage derive_seed(that, 1).
inline std::uint64_t replication_seed(std::uint64_t master, int r) {
  return derive_seed(master, static_cast<std::uint64_t>(r));
}

inline ReplicationRecord run_replication(const McSettings& s, int index) {
  ReplicationRecord rec;
  rec.index = index;
  rec.seed = replication_seed(s.seed, index);
  const auto start = std::chrono::steady_clock::now();
  try {
    DgpConfig cfg = s.dgp;
    cfg.seed = rec.seed;
    const auto sim = simulate(cfg);
    rec.ties = sim.truth.ties;
    if (rec.ties > 0) throw ValidationError("simulated utilities tied in " + std::to_string(rec.ties) + " cells");
    EstimatorSettings est = s.estimator;
    est.regressor.seed = derive_seed(rec.seed, 1);

    std::optional<GammaEstimates> fitted;
    GammaFunction gamma;
    if (s.oracle) {
      gamma = oracle_gamma(cfg);
    } else {
      RegressorSpec spec = est.regressor;
      spec.jobs = est.jobs;
      if (est.cross_validate) spec = cross_validate(sim.data, default_cv_grid(spec), est.pairs).best;
      fitted.emplace(fit_gamma(sim.data, spec, est.pairs));
      gamma = fitted->function();
    }
    if (s.first_stage_mse) {
      const auto pairs = select_pairs(cfg.t, est.pairs);
      if (cfg.design == Design::oracle_logit) {
        const auto truth = oracle_gamma(cfg);
        rec.mse = first_stage_mse(
            sim.data, gamma,
            [&](std::span<const double> row) {
              std::vector<double> g(cfg.j);
              for (int j = 0; j < cfg.j; ++j) g[j] = truth(j, {0, 1}, row);
              return g;
            },
            pairs);
      } else {
        const ConditionalGamma truth(cfg);
        rec.mse = first_stage_mse(sim.data, gamma, [&](std::span<const double> row) { return truth.all(row); }, pairs);
      }
    }
    if (s.run_estimator) {
      const UnitVector truth(sim.truth.beta_unit);
      for (const auto& r : second_stage_grid(sim.data, gamma, est, s.c_hats())) {
        SetRecord set;
        set.c_hat = r.c_hat;
        set.beta_lower = r.beta_lower;
        set.beta_upper = r.beta_upper;
        set.beta_mid = r.beta_mid;
        set.covered = r.set_enclosure.contains(from_unit(truth));
        set.converged = r.converged;
        set.rounds = r.rounds;
        set.evaluations = r.evaluations;
        set.q_min = r.q_min;
        rec.sets.push_back(std::move(set));
      }
    }
    if (s.compare_ols) {
      try {
        rec.ols = ols_baseline(sim.data, false).direction;
      } catch (const Error& e) {
        rec.ols_error = e.what();
      }
      try {
        rec.ols_fe = ols_baseline(sim.data, true).direction;
      } catch (const Error& e) {
        rec.ols_fe_error = e.what();
      }
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

inline McRun summarize(McSettings settings, std::vector<ReplicationRecord> records) {
  McRun run;
  run.settings = std::move(settings);
  run.records = std::move(records);
  const auto& s = run.settings;
  const auto beta0 = normalized(s.dgp.beta());
  int ties = 0;
  for (const auto& r : run.records) ties += r.ties;

  const auto c_hats = s.c_hats();
  std::vector<std::vector<detail::Bounds>> est(c_hats.size());
  std::vector<detail::Bounds> ols, fe;
  int failed = 0, ols_failed = 0, fe_failed = 0;
  FirstStageSummary fs;
  for (const auto& r : run.records) {
    if (!r.ok) {
      ++failed;
      ++ols_failed;
      ++fe_failed;
      continue;
    }
    for (std::size_t c = 0; c < r.sets.size(); ++c) {
      const auto& set = r.sets[c];
      est[c].push_back({&set.beta_lower, &set.beta_upper, &set.beta_mid, set.covered, set.converged});
    }
    if (s.compare_ols) {
      if (r.ols.empty()) ++ols_failed;
      else ols.push_back({&r.ols, &r.ols, &r.ols, false, true});
      if (r.ols_fe.empty()) ++fe_failed;
      else fe.push_back({&r.ols_fe, &r.ols_fe, &r.ols_fe, false, true});
    }
    if (s.first_stage_mse) {
      ++fs.replications;
      for (int k = 0; k < 3; ++k) {
        fs.mean_mse[k] += r.mse[k];
        fs.max_mse[k] = std::max(fs.max_mse[k], r.mse[k]);
      }
    }
  }
  if (s.run_estimator)
    for (std::size_t c = 0; c < c_hats.size(); ++c) {
      run.estimator.push_back(detail::aggregate("two-stage", s.replications, est[c], failed, beta0, ties));
      run.estimator.back().c_hat = describe(c_hats[c]);
    }
  if (s.compare_ols) {
    run.ols = detail::aggregate("OLS", s.replications, ols, ols_failed, beta0, ties);
    run.ols_fe = detail::aggregate("OLS-FE", s.replications, fe, fe_failed, beta0, ties);
  }
  if (s.first_stage_mse) {
    for (double& v : fs.mean_mse) v = fs.replications ? v / fs.replications : 0.0;
    run.first_stage = fs;
  }
  return run;
}

// Runs the replications (in parallel up to settings.jobs) and aggregates them
// in replication order. Failed replications are recorded and excluded.
inline McRun run_mc(const McSettings& settings) {
  settings.validate();
  std::vector<ReplicationRecord> records(settings.replications);
  McSettings inner = settings;
  if (settings.jobs > 1) inner.estimator.jobs = 1;
  parallel_for(records.size(), settings.jobs, [&](std::size_t r) { records[r] = run_replication(inner, int(r)); });
  return summarize(settings, std::move(records));
}

}  // namespace pmc
