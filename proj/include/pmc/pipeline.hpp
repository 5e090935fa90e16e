#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmc/criterion.hpp"
#include "pmc/first_stage/gamma.hpp"
#include "pmc/optimizer.hpp"
#include "pmc/panel.hpp"

namespace pmc {

enum class CHatScale { count, average };

inline const char* to_string(CHatScale s) { return s == CHatScale::count ? "count" : "average"; }

inline CHatScale parse_c_hat_scale(const std::string& s) {
  if (s == "count") return CHatScale::count;
  if (s == "average") return CHatScale::average;
  throw ValidationError("unknown c_hat scale '" + s + "' (expected count|average)");
}

inline std::string describe(const CHat& c) {
  std::ostringstream os;
  if (const auto* v = std::get_if<double>(&c)) os << *v;
  else os << std::get<CHatRule>(c).kappa << "*N^-1/4*log(N)";
  return os.str();
}

// Threshold on the (1/N)-averaged criterion.
inline double effective_c_hat(const CHat& c, CHatScale scale, int n_agents) {
  const double v = resolve_c_hat(c, n_agents);
  return scale == CHatScale::count ? v / n_agents : v;
}

// Two-stage settings: first-stage regressor, criterion options and grid search.
struct EstimatorSettings {
  RegressorSpec regressor;
  bool cross_validate = false;  // pick the regressor from default_cv_grid(regressor)
  PairPolicy pairs;
  Smoother smoother;
  GridConfig grid;
  CHat c_hat = 0.0;
  // Units of c_hat. count: compared with N * Q (so the threshold on the
  // averaged criterion is c_hat / N); average: compared with Q directly.
  CHatScale c_hat_scale = CHatScale::count;
  unsigned jobs = 1;
};

struct PipelineResult {
  std::optional<GammaEstimates> gamma;  // empty when an external gamma was supplied
  EstimationResult estimate;
};

// Set estimates for several c_hat values on one criterion evaluator.
inline std::vector<EstimationResult> second_stage_grid(const PanelDataset& data, const GammaFunction& gamma,
                                                       const EstimatorSettings& s, const std::vector<CHat>& c_hats) {
  CriterionOptions opt;
  opt.smoother = s.smoother;
  opt.pairs = select_pairs(data.n_periods(), s.pairs);
  opt.jobs = s.jobs;
  const CriterionEvaluator ev(data, gamma, opt);
  std::vector<EstimationResult> out;
  for (const auto& c : c_hats) {
    GridConfig cfg = s.grid;
    cfg.c_hat = effective_c_hat(c, s.c_hat_scale, data.n_agents());
    cfg.jobs = s.jobs;
    out.push_back(set_estimate(ev, cfg, data.n_covariates(), data.n_agents()));
  }
  return out;
}

inline EstimationResult second_stage(const PanelDataset& data, const GammaFunction& gamma,
                                     const EstimatorSettings& s) {
  return second_stage_grid(data, gamma, s, {s.c_hat}).front();
}

// Fits gamma (unless one is given) and computes the set estimate.
inline PipelineResult estimate_two_stage(const PanelDataset& data, const EstimatorSettings& s,
                                         const GammaFunction& external_gamma = {}) {
  PipelineResult out;
  if (external_gamma) {
    out.estimate = second_stage(data, external_gamma, s);
    return out;
  }
  RegressorSpec spec = s.regressor;
  spec.jobs = s.jobs;
  if (s.cross_validate) {
    auto grid = default_cv_grid(spec);
    spec = cross_validate(data, grid, s.pairs).best;
  }
  out.gamma.emplace(fit_gamma(data, spec, s.pairs));
  out.estimate = second_stage(data, out.gamma->function(), s);
  return out;
}

}  // namespace pmc
