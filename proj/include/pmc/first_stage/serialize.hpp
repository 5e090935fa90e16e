#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmc/error.hpp"
#include "pmc/first_stage/gamma.hpp"

namespace pmc {

inline constexpr int gamma_format_version = 1;

namespace detail {

inline nlohmann::json spec_to_json(const RegressorSpec& s) {
  return {{"kind", to_string(s.kind)},      {"hidden_units", s.hidden_units},
          {"ridge", s.ridge},               {"bandwidth", s.bandwidth},
          {"cv_folds", s.cv_folds},         {"max_epochs", s.max_epochs},
          {"learning_rate", s.learning_rate}, {"patience", s.patience},
          {"validation_fraction", s.validation_fraction}, {"seed", s.seed},
          {"pooled_pairs", s.pooled_pairs}};
}

inline RegressorSpec spec_from_json(const nlohmann::json& j) {
  RegressorSpec s;
  s.kind = parse_regressor(j.at("kind").get<std::string>());
  s.hidden_units = j.at("hidden_units").get<int>();
  s.ridge = j.at("ridge").get<double>();
  s.bandwidth = j.at("bandwidth").get<double>();
  s.cv_folds = j.at("cv_folds").get<int>();
  s.max_epochs = j.at("max_epochs").get<int>();
  s.learning_rate = j.at("learning_rate").get<double>();
  s.patience = j.at("patience").get<int>();
  s.validation_fraction = j.at("validation_fraction").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.pooled_pairs = j.at("pooled_pairs").get<bool>();
  return s;
}

inline std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

inline nlohmann::json model_to_json(const FittedRegressor& f) {
  nlohmann::json j;
  j["inputs"] = f.inputs();
  switch (f.kind()) {
    case FittedRegressor::Kind::constant:
      j["kind"] = "constant";
      j["value"] = f.constant_value();
      j["degenerate"] = f.degenerate();
      return j;
    case FittedRegressor::Kind::network:
      j["kind"] = "network";
      j["hidden"] = f.network().hidden();
      j["parameters"] = f.network().parameters();
      break;
    case FittedRegressor::Kind::kernel:
      j["kind"] = "kernel";
      j["multiplier"] = f.kernel().multiplier();
      j["points"] = flatten(f.kernel().points());
      j["targets"] = std::vector<double>(f.kernel().targets().data(),
                                         f.kernel().targets().data() + f.kernel().targets().size());
      break;
  }
  j["mean"] = f.standardizer().mean;
  j["scale"] = f.standardizer().scale;
  return j;
}

inline FittedRegressor model_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const int inputs = j.at("inputs").get<int>();
  if (kind == "constant") return FittedRegressor::constant(inputs, j.at("value").get<double>(), j.at("degenerate").get<bool>());
  Standardizer s{j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
  if (s.mean.size() != std::size_t(inputs) || s.scale.size() != std::size_t(inputs))
    throw ValidationError("standardization length does not match model inputs");
  if (kind == "network") {
    ShallowNetwork net(inputs, j.at("hidden").get<int>());
    net.set_parameters(j.at("parameters").get<std::vector<double>>());
    return FittedRegressor::from_network(std::move(s), std::move(net));
  }
  if (kind == "kernel") {
    const auto pts = j.at("points").get<std::vector<double>>();
    const auto ys = j.at("targets").get<std::vector<double>>();
    if (ys.empty() || pts.size() != ys.size() * std::size_t(inputs)) throw ValidationError("kernel sample has the wrong shape");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(ys.size()), inputs);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < inputs; ++c) x(r, c) = pts[std::size_t(r) * inputs + c];
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return FittedRegressor::from_kernel(std::move(s), KernelRegressor(std::move(x), std::move(y), j.at("multiplier").get<double>()));
  }
  throw ValidationError("unknown model kind '" + kind + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const GammaEstimates& g) {
  nlohmann::json j;
  j["format"] = "pmc-gamma";
  j["version"] = gamma_format_version;
  j["products"] = g.n_products();
  j["covariates"] = g.n_covariates();
  j["outside_option"] = g.outside_option();
  j["pooled"] = g.pooled();
  j["spec"] = detail::spec_to_json(g.spec());
  auto& pairs = j["pairs"] = nlohmann::json::array();
  for (const auto& p : g.pairs()) pairs.push_back({p.t, p.s});
  auto& models = j["models"] = nlohmann::json::array();
  for (const auto& m : g.models()) models.push_back(detail::model_to_json(m));
  return j;
}

inline GammaEstimates gamma_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "pmc-gamma") throw ValidationError("not a first-stage model file");
    if (j.at("version").get<int>() != gamma_format_version)
      throw ValidationError("unsupported first-stage model version " + std::to_string(j.at("version").get<int>()));
    std::vector<PeriodPair> pairs;
    for (const auto& p : j.at("pairs")) pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    std::vector<FittedRegressor> models;
    for (const auto& m : j.at("models")) models.push_back(detail::model_from_json(m));
    return GammaEstimates(j.at("products").get<int>(), j.at("covariates").get<int>(), j.at("outside_option").get<bool>(),
                          j.at("pooled").get<bool>(), std::move(pairs), std::move(models),
                          detail::spec_from_json(j.at("spec")));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed first-stage model: ") + e.what());
  }
}

inline void save_gamma(const GammaEstimates& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(g).dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

inline GammaEstimates load_gamma(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return gamma_from_json(j);
}

}  // namespace pmc
