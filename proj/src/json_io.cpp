#include "icmc/json_io.hpp"

#include <cmath>
#include <fstream>

namespace icmc {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

json basis_to_json(const SplineBasis& basis) {
  return {{"degree", basis.degree},
          {"interior_knots", vec_to_json(basis.interior_knots)},
          {"lo", basis.lo},
          {"hi", basis.hi}};
}

SplineBasis basis_from_json(const json& j) {
  SplineBasis basis;
  basis.degree = j.at("degree").get<int>();
  basis.interior_knots = vec_from_json(j.at("interior_knots"));
  basis.lo = j.at("lo").get<double>();
  basis.hi = j.at("hi").get<double>();
  basis.k = basis.interior_knots.size() + basis.degree;
  return basis;
}

json intervals_to_json(const std::vector<Interval>& intervals) {
  json out = json::array();
  for (const auto& iv : intervals) out.push_back({{"lo", iv.lo}, {"hi", iv.hi}});
  return out;
}

}  // namespace

json dataset_to_json(const CureDataset& ds) {
  json obs = json::array();
  for (const auto& o : ds.observations) {
    json row = {{"left", o.left},
                {"delta_l", o.delta_l ? 1 : 0},
                {"delta_i", o.delta_i ? 1 : 0},
                {"delta_r", o.delta_r ? 1 : 0},
                {"x", vec_to_json(o.x)},
                {"z", vec_to_json(o.z)}};
    if (std::isinf(o.right)) {
      row["right"] = "inf";
    } else {
      row["right"] = o.right;
    }
    obs.push_back(std::move(row));
  }
  return {{"observations", std::move(obs)},
          {"d1", ds.d1},
          {"d2", ds.d2},
          {"finite_endpoints", ds.finite_endpoints}};
}

CureDataset dataset_from_json(const json& j) {
  std::vector<IntervalObservation> obs;
  for (const auto& row : j.at("observations")) {
    const double left = row.at("left").get<double>();
    const auto& right_field = row.at("right");
    const double right = right_field.is_string() ? infinity() : right_field.get<double>();
    obs.push_back(make_observation(left, right, vec_from_json(row.at("x")),
                                   vec_from_json(row.at("z"))));
  }
  auto ds = CureDataset::from_observations(std::move(obs));
  ds.d1 = j.at("d1").get<Eigen::Index>();
  ds.d2 = j.at("d2").get<Eigen::Index>();
  return ds;
}

json fit_result_to_json(const FitResult& fit) {
  const auto& p = fit.params;
  json params = {{"r", p.tr.r},
                 {"beta", vec_to_json(p.beta)},
                 {"eta", vec_to_json(p.eta)},
                 {"basis", basis_to_json(p.basis)},
                 {"engine", engine_name(p.incidence.engine)},
                 {"gamma", vec_to_json(p.incidence.gamma)},
                 {"gamma0", p.incidence.gamma0},
                 {"h", p.incidence.h},
                 {"psi", vec_to_json(p.incidence.psi)},
                 {"train_index", vec_to_json(p.incidence.train_index)},
                 {"train_eb", vec_to_json(p.incidence.train_eb)},
                 {"fitted_p", vec_to_json(p.incidence.fitted_p)}};
  if (p.incidence.engine == EngineKind::sieve) {
    params["link_basis"] = basis_to_json(p.incidence.link_basis);
  }
  json st = {{"applied", fit.standardization.applied}};
  if (fit.standardization.applied) {
    st["x_mean"] = vec_to_json(fit.standardization.x_mean);
    st["x_sd"] = vec_to_json(fit.standardization.x_sd);
    st["z_mean"] = vec_to_json(fit.standardization.z_mean);
    st["z_sd"] = vec_to_json(fit.standardization.z_sd);
  }
  return {{"params", std::move(params)},
          {"loglik", fit.loglik},
          {"aic", fit.aic},
          {"bic", fit.bic},
          {"n_parameters", fit.n_parameters},
          {"n_iter", fit.n_iter},
          {"converged", fit.converged},
          {"loglik_trace", fit.loglik_trace},
          {"warnings", fit.warnings},
          {"standardization", std::move(st)},
          {"n_obs", fit.n_obs}};
}

FitResult fit_result_from_json(const json& j) {
  FitResult fit;
  const auto& jp = j.at("params");
  fit.params.tr = Transformation(jp.at("r").get<double>());
  fit.params.beta = vec_from_json(jp.at("beta"));
  fit.params.eta = vec_from_json(jp.at("eta"));
  fit.params.basis = basis_from_json(jp.at("basis"));
  auto& inc = fit.params.incidence;
  inc.engine = engine_from_name(jp.at("engine").get<std::string>());
  inc.gamma = vec_from_json(jp.at("gamma"));
  inc.gamma0 = jp.at("gamma0").get<double>();
  inc.h = jp.at("h").get<double>();
  inc.psi = vec_from_json(jp.at("psi"));
  inc.train_index = vec_from_json(jp.at("train_index"));
  inc.train_eb = vec_from_json(jp.at("train_eb"));
  inc.fitted_p = vec_from_json(jp.at("fitted_p"));
  if (jp.contains("link_basis")) inc.link_basis = basis_from_json(jp.at("link_basis"));
  fit.loglik = j.at("loglik").get<double>();
  fit.aic = j.at("aic").get<double>();
  fit.bic = j.at("bic").get<double>();
  fit.n_parameters = j.at("n_parameters").get<int>();
  fit.n_iter = j.at("n_iter").get<int>();
  fit.converged = j.at("converged").get<bool>();
  fit.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
  fit.warnings = j.at("warnings").get<std::vector<std::string>>();
  const auto& st = j.at("standardization");
  fit.standardization.applied = st.at("applied").get<bool>();
  if (fit.standardization.applied) {
    fit.standardization.x_mean = vec_from_json(st.at("x_mean"));
    fit.standardization.x_sd = vec_from_json(st.at("x_sd"));
    fit.standardization.z_mean = vec_from_json(st.at("z_mean"));
    fit.standardization.z_sd = vec_from_json(st.at("z_sd"));
  }
  fit.n_obs = j.at("n_obs").get<std::size_t>();
  return fit;
}

json bootstrap_to_json(const BootstrapResult& boot, const FitResult& fit) {
  json band = json::array();
  for (const auto& row : boot.lambda_band) {
    band.push_back({{"t", row[0]}, {"lo", row[1]}, {"hi", row[2]}});
  }
  json gamma_est = vec_to_json(fit.params.incidence.gamma);
  if (fit.params.incidence.engine == EngineKind::logistic) {
    json with_intercept = json::array();
    with_intercept.push_back(fit.params.incidence.gamma0);
    for (double g : fit.params.incidence.gamma) with_intercept.push_back(g);
    gamma_est = std::move(with_intercept);
  }
  std::vector<int> status;
  status.reserve(boot.replicate_status.size());
  for (bool ok : boot.replicate_status) status.push_back(ok ? 1 : 0);
  return {{"b", boot.b},
          {"n_converged", boot.n_converged},
          {"reliable", boot.reliable},
          {"beta_est", vec_to_json(fit.params.beta)},
          {"beta_se", vec_to_json(boot.beta_se)},
          {"gamma_est", std::move(gamma_est)},
          {"gamma_se", vec_to_json(boot.gamma_se)},
          {"beta_ci_normal", intervals_to_json(boot.beta_ci_normal)},
          {"beta_ci_percentile", intervals_to_json(boot.beta_ci_percentile)},
          {"gamma_ci_normal", intervals_to_json(boot.gamma_ci_normal)},
          {"gamma_ci_percentile", intervals_to_json(boot.gamma_ci_percentile)},
          {"lambda_band", std::move(band)},
          {"replicate_status", std::move(status)}};
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  json j;
  in >> j;
  return j;
}

}  // namespace icmc
