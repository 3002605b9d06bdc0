#include "icmc/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "icmc/numeric.hpp"

namespace icmc {

void derive_indicators(IntervalObservation& obs) {
  obs.delta_l = obs.delta_i = obs.delta_r = false;
  if (std::isinf(obs.right)) {
    obs.delta_r = true;
  } else if (obs.left == 0.0) {
    obs.delta_l = true;
  } else {
    obs.delta_i = true;
  }
}

IntervalObservation make_observation(double left, double right, Eigen::VectorXd x,
                                     Eigen::VectorXd z) {
  IntervalObservation obs;
  obs.left = left;
  obs.right = right;
  obs.x = std::move(x);
  obs.z = std::move(z);
  derive_indicators(obs);
  return obs;
}

CureDataset CureDataset::from_observations(std::vector<IntervalObservation> obs) {
  CureDataset ds;
  ds.observations = std::move(obs);
  const auto n = static_cast<Eigen::Index>(ds.observations.size());
  if (n > 0) {
    ds.d1 = ds.observations.front().x.size();
    ds.d2 = ds.observations.front().z.size();
  }
  ds.x_mat.resize(n, ds.d1);
  ds.z_mat.resize(n, ds.d2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = ds.observations[static_cast<std::size_t>(i)];
    if (o.x.size() == ds.d1) ds.x_mat.row(i) = o.x.transpose();
    if (o.z.size() == ds.d2) ds.z_mat.row(i) = o.z.transpose();
    if (o.left > 0.0) ds.finite_endpoints.push_back(o.left);
    if (std::isfinite(o.right)) ds.finite_endpoints.push_back(o.right);
  }
  std::sort(ds.finite_endpoints.begin(), ds.finite_endpoints.end());
  return ds;
}

std::vector<ValidationIssue> validate(const CureDataset& ds) {
  std::vector<ValidationIssue> issues;
  if (ds.observations.empty()) {
    issues.push_back({0, "no observations"});
    return issues;
  }
  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const auto& o = ds.observations[i];
    const int bits = int(o.delta_l) + int(o.delta_i) + int(o.delta_r);
    if (bits != 1) issues.push_back({i, "indicator triple not one-hot"});
    if (!(o.left >= 0.0) || std::isnan(o.left)) issues.push_back({i, "left endpoint negative"});
    if (std::isnan(o.right)) issues.push_back({i, "right endpoint not a number"});
    if (std::isfinite(o.right) && !(o.right > o.left)) {
      issues.push_back({i, "right <= left"});
    }
    if (o.delta_l && !(o.left == 0.0 && std::isfinite(o.right))) {
      issues.push_back({i, "delta_l inconsistent with endpoints"});
    }
    if (o.delta_r && !std::isinf(o.right)) {
      issues.push_back({i, "delta_r inconsistent with endpoints"});
    }
    if (o.delta_i && !(o.left > 0.0 && std::isfinite(o.right) && o.right > o.left)) {
      issues.push_back({i, "delta_i inconsistent with endpoints"});
    }
    if (o.x.size() != ds.d1) issues.push_back({i, "incidence covariate length mismatch"});
    if (o.z.size() != ds.d2) issues.push_back({i, "latency covariate length mismatch"});
    if (!o.x.allFinite()) issues.push_back({i, "non-finite incidence covariate"});
    if (!o.z.allFinite()) issues.push_back({i, "non-finite latency covariate"});
  }
  if (ds.finite_endpoints.empty()) {
    issues.push_back({ds.observations.size(), "no finite interval endpoints"});
  }
  return issues;
}

void require_valid(const CureDataset& ds) {
  const auto issues = validate(ds);
  if (issues.empty()) return;
  std::ostringstream msg;
  msg << "invalid dataset:";
  for (const auto& issue : issues) {
    msg << " [obs " << issue.index << ": " << issue.rule << "]";
  }
  throw DataError(msg.str());
}

CureDataset subset(const CureDataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<IntervalObservation> obs;
  obs.reserve(indices.size());
  for (std::size_t idx : indices) obs.push_back(ds.observations.at(idx));
  return CureDataset::from_observations(std::move(obs));
}

Standardization standardize(CureDataset& ds) {
  Standardization st;
  st.applied = true;
  const auto n = static_cast<double>(ds.size());
  auto scale_block = [n](Eigen::MatrixXd& m, Eigen::VectorXd& mean, Eigen::VectorXd& sd) {
    mean = m.colwise().mean();
    m.rowwise() -= mean.transpose();
    sd = (m.colwise().squaredNorm() / std::max(n - 1.0, 1.0)).cwiseSqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (!(sd[j] > 0.0)) sd[j] = 1.0;  // constant column left centered only
    }
    m.array().rowwise() /= sd.transpose().array();
  };
  scale_block(ds.x_mat, st.x_mean, st.x_sd);
  scale_block(ds.z_mat, st.z_mean, st.z_sd);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ds.observations[i].x = ds.x_mat.row(static_cast<Eigen::Index>(i)).transpose();
    ds.observations[i].z = ds.z_mat.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return st;
}

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& what) {
  const std::string t = trim(cell);
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw DataError("row " + std::to_string(row) + ": non-numeric " + what + " '" + cell + "'");
  }
}

}  // namespace

CureDataset load_csv(const std::string& path, const ColumnSpec& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  const auto header = split_fields(line);
  const std::size_t expected = 2 + static_cast<std::size_t>(schema.d1 + schema.d2);
  if (header.size() != expected || lower(header[0]) != "left" || lower(header[1]) != "right") {
    throw DataError("header must be left,right,x1..x" + std::to_string(schema.d1) + ",z1..z" +
                    std::to_string(schema.d2));
  }

  std::vector<IntervalObservation> obs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != expected) {
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(expected) +
                      " fields, found " + std::to_string(fields.size()));
    }
    const double left = parse_number(fields[0], row, "left endpoint");
    double right;
    const std::string right_cell = lower(trim(fields[1]));
    if (right_cell.empty() || right_cell == "inf" || right_cell == "+inf") {
      right = infinity();
    } else {
      right = parse_number(fields[1], row, "right endpoint");
    }
    if (left < 0.0) throw DataError("row " + std::to_string(row) + ": left endpoint negative");
    if (std::isfinite(right) && right <= left) {
      throw DataError("row " + std::to_string(row) + ": right <= left");
    }
    Eigen::VectorXd x(schema.d1), z(schema.d2);
    for (Eigen::Index j = 0; j < schema.d1; ++j) {
      x[j] = parse_number(fields[2 + static_cast<std::size_t>(j)], row, "covariate");
    }
    for (Eigen::Index j = 0; j < schema.d2; ++j) {
      z[j] = parse_number(fields[2 + static_cast<std::size_t>(schema.d1 + j)], row, "covariate");
    }
    obs.push_back(make_observation(left, right, std::move(x), std::move(z)));
  }
  auto ds = CureDataset::from_observations(std::move(obs));
  ds.d1 = schema.d1;
  ds.d2 = schema.d2;
  require_valid(ds);
  return ds;
}

CureDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  ColumnSpec spec;
  for (const auto& name : split_fields(line)) {
    const std::string n = lower(name);
    if (n.rfind('x', 0) == 0) ++spec.d1;
    if (n.rfind('z', 0) == 0) ++spec.d2;
  }
  return load_csv(path, spec);
}

void save_csv(const CureDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << "left,right";
  for (Eigen::Index j = 1; j <= ds.d1; ++j) out << ",x" << j;
  for (Eigen::Index j = 1; j <= ds.d2; ++j) out << ",z" << j;
  out << "\n";
  for (const auto& o : ds.observations) {
    out << format_double(o.left) << ",";
    out << (std::isinf(o.right) ? "inf" : format_double(o.right));
    for (Eigen::Index j = 0; j < ds.d1; ++j) out << "," << format_double(o.x[j]);
    for (Eigen::Index j = 0; j < ds.d2; ++j) out << "," << format_double(o.z[j]);
    out << "\n";
  }
}

}  // namespace icmc
