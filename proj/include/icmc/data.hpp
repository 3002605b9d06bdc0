#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace icmc {

// thrown on malformed input files or invalid datasets; CLI maps it to exit 2
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Censoring { left, interval, right };

inline double infinity() { return std::numeric_limits<double>::infinity(); }

// One subject: censoring interval (left, right], indicator triple and the two
// covariate blocks. Indicators are a pure function of (left, right); they are
// stored so that validate() can detect corrupted records.
struct IntervalObservation {
  double left = 0.0;
  double right = infinity();
  bool delta_l = false;  // left-censored: left == 0, right finite
  bool delta_i = false;  // strictly interval-censored: 0 < left < right < inf
  bool delta_r = false;  // right-censored: right == +inf
  Eigen::VectorXd x;     // incidence covariates
  Eigen::VectorXd z;     // latency covariates

  Censoring censoring() const {
    if (delta_r) return Censoring::right;
    return delta_l ? Censoring::left : Censoring::interval;
  }
};

// derive the indicator triple from the endpoints
void derive_indicators(IntervalObservation& obs);

IntervalObservation make_observation(double left, double right, Eigen::VectorXd x,
                                     Eigen::VectorXd z);

struct ValidationIssue {
  std::size_t index;  // observation index, size() for dataset-level issues
  std::string rule;
};

// Immutable after construction; safe to share across threads read-only.
struct CureDataset {
  std::vector<IntervalObservation> observations;
  Eigen::Index d1 = 0;
  Eigen::Index d2 = 0;
  std::vector<double> finite_endpoints;  // sorted {left > 0} and {right < inf}

  // cached covariate blocks (n x d1, n x d2)
  Eigen::MatrixXd x_mat;
  Eigen::MatrixXd z_mat;

  std::size_t size() const { return observations.size(); }

  static CureDataset from_observations(std::vector<IntervalObservation> obs);
};

// Full scan of the type invariants; returns every violation, not just the
// first. Empty result means the dataset is valid.
std::vector<ValidationIssue> validate(const CureDataset& ds);

// throws DataError listing all violations
void require_valid(const CureDataset& ds);

CureDataset subset(const CureDataset& ds, const std::vector<std::size_t>& indices);

// in-place z-scoring; returns per-column (mean, sd) for X then Z
struct Standardization {
  Eigen::VectorXd x_mean, x_sd, z_mean, z_sd;
  bool applied = false;
};
Standardization standardize(CureDataset& ds);

struct ColumnSpec {
  Eigen::Index d1 = 0;
  Eigen::Index d2 = 0;
};

// Header must read left,right,x1..x{d1},z1..z{d2}. Right censoring is an empty
// cell or case-insensitive "inf". Indicators are always re-derived from the
// endpoints, never read from the file.
CureDataset load_csv(const std::string& path, const ColumnSpec& schema);

// infers (d1, d2) from the header row
CureDataset load_csv(const std::string& path);

void save_csv(const CureDataset& ds, const std::string& path);

}  // namespace icmc
