#ifndef OVBSENS_INGEST_HPP
#define OVBSENS_INGEST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ovbsens/covkernel.hpp"

namespace ovbsens {

struct DatasetSpec {
  std::string path;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> calibration;
  std::vector<std::string> controls;
  // the intercept is always absorbed: covariances are computed around means
  static constexpr bool add_intercept = true;
};

struct SampleSummary {
  std::int64_t n_rows_read = 0;
  std::int64_t n_rows_used = 0;  // after listwise deletion
  Eigen::VectorXd means;
  Eigen::MatrixXd sigma_hat;  // denominator n-1
};

struct LoadResult {
  CovarianceModel model;
  SampleSummary summary;
};

// CSV dialect: comma separator, '.' decimal, optional double quoting, UTF-8,
// empty field = missing. Rows with a missing value in any selected column are
// dropped.
LoadResult load_dataset(const DatasetSpec& spec);

// Square covariance CSV: first row header labels, then numeric rows.
// Symmetric within 1e-8 (then symmetrized exactly).
CovarianceModel load_covariance(const std::string& path,
                                const std::map<std::string, Role>& roles);

void write_covariance(const CovarianceModel& model, const std::string& path);

// Draws from N(0, sigma) via the Cholesky factor and the library generator;
// used to build synthetic datasets for cross-checks.
Eigen::MatrixXd sample_gaussian(const CovarianceModel& model, std::int64_t n,
                                std::uint64_t seed);

void write_dataset_csv(const std::vector<std::string>& columns,
                       const Eigen::MatrixXd& rows, const std::string& path);

}  // namespace ovbsens

#endif  // OVBSENS_INGEST_HPP
