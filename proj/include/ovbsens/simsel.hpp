#ifndef OVBSENS_SIMSEL_HPP
#define OVBSENS_SIMSEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ovbsens/covkernel.hpp"

namespace ovbsens {

enum class DgpKind { ma1, ar1, exchangeable, factor, custom, delta_nonconv };

std::string dgp_kind_name(DgpKind k);

// Population over K potentially observable covariates: treatment-equation
// coefficients pi, outcome-equation coefficients gamma, and Var(W).
struct SelectionDgp {
  int K = 0;
  Eigen::VectorXd pi;
  Eigen::VectorXd gamma;
  Eigen::MatrixXd var_w;
  DgpKind kind = DgpKind::custom;
  double rho = 0.0;        // structured kinds only
  double coef_scale = 1.0; // the C in the coefficient bounds

  bool exchangeable_structure() const {
    return kind == DgpKind::exchangeable || kind == DgpKind::delta_nonconv;
  }
};

struct DgpCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct DgpValidity {
  bool ok = true;
  std::vector<DgpCheck> checks;
};

// Which covariates are observed. bits[k] == 1 means W_k is in W1.
struct Design {
  std::vector<std::uint8_t> bits;
  int d1 = 0;

  int K() const { return int(bits.size()); }
  Design complement() const;
  std::vector<int> observed() const;
  std::vector<int> unobserved() const;
};

// Value of a selection ratio at one design; degenerate evaluations carry a
// skip flag instead of a NaN.
struct RatioValue {
  double value = 0.0;
  bool degenerate = false;
};

struct SamplingSummary {
  std::int64_t n = 0;  // designs with a usable value
  std::int64_t n_degenerate = 0;
  std::string mode;  // "exact" or "monte-carlo"
  double prob_le_1 = 0.0;
  double min = 0.0, p25 = 0.0, median = 0.0, p75 = 0.0, max = 0.0;
  double mean = 0.0, sd = 0.0;
  std::int64_t n_lt_1 = 0, n_gt_1 = 0;
};

RatioValue r_x_of_s(const SelectionDgp& dgp, const Design& s);
RatioValue delta_orig_of_s(const SelectionDgp& dgp, const Design& s);
RatioValue delta_resid_of_s(const SelectionDgp& dgp, const Design& s);

std::uint64_t n_choose_k(int K, int d1);

inline constexpr std::uint64_t kEnumerationCap = 5'000'000;

// Visits all d1-subsets of {0..K-1} with lexicographic rank in [begin, end).
// Throws CapExceeded when the total count is above the cap.
void enumerate_designs(int K, int d1,
                       const std::function<void(const Design&)>& visit,
                       std::uint64_t cap = kEnumerationCap);
void enumerate_design_range(int K, int d1, std::uint64_t begin,
                            std::uint64_t end,
                            const std::function<void(const Design&)>& visit);

// i.i.d. uniform d1-subsets; draw i depends only on (seed, i).
Design sample_design(int K, int d1, std::uint64_t seed, std::uint64_t index);
std::vector<Design> sample_designs(int K, int d1, std::int64_t n,
                                   std::uint64_t seed);

// Percentiles by linear interpolation on sorted values (type 7); ties at 1
// count as <= 1. Throws AllDegenerate when no usable value remains.
SamplingSummary summarize(std::vector<double> values,
                          std::int64_t n_degenerate, const std::string& mode);

struct DgpParams {
  double rho = 0.0;
  double coef_scale = 1.0;  // C in the coefficient bounds
  int n_factors = 1;
  double sigma_e2 = 1.0;
  double loading_scale = 1.0;
};

SelectionDgp make_dgp(DgpKind kind, const DgpParams& params, int K,
                      std::uint64_t seed);

// Exchangeable construction whose delta_resid limit under equal selection is
// the chosen constant C while r_X's limit stays 1.
SelectionDgp make_dgp_delta_nonconv(double C, double r, double rho, int K);

// Population dgp taken from the covariance of (Y, X, W): pi and gamma are the
// projection coefficients of the treatment and outcome equations.
SelectionDgp make_dgp_from_covariance(const CovarianceModel& model,
                                      const std::string& y_label,
                                      const std::string& x_label,
                                      const std::vector<std::string>& w_labels);

DgpValidity validate_dgp(const SelectionDgp& dgp);

double rx_limit(double r, double c);

// Convenience: evaluate one ratio over exact enumeration or sampling.
struct DistributionResult {
  SamplingSummary summary;
  std::vector<double> values;  // usable values, unsorted
};

enum class RatioKind { r_x, delta_orig, delta_resid };

DistributionResult covariate_sampling_distribution(
    const SelectionDgp& dgp, int d1, RatioKind ratio, std::int64_t mc_draws,
    std::uint64_t seed, int threads = 1, std::uint64_t cap = kEnumerationCap);

}  // namespace ovbsens

#endif  // OVBSENS_SIMSEL_HPP
