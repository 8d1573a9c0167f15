#ifndef OVBSENS_NELDER_MEAD_HPP
#define OVBSENS_NELDER_MEAD_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ovbsens {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Derivative-free simplex descent. The caller handles constraints via
// penalties; this routine only needs f to be finite-valued.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& start, double initial_step, int max_iter,
    double xtol, double ftol) {
  const int n = int(start.size());
  const double alpha = 1.0;                 // reflection
  const double gamma = 2.0;                 // expansion
  const double rho = 0.5;                   // contraction
  const double sigma = 0.5;                 // shrink

  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : 1e300;
  };

  std::vector<Eigen::VectorXd> xs(std::size_t(n) + 1, start);
  std::vector<double> fs(std::size_t(n) + 1);
  for (int i = 0; i < n; ++i) {
    double step = initial_step;
    if (step == 0.0) step = 0.1;
    xs[std::size_t(i) + 1](i) += step;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = eval(xs[i]);

  std::vector<std::size_t> order(xs.size());
  auto sort_simplex = [&]() {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> xs2(xs.size());
    std::vector<double> fs2(fs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      xs2[i] = xs[order[i]];
      fs2[i] = fs[order[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };

  bool converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    sort_simplex();

    double xspread = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      xspread = std::max(xspread, (xs[i] - xs[0]).cwiseAbs().maxCoeff());
    const double fspread = fs.back() - fs.front();
    if (xspread < xtol * (1.0 + xs[0].cwiseAbs().maxCoeff()) &&
        fspread < ftol * (1.0 + std::abs(fs[0]))) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) centroid += xs[i];
    centroid /= double(n);

    const Eigen::VectorXd xr = centroid + alpha * (centroid - xs.back());
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr < fs[fs.size() - 2]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      const bool outside = fr < fs.back();
      const Eigen::VectorXd base = outside ? xr : xs.back();
      const Eigen::VectorXd xc = centroid + rho * (base - centroid);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs.back())) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (std::size_t i = 1; i < xs.size(); ++i) {
          xs[i] = xs[0] + sigma * (xs[i] - xs[0]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }
  sort_simplex();
  return NelderMeadResult{xs[0], fs[0], evals, converged};
}

}  // namespace ovbsens

#endif  // OVBSENS_NELDER_MEAD_HPP
