#include "ovbsens/simsel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "ovbsens/rng.hpp"

namespace ovbsens {

namespace {

constexpr double kDegenerateVar = 1e-14;
constexpr double kInf = std::numeric_limits<double>::infinity();

double quad_form(const Eigen::MatrixXd& v, const Eigen::VectorXd& coef,
                 const std::vector<int>& idx) {
  double s = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const double ca = coef(idx[a]);
    for (std::size_t b = 0; b < idx.size(); ++b)
      s += ca * v(idx[a], idx[b]) * coef(idx[b]);
  }
  return s;
}

struct ExchangeableSums {
  double sum_pi_obs = 0.0, sum_pi_un = 0.0;
  double sum_g_obs = 0.0, sum_g_un = 0.0;
  double sum_pi2_obs = 0.0, sum_pi2_un = 0.0;
  double sum_g2_obs = 0.0, sum_g2_un = 0.0;
  double sum_gpi_obs = 0.0, sum_gpi_un = 0.0;
};

ExchangeableSums exch_sums(const SelectionDgp& dgp, const Design& s) {
  ExchangeableSums e;
  for (int k = 0; k < dgp.K; ++k) {
    const double p = dgp.pi(k);
    const double g = dgp.gamma(k);
    if (s.bits[std::size_t(k)]) {
      e.sum_pi_obs += p;
      e.sum_g_obs += g;
      e.sum_pi2_obs += p * p;
      e.sum_g2_obs += g * g;
      e.sum_gpi_obs += g * p;
    } else {
      e.sum_pi_un += p;
      e.sum_g_un += g;
      e.sum_pi2_un += p * p;
      e.sum_g2_un += g * g;
      e.sum_gpi_un += g * p;
    }
  }
  return e;
}

}  // namespace

std::string dgp_kind_name(DgpKind k) {
  switch (k) {
    case DgpKind::ma1: return "ma1";
    case DgpKind::ar1: return "ar1";
    case DgpKind::exchangeable: return "exchangeable";
    case DgpKind::factor: return "factor";
    case DgpKind::custom: return "custom";
    case DgpKind::delta_nonconv: return "delta-nonconv";
  }
  return "?";
}

Design Design::complement() const {
  Design out;
  out.bits.resize(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out.bits[i] = bits[i] ? 0 : 1;
  out.d1 = K() - d1;
  return out;
}

std::vector<int> Design::observed() const {
  std::vector<int> idx;
  idx.reserve(std::size_t(d1));
  for (int i = 0; i < K(); ++i)
    if (bits[std::size_t(i)]) idx.push_back(i);
  return idx;
}

std::vector<int> Design::unobserved() const {
  std::vector<int> idx;
  idx.reserve(std::size_t(K() - d1));
  for (int i = 0; i < K(); ++i)
    if (!bits[std::size_t(i)]) idx.push_back(i);
  return idx;
}

RatioValue r_x_of_s(const SelectionDgp& dgp, const Design& s) {
  if (s.d1 < 1 || s.d1 > dgp.K - 1)
    throw DomainError("r_x_of_s needs 1 <= d1 <= K-1");
  double num, den;
  if (dgp.exchangeable_structure()) {
    const auto e = exch_sums(dgp, s);
    const double rho = dgp.rho;
    num = rho * e.sum_pi_un * e.sum_pi_un + (1.0 - rho) * e.sum_pi2_un;
    den = rho * e.sum_pi_obs * e.sum_pi_obs + (1.0 - rho) * e.sum_pi2_obs;
  } else {
    num = quad_form(dgp.var_w, dgp.pi, s.unobserved());
    den = quad_form(dgp.var_w, dgp.pi, s.observed());
  }
  if (den < kDegenerateVar) {
    if (num < kDegenerateVar) return RatioValue{0.0, true};  // 0/0 skip
    return RatioValue{kInf, false};
  }
  return RatioValue{std::sqrt(std::max(num, 0.0) / den), false};
}

RatioValue delta_orig_of_s(const SelectionDgp& dgp, const Design& s) {
  if (s.d1 < 1 || s.d1 > dgp.K - 1)
    throw DomainError("delta_orig_of_s needs 1 <= d1 <= K-1");
  double cov_x_g2, var_g2, cov_x_g1, var_g1;
  if (dgp.exchangeable_structure()) {
    const auto e = exch_sums(dgp, s);
    const double rho = dgp.rho;
    const double sum_pi = e.sum_pi_obs + e.sum_pi_un;
    cov_x_g2 = rho * sum_pi * e.sum_g_un + (1.0 - rho) * e.sum_gpi_un;
    var_g2 = rho * e.sum_g_un * e.sum_g_un + (1.0 - rho) * e.sum_g2_un;
    cov_x_g1 = rho * sum_pi * e.sum_g_obs + (1.0 - rho) * e.sum_gpi_obs;
    var_g1 = rho * e.sum_g_obs * e.sum_g_obs + (1.0 - rho) * e.sum_g2_obs;
  } else {
    const auto obs = s.observed();
    const auto un = s.unobserved();
    const Eigen::VectorXd vpi = dgp.var_w * dgp.pi;  // Cov(W, X) components
    cov_x_g2 = 0.0;
    for (int k : un) cov_x_g2 += vpi(k) * dgp.gamma(k);
    cov_x_g1 = 0.0;
    for (int k : obs) cov_x_g1 += vpi(k) * dgp.gamma(k);
    var_g2 = quad_form(dgp.var_w, dgp.gamma, un);
    var_g1 = quad_form(dgp.var_w, dgp.gamma, obs);
  }
  if (var_g2 < kDegenerateVar || var_g1 < kDegenerateVar)
    return RatioValue{0.0, true};
  const double den = cov_x_g1 / var_g1;
  if (std::abs(den) < kDegenerateVar) return RatioValue{0.0, true};
  return RatioValue{(cov_x_g2 / var_g2) / den, false};
}

RatioValue delta_resid_of_s(const SelectionDgp& dgp, const Design& s) {
  if (s.d1 < 1 || s.d1 > dgp.K - 1)
    throw DomainError("delta_resid_of_s needs 1 <= d1 <= K-1");

  // four components of the residualized ratio:
  //   numA = Cov(X, gamma2' W2^{perp W1})    numB = Var(gamma2' W2^{perp W1})
  //   denA = Cov(X, (gamma1+rho)' W1)        denB = Var((gamma1+rho)' W1)
  double numA, numB, gvg, gvp;
  if (dgp.exchangeable_structure()) {
    const auto e = exch_sums(dgp, s);
    const double rho = dgp.rho;
    const double alpha =
        rho * (1.0 - rho) / ((double(s.d1) - 1.0) * rho + 1.0);
    numA = alpha * e.sum_g_un * e.sum_pi_un + (1.0 - rho) * e.sum_gpi_un;
    numB = alpha * e.sum_g_un * e.sum_g_un + (1.0 - rho) * e.sum_g2_un;
    const double sum_pi = e.sum_pi_obs + e.sum_pi_un;
    const double sum_g = e.sum_g_obs + e.sum_g_un;
    gvp = rho * sum_g * sum_pi + (1.0 - rho) * (e.sum_gpi_obs + e.sum_gpi_un);
    gvg = rho * sum_g * sum_g + (1.0 - rho) * (e.sum_g2_obs + e.sum_g2_un);
  } else {
    const auto obs = s.observed();
    const auto un = s.unobserved();
    Eigen::MatrixXd v11(obs.size(), obs.size());
    Eigen::MatrixXd v12(obs.size(), un.size());
    Eigen::MatrixXd v22(un.size(), un.size());
    for (std::size_t a = 0; a < obs.size(); ++a) {
      for (std::size_t b = 0; b < obs.size(); ++b)
        v11(Eigen::Index(a), Eigen::Index(b)) = dgp.var_w(obs[a], obs[b]);
      for (std::size_t b = 0; b < un.size(); ++b)
        v12(Eigen::Index(a), Eigen::Index(b)) = dgp.var_w(obs[a], un[b]);
    }
    for (std::size_t a = 0; a < un.size(); ++a)
      for (std::size_t b = 0; b < un.size(); ++b)
        v22(Eigen::Index(a), Eigen::Index(b)) = dgp.var_w(un[a], un[b]);

    Eigen::LLT<Eigen::MatrixXd> llt(v11);
    if (llt.info() != Eigen::Success)
      return RatioValue{0.0, true};  // Var(W1(s)) not invertible
    const Eigen::MatrixXd m = v22 - v12.transpose() * llt.solve(v12);

    Eigen::VectorXd g2(un.size()), p2(un.size());
    for (std::size_t a = 0; a < un.size(); ++a) {
      g2(Eigen::Index(a)) = dgp.gamma(un[a]);
      p2(Eigen::Index(a)) = dgp.pi(un[a]);
    }
    numA = g2.dot(m * p2);
    numB = g2.dot(m * g2);
    gvp = dgp.gamma.dot(dgp.var_w * dgp.pi);
    gvg = dgp.gamma.dot(dgp.var_w * dgp.gamma);
  }
  const double denA = gvp - numA;
  const double denB = gvg - numB;
  if (numB < kDegenerateVar || denB < kDegenerateVar)
    return RatioValue{0.0, true};
  const double den = denA / denB;
  if (std::abs(den) < kDegenerateVar) return RatioValue{0.0, true};
  return RatioValue{(numA / numB) / den, false};
}

std::uint64_t n_choose_k(int K, int d1) {
  if (d1 < 0 || d1 > K) return 0;
  d1 = std::min(d1, K - d1);
  // 128-bit intermediate keeps the paper-scale counts exact
  unsigned __int128 r = 1;
  for (int i = 1; i <= d1; ++i) {
    r = r * (unsigned __int128)(K - d1 + i) / (unsigned __int128)i;
    if (r > (unsigned __int128)1 << 63) return ~std::uint64_t(0);
  }
  return std::uint64_t(r);
}

namespace {

Design design_from_indices(int K, const std::vector<int>& idx) {
  Design d;
  d.bits.assign(std::size_t(K), 0);
  for (int i : idx) d.bits[std::size_t(i)] = 1;
  d.d1 = int(idx.size());
  return d;
}

// lexicographically smallest combination with the given rank
std::vector<int> unrank_combination(int K, int d1, std::uint64_t rank) {
  std::vector<int> idx(static_cast<std::size_t>(d1));
  int start = 0;
  for (int pos = 0; pos < d1; ++pos) {
    for (int v = start;; ++v) {
      const std::uint64_t block = n_choose_k(K - v - 1, d1 - pos - 1);
      if (rank < block) {
        idx[std::size_t(pos)] = v;
        start = v + 1;
        break;
      }
      rank -= block;
    }
  }
  return idx;
}

bool next_combination(std::vector<int>& idx, int K) {
  const int d = int(idx.size());
  for (int i = d - 1; i >= 0; --i) {
    if (idx[std::size_t(i)] < K - d + i) {
      ++idx[std::size_t(i)];
      for (int j = i + 1; j < d; ++j)
        idx[std::size_t(j)] = idx[std::size_t(j - 1)] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

void enumerate_design_range(int K, int d1, std::uint64_t begin,
                            std::uint64_t end,
                            const std::function<void(const Design&)>& visit) {
  if (begin >= end) return;
  std::vector<int> idx = unrank_combination(K, d1, begin);
  Design d = design_from_indices(K, idx);
  for (std::uint64_t r = begin; r < end; ++r) {
    std::fill(d.bits.begin(), d.bits.end(), 0);
    for (int i : idx) d.bits[std::size_t(i)] = 1;
    visit(d);
    if (r + 1 < end && !next_combination(idx, K)) break;
  }
}

void enumerate_designs(int K, int d1,
                       const std::function<void(const Design&)>& visit,
                       std::uint64_t cap) {
  if (d1 < 0 || d1 > K) throw DomainError("enumerate_designs needs 0<=d1<=K");
  const std::uint64_t total = n_choose_k(K, d1);
  if (total > cap) {
    std::ostringstream os;
    os << "C(" << K << "," << d1 << ") = " << total
       << " exceeds the enumeration cap " << cap << "; use sampling";
    throw CapExceeded(os.str());
  }
  enumerate_design_range(K, d1, 0, total, visit);
}

Design sample_design(int K, int d1, std::uint64_t seed, std::uint64_t index) {
  Rng rng(seed, index);
  std::vector<int> idx(static_cast<std::size_t>(K));
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < d1; ++j) {
    const std::uint64_t pick =
        std::uint64_t(j) + rng.below(std::uint64_t(K - j));
    std::swap(idx[std::size_t(j)], idx[pick]);
  }
  idx.resize(std::size_t(d1));
  return design_from_indices(K, idx);
}

std::vector<Design> sample_designs(int K, int d1, std::int64_t n,
                                   std::uint64_t seed) {
  if (n < 1) throw DomainError("sample_designs needs n >= 1");
  std::vector<Design> out;
  out.reserve(std::size_t(n));
  for (std::int64_t i = 0; i < n; ++i)
    out.push_back(sample_design(K, d1, seed, std::uint64_t(i)));
  return out;
}

SamplingSummary summarize(std::vector<double> values,
                          std::int64_t n_degenerate, const std::string& mode) {
  if (values.empty())
    throw AllDegenerate("no non-degenerate values to summarize");
  std::sort(values.begin(), values.end());
  const std::int64_t n = std::int64_t(values.size());

  const auto quantile = [&](double p) {
    const double h = p * double(n - 1);
    const std::int64_t lo = std::int64_t(std::floor(h));
    const std::int64_t hi = std::min(lo + 1, n - 1);
    const double frac = h - double(lo);
    return values[std::size_t(lo)] +
           frac * (values[std::size_t(hi)] - values[std::size_t(lo)]);
  };

  SamplingSummary s;
  s.n = n;
  s.n_degenerate = n_degenerate;
  s.mode = mode;
  s.min = values.front();
  s.max = values.back();
  s.p25 = quantile(0.25);
  s.median = quantile(0.5);
  s.p75 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / double(n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
  std::int64_t le = 0, lt = 0, gt = 0;
  for (double v : values) {
    if (v <= 1.0) ++le;
    if (v < 1.0) ++lt;
    if (v > 1.0) ++gt;
  }
  s.prob_le_1 = double(le) / double(n);
  s.n_lt_1 = lt;
  s.n_gt_1 = gt;
  return s;
}

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw AssumptionViolated(what);
}

Eigen::VectorXd positive_coefficients(int K, double scale, Rng& rng) {
  // positive draws keep the index sum bounded away from zero
  Eigen::VectorXd v(K);
  for (int i = 0; i < K; ++i) v(i) = scale * rng.uniform(0.5, 1.5);
  return v;
}

}  // namespace

SelectionDgp make_dgp(DgpKind kind, const DgpParams& params, int K,
                      std::uint64_t seed) {
  require(K >= 2, "dgp needs K >= 2");
  SelectionDgp dgp;
  dgp.K = K;
  dgp.kind = kind;
  dgp.rho = params.rho;
  dgp.coef_scale = params.coef_scale;
  Rng rng(seed, 0);

  switch (kind) {
    case DgpKind::ma1: {
      require(std::abs(params.rho) < 0.5,
              "C1.1 (MA variance matrix) requires |rho| < 1/2");
      dgp.var_w = Eigen::MatrixXd::Identity(K, K);
      for (int i = 0; i + 1 < K; ++i) {
        dgp.var_w(i, i + 1) = params.rho;
        dgp.var_w(i + 1, i) = params.rho;
      }
      const double scale = params.coef_scale / std::sqrt(double(K));
      dgp.pi = positive_coefficients(K, scale, rng);
      dgp.gamma = positive_coefficients(K, scale, rng);
      break;
    }
    case DgpKind::ar1: {
      require(params.rho > -1.0 && params.rho < 1.0,
              "C2.1 (AR variance matrix) requires rho in (-1, 1)");
      dgp.var_w = Eigen::MatrixXd(K, K);
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
          dgp.var_w(i, j) =
              (i == j) ? 1.0 : std::pow(params.rho, std::abs(i - j));
      const double scale = params.coef_scale / std::sqrt(double(K));
      dgp.pi = positive_coefficients(K, scale, rng);
      dgp.gamma = positive_coefficients(K, scale, rng);
      break;
    }
    case DgpKind::exchangeable: {
      require(params.rho > 0.0 && params.rho < 1.0,
              "C3.1 (exchangeable variance matrix) requires rho in (0, 1)");
      dgp.var_w = params.rho * Eigen::MatrixXd::Ones(K, K) +
                  (1.0 - params.rho) * Eigen::MatrixXd::Identity(K, K);
      const double scale = params.coef_scale / double(K);
      dgp.pi = positive_coefficients(K, scale, rng);
      dgp.gamma = positive_coefficients(K, scale, rng);
      break;
    }
    case DgpKind::factor: {
      require(params.sigma_e2 > 0.0,
              "factor structure requires sigma_E^2 > 0");
      require(params.n_factors >= 1, "factor structure requires R >= 1");
      Eigen::MatrixXd lambda(K, params.n_factors);
      for (int i = 0; i < K; ++i)
        for (int r = 0; r < params.n_factors; ++r)
          lambda(i, r) = params.loading_scale * rng.uniform(0.5, 1.5);
      dgp.var_w = lambda * lambda.transpose() +
                  params.sigma_e2 * Eigen::MatrixXd::Identity(K, K);
      const double scale = params.coef_scale / double(K);
      dgp.pi = positive_coefficients(K, scale, rng);
      dgp.gamma = positive_coefficients(K, scale, rng);
      break;
    }
    case DgpKind::custom:
    case DgpKind::delta_nonconv:
      throw DomainError("use the dedicated constructor for this dgp kind");
  }

  const DgpValidity v = validate_dgp(dgp);
  if (!v.ok) {
    for (const auto& c : v.checks)
      if (!c.pass) throw AssumptionViolated(c.name + ": " + c.detail);
  }
  return dgp;
}

SelectionDgp make_dgp_delta_nonconv(double C, double r, double rho, int K) {
  require(rho > 0.0 && rho < 1.0, "delta-nonconv requires rho in (0, 1)");
  require(r > 0.0, "delta-nonconv requires r > 0");
  require(K >= 2, "delta-nonconv requires K >= 2");
  SelectionDgp dgp;
  dgp.K = K;
  dgp.kind = DgpKind::delta_nonconv;
  dgp.rho = rho;
  dgp.var_w = rho * Eigen::MatrixXd::Ones(K, K) +
              (1.0 - rho) * Eigen::MatrixXd::Identity(K, K);
  const double cprime = (C * (r + 2.0) - r) / 2.0;
  dgp.coef_scale =
      2.0 * std::max({1.0, std::abs(cprime), std::abs(1.0 - cprime)});
  dgp.pi = Eigen::VectorXd(K);
  dgp.gamma = Eigen::VectorXd(K);
  for (int i0 = 0; i0 < K; ++i0) {
    const int i = i0 + 1;  // the construction indexes covariates from 1
    const bool even = (i % 2 == 0);
    dgp.gamma(i0) = even ? 2.0 / double(K) : 0.0;
    dgp.pi(i0) = even ? 2.0 * cprime / double(K)
                      : 2.0 * (1.0 - cprime) / double(K);
  }
  return dgp;
}

SelectionDgp make_dgp_from_covariance(
    const CovarianceModel& model, const std::string& y_label,
    const std::string& x_label, const std::vector<std::string>& w_labels) {
  const int K = int(w_labels.size());
  require(K >= 2, "empirical dgp needs at least two covariates");
  const Eigen::Index iy = model.index_of(y_label);
  const Eigen::Index ix = model.index_of(x_label);
  SelectionDgp dgp;
  dgp.K = K;
  dgp.kind = DgpKind::custom;
  dgp.var_w = Eigen::MatrixXd(K, K);
  Eigen::VectorXd cov_wx(K), cov_wy(K);
  for (int a = 0; a < K; ++a) {
    const Eigen::Index i = model.index_of(w_labels[std::size_t(a)]);
    cov_wx(a) = model.sigma()(i, ix);
    cov_wy(a) = model.sigma()(i, iy);
    for (int b = 0; b < K; ++b)
      dgp.var_w(a, b) =
          model.sigma()(i, model.index_of(w_labels[std::size_t(b)]));
  }
  // treatment equation: X on (1, W)
  Eigen::LLT<Eigen::MatrixXd> llt(dgp.var_w);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("Var(W) not positive definite");
  dgp.pi = llt.solve(cov_wx);
  // outcome equation: Y on (1, X, W); gamma is the W block
  Eigen::MatrixXd a(K + 1, K + 1);
  a(0, 0) = model.sigma()(ix, ix);
  a.block(0, 1, 1, K) = cov_wx.transpose();
  a.block(1, 0, K, 1) = cov_wx;
  a.block(1, 1, K, K) = dgp.var_w;
  Eigen::VectorXd rhs(K + 1);
  rhs(0) = model.sigma()(ix, iy);
  rhs.segment(1, K) = cov_wy;
  const Eigen::VectorXd coef = a.llt().solve(rhs);
  dgp.gamma = coef.segment(1, K);
  return dgp;
}

DgpValidity validate_dgp(const SelectionDgp& dgp) {
  DgpValidity v;
  auto add = [&](const std::string& name, bool pass,
                 const std::string& detail) {
    v.checks.push_back(DgpCheck{name, pass, detail});
    v.ok = v.ok && pass;
  };
  std::ostringstream os;

  const double var_index = dgp.pi.dot(dgp.var_w * dgp.pi);
  os.str("");
  os << "Var(pi'W) = " << var_index;
  // documented D = 100: nondegenerate and finite index variance
  add("B3.1 nondegenerate index variance",
      var_index > 1e-2 && var_index < 1e2, os.str());

  const double max_pi = dgp.pi.cwiseAbs().maxCoeff();
  switch (dgp.kind) {
    case DgpKind::ma1: {
      add("C1.1 MA(1) band structure", std::abs(dgp.rho) < 0.5,
          "|rho| < 1/2");
      const double bound =
          dgp.coef_scale / std::sqrt(double(dgp.K)) * 1.5 + 1e-12;
      os.str("");
      os << "max |pi_i| = " << max_pi << " <= " << bound;
      add("C1.2 bounded coefficients (C/sqrt(K))", max_pi <= bound, os.str());
      double cross = 0.0, diag = 0.0;
      for (int i = 0; i + 1 < dgp.K; ++i) cross += dgp.pi(i) * dgp.pi(i + 1);
      diag = dgp.pi.squaredNorm();
      os.str("");
      os << "relative contribution = " << dgp.rho * cross / diag;
      add("C1.3 stable relative contribution", std::isfinite(cross / diag),
          os.str());
      add("C1.4 boundedness from below", var_index > 1e-6, "epsilon = 1e-6");
      break;
    }
    case DgpKind::ar1: {
      add("C2.1 AR(1) structure", dgp.rho > -1.0 && dgp.rho < 1.0,
          "rho in (-1, 1)");
      const double bound =
          dgp.coef_scale / std::sqrt(double(dgp.K)) * 1.5 + 1e-12;
      os.str("");
      os << "max |pi_i| = " << max_pi << " <= " << bound;
      add("C2.2 bounded coefficients (C/sqrt(K))", max_pi <= bound, os.str());
      add("C2.4 boundedness from below", var_index > 1e-6, "epsilon = 1e-6");
      break;
    }
    case DgpKind::exchangeable:
    case DgpKind::delta_nonconv: {
      add("C3.1 exchangeable structure", dgp.rho > 0.0 && dgp.rho < 1.0,
          "rho in (0, 1)");
      const double bound = dgp.coef_scale / double(dgp.K) * 1.5 + 1e-12;
      os.str("");
      os << "max |pi_i| = " << max_pi << " <= " << bound;
      add("C3.2 bounded coefficients (C/K)", max_pi <= bound, os.str());
      add("C3.3 boundedness from below", var_index > 1e-6, "epsilon = 1e-6");
      break;
    }
    case DgpKind::factor: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dgp.var_w,
                                                        Eigen::EigenvaluesOnly);
      add("F.1 finite factor structure (PD)", es.eigenvalues().minCoeff() > 0,
          "Var(W) positive definite");
      const double bound = dgp.coef_scale / double(dgp.K) * 1.5 + 1e-12;
      os.str("");
      os << "max |pi_i| = " << max_pi << " <= " << bound;
      add("F.2 bounded coefficients (C/K)", max_pi <= bound, os.str());
      add("F.3 boundedness from below", var_index > 1e-6, "epsilon = 1e-6");
      break;
    }
    case DgpKind::custom:
      add("custom dgp", true, "no structural checks");
      break;
  }
  return v;
}

double rx_limit(double r, double c) {
  if (!(r > 0.0)) throw DomainError("rx_limit requires r > 0");
  if (c < 0.0) throw DomainError("rx_limit requires c >= 0");
  return std::sqrt(r * (r + c) / (1.0 + r * c));
}

DistributionResult covariate_sampling_distribution(
    const SelectionDgp& dgp, int d1, RatioKind ratio, std::int64_t mc_draws,
    std::uint64_t seed, int threads, std::uint64_t cap) {
  const auto eval = [&](const Design& s) {
    switch (ratio) {
      case RatioKind::r_x: return r_x_of_s(dgp, s);
      case RatioKind::delta_orig: return delta_orig_of_s(dgp, s);
      case RatioKind::delta_resid: return delta_resid_of_s(dgp, s);
    }
    return RatioValue{0.0, true};
  };

  const std::uint64_t total = n_choose_k(dgp.K, d1);
  const bool exact = total <= cap;
  const std::uint64_t n_items =
      exact ? total : std::uint64_t(std::max<std::int64_t>(mc_draws, 1));

  const int nthreads =
      std::max(1, std::min<int>(threads, int(std::min<std::uint64_t>(
                                            n_items, 256))));
  std::vector<std::vector<double>> values(static_cast<std::size_t>(nthreads));
  std::vector<std::int64_t> degen(std::size_t(nthreads), 0);

  auto work = [&](int t) {
    const std::uint64_t begin = n_items * std::uint64_t(t) /
                                std::uint64_t(nthreads);
    const std::uint64_t end = n_items * std::uint64_t(t + 1) /
                              std::uint64_t(nthreads);
    auto& vals = values[std::size_t(t)];
    auto& deg = degen[std::size_t(t)];
    const auto record = [&](const Design& s) {
      const RatioValue rv = eval(s);
      if (rv.degenerate)
        ++deg;
      else
        vals.push_back(rv.value);
    };
    if (exact) {
      enumerate_design_range(dgp.K, d1, begin, end, record);
    } else {
      for (std::uint64_t i = begin; i < end; ++i)
        record(sample_design(dgp.K, d1, seed, i));
    }
  };

  if (nthreads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  DistributionResult out;
  std::int64_t total_degen = 0;
  for (int t = 0; t < nthreads; ++t) {
    out.values.insert(out.values.end(), values[std::size_t(t)].begin(),
                      values[std::size_t(t)].end());
    total_degen += degen[std::size_t(t)];
  }
  out.summary =
      summarize(out.values, total_degen, exact ? "exact" : "monte-carlo");
  return out;
}

}  // namespace ovbsens
