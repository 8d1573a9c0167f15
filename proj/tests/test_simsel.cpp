#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ovbsens/simsel.hpp"

using namespace ovbsens;

namespace {

SelectionDgp exchangeable_fixture(int K, double rho, std::uint64_t seed) {
  DgpParams p;
  p.rho = rho;
  return make_dgp(DgpKind::exchangeable, p, K, seed);
}

Design design_of(std::initializer_list<int> bits) {
  Design d;
  for (int b : bits) d.bits.push_back(std::uint8_t(b));
  d.d1 = 0;
  for (int b : bits) d.d1 += b;
  return d;
}

}  // namespace

TEST_CASE("r_x_of_s direct evaluation and edge cases") {
  SelectionDgp dgp;
  dgp.K = 4;
  dgp.kind = DgpKind::exchangeable;
  dgp.rho = 0.5;
  dgp.var_w = 0.5 * Eigen::MatrixXd::Ones(4, 4) +
              0.5 * Eigen::MatrixXd::Identity(4, 4);
  dgp.pi = Eigen::VectorXd(4);
  dgp.pi << 0.1, 0.2, 0.3, 0.4;
  dgp.gamma = dgp.pi;

  const Design s = design_of({1, 1, 0, 0});
  const double var_unobs = 0.09 + 0.16 + 2.0 * 0.5 * 0.12;
  const double var_obs = 0.01 + 0.04 + 2.0 * 0.5 * 0.02;
  const auto rv = r_x_of_s(dgp, s);
  CHECK_FALSE(rv.degenerate);
  CHECK(rv.value == doctest::Approx(std::sqrt(var_unobs / var_obs))
                        .epsilon(1e-12));

  SUBCASE("zero unobserved coefficients give zero") {
    SelectionDgp z = dgp;
    z.pi << 0.1, 0.2, 0.0, 0.0;
    CHECK(r_x_of_s(z, s).value == doctest::Approx(0.0));
  }

  SUBCASE("complement reciprocal pairing is exact") {
    const auto a = r_x_of_s(dgp, s);
    const auto b = r_x_of_s(dgp, s.complement());
    CHECK(a.value * b.value == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("reciprocal pairing holds over the full enumeration") {
  DgpParams p;
  p.rho = 0.4;
  const auto dgp = make_dgp(DgpKind::ar1, p, 9, 17);
  enumerate_designs(9, 4, [&](const Design& s) {
    const auto a = r_x_of_s(dgp, s);
    const auto b = r_x_of_s(dgp, s.complement());
    REQUIRE_FALSE(a.degenerate);
    REQUIRE_FALSE(b.degenerate);
    CHECK(a.value * b.value == doctest::Approx(1.0).epsilon(1e-12));
  });
}

TEST_CASE("delta_orig symmetries") {
  SelectionDgp dgp;
  dgp.K = 4;
  dgp.kind = DgpKind::custom;
  dgp.var_w = Eigen::MatrixXd::Identity(4, 4);
  dgp.pi = Eigen::VectorXd(4);
  dgp.pi << 0.3, 0.4, 0.3, 0.4;
  dgp.gamma = dgp.pi;

  // blocks match: delta_orig collapses to 1
  const Design s = design_of({1, 0, 0, 1});
  CHECK(delta_orig_of_s(dgp, s).value == doctest::Approx(1.0).epsilon(1e-12));

  // complements swap numerator and denominator
  dgp.pi << 0.1, 0.5, 0.2, 0.7;
  dgp.gamma << 0.4, 0.3, 0.8, 0.2;
  const auto a = delta_orig_of_s(dgp, s);
  const auto b = delta_orig_of_s(dgp, s.complement());
  CHECK(a.value * b.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("delta_resid equals delta_orig for exogenous controls") {
  SelectionDgp dgp;
  dgp.K = 10;
  dgp.kind = DgpKind::custom;
  Eigen::VectorXd diag(10);
  for (int i = 0; i < 10; ++i) diag(i) = 0.5 + 0.2 * double(i);
  dgp.var_w = diag.asDiagonal();
  dgp.pi = Eigen::VectorXd(10);
  dgp.gamma = Eigen::VectorXd(10);
  for (int i = 0; i < 10; ++i) {
    dgp.pi(i) = 0.1 + 0.03 * double(i);
    dgp.gamma(i) = 0.4 - 0.05 * double(i);
  }
  double worst = 0.0;
  enumerate_designs(10, 5, [&](const Design& s) {
    const auto dr = delta_resid_of_s(dgp, s);
    const auto od = delta_orig_of_s(dgp, s);
    REQUIRE_FALSE(dr.degenerate);
    REQUIRE_FALSE(od.degenerate);
    worst = std::max(worst, std::abs(dr.value - od.value));
  });
  CHECK(worst < 1e-10);
}

TEST_CASE("delta_resid flags degenerate designs") {
  SelectionDgp dgp;
  dgp.K = 4;
  dgp.kind = DgpKind::custom;
  dgp.var_w = Eigen::MatrixXd::Identity(4, 4);
  dgp.pi = Eigen::VectorXd::Constant(4, 0.3);
  dgp.gamma = Eigen::VectorXd(4);
  dgp.gamma << 0.5, 0.0, 0.3, 0.2;
  const Design s = design_of({0, 1, 1, 1});  // unobserved gamma nonzero
  CHECK_FALSE(delta_resid_of_s(dgp, s).degenerate);
  const Design s2 = design_of({1, 0, 1, 1});  // unobserved gamma is zero
  CHECK(delta_resid_of_s(dgp, s2).degenerate);
}

TEST_CASE("exchangeable closed form agrees with the generic block solve") {
  const auto dgp = exchangeable_fixture(8, 0.4, 3);
  SelectionDgp generic = dgp;
  generic.kind = DgpKind::custom;  // forces the generic matrix path
  enumerate_designs(8, 3, [&](const Design& s) {
    CHECK(r_x_of_s(dgp, s).value ==
          doctest::Approx(r_x_of_s(generic, s).value).epsilon(1e-12));
    CHECK(delta_orig_of_s(dgp, s).value ==
          doctest::Approx(delta_orig_of_s(generic, s).value).epsilon(1e-12));
    CHECK(delta_resid_of_s(dgp, s).value ==
          doctest::Approx(delta_resid_of_s(generic, s).value).epsilon(1e-11));
  });
}

TEST_CASE("enumeration counts and cap") {
  CHECK(n_choose_k(4, 2) == 6);
  CHECK(n_choose_k(22, 11) == 705432);
  CHECK(n_choose_k(22, 3) == 1540);

  int count = 0;
  std::set<std::vector<std::uint8_t>> seen;
  enumerate_designs(4, 2, [&](const Design& s) {
    ++count;
    CHECK(s.d1 == 2);
    seen.insert(s.bits);
  });
  CHECK(count == 6);
  CHECK(seen.size() == 6);

  CHECK_THROWS_AS(enumerate_designs(40, 20, [](const Design&) {}),
                  CapExceeded);
}

TEST_CASE("ranged enumeration partitions the full stream") {
  std::vector<std::vector<std::uint8_t>> full;
  enumerate_designs(7, 3, [&](const Design& s) { full.push_back(s.bits); });
  std::vector<std::vector<std::uint8_t>> pieces;
  const std::uint64_t total = n_choose_k(7, 3);
  for (std::uint64_t begin = 0; begin < total; begin += 8)
    enumerate_design_range(7, 3, begin, std::min(begin + 8, total),
                           [&](const Design& s) { pieces.push_back(s.bits); });
  CHECK(full == pieces);
}

TEST_CASE("design sampling is deterministic and uniform") {
  SUBCASE("K == d1 yields the all-ones design") {
    const auto ds = sample_designs(5, 5, 1, 1);
    CHECK(ds[0].d1 == 5);
    CHECK(ds[0].observed().size() == 5);
  }

  SUBCASE("fixed seed reproduces the stream") {
    const auto a = sample_designs(10, 4, 50, 42);
    const auto b = sample_designs(10, 4, 50, 42);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].bits == b[i].bits);
    // and the stream extends without disturbing the prefix
    const auto c = sample_designs(10, 4, 100, 42);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].bits == c[i].bits);
  }

  SUBCASE("subset frequencies match the uniform law") {
    const int n = 1000000;
    std::map<std::vector<std::uint8_t>, int> freq;
    for (int i = 0; i < n; ++i)
      ++freq[sample_design(6, 3, 2718, std::uint64_t(i)).bits];
    const double cells = double(n_choose_k(6, 3));
    CHECK(freq.size() == std::size_t(cells));
    const double expect = double(n) / cells;
    const double sd = std::sqrt(double(n) * (1.0 / cells) * (1.0 - 1.0 / cells));
    for (const auto& [bits, c] : freq)
      CHECK(std::abs(double(c) - expect) <= 3.0 * sd);
  }
}

TEST_CASE("summary statistics") {
  SUBCASE("single value") {
    const auto s = summarize({2.5}, 0, "exact");
    CHECK(s.min == 2.5);
    CHECK(s.p25 == 2.5);
    CHECK(s.median == 2.5);
    CHECK(s.p75 == 2.5);
    CHECK(s.max == 2.5);
    CHECK(s.mean == 2.5);
    CHECK(s.sd == 0.0);
  }

  SUBCASE("all degenerate") {
    CHECK_THROWS_AS(summarize({}, 10, "exact"), AllDegenerate);
  }

  SUBCASE("type-7 interpolation") {
    const auto s = summarize({1.0, 2.0, 3.0, 4.0}, 0, "exact");
    CHECK(s.p25 == doctest::Approx(1.75));
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.p75 == doctest::Approx(3.25));
  }

  SUBCASE("prob_le_1 counts ties as below") {
    const auto s = summarize({0.5, 1.0, 2.0, 3.0}, 0, "exact");
    CHECK(s.prob_le_1 == doctest::Approx(0.5));
    CHECK(s.n_lt_1 == 1);
    CHECK(s.n_gt_1 == 2);
  }
}

TEST_CASE("equal selection pairs values around one") {
  const auto dgp = exchangeable_fixture(8, 0.5, 9);
  const auto dist = covariate_sampling_distribution(dgp, 4, RatioKind::r_x,
                                                    0, 77, 1);
  CHECK(dist.summary.mode == "exact");
  CHECK(dist.summary.n == 70);
  CHECK(dist.summary.n_lt_1 == dist.summary.n_gt_1);
  CHECK(dist.summary.prob_le_1 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("exact and monte-carlo summaries agree") {
  const auto dgp = exchangeable_fixture(8, 0.5, 9);
  const auto exact = covariate_sampling_distribution(dgp, 4, RatioKind::r_x,
                                                     0, 77, 1);
  // force sampling via a tiny cap
  const auto mc = covariate_sampling_distribution(dgp, 4, RatioKind::r_x,
                                                  100000, 77, 1, 10);
  CHECK(mc.summary.mode == "monte-carlo");
  CHECK(mc.summary.median ==
        doctest::Approx(exact.summary.median).epsilon(0.02));
  CHECK(mc.summary.mean == doctest::Approx(exact.summary.mean).epsilon(0.02));
  CHECK(std::abs(mc.summary.prob_le_1 - exact.summary.prob_le_1) < 0.02);
}

TEST_CASE("dgp generators and their validators") {
  SUBCASE("ma1 with |rho| >= 1/2 is rejected") {
    DgpParams p;
    p.rho = 0.6;
    CHECK_THROWS_AS(make_dgp(DgpKind::ma1, p, 12, 1), AssumptionViolated);
  }

  SUBCASE("exchangeable rho to zero approaches the identity") {
    DgpParams p;
    p.rho = 1e-9;
    const auto dgp = make_dgp(DgpKind::exchangeable, p, 6, 1);
    CHECK((dgp.var_w - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <
          1e-8);
  }

  SUBCASE("ar1 with rho = 0 is the identity (0^0 = 1 convention)") {
    DgpParams p;
    p.rho = 0.0;
    const auto dgp = make_dgp(DgpKind::ar1, p, 6, 1);
    CHECK((dgp.var_w - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() ==
          0.0);
  }

  SUBCASE("every family passes its own validator") {
    DgpParams ma;
    ma.rho = 0.3;
    DgpParams ar;
    ar.rho = 0.5;
    DgpParams ex;
    ex.rho = 0.5;
    DgpParams fa;
    fa.n_factors = 1;
    const std::vector<SelectionDgp> dgps{
        make_dgp(DgpKind::ma1, ma, 12, 5), make_dgp(DgpKind::ar1, ar, 12, 5),
        make_dgp(DgpKind::exchangeable, ex, 12, 5),
        make_dgp(DgpKind::factor, fa, 12, 5)};
    for (const auto& d : dgps) {
      const auto v = validate_dgp(d);
      CHECK(v.ok);
      for (const auto& c : v.checks) CHECK(c.pass);
    }
  }
}

TEST_CASE("delta non-convergence construction") {
  SUBCASE("C' formula") {
    // C = 1, r = 1 -> C' = 1; even-indexed pi get 2C'/K, odd get 2(1-C')/K
    const auto d1 = make_dgp_delta_nonconv(1.0, 1.0, 0.5, 10);
    CHECK(d1.pi(1) == doctest::Approx(2.0 / 10.0));   // index 2 (1-based even)
    CHECK(d1.pi(0) == doctest::Approx(0.0));          // index 1 (1-based odd)
    CHECK(d1.gamma(1) == doctest::Approx(2.0 / 10.0));
    CHECK(d1.gamma(0) == 0.0);

    const auto d2 = make_dgp_delta_nonconv(2.0, 1.0, 0.5, 10);
    CHECK(d2.pi(1) == doctest::Approx(2.0 * 2.5 / 10.0));
    CHECK(d2.pi(0) == doctest::Approx(2.0 * (1.0 - 2.5) / 10.0));

    const auto d0 = make_dgp_delta_nonconv(0.0, 1.0, 0.5, 10);
    CHECK(d0.pi(1) == doctest::Approx(2.0 * (-0.5) / 10.0));
  }

  SUBCASE("the construction passes the exchangeable validator") {
    const auto dgp = make_dgp_delta_nonconv(2.0, 1.0, 0.5, 100);
    const auto v = validate_dgp(dgp);
    CHECK(v.ok);
  }
}

TEST_CASE("rx_limit closed form") {
  CHECK(rx_limit(1.0, 0.0) == doctest::Approx(1.0));
  CHECK(rx_limit(1.0, 2.7) == doctest::Approx(1.0));
  CHECK(rx_limit(2.0, 0.0) == doctest::Approx(2.0));
  CHECK(rx_limit(4.0, 1.0) == doctest::Approx(2.0));  // sqrt(4*5/5) = 2
  // strictly increasing in r for fixed c
  for (double c : {0.0, 0.5, 1.0, 3.0}) {
    double prev = 0.0;
    for (double r = 0.1; r < 5.0; r += 0.1) {
      const double v = rx_limit(r, c);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("empirical dgp from a covariance model") {
  // (Y, X, W1..W3) with a known structure; pi and gamma recover projections
  Eigen::MatrixXd s(5, 5);
  s << 2.0, 0.8, 0.5, 0.4, 0.2,  //
      0.8, 1.5, 0.6, 0.3, 0.1,   //
      0.5, 0.6, 1.0, 0.2, 0.1,   //
      0.4, 0.3, 0.2, 1.0, 0.3,   //
      0.2, 0.1, 0.1, 0.3, 1.0;
  const std::vector<std::string> labels{"Y", "X", "A", "B", "C"};
  const std::map<std::string, Role> roles{{"Y", Role::outcome},
                                          {"X", Role::treatment},
                                          {"A", Role::calibration},
                                          {"B", Role::calibration},
                                          {"C", Role::calibration}};
  const CovarianceModel m(s, labels, roles);
  const auto dgp = make_dgp_from_covariance(m, "Y", "X", {"A", "B", "C"});
  // pi solves Var(W) pi = Cov(W, X)
  const Eigen::VectorXd resid = dgp.var_w * dgp.pi;
  CHECK(resid(0) == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(resid(1) == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(resid(2) == doctest::Approx(0.1).epsilon(1e-10));
  // gamma: Cov(W, Y) - Cov(W, X) beta - Var(W) gamma = 0 with beta from
  // the joint system
  Eigen::MatrixXd a(4, 4);
  a(0, 0) = s(1, 1);
  a.block(0, 1, 1, 3) = s.block(1, 2, 1, 3);
  a.block(1, 0, 3, 1) = s.block(2, 1, 3, 1);
  a.block(1, 1, 3, 3) = s.block(2, 2, 3, 3);
  Eigen::VectorXd rhs(4);
  rhs(0) = s(1, 0);
  rhs.segment(1, 3) = s.block(2, 0, 3, 1);
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < 3; ++i)
    CHECK(dgp.gamma(i) == doctest::Approx(coef(i + 1)).epsilon(1e-10));
}
