#include <cmath>
#include <numbers>
#include <tuple>

#include "doctest.h"
#include "rfpca/error.hpp"
#include "rfpca/specfun.hpp"
#include "test_support.hpp"

using namespace rfpca;

namespace {
constexpr double kEulerGamma = 0.57721566490153286061;
}

TEST_CASE("digamma matches high-precision reference values") {
  // Reference values computed with mpmath at 30 digits.
  struct Ref {
    double x, psi;
  };
  const Ref refs[] = {
      {0.001, -1000.5755719318103005}, {0.01, -100.5608854578686745},
      {0.5, -1.9635100260214234794},   {1.0, -0.57721566490153286061},
      {1.5, 0.036489973978576520559},  {2.3, 0.60003988036396957514},
      {3.7, 1.1671535393615113859},    {5.999, 1.7059363290792256641},
      {6.0, 1.7061176684318004727},    {10.0, 2.2517525890667211076},
      {123.456, 4.8118293238289853873}, {1000.0, 6.9072551956488120521},
  };
  for (const auto& ref : refs) {
    CAPTURE(ref.x);
    CHECK(std::abs(digamma(ref.x) - ref.psi) < 1e-12);
  }
  CHECK(std::abs(digamma(1.0) + kEulerGamma) < 1e-12);
  CHECK(std::abs(digamma(0.5) - (-kEulerGamma - 2.0 * std::numbers::ln2)) < 1e-12);
}

TEST_CASE("digamma recurrence holds across the grid") {
  for (double x : {0.5, 1.0, 3.7}) {
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) < 1e-12);
  }
  // log-spaced grid over [1e-2, 1e3]
  for (int k = 0; k <= 100; ++k) {
    const double x = std::pow(10.0, -2.0 + 5.0 * k / 100.0);
    CAPTURE(x);
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) < 1e-12);
  }
}

TEST_CASE("digamma rejects non-positive arguments") {
  CHECK_THROWS_AS(digamma(0.0), Error);
  CHECK_THROWS_AS(digamma(-1.5), Error);
  CHECK_THROWS_AS(digamma(std::nan("")), Error);
}

TEST_CASE("log_minus_digamma agrees with the direct difference where it is well conditioned") {
  for (double x : {0.3, 1.0, 5.5, 6.0, 7.25, 40.0}) {
    CHECK(std::abs(log_minus_digamma(x) - (std::log(x) - digamma(x))) < 1e-13);
  }
  // Large-x asymptote 1/(2x) + 1/(12 x^2).
  const double x = 5e5;
  CHECK(std::abs(log_minus_digamma(x) - (0.5 / x + 1.0 / (12 * x * x))) < 1e-22);
}

TEST_CASE("multivariate digamma") {
  CHECK(multivariate_digamma(2.3, 1) == doctest::Approx(digamma(2.3)).epsilon(1e-15));
  CHECK(std::abs(multivariate_digamma(3.0, 2) - (digamma(3.0) + digamma(2.5))) < 1e-14);

  SUBCASE("derivative of log multivariate gamma") {
    const double h = 1e-5;
    const double fd =
        (log_multivariate_gamma(4.0 + h, 3) - log_multivariate_gamma(4.0 - h, 3)) / (2 * h);
    CHECK(std::abs(fd - multivariate_digamma(4.0, 3)) < 1e-6);
    for (int d : {1, 2, 5, 8}) {
      for (double x : {0.5 * d + 0.1, 0.5 * d + 2.0, 30.0}) {
        const double f =
            (log_multivariate_gamma(x + h, d) - log_multivariate_gamma(x - h, d)) / (2 * h);
        CAPTURE(d);
        CAPTURE(x);
        CHECK(std::abs(f - multivariate_digamma(x, d)) < 1e-6);
      }
    }
  }
  CHECK_THROWS_AS(multivariate_digamma(1.0, 3), Error);
}

TEST_CASE("log multivariate gamma") {
  CHECK(log_multivariate_gamma(5.0, 1) == doctest::Approx(std::log(24.0)).epsilon(1e-14));
  CHECK(std::abs(log_multivariate_gamma(1.5, 2) -
                 (0.5 * std::log(std::numbers::pi) + std::lgamma(1.5) + std::lgamma(1.0))) <
        1e-14);
  // mpmath: 3 ln(pi) + sum_{i=1..4} lnGamma(6 + (1 - i)/2)
  CHECK(std::abs(log_multivariate_gamma(6.0, 4) - 17.811285769139350651) < 1e-12);
  CHECK_THROWS_AS(log_multivariate_gamma(1.5, 4), Error);
  CHECK_THROWS_AS(log_multivariate_gamma(2.0, 0), Error);
}

TEST_CASE("gamma moments") {
  for (double nu : {0.3, 3.0, 1e4}) {
    CHECK(gamma_moments(nu / 2, nu / 2).mean == doctest::Approx(1.0));
  }
  CHECK(gamma_moments(3.0, 2.0).mean == doctest::Approx(1.5));
  const double psi4 = 1.0 + 0.5 + 1.0 / 3.0 - kEulerGamma;
  CHECK(std::abs(gamma_moments(4.0, 1.0).mean_log - psi4) < 1e-13);
  CHECK_THROWS_AS(gamma_moments(0.0, 1.0), Error);
  CHECK_THROWS_AS(gamma_moments(1.0, -2.0), Error);
}

TEST_CASE("wishart moments") {
  const auto m = wishart_moments(SpdMatrix::identity(2), 5.0);
  CHECK((m.mean - 5.0 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);

  SUBCASE("one-dimensional case is a scaled chi-square") {
    // W_1(s2, nu) = Gam(nu/2, 1/(2 s2))
    const double s2 = 2.7, nu = 3.3;
    Eigen::MatrixXd psi(1, 1);
    psi << s2;
    const auto w = wishart_moments(SpdMatrix(psi), nu);
    const auto g = gamma_moments(nu / 2, 1.0 / (2 * s2));
    CHECK(w.mean(0, 0) == doctest::Approx(g.mean).epsilon(1e-14));
    CHECK(std::abs(w.mean_logdet - g.mean_log) < 1e-13);
  }
  CHECK_THROWS_AS(wishart_moments(SpdMatrix::identity(3), 1.9), Error);
}

TEST_CASE("spd_solve_logdet") {
  Rng rng(RngSeed{11});
  SUBCASE("identity") {
    const Eigen::MatrixXd b = test::random_matrix(4, 3, rng);
    const auto sol = spd_solve_logdet(SpdMatrix::identity(4), b);
    CHECK((sol.x - b).norm() == 0.0);
    CHECK(sol.logdet == 0.0);
  }
  SUBCASE("diagonal") {
    Eigen::MatrixXd a = Eigen::Vector2d(2.0, 8.0).asDiagonal();
    const auto sol = spd_solve_logdet(SpdMatrix(a), Eigen::MatrixXd::Identity(2, 2));
    CHECK(std::abs(sol.logdet - std::log(16.0)) < 1e-10 * std::log(16.0));
  }
  SUBCASE("random residual") {
    const Eigen::MatrixXd a = test::random_spd(5, rng);
    const Eigen::MatrixXd b = test::random_matrix(5, 7, rng);
    const SpdMatrix spd(a);
    const auto sol = spd_solve_logdet(spd, b);
    CHECK((a * sol.x - b).cwiseAbs().maxCoeff() < 1e-10);
    const double ref = std::log(a.determinant());
    CHECK(std::abs(sol.logdet - ref) < 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("spd inverse is accurate for ill-conditioned inputs") {
  Rng rng(RngSeed{12});
  // At condition 1e8 the rounding of A^{-1} alone puts ~1e-8 into A^{-1} A,
  // so the 1e-9 bound is checked up to condition 1e7.
  for (auto [n, log_kappa, tol] : {std::tuple{3, 7.0, 1e-9}, std::tuple{10, 7.0, 1e-9},
                                   std::tuple{40, 7.0, 1e-9}, std::tuple{10, 8.0, 1e-8},
                                   std::tuple{40, 8.0, 1e-8}}) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(test::random_matrix(n, n, rng));
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd ev(n);
    for (Eigen::Index i = 0; i < n; ++i) ev(i) = std::pow(10.0, -log_kappa * i / double(n - 1));
    Eigen::MatrixXd a = q * ev.asDiagonal() * q.transpose();
    a = 0.5 * (a + a.transpose());
    const SpdMatrix spd(a);
    const Eigen::MatrixXd prod = spd.solve(Eigen::MatrixXd::Identity(n, n)) * a;
    CAPTURE(n);
    CAPTURE(log_kappa);
    CHECK((prod - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < tol);
  }
}

TEST_CASE("SpdMatrix construction errors") {
  Eigen::Matrix2d a;
  a << 1.0, 2.0, 2.0, 1.0;  // indefinite: second pivot fails
  try {
    SpdMatrix s(a);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot() == 1);
    CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
  }
  Eigen::Matrix3d z = Eigen::Matrix3d::Identity();
  z(0, 0) = -1.0;
  try {
    SpdMatrix s(z);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot() == 0);
  }
  Eigen::Matrix2d asym;
  asym << 2.0, 0.1, 0.0, 2.0;
  CHECK_THROWS_AS(SpdMatrix{asym}, Error);

  Eigen::Matrix2d drift;
  drift << 2.0, 0.5, 0.5 + 1e-15, 2.0;
  const SpdMatrix fixed(drift);
  CHECK(fixed.matrix()(0, 1) == fixed.matrix()(1, 0));
}

TEST_CASE("SpdMatrix jitter adds a trace-scaled ridge") {
  Eigen::Matrix2d a;
  a << 4.0, 0.0, 0.0, 2.0;
  const SpdMatrix s(a, 1e-10);
  CHECK(s.matrix()(0, 0) == doctest::Approx(4.0 + 3e-10).epsilon(1e-15));
  CHECK(s.matrix()(0, 1) == 0.0);
}

TEST_CASE("sym_eigen") {
  SUBCASE("diagonal") {
    Eigen::MatrixXd a = Eigen::Vector2d(4.0, 1.0).asDiagonal();
    const auto es = sym_eigen(a);
    CHECK(es.values(0) == doctest::Approx(4.0));
    CHECK(es.values(1) == doctest::Approx(1.0));
    CHECK((es.vectors - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-14);
    Eigen::MatrixXd b = Eigen::Vector2d(1.0, 4.0).asDiagonal();
    const auto eb = sym_eigen(b);
    CHECK(std::abs(eb.vectors(1, 0) - 1.0) < 1e-14);
  }
  SUBCASE("degenerate identity keeps index order") {
    const auto es = sym_eigen(Eigen::MatrixXd::Identity(3, 3));
    CHECK((es.values.array() == 1.0).all());
    CHECK((es.vectors - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
  }
  SUBCASE("reconstruction, orthonormality, sign convention") {
    Rng rng(RngSeed{5});
    for (Eigen::Index n : {6, 25, 100}) {
      const Eigen::MatrixXd a = test::random_spd(n, rng);
      const auto es = sym_eigen(a);
      const Eigen::MatrixXd rec = es.vectors * es.values.asDiagonal() * es.vectors.transpose();
      CAPTURE(n);
      CHECK((rec - a).norm() / a.norm() < 1e-8);
      CHECK((es.vectors.transpose() * es.vectors - Eigen::MatrixXd::Identity(n, n))
                .cwiseAbs()
                .maxCoeff() < 1e-10);
      for (Eigen::Index k = 0; k + 1 < n; ++k) CHECK(es.values(k) >= es.values(k + 1));
      for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index arg = 0;
        es.vectors.col(k).cwiseAbs().maxCoeff(&arg);
        CHECK(es.vectors(arg, k) > 0.0);
      }
    }
  }
  SUBCASE("non-symmetric input") {
    Eigen::Matrix2d a;
    a << 1.0, 2.0, 0.0, 1.0;
    CHECK_THROWS_AS(sym_eigen(a), Error);
  }
}

TEST_CASE("kronecker") {
  Eigen::Matrix2d a;
  a << 1, 2, 3, 4;
  Eigen::MatrixXd b(1, 2);
  b << 5, 6;
  const Eigen::MatrixXd k = kronecker(a, b);
  CHECK(k.rows() == 2);
  CHECK(k.cols() == 4);
  CHECK(k(1, 3) == 24.0);
  CHECK(k(0, 2) == 10.0);
}
