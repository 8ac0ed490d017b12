#include <doctest.h>

#include <cmath>
#include <random>

#include "detobs/gain.hpp"
#include "detobs/graph.hpp"

using namespace detobs;

namespace {

Mat star_laplacian() {
  Mat l(3, 3);
  l << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  return l;
}

Mat basis_outputs() {
  Mat c = Mat::Zero(3, 9);
  c(0, 0) = 1.0;
  c(1, 4) = 1.0;
  c(2, 8) = 1.0;
  return c;
}

Mat reference_k1() { return Vec((Vec(3) << 134.86, 263.23, 263.23).finished()).asDiagonal(); }

// Real roots of the characteristic polynomial: closed form for 2x2,
// trigonometric cubic formula for 3x3.
double charpoly_min_root(const Mat& a) {
  if (a.rows() == 2) {
    const double tr = a.trace(), det = a.determinant();
    return 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));
  }
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = a.trace() / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) + (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const Mat b = (a - q * Mat::Identity(3, 3)) / p;
  const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  return q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
}

}  // namespace

TEST_CASE("lmi matrix hand cases") {
  CHECK(lmi_matrix(star_laplacian(), basis_outputs(), Mat::Zero(3, 3)).isZero(0.0));
  const Mat m = lmi_matrix(Mat::Zero(1, 1), Mat::Identity(3, 3), Mat::Identity(3, 3));
  CHECK(m == Mat::Identity(3, 3));
}

TEST_CASE("lmi matrix is exactly symmetric and linear in K1") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int k = 0; k < 20; ++k) {
    const Mat ka = Vec::NullaryExpr(3, [&] { return u(rng); }).asDiagonal();
    const Mat kb = Vec::NullaryExpr(3, [&] { return u(rng); }).asDiagonal();
    const Mat ma = lmi_matrix(star_laplacian(), basis_outputs(), ka);
    CHECK(ma == ma.transpose());
    const Mat sum = lmi_matrix(star_laplacian(), basis_outputs(), ka + 2.0 * kb);
    const Mat lin = ma + 2.0 * lmi_matrix(star_laplacian(), basis_outputs(), kb);
    CHECK((sum - lin).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("min eigenvalue") {
  CHECK(min_eig_symmetric(Vec((Vec(3) << 2, 5, 7).finished()).asDiagonal().toDenseMatrix()) == doctest::Approx(2.0));
  Mat swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK(min_eig_symmetric(swap) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::abs(min_eig_symmetric(star_laplacian())) < 1e-9);
  Mat asym(2, 2);
  asym << 1, 2, 3, 4;
  CHECK_THROWS_AS(min_eig_symmetric(asym), std::invalid_argument);
}

TEST_CASE("min eigenvalue matches characteristic-polynomial roots") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = trial % 2 ? 3 : 2;
    Mat a = Mat::NullaryExpr(n, n, [&] { return g(rng); });
    a = 0.5 * (a + a.transpose()).eval();
    CHECK(std::abs(min_eig_symmetric(a) - charpoly_min_root(a)) < 1e-8);
  }
}

TEST_CASE("reference gain is feasible") {
  const GainCertificate c = verify_gain(star_laplacian(), basis_outputs(), reference_k1(), 10.0 + 4.0 / 0.3);
  CHECK(c.feasible);
  CHECK(c.lmi_min_eig == doctest::Approx(36.13562809126155).epsilon(1e-10));
  CHECK(verify_gain(star_laplacian(), basis_outputs(), reference_k1(), 23.3).feasible);
}

TEST_CASE("infeasible gains") {
  CHECK_FALSE(verify_gain(star_laplacian(), basis_outputs(), Mat::Zero(3, 3), 23.3).feasible);
  const GainCertificate tiny = verify_gain(star_laplacian(), basis_outputs(), 1e-3 * reference_k1(), 23.3);
  CHECK_FALSE(tiny.feasible);
  CHECK(tiny.lmi_min_eig == doctest::Approx(36.13562809126155e-3).epsilon(1e-9));
}

TEST_CASE("synthesis") {
  const double k1 = 10.0 + 4.0 / 0.3;
  const GainCertificate s = synthesize_gain(star_laplacian(), basis_outputs(), k1);
  CHECK(s.feasible);
  CHECK(s.iterations <= 500);
  CHECK(s.K1.isDiagonal());
  CHECK(verify_gain(star_laplacian(), basis_outputs(), s.K1, k1).feasible == s.feasible);

  CHECK_FALSE(synthesize_gain(star_laplacian(), Mat::Zero(3, 9), 1.0).feasible);
  CHECK(synthesize_gain(Mat::Zero(1, 1), Mat::Identity(3, 3), 1.0).feasible);
}
