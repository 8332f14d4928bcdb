#include <doctest.h>

#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "robreg/core.hpp"

using namespace robreg;
using testing_support::gaussian_data;

namespace {

Matrix noiseless_y(const Matrix& x, const Matrix& beta) { return x * beta.transpose(); }

template <typename F>
Errc error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected robreg::Error");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("mahalanobis_norm examples") {
  const Vector v = Vector::LinSpaced(4, -1.5, 2.0);
  CHECK(mahalanobis_norm(v, Matrix::Identity(4, 4)) == doctest::Approx(v.norm()).epsilon(1e-15));

  Vector v3(3);
  v3 << 2, 0, 0;
  Vector d(3);
  d << 0.25, 1, 1;
  CHECK(mahalanobis_norm(v3, Matrix(d.asDiagonal())) == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 eng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix m = oracle::random_spd(4, eng);
    const Vector r = oracle::random_matrix(4, 1, eng);
    CHECK(std::abs(mahalanobis_norm(r, m) - std::sqrt(oracle::quad_form(r, m))) <= 1e-12);
  }
  CHECK(mahalanobis_norm(Vector::Zero(3), Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("mahalanobis_norm rejects bad input") {
  Vector v = Vector::Ones(3);
  CHECK(error_code([&] { (void)mahalanobis_norm(v, Matrix::Identity(2, 2)); }) == Errc::dimension_mismatch);
  v(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_code([&] { (void)mahalanobis_norm(v, Matrix::Identity(3, 3)); }) == Errc::non_finite);
}

TEST_CASE("empirical_loss examples") {
  std::mt19937_64 eng(11);
  const Matrix x = oracle::random_matrix(30, 2, eng);
  const Matrix beta = oracle::random_matrix(3, 2, eng);
  const DataSet clean(x, noiseless_y(x, beta));
  CHECK(empirical_loss(clean, beta) == 0.0);

  Matrix x1(1, 1);
  x1 << 1;
  Matrix y1(1, 2);
  y1 << 3, 4;
  CHECK(empirical_loss(DataSet(x1, y1), Matrix::Zero(2, 1).eval()) == 5.0);

  const auto s = gaussian_data(10, 2, 3, 3);
  const Matrix b = oracle::random_matrix(3, 2, eng);
  const Matrix sinv = oracle::random_spd(3, eng);
  CHECK(std::abs(empirical_loss(s.data, b) - oracle::loss(s.data.x, s.data.y, b)) <= 1e-12);
  CHECK(std::abs(empirical_loss(s.data, b, &sinv) - oracle::loss(s.data.x, s.data.y, b, &sinv)) <= 1e-12);
  CHECK(std::abs(empirical_loss(s.data, b, &sinv, 0.3) - oracle::loss(s.data.x, s.data.y, b, &sinv, 0.3)) <= 1e-12);
}

TEST_CASE("empirical_loss rejects mismatched beta and negative lambda") {
  const auto s = gaussian_data(10, 2, 3, 3);
  CHECK(error_code([&] { (void)empirical_loss(s.data, Matrix::Zero(2, 3).eval()); }) == Errc::dimension_mismatch);
  CHECK(error_code([&] { (void)empirical_loss(s.data, Matrix::Zero(3, 2).eval(), nullptr, -1.0); }) ==
        Errc::invalid_argument);
  Matrix bad = Matrix::Zero(3, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(error_code([&] { (void)empirical_loss(s.data, bad); }) == Errc::non_finite);
}

TEST_CASE("empirical_subgradient at the kink is zero") {
  std::mt19937_64 eng(5);
  const Matrix x = oracle::random_matrix(25, 2, eng);
  const Matrix beta = oracle::random_matrix(3, 2, eng);
  const DataSet clean(x, noiseless_y(x, beta));
  CHECK(empirical_subgradient(clean, beta).cwiseAbs().maxCoeff() == 0.0);
  const Matrix sinv = oracle::random_spd(3, eng);
  CHECK(empirical_subgradient(clean, beta, &sinv).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empirical_subgradient matches central differences") {
  const auto s = gaussian_data(20, 2, 3, 9);
  std::mt19937_64 eng(9);
  const Matrix sinv = oracle::random_spd(3, eng);
  const Matrix beta = oracle::random_matrix(3, 2, eng);
  const double h = 1e-6;
  for (const Matrix* w : {static_cast<const Matrix*>(nullptr), &sinv}) {
    for (const double lambda : {0.0, 0.4}) {
      const Matrix g = empirical_subgradient(s.data, beta, w, lambda);
      for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 2; ++j) {
          Matrix bp = beta;
          Matrix bm = beta;
          bp(i, j) += h;
          bm(i, j) -= h;
          const double fd = (oracle::loss(s.data.x, s.data.y, bp, w, lambda) -
                             oracle::loss(s.data.x, s.data.y, bm, w, lambda)) / (2 * h);
          CHECK(std::abs(g(i, j) - fd) <= 1e-5);
        }
      }
    }
  }
}

TEST_CASE("empirical_subgradient penalty term") {
  const auto s = gaussian_data(15, 2, 3, 4);
  std::mt19937_64 eng(4);
  const Matrix beta = oracle::random_matrix(3, 2, eng);
  const double lambda = 0.7;
  const Matrix diff = empirical_subgradient(s.data, beta, nullptr, lambda) - empirical_subgradient(s.data, beta);
  const Matrix expect = lambda * beta / oracle::frobenius(beta);
  CHECK((diff - expect).cwiseAbs().maxCoeff() <= 1e-14);

  const Matrix zero = Matrix::Zero(3, 2);
  CHECK(empirical_subgradient(s.data, zero, nullptr, lambda) == empirical_subgradient(s.data, zero));
}

TEST_CASE("residuals") {
  const auto s = gaussian_data(12, 3, 2, 6);
  CHECK(residuals(s.data, Matrix::Zero(2, 3).eval()).eps == s.data.y);

  const DataSet clean(s.data.x, noiseless_y(s.data.x, s.beta));
  CHECK(residuals(clean, s.beta).eps.cwiseAbs().maxCoeff() <= 1e-14);

  std::mt19937_64 eng(6);
  const Matrix b = oracle::random_matrix(2, 3, eng);
  const Matrix eps = residuals(s.data, b).eps;
  for (Index i = 0; i < s.data.n(); ++i)
    CHECK((eps.row(i).transpose() - oracle::residual_row(s.data.x, s.data.y, b, i)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("loss is convex along random chords") {
  const auto s = gaussian_data(40, 3, 4, 21);
  std::mt19937_64 eng(21);
  std::uniform_real_distribution<double> unif;
  const Matrix sinv = oracle::random_spd(4, eng);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix b1 = oracle::random_matrix(4, 3, eng);
    const Matrix b2 = oracle::random_matrix(4, 3, eng);
    const double t = unif(eng);
    for (const Matrix* w : {static_cast<const Matrix*>(nullptr), &sinv}) {
      const double mid = empirical_loss(s.data, (t * b1 + (1 - t) * b2).eval(), w, 0.2);
      const double chord = t * empirical_loss(s.data, b1, w, 0.2) + (1 - t) * empirical_loss(s.data, b2, w, 0.2);
      CHECK(mid <= chord + 1e-10);
    }
  }
}

TEST_CASE("identity metric reproduces the Euclidean loss") {
  const auto s = gaussian_data(50, 2, 5, 2);
  const Matrix eye = Matrix::Identity(5, 5);
  std::mt19937_64 eng(2);
  const Matrix b = oracle::random_matrix(5, 2, eng);
  CHECK(empirical_loss(s.data, b, &eye) == empirical_loss(s.data, b));
  CHECK(empirical_subgradient(s.data, b, &eye) == empirical_subgradient(s.data, b));
}

TEST_CASE("loss is invariant under joint row permutation") {
  const auto s = gaussian_data(60, 2, 3, 13);
  std::vector<Index> perm(60);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 eng(13);
  std::shuffle(perm.begin(), perm.end(), eng);
  const DataSet shuffled = s.data.subset(perm);
  const Matrix b = oracle::random_matrix(3, 2, eng);
  CHECK(empirical_loss(shuffled, b) == doctest::Approx(empirical_loss(s.data, b)).epsilon(1e-14));
}

TEST_CASE("single precision kernels") {
  const auto s = gaussian_data(30, 2, 3, 8);
  const BasicDataSet<float> f(s.data.x.cast<float>(), s.data.y.cast<float>());
  const Eigen::MatrixXf b = s.beta.cast<float>();
  CHECK(empirical_loss(f, b) == doctest::Approx(empirical_loss(s.data, s.beta)).epsilon(1e-5));
  const Eigen::MatrixXf g = empirical_subgradient(f, b);
  CHECK(g.rows() == 3);
}

TEST_CASE("data set and parameter validation") {
  CHECK(error_code([] { DataSet(Matrix::Zero(3, 2), Matrix::Zero(4, 1)); }) == Errc::dimension_mismatch);
  CHECK(error_code([] { DataSet(Matrix::Zero(0, 2), Matrix::Zero(0, 1)); }) == Errc::invalid_argument);
  Matrix bad = Matrix::Zero(3, 1);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_code([&] { DataSet(Matrix::Zero(3, 2), bad); }) == Errc::non_finite);

  ModelParams mp{Matrix::Ones(2, 1), Matrix::Identity(2, 2)};
  CHECK_NOTHROW(mp.validate());
  mp.sigma = Matrix{{1.0, 0.5}, {0.4, 1.0}};
  CHECK(error_code([&] { mp.validate(); }) == Errc::invalid_argument);
  mp.sigma = Matrix{{1.0, 2.0}, {2.0, 1.0}};
  CHECK(error_code([&] { mp.validate(); }) == Errc::invalid_argument);

  EstimatorConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.5;
  CHECK(error_code([&] { c.validate(); }) == Errc::invalid_argument);
  c = {};
  c.c_gamma = 0;
  CHECK(error_code([&] { c.validate(); }) == Errc::invalid_argument);
  c = {};
  c.tol = 0;
  CHECK(error_code([&] { c.validate(); }) == Errc::invalid_argument);
}

TEST_CASE("csv round trip") {
  const auto s = gaussian_data(7, 2, 3, 1);
  std::stringstream buf;
  write_csv(buf, s.data);
  const DataSet back = read_csv(buf);
  CHECK(back.x == s.data.x);
  CHECK(back.y == s.data.y);
}

TEST_CASE("csv diagnostics carry line and column") {
  const auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      (void)read_csv(in);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::parse_error);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("x1,y2\n1,2\n").find("line 1, column 2") != std::string::npos);
  CHECK(message("1,2\n3,4\n").find("line 1, column 1") != std::string::npos);
  CHECK(message("x1,y1\n1,2\n3,abc\n").find("line 3, column 2") != std::string::npos);
  CHECK(message("x1,y1\n1,2\n3\n").find("line 3") != std::string::npos);
  CHECK(message("x1,x2\n1,2\n").find("no y columns") != std::string::npos);
  CHECK(message("").find("line 1") != std::string::npos);
  CHECK(message("x1,y1\n").find("no observations") != std::string::npos);
}

TEST_CASE("kron and row-major vec satisfy vec(ABC) = (A ⊗ Cᵀ) vec(B)") {
  std::mt19937_64 eng(3);
  const Matrix a = oracle::random_matrix(3, 4, eng);
  const Matrix b = oracle::random_matrix(4, 2, eng);
  const Matrix c = oracle::random_matrix(2, 5, eng);
  const Vector lhs = vec_rowmajor(a * b * c);
  const Vector rhs = kron(a, c.transpose().eval()) * vec_rowmajor(b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(unvec_rowmajor(vec_rowmajor(b), 4, 2) == b);
  Vector v = vec_rowmajor(b);
  CHECK(v(1) == b(0, 1));
}
