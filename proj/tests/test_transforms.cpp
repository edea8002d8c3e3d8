#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "tdseg/transforms.hpp"

using namespace tdseg;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uniform_real(rng, lo, hi);
  return t;
}

// Independent oracle: dense double-precision two-sided products.
Eigen::MatrixXd slice_as_matrix(const Tensor& t, std::int64_t s, int n) {
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = t[(s * n + r) * n + c];
  return m;
}

double max_abs_diff(const Tensor& t, std::int64_t s, int n, const Eigen::MatrixXd& ref) {
  double worst = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      worst = std::max(worst, std::abs(t[(s * n + r) * n + c] - ref(r, c)));
  return worst;
}

double frob_sq(const Tensor& t) {
  double s = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i) s += static_cast<double>(t[i]) * t[i];
  return s;
}

}  // namespace

TEST_CASE("hadamard_matrix base cases") {
  Eigen::MatrixXi h1 = hadamard_matrix(1);
  CHECK(h1.rows() == 1);
  CHECK(h1(0, 0) == 1);

  Eigen::MatrixXi h2 = hadamard_matrix(2);
  CHECK(h2(0, 0) == 1);
  CHECK(h2(0, 1) == 1);
  CHECK(h2(1, 0) == 1);
  CHECK(h2(1, 1) == -1);
}

TEST_CASE("hadamard_matrix orthogonality is exact over the integers") {
  for (int n : {1, 2, 4, 8, 16, 32, 64, 128}) {
    Eigen::MatrixXi h = hadamard_matrix(n);
    Eigen::MatrixXi prod = h * h.transpose();
    CHECK(prod == n * Eigen::MatrixXi::Identity(n, n));
  }
}

TEST_CASE("hadamard_matrix rejects bad sizes") {
  CHECK_THROWS_AS(hadamard_matrix(3), Error);
  CHECK_THROWS_AS(hadamard_matrix(0), Error);
  CHECK_THROWS_AS(hadamard_matrix(8192), Error);
}

TEST_CASE("fwht_1d known vectors") {
  std::vector<float> impulse = {1, 0, 0, 0};
  fwht_1d(impulse);
  CHECK(impulse == std::vector<float>{1, 1, 1, 1});

  std::vector<float> constant = {1, 1, 1, 1};
  fwht_1d(constant);
  CHECK(constant == std::vector<float>{4, 0, 0, 0});

  std::vector<float> v = {1, 2, 3, 4};
  fwht_1d(v);
  Eigen::MatrixXd h = hadamard_matrix(4).cast<double>();
  Eigen::Vector4d ref = h * Eigen::Vector4d(1, 2, 3, 4);
  for (int i = 0; i < 4; ++i) CHECK(v[static_cast<std::size_t>(i)] == doctest::Approx(ref(i)));
}

TEST_CASE("fwht_1d equals the dense multiply for all sizes up to 128") {
  Rng rng(11);
  for (int n = 1; n <= 128; n *= 2) {
    Eigen::MatrixXd h = hadamard_matrix(n).cast<double>();
    std::vector<float> v(static_cast<std::size_t>(n));
    Eigen::VectorXd vd(n);
    for (int i = 0; i < n; ++i) {
      v[static_cast<std::size_t>(i)] = uniform_real(rng, -1.0f, 1.0f);
      vd(i) = v[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd ref = h * vd;
    fwht_1d(v);
    double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(v[static_cast<std::size_t>(i)] - ref(i)) / scale < 1e-4);
  }
}

TEST_CASE("fwht_1d rejects non-power-of-two lengths") {
  std::vector<float> v(6, 1.0f);
  CHECK_THROWS_AS(fwht_1d(v), Error);
}

TEST_CASE("ht2d concentrates constants at DC") {
  const int n = 8;
  Tensor x = Tensor::full({2, n, n}, 0.5f);
  Tensor z = ht2d(x);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < n; ++r)
      for (int cc = 0; cc < n; ++cc) {
        float expect = (r == 0 && cc == 0) ? n * n * 0.5f : 0.0f;
        CHECK(z.at(c, r, cc) == doctest::Approx(expect).epsilon(1e-6));
      }
}

TEST_CASE("ht2d 2x2 hand case") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 0, 0, 0});
  Tensor z = ht2d(x);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(z[i] == doctest::Approx(1.0));
}

TEST_CASE("ht2d matches the dense two-sided oracle") {
  Rng rng(5);
  Tensor x = random_tensor({4, 8, 8}, rng);
  Tensor z = ht2d(x);
  Eigen::MatrixXd h = hadamard_matrix(8).cast<double>();
  for (std::int64_t s = 0; s < 4; ++s) {
    Eigen::MatrixXd ref = h * slice_as_matrix(x, s, 8) * h;
    CHECK(max_abs_diff(z, s, 8, ref) < 1e-4);
  }
}

TEST_CASE("iht2d inverts ht2d and maps the DC delta to ones") {
  Rng rng(17);
  Tensor x = random_tensor({3, 16, 16}, rng);
  Tensor back = iht2d(ht2d(x));
  for (std::int64_t i = 0; i < x.size(); ++i)
    CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-4));

  Tensor zeros({1, 4, 4});
  Tensor z0 = iht2d(zeros);
  for (std::int64_t i = 0; i < z0.size(); ++i) CHECK(z0[i] == 0.0f);

  Tensor delta({1, 4, 4});
  delta[0] = 16.0f;  // N^2 at (0,0)
  Tensor ones = iht2d(delta);
  for (std::int64_t i = 0; i < ones.size(); ++i) CHECK(ones[i] == doctest::Approx(1.0));
}

TEST_CASE("ht2d energy scaling and linearity") {
  Rng rng(23);
  const int n = 16;
  Tensor x = random_tensor({2, n, n}, rng);
  Tensor y = random_tensor({2, n, n}, rng);
  double ex = frob_sq(ht2d(x));
  CHECK(ex == doctest::Approx(n * n * frob_sq(x)).epsilon(1e-3));

  Tensor combo(x.shape());
  const float a = 0.7f, b = -1.3f;
  for (std::int64_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];
  Tensor lhs = ht2d(combo);
  Tensor tx = ht2d(x), ty = ht2d(y);
  for (std::int64_t i = 0; i < lhs.size(); ++i)
    CHECK(lhs[i] == doctest::Approx(a * tx[i] + b * ty[i]).epsilon(1e-4));
}

TEST_CASE("ht2d rejects non-square and non-power-of-two extents") {
  CHECK_THROWS_AS(ht2d(Tensor({1, 4, 8})), Error);
  CHECK_THROWS_AS(ht2d(Tensor({1, 6, 6})), Error);
}

TEST_CASE("dct basis is orthonormal") {
  for (int n : {1, 2, 3, 8, 32}) {
    DCTPlan plan(n);
    MatrixRM prod = plan.basis() * plan.basis().transpose();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        CHECK(std::abs(prod(r, c) - (r == c ? 1.0f : 0.0f)) < 1e-6);
  }
}

TEST_CASE("dct2d 2x2 all-ones hand case") {
  Tensor x = Tensor::full({1, 2, 2}, 1.0f);
  Tensor z = dct2d(x);
  CHECK(z[0] == doctest::Approx(2.0));
  CHECK(std::abs(z[1]) < 1e-6);
  CHECK(std::abs(z[2]) < 1e-6);
  CHECK(std::abs(z[3]) < 1e-6);
}

TEST_CASE("dct2d matches the dense oracle, inverts, and preserves energy") {
  Rng rng(31);
  const int n = 8;
  Tensor x = random_tensor({4, n, n}, rng);
  Tensor z = dct2d(x);

  DCTPlan plan(n);
  Eigen::MatrixXd d = plan.basis().cast<double>();
  for (std::int64_t s = 0; s < 4; ++s) {
    Eigen::MatrixXd ref = d * slice_as_matrix(x, s, n) * d.transpose();
    CHECK(max_abs_diff(z, s, n, ref) < 1e-4);
  }

  Tensor back = idct2d(z);
  for (std::int64_t i = 0; i < x.size(); ++i)
    CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-5));

  CHECK(frob_sq(z) == doctest::Approx(frob_sq(x)).epsilon(1e-4));
}

TEST_CASE("dct2d linearity") {
  Rng rng(37);
  Tensor x = random_tensor({1, 12, 12}, rng);
  Tensor y = random_tensor({1, 12, 12}, rng);
  Tensor combo(x.shape());
  for (std::int64_t i = 0; i < combo.size(); ++i) combo[i] = 2.0f * x[i] - 0.5f * y[i];
  Tensor lhs = dct2d(combo);
  Tensor tx = dct2d(x), ty = dct2d(y);
  for (std::int64_t i = 0; i < lhs.size(); ++i)
    CHECK(lhs[i] == doctest::Approx(2.0f * tx[i] - 0.5f * ty[i]).epsilon(1e-4));
}

TEST_CASE("dct2d accepts non-power-of-two squares but not rectangles") {
  Tensor ok({1, 6, 6});
  CHECK_NOTHROW(dct2d(ok));
  CHECK_THROWS_AS(dct2d(Tensor({1, 4, 6})), Error);
}
