#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sgmatch/objectives.hpp"
#include "sgmatch/rng.hpp"

using namespace sgmatch;

TEST_CASE("similarity: self, orthogonal, antipodal, zero vector") {
  Tensor<double> u({3});
  u[0] = 2.0;
  u[1] = 0.0;
  u[2] = 0.0;
  Tensor<double> v({3});
  v[0] = 0.0;
  v[1] = 5.0;
  v[2] = 0.0;
  CHECK(similarity(u, u) == doctest::Approx(1.0));
  CHECK(similarity(u, v) == doctest::Approx(0.0));
  Tensor<double> nu = u;
  nu[0] = -2.0;
  CHECK(similarity(u, nu) == doctest::Approx(-1.0));

  Tensor<double> zero({3});
  CHECK_THROWS_AS(similarity(u, zero), ZeroVector);
  Tensor<double> longer({4});
  CHECK_THROWS_AS(similarity(u, longer), ShapeMismatch);
}

TEST_CASE("hinge loss worked values") {
  CHECK(hinge_loss(0.5, 0.5, 0.2) == doctest::Approx(0.2));
  CHECK(hinge_loss(0.7, 0.5, 0.2) == doctest::Approx(0.0));
  CHECK(hinge_loss(1.0, 0.0, 0.2) == doctest::Approx(0.0));
  CHECK(hinge_loss(0.0, 0.5, 0.2) == doctest::Approx(0.7));
}

TEST_CASE("property: hinge nonnegative, zero iff margin satisfied") {
  SeededRng rng(8);
  for (int i = 0; i < 1000; ++i) {
    double d = rng.normal();
    double dn = rng.normal();
    double margin = std::fabs(rng.normal());
    double h = hinge_loss(d, dn, margin);
    CHECK(h >= 0.0);
    if (d - dn >= margin)
      CHECK(h == doctest::Approx(0.0));
    else
      CHECK(h > 0.0);
  }
}

TEST_CASE("info_nce: single element, uniform matrix, identity closed form") {
  SimilarityMatrix<double> one{Tensor<double>({1, 1}, 0.37), 0.07};
  InfoNceLosses l1 = info_nce(one);
  CHECK(l1.i2t == doctest::Approx(0.0));
  CHECK(l1.t2i == doctest::Approx(0.0));
  CHECK(l1.itcl == doctest::Approx(0.0));

  for (std::size_t n : {2, 3, 5, 8}) {
    SimilarityMatrix<double> uni{Tensor<double>({n, n}, 0.25), 0.5};
    InfoNceLosses lu = info_nce(uni);
    CHECK(lu.i2t == doctest::Approx(std::log(double(n))).epsilon(1e-9));
    CHECK(lu.t2i == doctest::Approx(std::log(double(n))).epsilon(1e-9));
  }

  // N=2 identity similarities at tau=1: -log(e / (e + 1)) = ln(1 + e^-1)
  Tensor<double> eye({2, 2});
  eye.at(0, 0) = 1.0;
  eye.at(1, 1) = 1.0;
  SimilarityMatrix<double> sim{eye, 1.0};
  InfoNceLosses le = info_nce(sim);
  const double expected = std::log(1.0 + std::exp(-1.0));  // 0.31326168...
  CHECK(le.i2t == doctest::Approx(expected).epsilon(1e-9));
  CHECK(le.t2i == doctest::Approx(expected).epsilon(1e-9));
  CHECK(le.itcl == doctest::Approx(expected).epsilon(1e-9));
  CHECK(std::fabs(le.i2t - 0.31326168751822286) < 1e-5);
}

TEST_CASE("property: row/column shift invariance of the logits") {
  SeededRng rng(31);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 2 + rng.uniform_index(4);
    Tensor<double> s({n, n});
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.normal() * 0.5;
    const double tau = 0.1 + rng.uniform();
    InfoNceLosses base = info_nce(SimilarityMatrix<double>{s, tau});

    // adding tau * c_i to row i leaves the i2t term unchanged
    Tensor<double> rows = s;
    std::vector<double> row_shift(n);
    for (std::size_t i = 0; i < n; ++i) row_shift[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) rows.at(i, j) += tau * row_shift[i];
    InfoNceLosses shifted = info_nce(SimilarityMatrix<double>{rows, tau});
    CHECK(shifted.i2t == doctest::Approx(base.i2t).epsilon(1e-9));

    // adding tau * c_j to column j leaves the t2i term unchanged
    Tensor<double> cols = s;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cols.at(i, j) += tau * row_shift[j];
    InfoNceLosses shifted_c = info_nce(SimilarityMatrix<double>{cols, tau});
    CHECK(shifted_c.t2i == doctest::Approx(base.t2i).epsilon(1e-9));
  }
}

TEST_CASE("property: symmetric similarity matrix gives i2t == t2i") {
  SeededRng rng(47);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 2 + rng.uniform_index(4);
    Tensor<double> s({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double v = rng.normal();
        s.at(i, j) = v;
        s.at(j, i) = v;
      }
    InfoNceLosses l = info_nce(SimilarityMatrix<double>{s, 0.2});
    CHECK(l.i2t == doctest::Approx(l.t2i).epsilon(1e-12));
  }
}

TEST_CASE("tau to zero drives the loss to zero for dominant diagonals") {
  SeededRng rng(53);
  Tensor<double> s({4, 4});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform() * 0.3;
  for (std::size_t i = 0; i < 4; ++i) s.at(i, i) = 0.9;  // unique maxima
  InfoNceLosses l = info_nce(SimilarityMatrix<double>{s, 1e-3});
  CHECK(l.i2t < 1e-3);
  CHECK(l.t2i < 1e-3);
  CHECK(l.itcl < 1e-3);
}

TEST_CASE("rectangular similarity: extra negative columns enter i2t only") {
  // 2 images x 3 texts; the third column is a negative with no image
  Tensor<double> s({2, 3});
  s.at(0, 0) = 0.8;
  s.at(0, 1) = 0.1;
  s.at(0, 2) = 0.5;
  s.at(1, 0) = 0.0;
  s.at(1, 1) = 0.9;
  s.at(1, 2) = 0.2;
  SimilarityMatrix<double> sim{s, 1.0};
  InfoNceLosses l = info_nce(sim);

  auto row_loss = [&](std::size_t i) {
    double z = 0.0;
    for (std::size_t j = 0; j < 3; ++j) z += std::exp(s.at(i, j));
    return -(s.at(i, i) - std::log(z));
  };
  CHECK(l.i2t == doctest::Approx(0.5 * (row_loss(0) + row_loss(1))));

  auto col_loss = [&](std::size_t j) {
    double z = 0.0;
    for (std::size_t i = 0; i < 2; ++i) z += std::exp(s.at(i, j));
    return -(s.at(j, j) - std::log(z));
  };
  CHECK(l.t2i == doctest::Approx(0.5 * (col_loss(0) + col_loss(1))));

  Tensor<double> narrow({2, 1});
  CHECK_THROWS_AS(info_nce(SimilarityMatrix<double>{narrow, 1.0}),
                  ShapeMismatch);
}

TEST_CASE("final loss worked values") {
  CHECK(final_loss({}, 0.42) == doctest::Approx(0.42));
  CHECK(final_loss({0.0, 0.0}, 0.42) == doctest::Approx(0.42));
  CHECK(final_loss({0.1, 0.1, 0.1}, 0.5) == doctest::Approx(0.6));
  CHECK(final_loss({0.3}, 0.0) == doctest::Approx(0.3));
}
