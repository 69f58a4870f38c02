#pragma once

#include <cmath>
#include <vector>

#include "sgmatch/ops.hpp"
#include "sgmatch/tensor.hpp"

namespace sgmatch {

// Pairwise cosine scores of unit-normalized embeddings. values may be
// rectangular [N x M] with M >= N when extra negative texts extend the
// columns; entry (i, j) pairs image i with text j and matches sit on the
// diagonal.
template <typename T>
struct SimilarityMatrix {
  Tensor<T> values;
  double temperature = 0.07;
};

// Cosine similarity of two non-zero vectors.
template <typename T>
double similarity(const Tensor<T>& u, const Tensor<T>& v) {
  if (u.size() != v.size())
    throw ShapeMismatch("similarity: " + u.shape_str() + " vs " +
                        v.shape_str());
  Tensor<T> un = l2_normalize(u);
  Tensor<T> vn = l2_normalize(v);
  double dot = 0.0;
  for (std::size_t i = 0; i < un.size(); ++i)
    dot += static_cast<double>(un[i]) * static_cast<double>(vn[i]);
  return dot;
}

// max(0, margin - d + d_neg): zero once the matched pair beats the negative
// by at least the margin.
inline double hinge_loss(double d, double d_neg, double margin) {
  return std::max(0.0, margin - d + d_neg);
}

struct InfoNceLosses {
  double i2t = 0.0;
  double t2i = 0.0;
  double itcl = 0.0;
};

// Symmetric in-batch contrastive loss. Rows give the image-to-text term
// (softmax over all M texts), columns give the text-to-image term (softmax
// over the N images, texts beyond N have no matching image). Both use
// max-subtracted log-sum-exp.
template <typename T>
InfoNceLosses info_nce(const SimilarityMatrix<T>& sim) {
  const Tensor<T>& s = sim.values;
  const std::size_t n = s.rows(), m = s.cols();
  if (n == 0 || m < n)
    throw ShapeMismatch("info_nce: needs N x M with M >= N, got " +
                        s.shape_str());
  const double tau = sim.temperature;
  InfoNceLosses out;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      mx = std::max(mx, static_cast<double>(s.at(i, j)) / tau);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      z += std::exp(static_cast<double>(s.at(i, j)) / tau - mx);
    out.i2t += -(static_cast<double>(s.at(i, i)) / tau - mx - std::log(z));
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      mx = std::max(mx, static_cast<double>(s.at(i, j)) / tau);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      z += std::exp(static_cast<double>(s.at(i, j)) / tau - mx);
    out.t2i += -(static_cast<double>(s.at(j, j)) / tau - mx - std::log(z));
  }
  out.i2t /= static_cast<double>(n);
  out.t2i /= static_cast<double>(n);
  out.itcl = 0.5 * (out.i2t + out.t2i);
  return out;
}

// Gradient of scale * L_ITCL with respect to the similarity entries,
// accumulated into ds.
template <typename T>
void info_nce_backward(const SimilarityMatrix<T>& sim, double scale,
                       Tensor<T>& ds) {
  const Tensor<T>& s = sim.values;
  const std::size_t n = s.rows(), m = s.cols();
  const double tau = sim.temperature;
  const double row_scale = scale * 0.5 / (static_cast<double>(n) * tau);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      mx = std::max(mx, static_cast<double>(s.at(i, j)) / tau);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      z += std::exp(static_cast<double>(s.at(i, j)) / tau - mx);
    for (std::size_t j = 0; j < m; ++j) {
      double p = std::exp(static_cast<double>(s.at(i, j)) / tau - mx) / z;
      ds.at(i, j) += static_cast<T>(row_scale * (p - (i == j ? 1.0 : 0.0)));
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      mx = std::max(mx, static_cast<double>(s.at(i, j)) / tau);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      z += std::exp(static_cast<double>(s.at(i, j)) / tau - mx);
    for (std::size_t i = 0; i < n; ++i) {
      double q = std::exp(static_cast<double>(s.at(i, j)) / tau - mx) / z;
      ds.at(i, j) += static_cast<T>(row_scale * (q - (i == j ? 1.0 : 0.0)));
    }
  }
}

// Mean of the available hinge terms plus the contrastive loss. Samples
// without a usable negative contribute nothing to the hinge mean.
inline double final_loss(const std::vector<double>& batch_hinge_losses,
                         double itcl) {
  if (batch_hinge_losses.empty()) return itcl;
  double sum = 0.0;
  for (double h : batch_hinge_losses) sum += h;
  return sum / static_cast<double>(batch_hinge_losses.size()) + itcl;
}

}  // namespace sgmatch
