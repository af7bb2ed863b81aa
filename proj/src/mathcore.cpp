#include "fscil/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fscil {

namespace {

void require_same_size(const Vec64& a, const Vec64& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch");
  }
}

}  // namespace

double dot(const Vec64& a, const Vec64& b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const Vec64& a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(const Vec64& a, const Vec64& b) {
  require_same_size(a, b, "cosine_similarity");
  const double denom = std::max(norm(a) * norm(b), kCosineEps);
  return dot(a, b) / denom;
}

Vec64 stable_softmax(const Vec64& logits) {
  if (logits.empty()) throw std::invalid_argument("stable_softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec64 out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec64 linear_forward(const Mat64& weights, const Vec64& bias, const Vec64& x) {
  if (weights.cols != x.size() || weights.rows != bias.size()) {
    throw std::invalid_argument("linear_forward: dimension mismatch");
  }
  Vec64 out(bias);
  for (std::size_t r = 0; r < weights.rows; ++r) {
    double acc = 0.0;
    const double* wr = &weights.values[r * weights.cols];
    for (std::size_t c = 0; c < weights.cols; ++c) acc += wr[c] * x[c];
    out[r] += acc;
  }
  return out;
}

void cosine_backward(const Vec64& a, const Vec64& b, double upstream,
                     Vec64& grad_a, Vec64& grad_b) {
  require_same_size(a, b, "cosine_backward");
  if (grad_a.size() != a.size() || grad_b.size() != b.size()) {
    throw std::invalid_argument("cosine_backward: gradient size mismatch");
  }
  const double na = norm(a);
  const double nb = norm(b);
  const double prod = na * nb;
  if (prod <= kCosineEps) {
    // Degenerate branch: forward is dot(a,b)/kCosineEps, linear in each arg.
    for (std::size_t i = 0; i < a.size(); ++i) {
      grad_a[i] += upstream * b[i] / kCosineEps;
      grad_b[i] += upstream * a[i] / kCosineEps;
    }
    return;
  }
  const double s = dot(a, b) / prod;
  for (std::size_t i = 0; i < a.size(); ++i) {
    grad_a[i] += upstream * (b[i] / prod - s * a[i] / (na * na));
    grad_b[i] += upstream * (a[i] / prod - s * b[i] / (nb * nb));
  }
}

void linear_backward(const Mat64& weights, const Vec64& x, const Vec64& grad_out,
                     Mat64& grad_weights, Vec64& grad_bias, Vec64& grad_x) {
  if (grad_out.size() != weights.rows || x.size() != weights.cols ||
      grad_weights.rows != weights.rows || grad_weights.cols != weights.cols ||
      grad_bias.size() != weights.rows || grad_x.size() != weights.cols) {
    throw std::invalid_argument("linear_backward: dimension mismatch");
  }
  for (std::size_t r = 0; r < weights.rows; ++r) {
    const double g = grad_out[r];
    grad_bias[r] += g;
    double* gw = &grad_weights.values[r * weights.cols];
    const double* wr = &weights.values[r * weights.cols];
    for (std::size_t c = 0; c < weights.cols; ++c) {
      gw[c] += g * x[c];
      grad_x[c] += g * wr[c];
    }
  }
}

}  // namespace fscil
