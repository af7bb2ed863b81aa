#pragma once

#include <cstddef>
#include <vector>

namespace fscil {

// Dense vector of 64-bit floats. Public operations never emit NaN/Inf.
using Vec64 = std::vector<double>;

// Row-major dense matrix.
struct Mat64 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Mat64() = default;
  Mat64(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Guard against zero-norm vectors in cosine denominators.
inline constexpr double kCosineEps = 1e-8;

double dot(const Vec64& a, const Vec64& b);
double norm(const Vec64& a);

// dot(a,b) / max(|a|*|b|, kCosineEps). Parallel vectors score 1 to within
// rounding; an all-zero vector scores 0 against anything.
double cosine_similarity(const Vec64& a, const Vec64& b);

// Softmax with max-subtraction. Output sums to 1; safe for logits up to
// +-1e3 in magnitude. Throws on empty input.
Vec64 stable_softmax(const Vec64& logits);

// weights * x + bias. Throws on dimension mismatch.
Vec64 linear_forward(const Mat64& weights, const Vec64& bias, const Vec64& x);

// Gradients of cosine_similarity scaled by `upstream`, accumulated into
// grad_a / grad_b. Matches the eps-guarded forward exactly.
void cosine_backward(const Vec64& a, const Vec64& b, double upstream,
                     Vec64& grad_a, Vec64& grad_b);

// Gradients of linear_forward: accumulates d(loss)/dW and d(loss)/db given
// grad_out = d(loss)/d(Wx+b), and adds W^T * grad_out into grad_x.
void linear_backward(const Mat64& weights, const Vec64& x, const Vec64& grad_out,
                     Mat64& grad_weights, Vec64& grad_bias, Vec64& grad_x);

}  // namespace fscil
