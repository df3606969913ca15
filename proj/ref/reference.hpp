#pragma once

// Naive serial implementations of the tensor kernels, written for obviousness
// rather than speed. Tests compare the optimised kernels against these, and
// the benchmark target measures the gap. Not linked into the main library.

#include <span>

#include "latencut/tensor.hpp"

namespace latencut::ref {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> b);
Matrix softmax_rows(const Matrix& m);
Matrix layer_norm(const Matrix& x, std::span<const float> gain, std::span<const float> bias,
                  float eps);
Matrix gelu(const Matrix& x);

// One attention head end to end: probs[t,t] = softmax(q k^T / sqrt(d)), then
// probs * v. Row-level loops only; used as the oracle for the attention module.
Matrix head_probs(const Matrix& q, const Matrix& k, bool causal);
Matrix head_context(const Matrix& probs, const Matrix& v);

} // namespace latencut::ref
