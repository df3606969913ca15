#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace latencut {

// Dense row-major float32 matrix. This is the only tensor type in the engine;
// 1-D parameters (biases, layer-norm gains) travel as std::span<const float>.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }
    std::span<const float> span() const { return {data.data(), data.size()}; }

    bool operator==(const Matrix&) const = default;
};

// a[m,k] * b[k,n] -> [m,n]. Accumulates along k in ascending order for every
// output element, so results are bitwise identical for any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// x * w^T + b with w stored [out, in] — the layout weight files use.
Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> b);

// Same product with the weight already transposed to [in, out]. The model
// runner transposes each weight once after load and calls this in the hot
// path; it performs the identical accumulation order as linear().
Matrix linear_wt(const Matrix& x, const Matrix& wt, std::span<const float> b);

// Row-wise softmax with max subtraction. Every row sums to 1.
Matrix softmax_rows(const Matrix& m);

// Per-row mean/variance normalisation followed by elementwise gain and bias.
// Row statistics accumulate in double.
Matrix layer_norm(const Matrix& x, std::span<const float> gain, std::span<const float> bias,
                  float eps);

// 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3))), elementwise.
Matrix gelu(const Matrix& x);

// Elementwise tanh (pooler activation).
Matrix tanh_map(const Matrix& x);

// x += y, elementwise; shapes must match.
void add_inplace(Matrix& x, const Matrix& y);

// New matrix holding rows m[idx[0]], m[idx[1]], ... in the given order.
Matrix gather_rows(const Matrix& m, std::span<const int> idx);

} // namespace latencut
