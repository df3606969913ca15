#include "latencut/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "latencut/threads.hpp"

namespace latencut {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes [" +
                                std::to_string(a.rows) + "," + std::to_string(a.cols) + "] and [" +
                                std::to_string(b.rows) + "," + std::to_string(b.cols) + "]");
}

void check_len(const char* op, const Matrix& x, std::span<const float> v) {
    if (static_cast<int>(v.size()) != x.cols)
        throw std::invalid_argument(std::string(op) + ": vector length " +
                                    std::to_string(v.size()) + " != cols " +
                                    std::to_string(x.cols));
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) shape_error("matmul", a, b);
    Matrix out(a.rows, b.cols);
    const int nt = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (int i = 0; i < a.rows; ++i) {
        float* o = out.row(i);
        const float* ar = a.row(i);
        for (int p = 0; p < a.cols; ++p) {
            const float s = ar[p];
            const float* br = b.row(p);
            for (int j = 0; j < b.cols; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

Matrix linear_wt(const Matrix& x, const Matrix& wt, std::span<const float> b) {
    if (x.cols != wt.rows) shape_error("linear_wt", x, wt);
    if (static_cast<int>(b.size()) != wt.cols)
        throw std::invalid_argument("linear_wt: bias length " + std::to_string(b.size()) +
                                    " != out features " + std::to_string(wt.cols));
    Matrix out = matmul(x, wt);
    for (int i = 0; i < out.rows; ++i) {
        float* o = out.row(i);
        for (int j = 0; j < out.cols; ++j) o[j] += b[j];
    }
    return out;
}

Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> b) {
    if (x.cols != w.cols) shape_error("linear", x, w);
    return linear_wt(x, transpose(w), b);
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    const int nt = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (int i = 0; i < m.rows; ++i) {
        const float* in = m.row(i);
        float* o = out.row(i);
        float mx = in[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, in[j]);
        float sum = 0.0f;
        for (int j = 0; j < m.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < m.cols; ++j) o[j] *= inv;
    }
    return out;
}

Matrix layer_norm(const Matrix& x, std::span<const float> gain, std::span<const float> bias,
                  float eps) {
    check_len("layer_norm", x, gain);
    check_len("layer_norm", x, bias);
    Matrix out(x.rows, x.cols);
    const int nt = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (int i = 0; i < x.rows; ++i) {
        const float* in = x.row(i);
        float* o = out.row(i);
        double mean = 0.0;
        for (int j = 0; j < x.cols; ++j) mean += in[j];
        mean /= x.cols;
        double var = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            const double d = in[j] - mean;
            var += d * d;
        }
        var /= x.cols;
        const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
        const float mu = static_cast<float>(mean);
        for (int j = 0; j < x.cols; ++j) o[j] = (in[j] - mu) * inv * gain[j] + bias[j];
    }
    return out;
}

Matrix gelu(const Matrix& x) {
    constexpr float k = 0.7978845608028654f; // sqrt(2/pi)
    Matrix out(x.rows, x.cols);
    const int nt = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (int i = 0; i < x.rows; ++i) {
        const float* in = x.row(i);
        float* o = out.row(i);
        for (int j = 0; j < x.cols; ++j) {
            const float v = in[j];
            o[j] = 0.5f * v * (1.0f + std::tanh(k * (v + 0.044715f * v * v * v)));
        }
    }
    return out;
}

Matrix tanh_map(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const float* in = x.row(i);
        float* o = out.row(i);
        for (int j = 0; j < x.cols; ++j) o[j] = std::tanh(in[j]);
    }
    return out;
}

void add_inplace(Matrix& x, const Matrix& y) {
    if (x.rows != y.rows || x.cols != y.cols) shape_error("add_inplace", x, y);
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += y.data[i];
}

Matrix gather_rows(const Matrix& m, std::span<const int> idx) {
    Matrix out(static_cast<int>(idx.size()), m.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        const int r = idx[i];
        if (r < 0 || r >= m.rows)
            throw std::out_of_range("gather_rows: index " + std::to_string(r) + " out of [0," +
                                    std::to_string(m.rows) + ")");
        std::memcpy(out.row(static_cast<int>(i)), m.row(r), sizeof(float) * m.cols);
    }
    return out;
}

} // namespace latencut
