#include "reference.hpp"

#include <cmath>
#include <stdexcept>

namespace latencut::ref {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("ref::matmul: shape mismatch");
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < a.cols; ++p) acc += a.at(i, p) * b.at(p, j);
            out.at(i, j) = acc;
        }
    return out;
}

Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> b) {
    if (x.cols != w.cols || static_cast<int>(b.size()) != w.rows)
        throw std::invalid_argument("ref::linear: shape mismatch");
    Matrix out(x.rows, w.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < w.rows; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < x.cols; ++p) acc += x.at(i, p) * w.at(j, p);
            out.at(i, j) = acc + b[j];
        }
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        float mx = m.at(i, 0);
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m.at(i, j));
        float sum = 0.0f;
        for (int j = 0; j < m.cols; ++j) {
            out.at(i, j) = std::exp(m.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (int j = 0; j < m.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

Matrix layer_norm(const Matrix& x, std::span<const float> gain, std::span<const float> bias,
                  float eps) {
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < x.cols; ++j) mean += x.at(i, j);
        mean /= x.cols;
        double var = 0.0;
        for (int j = 0; j < x.cols; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
        var /= x.cols;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < x.cols; ++j)
            out.at(i, j) = static_cast<float>((x.at(i, j) - mean) * inv) * gain[j] + bias[j];
    }
    return out;
}

Matrix gelu(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) {
            const double v = x.at(i, j);
            out.at(i, j) = static_cast<float>(
                0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v))));
        }
    return out;
}

Matrix head_probs(const Matrix& q, const Matrix& k, bool causal) {
    if (q.cols != k.cols || q.rows != k.rows)
        throw std::invalid_argument("ref::head_probs: shape mismatch");
    const int t = q.rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    Matrix probs(t, t);
    for (int i = 0; i < t; ++i) {
        const int limit = causal ? i + 1 : t;
        double mx = -1e300;
        std::vector<double> s(static_cast<size_t>(limit));
        for (int j = 0; j < limit; ++j) {
            double dot = 0.0;
            for (int p = 0; p < q.cols; ++p)
                dot += static_cast<double>(q.at(i, p)) * static_cast<double>(k.at(j, p));
            s[j] = dot * scale;
            mx = std::max(mx, s[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < limit; ++j) {
            s[j] = std::exp(s[j] - mx);
            sum += s[j];
        }
        for (int j = 0; j < limit; ++j) probs.at(i, j) = static_cast<float>(s[j] / sum);
        // columns >= limit stay exactly zero
    }
    return probs;
}

Matrix head_context(const Matrix& probs, const Matrix& v) {
    return ref::matmul(probs, v);
}

} // namespace latencut::ref
