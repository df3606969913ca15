#include "latencut/acc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace latencut {

ScoreVector score_vector(const AttentionProbs& probs, Mode mode) {
    const int heads = probs.head_count();
    if (heads == 0) throw std::invalid_argument("score_vector: no heads");
    const int t = probs.seq_len();
    ScoreVector sv;
    sv.values.assign(static_cast<size_t>(t), 0.0);
    for (const Matrix& pm : probs.heads) {
        if (pm.rows != t || pm.cols != t)
            throw std::invalid_argument("score_vector: ragged head shapes");
        for (int i = 0; i < t; ++i) {
            const float* row = pm.row(i);
            for (int j = 0; j < t; ++j) sv.values[static_cast<size_t>(j)] += row[j];
        }
    }
    for (double& v : sv.values) v /= heads;
    if (mode == Mode::decoder) {
        // structural support of column i under a full causal mask
        for (int i = 0; i < t; ++i) sv.values[static_cast<size_t>(i)] /= t - i;
    }
    return sv;
}

double acc_of_layer(const ScoreVector& sv) {
    if (sv.values.empty()) throw std::invalid_argument("acc_of_layer: empty score vector");
    std::vector<double> sorted = sv.values;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    if (n % 2 == 1) return sorted[n / 2];
    return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

AccProfile fit_quadratic(std::span<const double> e_acc) {
    const int l = static_cast<int>(e_acc.size());
    if (l == 0) throw std::invalid_argument("fit_quadratic: no layers");
    AccProfile p;
    p.e_acc.assign(e_acc.begin(), e_acc.end());

    if (l < 3) {
        double mean = 0.0;
        for (double v : e_acc) mean += v;
        p.fit_c = mean / l;
        p.degenerate_fit = true;
    } else {
        // normal equations for min ||a x^2 + b x + c - y||, x = 1..L
        double s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
        for (int i = 1; i <= l; ++i) {
            const double x = i, y = e_acc[static_cast<size_t>(i - 1)];
            s1 += x;
            s2 += x * x;
            s3 += x * x * x;
            s4 += x * x * x * x;
            t0 += y;
            t1 += x * y;
            t2 += x * x * y;
        }
        double m[3][4] = {{s4, s3, s2, t2}, {s3, s2, s1, t1}, {s2, s1, double(l), t0}};
        for (int col = 0; col < 3; ++col) { // Gaussian elimination, partial pivot
            int pivot = col;
            for (int r = col + 1; r < 3; ++r)
                if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
            std::swap(m[col], m[pivot]);
            for (int r = 0; r < 3; ++r) {
                if (r == col) continue;
                const double f = m[r][col] / m[col][col];
                for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
            }
        }
        p.fit_a = m[0][3] / m[0][0];
        p.fit_b = m[1][3] / m[1][1];
        p.fit_c = m[2][3] / m[2][2];
    }

    p.p_acc.resize(static_cast<size_t>(l));
    for (int i = 1; i <= l; ++i)
        p.p_acc[static_cast<size_t>(i - 1)] = p.fit_a * i * i + p.fit_b * i + p.fit_c;
    return p;
}

nlohmann::json profile_to_json(const AccProfile& p) {
    return {{"layers", p.layers()},
            {"e_acc", p.e_acc},
            {"fit", {{"a", p.fit_a}, {"b", p.fit_b}, {"c", p.fit_c}}},
            {"p_acc", p.p_acc},
            {"degenerate_fit", p.degenerate_fit}};
}

AccProfile profile_from_json(const nlohmann::json& j) {
    AccProfile p;
    p.e_acc = j.at("e_acc").get<std::vector<double>>();
    p.fit_a = j.at("fit").at("a").get<double>();
    p.fit_b = j.at("fit").at("b").get<double>();
    p.fit_c = j.at("fit").at("c").get<double>();
    p.p_acc = j.at("p_acc").get<std::vector<double>>();
    p.degenerate_fit = j.value("degenerate_fit", false);
    if (j.at("layers").get<int>() != p.layers() || p.p_acc.size() != p.e_acc.size())
        throw std::invalid_argument("profile JSON: inconsistent lengths");
    return p;
}

std::string profile_to_csv(const AccProfile& p) {
    std::ostringstream out;
    out.precision(17);
    out << "layer,e_acc,p_acc\n";
    for (int i = 0; i < p.layers(); ++i)
        out << (i + 1) << ',' << p.e_acc[static_cast<size_t>(i)] << ','
            << p.p_acc[static_cast<size_t>(i)] << '\n';
    return out.str();
}

} // namespace latencut
