#include "latencut/attention.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "latencut/acc.hpp"
#include "latencut/threads.hpp"

namespace latencut {

const char* to_string(Policy p) {
    switch (p) {
    case Policy::sv_sort: return "sv_sort";
    case Policy::random_sort: return "random_sort";
    case Policy::tail_truncate: return "tail_truncate";
    }
    return "unknown";
}

const char* to_string(Placement p) {
    return p == Placement::post_concat ? "post_concat" : "mid_attention";
}

namespace {

Matrix col_block(const Matrix& m, int c0, int cols) {
    Matrix out(m.rows, cols);
    for (int i = 0; i < m.rows; ++i) {
        const float* src = m.row(i) + c0;
        std::copy(src, src + cols, out.row(i));
    }
    return out;
}

void check_hidden(const Matrix& hidden, const ModelConfig& config) {
    if (hidden.rows < 1) throw std::invalid_argument("attention: empty sequence");
    if (hidden.cols != config.hidden_size)
        throw std::invalid_argument("attention: hidden width " + std::to_string(hidden.cols) +
                                    " != hidden_size " + std::to_string(config.hidden_size));
}

} // namespace

EncoderLayerWeights prepare_layer(const ModelConfig& config, const WeightStore& store, int layer) {
    if (layer < 0 || layer >= config.num_layers)
        throw std::out_of_range("prepare_layer: layer " + std::to_string(layer) + " out of range");
    const std::string p = "enc." + std::to_string(layer) + ".";
    auto vec = [&](const std::string& name) {
        const Matrix& m = store.get(name);
        return std::vector<float>(m.data.begin(), m.data.end());
    };
    EncoderLayerWeights lw;
    lw.q_w = transpose(store.get(p + "att.q.w"));
    lw.k_w = transpose(store.get(p + "att.k.w"));
    lw.v_w = transpose(store.get(p + "att.v.w"));
    lw.o_w = transpose(store.get(p + "att.o.w"));
    lw.q_b = vec(p + "att.q.b");
    lw.k_b = vec(p + "att.k.b");
    lw.v_b = vec(p + "att.v.b");
    lw.o_b = vec(p + "att.o.b");
    lw.ln1_g = vec(p + "ln1.g");
    lw.ln1_b = vec(p + "ln1.b");
    lw.ffn_w1 = transpose(store.get(p + "ffn.w1"));
    lw.ffn_b1 = vec(p + "ffn.b1");
    lw.ffn_w2 = transpose(store.get(p + "ffn.w2"));
    lw.ffn_b2 = vec(p + "ffn.b2");
    lw.ln2_g = vec(p + "ln2.g");
    lw.ln2_b = vec(p + "ln2.b");
    return lw;
}

AttentionProbs attention_probs(const Matrix& hidden, const EncoderLayerWeights& lw,
                               const ModelConfig& config, Mode mode) {
    check_hidden(hidden, config);
    const int t = hidden.rows;
    const int heads = config.num_heads;
    const int d = config.head_dim();
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    const bool causal = mode == Mode::decoder;

    const Matrix q = linear_wt(hidden, lw.q_w, lw.q_b);
    const Matrix k = linear_wt(hidden, lw.k_w, lw.k_b);

    AttentionProbs probs;
    probs.heads.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Matrix qh = col_block(q, h * d, d);
        const Matrix kh_t = transpose(col_block(k, h * d, d));
        const Matrix scores = matmul(qh, kh_t); // t×t

        Matrix pm(t, t); // rows masked beyond the prefix stay exactly 0
        const int nt = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
        for (int i = 0; i < t; ++i) {
            const int limit = causal ? i + 1 : t;
            const float* srow = scores.row(i);
            float* prow = pm.row(i);
            float mx = srow[0] * scale;
            for (int j = 1; j < limit; ++j) mx = std::max(mx, srow[j] * scale);
            float sum = 0.0f;
            for (int j = 0; j < limit; ++j) {
                prow[j] = std::exp(srow[j] * scale - mx);
                sum += prow[j];
            }
            const float inv = 1.0f / sum;
            for (int j = 0; j < limit; ++j) prow[j] *= inv;
        }
        probs.heads.push_back(std::move(pm));
    }
    return probs;
}

Matrix concat_head_contexts(const AttentionProbs& probs, const Matrix& v_heads) {
    const int t = probs.seq_len();
    const int heads = probs.head_count();
    if (heads == 0 || v_heads.rows != t || v_heads.cols % heads != 0)
        throw std::invalid_argument("concat_head_contexts: probs/values shape mismatch");
    const int d = v_heads.cols / heads;
    Matrix out(t, v_heads.cols);
    for (int h = 0; h < heads; ++h) {
        const Matrix ctx = matmul(probs.heads[h], col_block(v_heads, h * d, d));
        for (int i = 0; i < t; ++i)
            std::copy(ctx.row(i), ctx.row(i) + d, out.row(i) + h * d);
    }
    return out;
}

Matrix attention_context(const AttentionProbs& probs, const Matrix& v_heads, const Matrix& o_w,
                         std::span<const float> o_b) {
    return linear_wt(concat_head_contexts(probs, v_heads), o_w, o_b);
}

std::vector<int> select_positions(const ScoreVector& scores, int keep,
                                  std::span<const int> pinned, Policy policy, uint64_t seed) {
    const int t = scores.length();
    if (keep < 1 || keep > t)
        throw std::invalid_argument("select_positions: keep " + std::to_string(keep) +
                                    " outside [1," + std::to_string(t) + "]");
    std::vector<int> pins(pinned.begin(), pinned.end());
    std::sort(pins.begin(), pins.end());
    pins.erase(std::unique(pins.begin(), pins.end()), pins.end());
    for (int p : pins)
        if (p < 0 || p >= t)
            throw std::invalid_argument("select_positions: pinned position " + std::to_string(p) +
                                        " outside [0," + std::to_string(t) + ")");
    if (static_cast<int>(pins.size()) > keep)
        throw std::invalid_argument("select_positions: keep " + std::to_string(keep) +
                                    " smaller than " + std::to_string(pins.size()) +
                                    " pinned positions");

    std::vector<char> is_pinned(static_cast<size_t>(t), 0);
    for (int p : pins) is_pinned[static_cast<size_t>(p)] = 1;
    std::vector<int> rest;
    rest.reserve(static_cast<size_t>(t) - pins.size());
    for (int i = 0; i < t; ++i)
        if (!is_pinned[static_cast<size_t>(i)]) rest.push_back(i);

    const int fill = keep - static_cast<int>(pins.size());
    std::vector<int> kept = pins;
    switch (policy) {
    case Policy::sv_sort:
        std::sort(rest.begin(), rest.end(), [&](int a, int b) {
            if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
            return a < b; // ties -> lower original position
        });
        kept.insert(kept.end(), rest.begin(), rest.begin() + fill);
        break;
    case Policy::random_sort: {
        std::mt19937_64 rng(seed);
        for (int i = 0; i < fill; ++i) {
            const size_t j = i + rng() % (rest.size() - i);
            std::swap(rest[i], rest[j]);
        }
        kept.insert(kept.end(), rest.begin(), rest.begin() + fill);
        break;
    }
    case Policy::tail_truncate:
        kept.insert(kept.end(), rest.begin(), rest.begin() + fill);
        break;
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::pair<EliminationOutcome, Matrix> sort_eliminate(const Matrix& context,
                                                     const Matrix& residual_in,
                                                     const ScoreVector& scores, int keep,
                                                     std::span<const int> pinned, Policy policy,
                                                     uint64_t seed) {
    if (context.rows != scores.length() || residual_in.rows != context.rows)
        throw std::invalid_argument("sort_eliminate: rows of context/residual/scores disagree");
    EliminationOutcome outcome;
    outcome.kept_indices = select_positions(scores, keep, pinned, policy, seed);
    outcome.context = gather_rows(context, outcome.kept_indices);
    outcome.scores_used = scores;
    Matrix residual_out = gather_rows(residual_in, outcome.kept_indices);
    return {std::move(outcome), std::move(residual_out)};
}

ProposedAttentionResult proposed_attention_forward(const Matrix& hidden, const Matrix& residual_in,
                                                   const EncoderLayerWeights& lw,
                                                   const ModelConfig& config, Mode mode, int keep,
                                                   std::span<const int> pinned, Policy policy,
                                                   Placement placement, uint64_t seed) {
    check_hidden(hidden, config);
    if (residual_in.rows != hidden.rows || residual_in.cols != hidden.cols)
        throw std::invalid_argument("proposed_attention_forward: residual shape mismatch");

    const AttentionProbs probs = attention_probs(hidden, lw, config, mode);
    const Matrix v = linear_wt(hidden, lw.v_w, lw.v_b);
    ProposedAttentionResult r;
    r.scores = score_vector(probs, mode);
    const Matrix concat = concat_head_contexts(probs, v);

    if (placement == Placement::mid_attention) {
        auto [outcome, residual_out] =
            sort_eliminate(concat, residual_in, r.scores, keep, pinned, policy, seed);
        r.output = linear_wt(outcome.context, lw.o_w, lw.o_b);
        r.residual_out = std::move(residual_out);
        r.outcome = std::move(outcome);
    } else {
        const Matrix full = linear_wt(concat, lw.o_w, lw.o_b);
        auto [outcome, residual_out] =
            sort_eliminate(full, residual_in, r.scores, keep, pinned, policy, seed);
        r.output = outcome.context;
        r.residual_out = std::move(residual_out);
        r.outcome = std::move(outcome);
    }
    return r;
}

} // namespace latencut
