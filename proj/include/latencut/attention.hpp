#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "latencut/model.hpp"
#include "latencut/score.hpp"
#include "latencut/tensor.hpp"

namespace latencut {

// Per-head attention probabilities; each entry is a T×T row-stochastic
// matrix. In causal mode entries above the diagonal are exactly zero.
struct AttentionProbs {
    std::vector<Matrix> heads;

    int head_count() const { return static_cast<int>(heads.size()); }
    int seq_len() const { return heads.empty() ? 0 : heads[0].rows; }
};

// One encoder block's parameters with the projection matrices transposed to
// [in, out] so the forward path multiplies without further reshaping.
struct EncoderLayerWeights {
    Matrix q_w, k_w, v_w, o_w; // transposed
    std::vector<float> q_b, k_b, v_b, o_b;
    std::vector<float> ln1_g, ln1_b;
    Matrix ffn_w1, ffn_w2; // transposed
    std::vector<float> ffn_b1, ffn_b2;
    std::vector<float> ln2_g, ln2_b;
};

EncoderLayerWeights prepare_layer(const ModelConfig& config, const WeightStore& store, int layer);

// Which positions survive an elimination step and what their gathered
// context looks like.
struct EliminationOutcome {
    std::vector<int> kept_indices; // strictly ascending original positions
    Matrix context;                // kept rows of the eliminated matrix
    ScoreVector scores_used;
};

enum class Policy { sv_sort, random_sort, tail_truncate };
enum class Placement { post_concat, mid_attention };

const char* to_string(Policy p);
const char* to_string(Placement p);

// Softmax(QK^T / sqrt(d)) per head; causal mask applied before the softmax in
// decoder mode (probabilities above the diagonal are structurally zero).
AttentionProbs attention_probs(const Matrix& hidden, const EncoderLayerWeights& lw,
                               const ModelConfig& config, Mode mode);

// Per-head probs·V laid side by side: column block h holds head h's context.
Matrix concat_head_contexts(const AttentionProbs& probs, const Matrix& v_heads);

// Standard attention output: concat of per-head contexts, then the output
// projection (o_w transposed [in, out], bias o_b).
Matrix attention_context(const AttentionProbs& probs, const Matrix& v_heads, const Matrix& o_w,
                         std::span<const float> o_b);

// Selection rule shared by all policies. Returns ascending original indices:
//   sv_sort       pinned ∪ highest-scoring remainder (ties -> lower index)
//   random_sort   pinned ∪ seeded uniform sample of the remainder
//   tail_truncate pinned ∪ leading positions, filled up to `keep`
std::vector<int> select_positions(const ScoreVector& scores, int keep,
                                  std::span<const int> pinned, Policy policy, uint64_t seed);

// Applies the selection to an attention context and its residual-stream
// counterpart; both come back with rows gathered in ascending original order.
std::pair<EliminationOutcome, Matrix> sort_eliminate(const Matrix& context,
                                                     const Matrix& residual_in,
                                                     const ScoreVector& scores, int keep,
                                                     std::span<const int> pinned, Policy policy,
                                                     uint64_t seed);

// Full attention sublayer with elimination at the configured placement:
//   mid_attention  rows are dropped between the head concat and the output
//                  projection (the projection then runs on keep rows)
//   post_concat    the projection runs on all rows, then rows are dropped
// Both orders produce the same surviving values; they differ in work done.
struct ProposedAttentionResult {
    Matrix output;       // keep×H attention sublayer output
    Matrix residual_out; // keep×H matching rows of residual_in
    ScoreVector scores;
    EliminationOutcome outcome;
};

ProposedAttentionResult proposed_attention_forward(const Matrix& hidden, const Matrix& residual_in,
                                                   const EncoderLayerWeights& lw,
                                                   const ModelConfig& config, Mode mode, int keep,
                                                   std::span<const int> pinned, Policy policy,
                                                   Placement placement, uint64_t seed);

} // namespace latencut
