#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "latencut/attention.hpp"
#include "latencut/cost.hpp"
#include "latencut/model.hpp"
#include "latencut/schedule.hpp"
#include "latencut/score.hpp"
#include "latencut/tensor.hpp"

namespace latencut {

// Epsilon inside every layer-norm of the stack.
constexpr float kLayerNormEps = 1e-12f;

// A loaded model reshaped for the forward pass: projection weights transposed
// once to [in, out] so the hot path never reshapes again. Head weights for
// the other mode stay empty (lm_head_wt is built only for decoder models,
// falling back to the word-embedding table when the file carries no untied
// head).
struct PreparedModel {
    ModelConfig config;
    Matrix embed_word; // [vocab, H], row-lookup layout
    Matrix embed_pos;  // [max_seq, H]
    std::vector<float> embed_ln_g, embed_ln_b;
    std::vector<EncoderLayerWeights> layers;
    Matrix pooler_wt; // [H, H]
    std::vector<float> pooler_b;
    Matrix cls_wt; // [H, num_labels]
    std::vector<float> cls_b;
    Matrix lm_head_wt; // [H, vocab]; decoder mode only
};

PreparedModel prepare(const Model& model);

struct RunOptions {
    Policy policy = Policy::sv_sort;
    Placement placement = Placement::post_concat;
    uint64_t seed = 0;        // random_sort draws from seed + layer
    bool count_flops = false; // fills RunReport::trace when set
};

struct RunReport {
    Mode mode = Mode::encoder;
    int input_length = 0;
    RetentionPlan realized;                       // t[0] = T plus survivors after each layer
    std::vector<std::vector<int>> kept_per_layer; // ascending original positions; empty rows
                                                  // for the baseline (nothing was eliminated)
    std::vector<float> logits; // num_labels (encoder) / vocab at the last surviving
                               // position (decoder)
    Matrix final_hidden;       // hidden state after the last layer, for inspection;
                               // not part of the JSON export
    double pw_total = 0.0;     // processed word-vectors of the realized plan
    double latency_ns = 0.0;   // wall time of this single pass
    std::optional<FlopTrace> trace;
};

nlohmann::json run_report_to_json(const RunReport& r);

// Word + position embedding lookup followed by the embedding layer-norm.
// Rejects empty input, input longer than max_seq, and out-of-range ids.
Matrix embed_tokens(const PreparedModel& m, std::span<const int> ids, FlopTrace* trace = nullptr);

// One unpruned encoder block: attention, residual + layer-norm, feed-forward,
// residual + layer-norm. When scores_out is non-null the block also computes
// the layer's score vector from the attention probabilities.
Matrix baseline_block(const Matrix& hidden, const EncoderLayerWeights& lw,
                      const ModelConfig& config, Mode mode, ScoreVector* scores_out = nullptr,
                      FlopTrace* trace = nullptr);

// Full stack at the model's own sequence length: embedding, every encoder
// block, then the mode's output head (pooler + classifier / LM head).
RunReport forward_baseline(const PreparedModel& m, std::span<const int> ids,
                           const RunOptions& options = {});

// Same stack, but after each block's attention the lowest-scoring rows are
// eliminated down to the retention plan's count for that layer. Surviving
// vectors keep their original position embeddings; nothing is re-indexed.
RunReport forward_pruned(const PreparedModel& m, std::span<const int> ids,
                         const PruneSchedule& schedule, const RunOptions& options = {});

struct LatencyStats {
    double min_ns = 0.0;
    double median_ns = 0.0;
    double mean_ns = 0.0;
    int repeats = 0;
    int warmup = 0;
};

// Times repeated forward passes (pruned when schedule is non-null, baseline
// otherwise) after discarding warmup runs. Requires repeats >= 3, warmup >= 1.
// measured speedup = baseline median_ns / pruned median_ns.
LatencyStats measure_latency(const PreparedModel& m, std::span<const int> ids,
                             const PruneSchedule* schedule, int repeats, int warmup,
                             const RunOptions& options = {});

} // namespace latencut
