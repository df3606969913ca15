#include "latencut/runner.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "latencut/acc.hpp"

namespace latencut {

namespace {

double elapsed_ns(std::chrono::steady_clock::time_point start) {
    const auto dt = std::chrono::steady_clock::now() - start;
    return std::max(1.0, std::chrono::duration<double, std::nano>(dt).count());
}

// One add per probability entry for the head-averaged column sums, then one
// divide per column (two in decoder mode, for the structural support).
double score_vector_flops(int t, int heads, Mode mode) {
    const double T = t;
    return heads * T * T + (mode == Mode::decoder ? 2.0 : 1.0) * T;
}

// Attention sublayer work for t_in input rows. o_rows is the row count the
// output projection actually sees (t_in normally, the survivor count when
// elimination runs mid-attention).
void trace_attention(FlopTrace* tr, const ModelConfig& c, Mode mode, int t_in, int o_rows,
                     bool scored) {
    if (!tr) return;
    const double T = t_in, H = c.hidden_size, A = c.num_heads, R = o_rows;
    tr->add(CostSection::attention_self, 3.0 * (2.0 * T * H * H + T * H)); // q, k, v projections
    tr->add(CostSection::attention_self, 2.0 * T * T * H);                 // QK^T (all heads)
    const double elems = mode == Mode::decoder ? T * (T + 1.0) / 2.0 : T * T;
    tr->add(CostSection::attention_self, elems * A * (kSoftmaxFlopsPerElement + 1.0)); // scale+softmax
    if (scored) tr->add(CostSection::attention_self, score_vector_flops(t_in, c.num_heads, mode));
    tr->add(CostSection::attention_self, 2.0 * T * T * H);                // probs · V
    tr->add(CostSection::attention_output, 2.0 * R * H * H + R * H);      // output projection
}

// Residual + layer-norm + feed-forward work on `rows` surviving rows.
void trace_block_tail(FlopTrace* tr, const ModelConfig& c, int rows) {
    if (!tr) return;
    const double R = rows, H = c.hidden_size, I = c.intermediate_size;
    tr->add(CostSection::attention_output, R * H + kLayerNormFlopsPerElement * R * H);
    tr->add(CostSection::intermediate, 2.0 * R * H * I + R * I);
    tr->add(CostSection::intermediate, kGeluFlopsPerElement * R * I);
    tr->add(CostSection::output, 2.0 * R * I * H + R * H);
    tr->add(CostSection::output, R * H + kLayerNormFlopsPerElement * R * H);
}

Matrix single_row(const Matrix& m, int r) {
    Matrix out(1, m.cols);
    std::copy_n(m.row(r), m.cols, out.row(0));
    return out;
}

// Pooler over the first surviving vector, then the classification projection.
std::vector<float> encoder_head(const PreparedModel& m, const Matrix& hidden, FlopTrace* tr) {
    Matrix pooled = tanh_map(linear_wt(single_row(hidden, 0), m.pooler_wt, m.pooler_b));
    Matrix logits = linear_wt(pooled, m.cls_wt, m.cls_b);
    if (tr) {
        const double H = hidden.cols, N = m.config.num_labels;
        tr->add(CostSection::pooler, 2.0 * H * H + H + kTanhFlopsPerElement * H);
        tr->add(CostSection::classifier, 2.0 * H * N + N);
    }
    return std::move(logits.data);
}

// Vocabulary projection at the last surviving position; the tied head has no
// bias term.
std::vector<float> decoder_head(const PreparedModel& m, const Matrix& hidden, FlopTrace* tr) {
    Matrix logits = matmul(single_row(hidden, hidden.rows - 1), m.lm_head_wt);
    if (tr) tr->add(CostSection::classifier, 2.0 * hidden.cols * double(m.config.vocab_size));
    return std::move(logits.data);
}

std::vector<float> run_head(const PreparedModel& m, const Matrix& hidden, FlopTrace* tr) {
    return m.config.mode == Mode::decoder ? decoder_head(m, hidden, tr)
                                          : encoder_head(m, hidden, tr);
}

} // namespace

PreparedModel prepare(const Model& model) {
    model.config.validate();
    const auto& c = model.config;
    const auto& w = model.weights;
    PreparedModel p;
    p.config = c;
    p.embed_word = w.get("embed.word");
    p.embed_pos = w.get("embed.pos");
    p.embed_ln_g = w.get("embed.ln.g").data;
    p.embed_ln_b = w.get("embed.ln.b").data;
    p.layers.reserve(c.num_layers);
    for (int l = 0; l < c.num_layers; ++l) p.layers.push_back(prepare_layer(c, w, l));
    p.pooler_wt = transpose(w.get("pooler.w"));
    p.pooler_b = w.get("pooler.b").data;
    p.cls_wt = transpose(w.get("cls.w"));
    p.cls_b = w.get("cls.b").data;
    if (c.mode == Mode::decoder)
        p.lm_head_wt = transpose(w.has("lm_head.w") ? w.get("lm_head.w") : w.get("embed.word"));
    return p;
}

Matrix embed_tokens(const PreparedModel& m, std::span<const int> ids, FlopTrace* trace) {
    const auto& c = m.config;
    const int t = static_cast<int>(ids.size());
    if (t < 1) throw std::invalid_argument("input is empty");
    if (t > c.max_seq)
        throw std::invalid_argument("input length " + std::to_string(t) + " exceeds max_seq " +
                                    std::to_string(c.max_seq));
    Matrix x(t, c.hidden_size);
    for (int i = 0; i < t; ++i) {
        const int id = ids[i];
        if (id < 0 || id >= c.vocab_size)
            throw std::out_of_range("token id " + std::to_string(id) + " outside vocab of " +
                                    std::to_string(c.vocab_size));
        const float* wv = m.embed_word.row(id);
        const float* pv = m.embed_pos.row(i);
        float* out = x.row(i);
        for (int j = 0; j < c.hidden_size; ++j) out[j] = wv[j] + pv[j];
    }
    x = layer_norm(x, m.embed_ln_g, m.embed_ln_b, kLayerNormEps);
    if (trace) trace->add(CostSection::embedding, 8.0 * t * c.hidden_size); // add + norm
    return x;
}

Matrix baseline_block(const Matrix& hidden, const EncoderLayerWeights& lw,
                      const ModelConfig& config, Mode mode, ScoreVector* scores_out,
                      FlopTrace* trace) {
    AttentionProbs probs = attention_probs(hidden, lw, config, mode);
    if (scores_out) *scores_out = score_vector(probs, mode);
    Matrix v = linear_wt(hidden, lw.v_w, lw.v_b);
    Matrix att = attention_context(probs, v, lw.o_w, lw.o_b);
    add_inplace(att, hidden);
    Matrix h1 = layer_norm(att, lw.ln1_g, lw.ln1_b, kLayerNormEps);
    Matrix f = gelu(linear_wt(h1, lw.ffn_w1, lw.ffn_b1));
    Matrix out = linear_wt(f, lw.ffn_w2, lw.ffn_b2);
    add_inplace(out, h1);
    trace_attention(trace, config, mode, hidden.rows, hidden.rows, scores_out != nullptr);
    trace_block_tail(trace, config, hidden.rows);
    return layer_norm(out, lw.ln2_g, lw.ln2_b, kLayerNormEps);
}

RunReport forward_baseline(const PreparedModel& m, std::span<const int> ids,
                           const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const auto& c = m.config;
    RunReport r;
    r.mode = c.mode;
    r.input_length = static_cast<int>(ids.size());
    if (options.count_flops) r.trace.emplace();
    FlopTrace* tr = r.trace ? &*r.trace : nullptr;
    Matrix h = embed_tokens(m, ids, tr);
    for (int l = 0; l < c.num_layers; ++l) h = baseline_block(h, m.layers[l], c, c.mode, nullptr, tr);
    r.realized.t.assign(static_cast<size_t>(c.num_layers) + 1, r.input_length);
    r.kept_per_layer.assign(static_cast<size_t>(c.num_layers), {});
    r.logits = run_head(m, h, tr);
    r.final_hidden = std::move(h);
    r.pw_total = processed_words(r.realized).pw_total;
    r.latency_ns = elapsed_ns(start);
    return r;
}

RunReport forward_pruned(const PreparedModel& m, std::span<const int> ids,
                         const PruneSchedule& schedule, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const auto& c = m.config;
    if (schedule.layers() != c.num_layers)
        throw std::invalid_argument("schedule covers " + std::to_string(schedule.layers()) +
                                    " layers, model has " + std::to_string(c.num_layers));
    RunReport r;
    r.mode = c.mode;
    r.input_length = static_cast<int>(ids.size());
    if (options.count_flops) r.trace.emplace();
    FlopTrace* tr = r.trace ? &*r.trace : nullptr;
    Matrix h = embed_tokens(m, ids, tr);
    const RetentionPlan plan = retention_plan(schedule, r.input_length);

    // current row -> original input position
    std::vector<int> original(static_cast<size_t>(r.input_length));
    std::iota(original.begin(), original.end(), 0);
    r.realized.t.push_back(r.input_length);

    for (int l = 0; l < c.num_layers; ++l) {
        const auto& lw = m.layers[l];
        const int t_in = h.rows;
        const int keep = plan.t[static_cast<size_t>(l) + 1];
        std::vector<int> pinned;
        if (schedule.pinned_policy == PinnedPolicy::first) pinned.push_back(0);
        if (schedule.pinned_policy == PinnedPolicy::last) pinned.push_back(t_in - 1);

        ProposedAttentionResult res = proposed_attention_forward(
            h, h, lw, c, c.mode, keep, pinned, options.policy, options.placement,
            options.seed + static_cast<uint64_t>(l));

        Matrix att = std::move(res.output);
        add_inplace(att, res.residual_out);
        Matrix h1 = layer_norm(att, lw.ln1_g, lw.ln1_b, kLayerNormEps);
        Matrix f = gelu(linear_wt(h1, lw.ffn_w1, lw.ffn_b1));
        Matrix out = linear_wt(f, lw.ffn_w2, lw.ffn_b2);
        add_inplace(out, h1);
        h = layer_norm(out, lw.ln2_g, lw.ln2_b, kLayerNormEps);

        std::vector<int> kept_original(res.outcome.kept_indices.size());
        for (size_t i = 0; i < kept_original.size(); ++i)
            kept_original[i] = original[static_cast<size_t>(res.outcome.kept_indices[i])];
        original = std::move(kept_original);
        r.kept_per_layer.push_back(original);
        r.realized.t.push_back(h.rows);

        trace_attention(tr, c, c.mode, t_in,
                        options.placement == Placement::mid_attention ? keep : t_in, true);
        trace_block_tail(tr, c, keep);
    }

    if (r.realized.t != plan.t)
        throw std::logic_error("realized retention counts drifted from the plan");
    r.logits = run_head(m, h, tr);
    r.final_hidden = std::move(h);
    r.pw_total = processed_words(r.realized).pw_total;
    r.latency_ns = elapsed_ns(start);
    return r;
}

LatencyStats measure_latency(const PreparedModel& m, std::span<const int> ids,
                             const PruneSchedule* schedule, int repeats, int warmup,
                             const RunOptions& options) {
    if (repeats < 3) throw std::invalid_argument("need at least 3 timed repeats");
    if (warmup < 1) throw std::invalid_argument("need at least 1 warmup pass");
    auto pass = [&] {
        return schedule ? forward_pruned(m, ids, *schedule, options)
                        : forward_baseline(m, ids, options);
    };
    for (int i = 0; i < warmup; ++i) pass();
    std::vector<double> ns(static_cast<size_t>(repeats));
    for (int i = 0; i < repeats; ++i) ns[static_cast<size_t>(i)] = pass().latency_ns;
    std::sort(ns.begin(), ns.end());
    LatencyStats s;
    s.repeats = repeats;
    s.warmup = warmup;
    s.min_ns = ns.front();
    s.median_ns = repeats % 2 ? ns[static_cast<size_t>(repeats) / 2]
                              : 0.5 * (ns[static_cast<size_t>(repeats) / 2 - 1] +
                                       ns[static_cast<size_t>(repeats) / 2]);
    s.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / repeats;
    return s;
}

nlohmann::json run_report_to_json(const RunReport& r) {
    nlohmann::json j{
        {"mode", to_string(r.mode)},         {"input_length", r.input_length},
        {"realized_t", r.realized.t},        {"kept_per_layer", r.kept_per_layer},
        {"logits", r.logits},                {"pw_total", r.pw_total},
        {"latency_ns", r.latency_ns},
    };
    if (r.trace) {
        const FlopTrace& t = *r.trace;
        j["flops"] = {
            {"embedding", t[CostSection::embedding]},
            {"attention_self", t[CostSection::attention_self]},
            {"attention_output", t[CostSection::attention_output]},
            {"intermediate", t[CostSection::intermediate]},
            {"output", t[CostSection::output]},
            {"pooler", t[CostSection::pooler]},
            {"classifier", t[CostSection::classifier]},
            {"encoder_total", t.encoder_total()},
            {"total", t.total()},
        };
    }
    return j;
}

} // namespace latencut
