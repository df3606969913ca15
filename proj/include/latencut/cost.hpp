#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latencut/model.hpp"
#include "latencut/schedule.hpp"

namespace latencut {

// The attention-score term of the analytic model exists in two forms: the
// published table's 6LTH^2 + 2HTL^2 (kept verbatim because the published
// share percentages derive from it) and the dimensionally standard
// 6LTH^2 + 4LT^2H (QK^T plus probs*V actually scale with T^2, not L^2).
// Both are always computed; `variant` picks which one feeds total and shares.
enum class FlopsVariant { paper, corrected };

const char* to_string(FlopsVariant v);
FlopsVariant flops_variant_from_string(const std::string& s);

struct CostReport {
    FlopsVariant variant = FlopsVariant::paper;
    int seq_len = 0;

    double embedding = 0.0;
    double attention_self = 0.0; // the selected variant
    double attention_self_paper = 0.0;
    double attention_self_corrected = 0.0;
    double attention_output = 0.0;
    double intermediate = 0.0;
    double output = 0.0;
    double pooler = 0.0;
    double classifier = 0.0;

    double total() const;
    double encoder_total() const; // attention-self + attention-output + intermediate + output
    double share(double sublayer_flops) const { return sublayer_flops / total(); }

    // published-table style ratios within the encoder stack
    double attention_share_of_encoder() const { return attention_self / encoder_total(); }
    double feed_forward_share_of_encoder() const {
        return (attention_output + intermediate + output) / encoder_total();
    }
};

nlohmann::json cost_report_to_json(const CostReport& r);
std::string cost_report_to_csv(const CostReport& r); // sublayer,flops,share rows

// Per-sublayer FLOPs for one forward pass of `config` at sequence length T
// (T = 0 is allowed and zeroes every length-dependent term).
CostReport analytic_flops(const ModelConfig& config, int seq_len,
                          FlopsVariant variant = FlopsVariant::paper);

// Effective processed word-vectors: each layer costs (t_in + 3 t_out) / 4
// because a quarter of the layer (self-attention) still sees t_in rows while
// the remaining three quarters run on the t_out survivors.
struct PwSummary {
    std::vector<double> pw_per_layer;
    double pw_total = 0.0;
};

PwSummary processed_words(const RetentionPlan& plan);

// Continuous approximation of pw_total without floors:
//   T * (1/4 + sum_{i=1}^{L-1} prod_{j<=i} alpha_j + 3/4 prod_{j<=L} alpha_j)
double closed_form_pw(std::span<const double> alpha_ep, double seq_len, int layers);

// Closed-form speedup factor over the unpruned stack:
//   4L / (1 + 4 sum_{i=1}^{L-1} prod_{j<=i} alpha_j + 3 prod_{j<=L} alpha_j)
// Satisfies estimate_speedup(a, L) * closed_form_pw(a, T, L) == T*L.
double estimate_speedup(std::span<const double> alpha_ep, int layers);

// ------------------------------------------------------------- instrumented

// Where measured FLOPs are attributed. The four encoder sections mirror the
// analytic sublayers so the two models can be compared head to head.
enum class CostSection {
    embedding,
    attention_self,
    attention_output,
    intermediate,
    output,
    pooler,
    classifier,
};
constexpr int kCostSections = 7;

// Elementwise-op counting conventions used by the instrumented counter.
// Matmuls contribute 2mnk and bias adds mn; normalization follows the
// analytic table's 7-FLOPs-per-element convention.
constexpr double kLayerNormFlopsPerElement = 7.0;
constexpr double kSoftmaxFlopsPerElement = 5.0; // max, subtract, exp, accumulate, divide
constexpr double kGeluFlopsPerElement = 9.0;
constexpr double kTanhFlopsPerElement = 1.0;

struct FlopTrace {
    std::array<double, kCostSections> section{};

    void add(CostSection s, double flops) { section[static_cast<size_t>(s)] += flops; }
    void add_matmul(CostSection s, double m, double n, double k) { add(s, 2.0 * m * n * k); }
    double operator[](CostSection s) const { return section[static_cast<size_t>(s)]; }

    double total() const;
    double encoder_total() const;
};

// Total of a completed trace (the ground-truth counterpart of analytic_flops).
double instrumented_count(const FlopTrace& trace);

} // namespace latencut
