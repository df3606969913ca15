#include "latencut/cost.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace latencut {

const char* to_string(FlopsVariant v) {
    return v == FlopsVariant::paper ? "paper" : "corrected";
}

FlopsVariant flops_variant_from_string(const std::string& s) {
    if (s == "paper") return FlopsVariant::paper;
    if (s == "corrected") return FlopsVariant::corrected;
    throw std::invalid_argument("flops variant must be paper|corrected, got \"" + s + "\"");
}

double CostReport::total() const {
    return embedding + attention_self + attention_output + intermediate + output + pooler +
           classifier;
}

double CostReport::encoder_total() const {
    return attention_self + attention_output + intermediate + output;
}

CostReport analytic_flops(const ModelConfig& config, int seq_len, FlopsVariant variant) {
    config.validate();
    if (seq_len < 0) throw std::invalid_argument("analytic_flops: negative sequence length");
    const double t = seq_len;
    const double l = config.num_layers;
    const double h = config.hidden_size;
    const double n = config.num_labels;

    CostReport r;
    r.variant = variant;
    r.seq_len = seq_len;
    r.embedding = 7.0 * t * h;
    r.attention_self_paper = 6.0 * l * t * h * h + 2.0 * h * t * l * l;
    r.attention_self_corrected = 6.0 * l * t * h * h + 4.0 * l * t * t * h;
    r.attention_self =
        variant == FlopsVariant::paper ? r.attention_self_paper : r.attention_self_corrected;
    r.attention_output = 2.0 * l * t * h * h;
    r.intermediate = 8.0 * l * t * h * h;
    r.output = 8.0 * l * t * h * h;
    r.pooler = 2.0 * h * h;
    r.classifier = 2.0 * h * n;
    return r;
}

nlohmann::json cost_report_to_json(const CostReport& r) {
    const double total = r.total();
    auto entry = [&](double flops) {
        return nlohmann::json{{"flops", flops}, {"share", flops / total}};
    };
    return {{"variant", to_string(r.variant)},
            {"seq_len", r.seq_len},
            {"sublayers",
             {{"embedding", entry(r.embedding)},
              {"attention_self", entry(r.attention_self)},
              {"attention_output", entry(r.attention_output)},
              {"intermediate", entry(r.intermediate)},
              {"output", entry(r.output)},
              {"pooler", entry(r.pooler)},
              {"classifier", entry(r.classifier)}}},
            {"attention_self_paper", r.attention_self_paper},
            {"attention_self_corrected", r.attention_self_corrected},
            {"total", total},
            {"encoder",
             {{"total", r.encoder_total()},
              {"attention_share", r.attention_share_of_encoder()},
              {"feed_forward_share", r.feed_forward_share_of_encoder()}}}};
}

std::string cost_report_to_csv(const CostReport& r) {
    const double total = r.total();
    std::ostringstream out;
    out.precision(17);
    out << "sublayer,flops,share\n";
    auto row = [&](const char* name, double flops) {
        out << name << ',' << flops << ',' << flops / total << '\n';
    };
    row("embedding", r.embedding);
    row("attention_self", r.attention_self);
    row("attention_output", r.attention_output);
    row("intermediate", r.intermediate);
    row("output", r.output);
    row("pooler", r.pooler);
    row("classifier", r.classifier);
    row("total", total);
    return out.str();
}

PwSummary processed_words(const RetentionPlan& plan) {
    if (plan.t.size() < 2) throw std::invalid_argument("processed_words: plan has no layers");
    PwSummary s;
    s.pw_per_layer.reserve(plan.t.size() - 1);
    for (size_t l = 1; l < plan.t.size(); ++l) {
        const double pw = (plan.t[l - 1] + 3.0 * plan.t[l]) / 4.0;
        s.pw_per_layer.push_back(pw);
        s.pw_total += pw;
    }
    return s;
}

namespace {

void check_profile(std::span<const double> alpha_ep, int layers, const char* op) {
    if (static_cast<int>(alpha_ep.size()) != layers)
        throw std::invalid_argument(std::string(op) + ": profile length " +
                                    std::to_string(alpha_ep.size()) + " != layers " +
                                    std::to_string(layers));
    if (layers < 1) throw std::invalid_argument(std::string(op) + ": layers must be >= 1");
    for (double a : alpha_ep)
        if (!(a > 0.0) || a > 1.0)
            throw std::invalid_argument(std::string(op) + ": rates must lie in (0,1], got " +
                                        std::to_string(a));
}

// bracket pieces shared by the closed forms: sum of running products over
// the first L-1 layers and the full product over all L.
std::pair<double, double> running_products(std::span<const double> alpha_ep) {
    double sum = 0.0, prod = 1.0;
    for (size_t i = 0; i + 1 < alpha_ep.size(); ++i) {
        prod *= alpha_ep[i];
        sum += prod;
    }
    return {sum, prod * alpha_ep.back()};
}

} // namespace

double closed_form_pw(std::span<const double> alpha_ep, double seq_len, int layers) {
    check_profile(alpha_ep, layers, "closed_form_pw");
    if (seq_len < 0.0) throw std::invalid_argument("closed_form_pw: negative sequence length");
    const auto [sum, prod_all] = running_products(alpha_ep);
    return seq_len * (0.25 + sum + 0.75 * prod_all);
}

double estimate_speedup(std::span<const double> alpha_ep, int layers) {
    check_profile(alpha_ep, layers, "estimate_speedup");
    const auto [sum, prod_all] = running_products(alpha_ep);
    return 4.0 * layers / (1.0 + 4.0 * sum + 3.0 * prod_all);
}

double FlopTrace::total() const {
    double t = 0.0;
    for (double v : section) t += v;
    return t;
}

double FlopTrace::encoder_total() const {
    return (*this)[CostSection::attention_self] + (*this)[CostSection::attention_output] +
           (*this)[CostSection::intermediate] + (*this)[CostSection::output];
}

double instrumented_count(const FlopTrace& trace) { return trace.total(); }

} // namespace latencut
