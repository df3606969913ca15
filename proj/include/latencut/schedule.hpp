#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latencut/acc.hpp"

namespace latencut {

// Which position survives every elimination step: the first token (whose
// vector feeds the pooler), the last (whose vector feeds the LM head), or
// none.
enum class PinnedPolicy { first, last, none };

const char* to_string(PinnedPolicy p);
PinnedPolicy pinned_policy_from_string(const std::string& s);

// Per-layer elimination rates derived from a fitted contribution profile.
// alpha_ep[0] (layer 1) is fixed to 1: the ratio rule needs a predecessor.
// Once the raw ratio p_acc[l]/p_acc[l-1] reaches 1 the process halts for
// good: that layer and every later one keep rate 1, and halted_at records
// the 1-based layer where this first happened.
struct EliminationProfile {
    std::vector<double> alpha_ep;
    std::optional<int> halted_at;
};

EliminationProfile elimination_profile(const AccProfile& acc);

// The complete pruning configuration handed to the runner: profile rates,
// the speed coefficient, their clamped product, and the pinning rule.
struct PruneSchedule {
    std::vector<double> alpha_ep;
    double alpha_sc = 1.0;
    std::vector<double> alpha_er; // min(1, alpha_ep[l] * alpha_sc)
    std::optional<int> halted_at;
    PinnedPolicy pinned_policy = PinnedPolicy::first;

    int layers() const { return static_cast<int>(alpha_ep.size()); }
};

PruneSchedule make_schedule(const EliminationProfile& profile, double alpha_sc,
                            PinnedPolicy pinned);

nlohmann::json schedule_to_json(const PruneSchedule& s);
PruneSchedule schedule_from_json(const nlohmann::json& j);

// How many word vectors survive each layer for a given input length:
// t[0] = T and t[l] = max(1, floor(alpha_er[l] * t[l-1])).
struct RetentionPlan {
    std::vector<int> t; // length L+1

    int layers() const { return static_cast<int>(t.size()) - 1; }
};

RetentionPlan retention_plan(const PruneSchedule& schedule, int input_length);

// 1-based layers whose realized rate falls outside [0.77, 0.97], the range
// observed for effective elimination in practice. Rates of exactly 1 mean
// "no elimination here" and are not flagged.
std::vector<int> band_exits(const PruneSchedule& s);

} // namespace latencut
