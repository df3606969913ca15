#include "latencut/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latencut {

const char* to_string(PinnedPolicy p) {
    switch (p) {
    case PinnedPolicy::first: return "first";
    case PinnedPolicy::last: return "last";
    case PinnedPolicy::none: return "none";
    }
    return "unknown";
}

PinnedPolicy pinned_policy_from_string(const std::string& s) {
    if (s == "first") return PinnedPolicy::first;
    if (s == "last") return PinnedPolicy::last;
    if (s == "none") return PinnedPolicy::none;
    throw std::invalid_argument("pinned policy must be first|last|none, got \"" + s + "\"");
}

EliminationProfile elimination_profile(const AccProfile& acc) {
    const int l = acc.layers();
    if (l < 1) throw std::invalid_argument("elimination_profile: empty profile");
    for (double v : acc.p_acc)
        if (v <= 0.0)
            throw std::invalid_argument(
                "elimination_profile: non-positive fitted ACC; refit on fewer layers");

    EliminationProfile out;
    out.alpha_ep.assign(static_cast<size_t>(l), 1.0);
    for (int i = 1; i < l; ++i) {
        const double ratio = acc.p_acc[static_cast<size_t>(i)] / acc.p_acc[static_cast<size_t>(i - 1)];
        if (ratio >= 1.0) {
            out.halted_at = i + 1; // 1-based layer; this and later layers stay at 1
            break;
        }
        out.alpha_ep[static_cast<size_t>(i)] = ratio;
    }
    return out;
}

PruneSchedule make_schedule(const EliminationProfile& profile, double alpha_sc,
                            PinnedPolicy pinned) {
    if (!(alpha_sc > 0.0))
        throw std::invalid_argument("make_schedule: alpha_sc must be > 0, got " +
                                    std::to_string(alpha_sc));
    if (profile.alpha_ep.empty()) throw std::invalid_argument("make_schedule: empty profile");
    PruneSchedule s;
    s.alpha_ep = profile.alpha_ep;
    s.alpha_sc = alpha_sc;
    s.halted_at = profile.halted_at;
    s.pinned_policy = pinned;
    s.alpha_er.reserve(s.alpha_ep.size());
    for (double ep : s.alpha_ep) s.alpha_er.push_back(std::min(1.0, ep * alpha_sc));
    return s;
}

nlohmann::json schedule_to_json(const PruneSchedule& s) {
    nlohmann::json j = {{"alpha_ep", s.alpha_ep},
                        {"alpha_sc", s.alpha_sc},
                        {"alpha_er", s.alpha_er},
                        {"pinned_policy", to_string(s.pinned_policy)}};
    if (s.halted_at)
        j["halted_at"] = *s.halted_at;
    else
        j["halted_at"] = nullptr;
    return j;
}

PruneSchedule schedule_from_json(const nlohmann::json& j) {
    PruneSchedule s;
    s.alpha_ep = j.at("alpha_ep").get<std::vector<double>>();
    s.alpha_sc = j.at("alpha_sc").get<double>();
    s.alpha_er = j.at("alpha_er").get<std::vector<double>>();
    if (!j.at("halted_at").is_null()) s.halted_at = j.at("halted_at").get<int>();
    s.pinned_policy = pinned_policy_from_string(j.at("pinned_policy").get<std::string>());
    if (s.alpha_er.size() != s.alpha_ep.size())
        throw std::invalid_argument("schedule JSON: alpha_ep/alpha_er length mismatch");
    for (size_t i = 0; i < s.alpha_ep.size(); ++i) {
        const double expect = std::min(1.0, s.alpha_ep[i] * s.alpha_sc);
        if (std::abs(s.alpha_er[i] - expect) > 1e-9)
            throw std::invalid_argument("schedule JSON: alpha_er[" + std::to_string(i) +
                                        "] inconsistent with alpha_ep * alpha_sc");
    }
    return s;
}

RetentionPlan retention_plan(const PruneSchedule& schedule, int input_length) {
    if (input_length < 1)
        throw std::invalid_argument("retention_plan: input length must be >= 1");
    RetentionPlan plan;
    plan.t.reserve(schedule.alpha_er.size() + 1);
    plan.t.push_back(input_length);
    int t = input_length;
    for (double er : schedule.alpha_er) {
        t = std::max(1, static_cast<int>(std::floor(er * t)));
        plan.t.push_back(t);
    }
    return plan;
}

std::vector<int> band_exits(const PruneSchedule& s) {
    std::vector<int> out;
    for (size_t i = 0; i < s.alpha_er.size(); ++i) {
        const double er = s.alpha_er[i];
        if (er == 1.0) continue; // elimination disabled at this layer
        if (er < 0.77 || er > 0.97) out.push_back(static_cast<int>(i) + 1);
    }
    return out;
}

} // namespace latencut
