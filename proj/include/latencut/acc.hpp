#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latencut/attention.hpp"
#include "latencut/model.hpp"
#include "latencut/score.hpp"

namespace latencut {

// Per-layer contribution summary: raw medians (e_acc), the least-squares
// quadratic over layer index fitted to them, and the fitted values (p_acc,
// evaluated at l = 1..L).
struct AccProfile {
    std::vector<double> e_acc;
    double fit_a = 0.0, fit_b = 0.0, fit_c = 0.0;
    std::vector<double> p_acc;
    bool degenerate_fit = false; // true when fewer than 3 layers forced a constant fit

    int layers() const { return static_cast<int>(e_acc.size()); }
};

nlohmann::json profile_to_json(const AccProfile& p);
AccProfile profile_from_json(const nlohmann::json& j);
std::string profile_to_csv(const AccProfile& p); // layer,e_acc,p_acc rows

// Column sums of the head-averaged probability matrix. In decoder mode each
// column i is further divided by its structural support in the causal mask
// (T - i entries), so positions late in the sequence stay comparable.
ScoreVector score_vector(const AttentionProbs& probs, Mode mode);

// Median of the score vector; for even lengths the mean of the two central
// order statistics.
double acc_of_layer(const ScoreVector& sv);

// Ordinary least squares over points (l, e_acc[l-1]), l = 1..L. With fewer
// than 3 layers the system is underdetermined for a quadratic, so the fit
// degrades to the constant a=b=0, c=mean and sets degenerate_fit.
AccProfile fit_quadratic(std::span<const double> e_acc);

// Runs unpruned forward passes over a batch of token sequences, averages the
// per-layer medians across samples, and fits the quadratic. Sequences may
// have different lengths; each is scored at its own length.
AccProfile profile_model(const Model& model, std::span<const std::vector<int>> inputs, Mode mode);

} // namespace latencut
