#pragma once

#include <vector>

namespace latencut {

// Per-position contribution scores for one layer: column sums of the
// head-averaged attention matrix (normalised by structural column counts in
// causal mode). Computed and kept in double so medians and sums stay stable.
struct ScoreVector {
    std::vector<double> values;

    int length() const { return static_cast<int>(values.size()); }
    bool operator==(const ScoreVector&) const = default;
};

} // namespace latencut
