#pragma once

#include <vector>

namespace cugr {

// Monotone mapping from continuous purity to a discrete quality level,
// 1 = best. level(p) is the smallest j with p >= thresholds[j-1], else L.
struct LevelLadder {
    int num_levels = 2;
    std::vector<double> thresholds; // strictly decreasing, size num_levels-1, in (0,1)

    void validate() const;

    // 7 levels with thresholds chosen so that every published purity/level
    // pair maps exactly (including the 0.976 -> 1 test-set pair).
    static LevelLadder defaults();
};

int purity_to_level(double p, const LevelLadder& ladder);

// Equal-width ladder over [min_purity, 1.0], used by the level-count sweep.
LevelLadder equal_width_ladder(int num_levels, double min_purity);

} // namespace cugr
