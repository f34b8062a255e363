#include "cugr/ladder.hpp"

#include "cugr/common.hpp"

namespace cugr {

void LevelLadder::validate() const {
    check(num_levels >= 2, "ladder: need at least 2 levels");
    check(static_cast<int>(thresholds.size()) == num_levels - 1,
          "ladder: need num_levels-1 thresholds");
    for (size_t i = 0; i < thresholds.size(); ++i) {
        check(thresholds[i] > 0.0 && thresholds[i] < 1.0, "ladder: thresholds must be in (0,1)");
        if (i > 0)
            check(thresholds[i] < thresholds[i - 1], "ladder: thresholds must strictly decrease");
    }
}

LevelLadder LevelLadder::defaults() {
    LevelLadder l;
    l.num_levels = 7;
    l.thresholds = {0.95, 0.94, 0.88, 0.85, 0.82, 0.745};
    return l;
}

int purity_to_level(double p, const LevelLadder& ladder) {
    ladder.validate();
    for (int j = 0; j < ladder.num_levels - 1; ++j)
        if (p >= ladder.thresholds[j]) return j + 1;
    return ladder.num_levels;
}

LevelLadder equal_width_ladder(int num_levels, double min_purity) {
    check(num_levels >= 2, "equal_width_ladder: need at least 2 levels");
    check(min_purity >= 0.0 && min_purity < 1.0, "equal_width_ladder: min_purity must be in [0,1)");
    LevelLadder l;
    l.num_levels = num_levels;
    double width = (1.0 - min_purity) / num_levels;
    for (int j = 1; j < num_levels; ++j) l.thresholds.push_back(1.0 - j * width);
    return l;
}

} // namespace cugr
