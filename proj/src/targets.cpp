#include "ad1d/targets.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ad1d/error.hpp"

namespace ad1d {

int TargetAssignment::responsible_count() const {
    int n = 0;
    for (const auto& layer : slots)
        for (const auto& s : layer) n += s.responsible ? 1 : 0;
    return n;
}

int responsible_anchor(double width, const AnchorSet& anchors) {
    int best = 0;
    double best_ratio = -1.0;
    for (int i = 0; i < AnchorSet::kCount; ++i) {
        const double a = anchors.widths[i];
        const double ratio = std::min(width, a) / std::max(width, a);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = i;
        }
    }
    return best;
}

TargetAssignment assign_targets(std::span<const Annotation> truths, const AnchorSet& anchors, const NetworkSpec& spec) {
    TargetAssignment t;
    t.n_anchors = spec.n_anchors;
    for (int s = 0; s < 3; ++s) {
        t.grids[s] = spec.grid_count(s);
        t.slots[s].assign(static_cast<std::size_t>(t.grids[s]) * spec.n_anchors, SlotTarget{});
    }
    for (const auto& a : truths) {
        if (!(a.w > 0.0 && a.w <= 1.0) || !(a.x >= 0.0 && a.x <= 1.0))
            throw InputError("annotation outside 0<=x<=1, 0<w<=1");
        const int anchor = responsible_anchor(a.w * spec.input_size, anchors);
        const int scale = AnchorSet::scale_of(anchor);
        const int slot = anchor - AnchorSet::index_of(scale, 0);
        const int grids = t.grids[scale];
        const int grid = std::min(static_cast<int>(std::floor(a.x * grids)), grids - 1);
        SlotTarget& st = t.at(scale, grid, slot);
        if (st.responsible)
            warn("two annotations claim scale " + std::to_string(scale) + " grid " + std::to_string(grid) + " anchor " +
                 std::to_string(anchor) + "; keeping the later one");
        st = SlotTarget{true, false, a.x, a.w, a.cls};
    }
    return t;
}

}  // namespace ad1d
