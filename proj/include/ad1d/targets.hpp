#pragma once

#include <array>
#include <span>
#include <vector>

#include "ad1d/network_spec.hpp"
#include "ad1d/sample.hpp"

namespace ad1d {

/// Training target of one (scale, grid, anchor) slot.
struct SlotTarget {
    bool responsible = false;  // C_i
    bool ignore = false;
    double x = 0.0;  // proportional center of the truth
    double w = 0.0;  // proportional width of the truth
    int cls = -1;    // one-hot class of the truth
};

/// Per-sample targets, indexed [scale][grid * n_anchors + slot].
struct TargetAssignment {
    std::array<std::vector<SlotTarget>, 3> slots;
    std::array<int, 3> grids{0, 0, 0};
    int n_anchors = 3;

    SlotTarget& at(int scale, int grid, int slot) { return slots[scale][grid * n_anchors + slot]; }
    const SlotTarget& at(int scale, int grid, int slot) const { return slots[scale][grid * n_anchors + slot]; }
    int responsible_count() const;
};

/// Anchor whose width best matches `width` (input units) ignoring position:
/// argmax min(w, A)/max(w, A), ties to the smaller index.
int responsible_anchor(double width, const AnchorSet& anchors);

/// Static assignment: the responsible anchor's layer and the grid holding the
/// truth center get C=1; every other slot is background. When two truths
/// claim one slot the later one wins and a warning is emitted.
TargetAssignment assign_targets(std::span<const Annotation> truths, const AnchorSet& anchors, const NetworkSpec& spec);

}  // namespace ad1d
