#pragma once

#include <span>
#include <vector>

#include "ad1d/network_spec.hpp"
#include "ad1d/sample.hpp"

namespace ad1d {

/// Local maxima of a Gaussian KDE (Silverman bandwidth) over `values`,
/// ordered by descending density.
std::vector<double> kde_modes(std::span<const double> values);

/// 1-D k-means (Lloyd) seeded by `seeds` (default: KDE modes of `values`,
/// densest first), topped up with farthest-point seeds when there are fewer
/// than k. Empty clusters are
/// re-seeded with the point farthest from its centroid. Returns the
/// centroids sorted ascending.
std::vector<double> kmeans_1d(std::span<const double> values, int k, int iterations = 100,
                              std::span<const double> seeds = {});

/// Anchor widths (input-size units) fitted to the annotation widths of a
/// dataset. Falls back to the reference anchors, with a warning, when the
/// data has fewer than k distinct widths.
AnchorSet compute_anchors(const Dataset& data, int input_size, int k = AnchorSet::kCount);
AnchorSet compute_anchors_from_widths(std::span<const double> widths, int input_size,
                                      int k = AnchorSet::kCount);

}  // namespace ad1d
