#pragma once

#include <span>
#include <vector>

namespace ad1d {

/// Binning-minimum down-sampling. The series is first stretched by
/// nearest-neighbor interpolation to n*T values (n = ceil(size/T), source
/// index floor(j*size/(n*T))), then each run of n values is reduced to its
/// minimum so that narrow dips survive the length reduction.
std::vector<float> binning_min_downsample(std::span<const float> series, int target);

/// Maps raw dB values from [0, 63.75] to [0, 1]. Out-of-range values are
/// clamped and reported once per call.
std::vector<float> normalize(std::span<const float> raw);

/// Network input for one raw capture: down-sample (or nearest-neighbor
/// stretch when the capture is shorter than the input) then normalize.
std::vector<float> prepare_input(std::span<const float> raw, int input_size);

}  // namespace ad1d
