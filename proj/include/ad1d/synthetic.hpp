#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ad1d/sample.hpp"

namespace ad1d {

/// Relative weights of the five impairment classes, indexed like
/// default_class_names().
struct ClassMix {
    std::array<double, 5> weights{1, 1, 1, 1, 1};

    static ClassMix uniform() { return {}; }
    /// Parses "uniform" or "name=weight,name=weight,..." (unlisted classes get 0).
    static ClassMix parse(const std::string& text);
};

/// Generator conventions. Lengths are in sub-carriers, levels in dB.
struct SyntheticConfig {
    int min_length = 1800;
    int max_length = 2000;
    int max_impairments = 4;
    double empty_probability = 0.1;  // share of samples with no impairment
    int input_size = 416;            // scale for the spike label width
};

/// Renders `count` captures, each a noisy flat RxMER base with 0-4 injected
/// impairments and labels that exactly cover the injected spans. Sample i
/// depends only on (seed, i).
Dataset generate_synthetic(std::uint64_t seed, const ClassMix& mix, int count,
                           const SyntheticConfig& cfg = {});

Sample generate_sample(std::uint64_t seed, std::uint64_t index, const ClassMix& mix,
                       const SyntheticConfig& cfg = {});

}  // namespace ad1d
