#pragma once

#include <array>
#include <random>
#include <vector>

#include "ad1d/sample.hpp"

namespace ad1d {

// Augmentations operate on normalized, down-sampled samples. None of them
// changes the number of annotations.

struct AugmentConfig {
    double p_scale_shift = 0.5;
    double p_flip = 0.5;
    double p_floor_shift = 0.5;
    double p_noise = 0.5;
    double p_smooth = 0.5;
    double p_cut_paste = 0.5;
    double scale_min = 0.3;
    double scale_max = 3.0;
    double level_min = -0.2;
    double level_max = 0.2;
    double noise_amplitude = 0.002;
    std::array<int, 3> smooth_windows{3, 5, 7};
    int smooth_order = 2;

    static AugmentConfig disabled();
    void validate() const;
};

/// v <- (v - mean) * r_scale + v; the sample mean is unchanged.
void augment_scale_shift(Sample& s, double r_scale);
/// Reverses the values and mirrors each annotation center (x <- 1 - x).
void augment_flip(Sample& s);
/// Adds one offset to every value.
void augment_floor_shift(Sample& s, double r_level);
/// Adds independent uniform noise in [-amplitude, amplitude] per value.
void augment_noise(Sample& s, std::mt19937_64& rng, double amplitude = 0.002);
/// Savitzky-Golay smoothing. Edge values use the polynomial fitted to the
/// first/last full window. Returns false (sample untouched) when the sample
/// is shorter than the window.
bool augment_smooth(Sample& s, int window, int order = 2);
/// Moves one randomly chosen anomaly to a random position where it does not
/// overlap any other annotation, back-filling the vacated span with a
/// baseline interpolated from its neighbors plus matching noise. Roll-offs
/// are tied to the band edges and are never moved. Returns false when no
/// candidate or placement exists.
bool augment_cut_paste(Sample& s, std::mt19937_64& rng);

/// Applies each technique independently with its configured probability.
void augment(Sample& s, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Least-squares polynomial smoothing weights for evaluating the fit at
/// offset `position` (-half..half) of a centered window.
std::vector<double> savgol_coefficients(int window, int order, int position = 0);

}  // namespace ad1d
