#pragma once

#include <array>
#include <string>
#include <vector>

namespace ad1d {

enum class LayerKind { Conv, BatchNorm, Activation, Shortcut, Route, Upsample, Predict };

const char* to_string(LayerKind kind);

/// One node of the static layer graph. Indices in `from` and `sources`
/// are absolute layer indices; -1 refers to the network input.
struct LayerDesc {
    LayerKind kind = LayerKind::Conv;
    int filters = 0;      // conv
    int kernel = 1;       // conv
    int stride = 1;       // conv
    bool bias = false;    // conv
    int from = -1;        // shortcut partner (the other operand is the previous layer)
    std::vector<int> sources;  // route
    int factor = 2;       // upsample
    int scale = 0;        // predict: 0 = coarsest grid

    bool operator==(const LayerDesc&) const = default;
};

inline const std::vector<std::string>& default_class_names() {
    static const std::vector<std::string> names{"lte_ingress", "wave", "roll_off", "suck_out", "spike"};
    return names;
}

/// Nine anchor widths in input-size units, sorted ascending. Anchors 0-2
/// belong to the finest prediction layer, 6-8 to the coarsest.
struct AnchorSet {
    static constexpr int kCount = 9;
    static constexpr int kPerLayer = 3;
    std::array<double, kCount> widths{};

    static AnchorSet reference();

    /// Prediction-layer scale owning an anchor (0 = coarsest, 13 grids at 416).
    static int scale_of(int anchor) { return (kCount - 1 - anchor) / kPerLayer; }
    /// Global anchor index of the `slot`-th anchor used by prediction scale `scale`.
    static int index_of(int scale, int slot) { return (2 - scale) * kPerLayer + slot; }
    double width(int scale, int slot) const { return widths[index_of(scale, slot)]; }

    void validate(int input_size) const;
    bool operator==(const AnchorSet&) const = default;
};

struct NetworkSpec {
    int input_size = 416;
    int n_classes = 5;
    int n_anchors = 3;
    int n_downsample = 5;
    std::vector<LayerDesc> layers;

    int prediction_channels() const { return (3 + n_classes) * n_anchors; }
    /// Number of grids at prediction scale 0, 1, 2.
    int grid_count(int scale) const { return input_size >> (n_downsample - scale); }

    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// The 1-D Darknet-style ladder: stem, five stride-2 stages with residual
/// blocks, and three prediction heads aggregated coarse to fine.
NetworkSpec make_reference_spec(int input_size = 416, int n_classes = 5);

/// Serialized layer table, one layer per line.
std::string layer_table_to_text(const std::vector<LayerDesc>& layers);
std::vector<LayerDesc> layer_table_from_text(const std::string& text);

}  // namespace ad1d
