#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ad1d/detection.hpp"
#include "ad1d/error.hpp"
#include "ad1d/network.hpp"
#include "ad1d/network_spec.hpp"
#include "ad1d/weight_store.hpp"

namespace ad1d {

enum class NmsMode { Hard, Soft };

struct DetectorConfig {
    double conf_threshold = 0.5;
    NmsMode nms_mode = NmsMode::Hard;
    double nms_threshold = 0.5;
    double soft_sigma = 0.5;
    double soft_final_threshold = 0.001;
    int multi_label_top_n = 1;
};

/// Immutable trained detector: architecture, anchors, class names and
/// parameters. Safe to share between threads.
class Model {
public:
    Model(NetworkSpec spec, AnchorSet anchors, std::vector<std::string> class_names, WeightStore weights);

    /// Fresh model with initialized parameters.
    static Model create(NetworkSpec spec, AnchorSet anchors, std::vector<std::string> class_names, std::uint64_t seed);

    const NetworkSpec& spec() const { return spec_; }
    const AnchorSet& anchors() const { return anchors_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const WeightStore& weights() const { return weights_; }
    std::size_t parameter_count() const { return weights_.learnable_count(); }

    /// End to end: down-sample, normalize, forward (inference), decode and
    /// suppress. Coordinates are proportional to the original series.
    std::vector<Detection> detect(std::span<const float> series, const DetectorConfig& cfg = {}) const;

private:
    NetworkSpec spec_;
    AnchorSet anchors_;
    std::vector<std::string> class_names_;
    WeightStore weights_;
};

/// Reusable inference workspace bound to one model; not thread-safe, create
/// one per thread.
class InferenceSession {
public:
    explicit InferenceSession(const Model& model);

    const Model& model() const { return *model_; }

    /// Detects on a batch of raw series.
    std::vector<std::vector<Detection>> detect(std::span<const std::span<const float>> series,
                                               const DetectorConfig& cfg = {});
    /// Detects on inputs already down-sampled and normalized to the input size.
    std::vector<std::vector<Detection>> detect_prepared(std::span<const std::vector<float>> inputs,
                                                        const DetectorConfig& cfg = {});

    /// Raw prediction maps of the last forward pass.
    const nn::Tensor1D<float>& prediction(int scale) const { return net_.prediction(scale); }

    /// Bytes held by the input batch and every layer output after the last
    /// forward pass.
    std::size_t activation_bytes() const;

private:
    const Model* model_;
    Network<float> net_;
    nn::Tensor1D<float> batch_;
};

/// Applies per-class NMS or soft-NMS as configured.
std::vector<Detection> suppress(std::vector<Detection> dets, const DetectorConfig& cfg, int input_size);

// ---------------------------------------------------------------------------
// Weights file: "AD1D", u32 version, u32 header length, UTF-8 header, then
// little-endian float32 parameter blocks in layer order.

constexpr std::uint32_t kWeightsVersion = 1;

class WeightsError : public InputError {
public:
    enum class Kind { Io, BadMagic, BadVersion, Truncated, BadHeader, ShapeMismatch };
    WeightsError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);
std::vector<std::uint8_t> serialize_weights(const Model& model);
Model deserialize_weights(std::span<const std::uint8_t> bytes);

}  // namespace ad1d
