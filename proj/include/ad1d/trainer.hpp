#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ad1d/augment.hpp"
#include "ad1d/loss.hpp"
#include "ad1d/model.hpp"
#include "ad1d/sample.hpp"

namespace ad1d {

struct TrainConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 32;
    long long burn_in = 6000;
    double ignore_threshold = 0.7;
    double lambda_object = 1.0;
    double lambda_background = 0.5;
    bool center_in_grids = false;  // "center_units grid"; see LossConfig
    long long max_batches = 30000;
    long long eval_interval = 200;
    int patience = 20;  // evaluations without improvement before stopping
    std::uint64_t seed = 1;
    bool augment = true;
    AugmentConfig augmentation;
    DetectorConfig eval_detector;
    long long start_batch = 0;  // resume offset for the learning-rate schedule

    void validate() const;
    LossConfig loss_config() const;

    /// Applies "key value" / "key = value" lines; '#' starts a comment.
    /// Unknown keys and malformed values raise ConfigError.
    void apply_text(const std::string& text);
    void set(const std::string& key, const std::string& value);
    static TrainConfig from_file(const std::string& path);
};

struct TrainLogRow {
    long long batch = 0;
    double lr = 0.0;
    LossParts loss;  // averaged over the mini-batch
    std::optional<double> map50;
    std::optional<double> map75;
};

struct TrainResult {
    Model best;
    Model last;
    std::vector<TrainLogRow> log;
    long long batches = 0;  // mini-batches completed, including start_batch
    double best_map50 = -1.0;
    double best_map75 = -1.0;
    long long best_batch = -1;
    bool early_stopped = false;
};

/// Called after every mini-batch; return false to stop training.
using TrainCallback = std::function<bool(const TrainLogRow&)>;

/// Mini-batch SGD from `initial`. Samples are prepared once (down-sample and
/// normalize), then augmented per draw. Every `eval_interval` batches (and at
/// the end) the model is scored on `test`; the best mAP50 (ties: mAP75)
/// snapshot is kept and training stops after `patience` evaluations without
/// improvement. An empty test set disables evaluation and the last weights
/// are returned as best.
TrainResult train_loop(const Dataset& train, const Dataset& test, const Model& initial, const TrainConfig& cfg,
                       const TrainCallback& on_batch = {});

/// Metrics CSV: batch,lr,L1,L2,L3,L_total,mAP50,mAP75 (mAP empty between evaluations).
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const TrainLogRow& row);

}  // namespace ad1d
