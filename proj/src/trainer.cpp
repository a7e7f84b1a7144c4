#include "ad1d/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "ad1d/error.hpp"
#include "ad1d/metrics.hpp"
#include "ad1d/network.hpp"
#include "ad1d/optimizer.hpp"
#include "ad1d/preprocess.hpp"
#include "ad1d/targets.hpp"

namespace ad1d {

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(learning_rate, "learning_rate");
    positive(momentum, "momentum");
    if (momentum >= 1.0) throw ConfigError("momentum must be below 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (burn_in < 0) throw ConfigError("burn_in must be non-negative");
    if (!(ignore_threshold > 0.0 && ignore_threshold < 1.0)) throw ConfigError("ignore_threshold must be in (0, 1)");
    positive(lambda_object, "lambda_object");
    positive(lambda_background, "lambda_background");
    if (max_batches < 1) throw ConfigError("max_batches must be at least 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (start_batch < 0) throw ConfigError("start_batch must be non-negative");
    augmentation.validate();
}

LossConfig TrainConfig::loss_config() const {
    LossConfig lc;
    lc.lambda_object = lambda_object;
    lc.lambda_background = lambda_background;
    lc.ignore_threshold = ignore_threshold;
    lc.center_in_grids = center_in_grids;
    return lc;
}

namespace {

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
    V v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("bad value '" + text + "' for " + key);
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
    if (text == "0" || text == "false" || text == "off" || text == "no") return false;
    throw ConfigError("bad boolean '" + text + "' for " + key);
}

bool parse_center_units(const std::string& text) {
    if (text == "grid") return true;
    if (text == "proportional") return false;
    throw ConfigError("center_units must be 'proportional' or 'grid', got '" + text + "'");
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
    auto d = [&] { return parse_number<double>(key, value); };
    auto ll = [&] { return parse_number<long long>(key, value); };
    auto& a = augmentation;
    if (key == "learning_rate") learning_rate = d();
    else if (key == "momentum") momentum = d();
    else if (key == "weight_decay") weight_decay = d();
    else if (key == "batch_size" || key == "mini_batch") batch_size = static_cast<int>(ll());
    else if (key == "burn_in") burn_in = ll();
    else if (key == "ignore_threshold") ignore_threshold = d();
    else if (key == "center_units") center_in_grids = parse_center_units(value);
    else if (key == "lambda_object") lambda_object = d();
    else if (key == "lambda_background") lambda_background = d();
    else if (key == "max_batches") max_batches = ll();
    else if (key == "eval_interval") eval_interval = ll();
    else if (key == "patience") patience = static_cast<int>(ll());
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "augment") augment = parse_bool(key, value);
    else if (key == "start_batch") start_batch = ll();
    else if (key == "p_scale_shift") a.p_scale_shift = d();
    else if (key == "p_flip") a.p_flip = d();
    else if (key == "p_floor_shift") a.p_floor_shift = d();
    else if (key == "p_noise") a.p_noise = d();
    else if (key == "p_smooth") a.p_smooth = d();
    else if (key == "p_cut_paste") a.p_cut_paste = d();
    else if (key == "scale_min") a.scale_min = d();
    else if (key == "scale_max") a.scale_max = d();
    else if (key == "level_min") a.level_min = d();
    else if (key == "level_max") a.level_max = d();
    else if (key == "noise_amplitude") a.noise_amplitude = d();
    else if (key == "conf_threshold") eval_detector.conf_threshold = d();
    else if (key == "nms_threshold") eval_detector.nms_threshold = d();
    else throw ConfigError("unknown training option '" + key + "'");
}

void TrainConfig::apply_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), '=', ' ');
        std::istringstream ls(line);
        std::string key, value, extra;
        if (!(ls >> key)) continue;
        if (!(ls >> value) || (ls >> extra))
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key value'");
        set(key, value);
    }
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    TrainConfig cfg;
    cfg.apply_text(ss.str());
    return cfg;
}

void write_metrics_header(std::ostream& out) { out << "batch,lr,L1,L2,L3,L_total,mAP50,mAP75\n"; }

void write_metrics_row(std::ostream& out, const TrainLogRow& row) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,", row.batch, row.lr, row.loss.l1, row.loss.l2,
                  row.loss.l3, row.loss.total());
    out << buf;
    if (row.map50) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", *row.map50, *row.map75);
        out << buf;
    } else {
        out << ',';
    }
    out << '\n';
}

TrainResult train_loop(const Dataset& train, const Dataset& test, const Model& initial, const TrainConfig& cfg,
                       const TrainCallback& on_batch) {
    cfg.validate();
    if (train.empty()) throw InputError("training set is empty");
    const NetworkSpec& spec = initial.spec();
    const AnchorSet& anchors = initial.anchors();
    const LossConfig loss_cfg = cfg.loss_config();
    const int S = spec.input_size;

    Dataset prepared = train;
    for (auto& s : prepared) s.values = prepare_input(s.values, S);
    std::vector<std::vector<float>> test_inputs;
    test_inputs.reserve(test.size());
    for (const auto& s : test) test_inputs.push_back(prepare_input(s.values, S));

    Network<float> net(spec);
    net.import_weights(initial.weights());
    SgdMomentum<float> opt(cfg.momentum, cfg.weight_decay);
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    const int B = cfg.batch_size;
    nn::Tensor1D<float> x;
    x.reshape(B, 1, S);
    std::vector<Sample> batch(B);

    TrainResult result{initial, initial, {}, cfg.start_batch, -1.0, -1.0, -1, false};
    int stale = 0;

    auto snapshot = [&] { return Model(spec, anchors, initial.class_names(), net.export_weights()); };

    for (long long n = cfg.start_batch; n < cfg.max_batches; ++n) {
        for (int b = 0; b < B; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch[b] = prepared[order[cursor++]];
            if (cfg.augment) augment(batch[b], cfg.augmentation, rng);
            std::copy(batch[b].values.begin(), batch[b].values.end(), x.values.begin() + static_cast<std::ptrdiff_t>(b) * S);
        }
        net.forward(x, nn::Phase::Train);
        const PredictionMaps<float> maps{&net.prediction(0), &net.prediction(1), &net.prediction(2)};
        TrainLogRow row;
        row.batch = n + 1;
        row.lr = lr_schedule(n + 1, cfg.learning_rate, cfg.burn_in);
        for (int b = 0; b < B; ++b) {
            auto targets = assign_targets(batch[b].annotations, anchors, spec);
            mark_ignored(targets, maps, b, batch[b].annotations, anchors, spec, loss_cfg.ignore_threshold);
            row.loss += total_loss(maps, b, targets, anchors, spec, loss_cfg, 1.0 / B);
        }
        row.loss.l1 /= B;
        row.loss.l2 /= B;
        row.loss.l3 /= B;
        if (!std::isfinite(row.loss.total()))
            throw NumericError("non-finite loss at mini-batch " + std::to_string(n + 1));
        net.zero_param_grads();
        net.backward();
        opt.step(net.params(), row.lr);
        result.batches = n + 1;

        const bool last = n + 1 == cfg.max_batches;
        if (!test.empty() && ((n + 1) % cfg.eval_interval == 0 || last)) {
            Model current = snapshot();
            const EvalReport rep = evaluate_prepared(current, test_inputs, test, cfg.eval_detector);
            row.map50 = rep.map50;
            row.map75 = rep.map75;
            const bool better = rep.map50 > result.best_map50 ||
                                (rep.map50 == result.best_map50 && rep.map75 > result.best_map75);
            if (better) {
                result.best = current;
                result.best_map50 = rep.map50;
                result.best_map75 = rep.map75;
                result.best_batch = n + 1;
                stale = 0;
            } else {
                ++stale;
            }
        }
        result.log.push_back(row);
        const bool keep_going = on_batch ? on_batch(row) : true;
        if (stale >= cfg.patience) result.early_stopped = true;
        if (!keep_going || result.early_stopped) break;
    }
    result.last = snapshot();
    if (test.empty()) {
        result.best = result.last;
        result.best_batch = result.batches;
    }
    return result;
}

}  // namespace ad1d
