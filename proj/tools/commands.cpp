#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ad1d/anchor_fit.hpp"
#include "ad1d/dataset_io.hpp"
#include "ad1d/error.hpp"
#include "ad1d/metrics.hpp"
#include "ad1d/model.hpp"
#include "ad1d/synthetic.hpp"
#include "ad1d/trainer.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ad1d::tools {

namespace {

std::ofstream open_out(const std::string& path) {
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

json anchors_json(const AnchorSet& a) {
    json j;
    j["widths"] = a.widths;
    auto& layers = j["layers"] = json::array();
    // Layer order follows the prediction scales: 13, 26, 52 grids at 416.
    for (int s = 0; s < 3; ++s) {
        json l = json::array();
        for (int k = 0; k < AnchorSet::kPerLayer; ++k) l.push_back(a.widths[AnchorSet::index_of(s, k)]);
        layers.push_back(l);
    }
    return j;
}

AnchorSet read_anchors(const std::string& path, int input_size) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open anchors file " + path);
    AnchorSet a;
    try {
        const json j = json::parse(in);
        const auto w = j.at("widths").get<std::vector<double>>();
        if (w.size() != AnchorSet::kCount) throw ConfigError(path + ": expected 9 anchor widths");
        std::copy(w.begin(), w.end(), a.widths.begin());
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    a.validate(input_size);
    return a;
}

DetectorConfig detector_config(double conf, double nms_threshold, bool soft, double soft_sigma) {
    DetectorConfig cfg;
    if (!(conf >= 0.0 && conf <= 1.0)) throw ConfigError("--conf must be in [0, 1]");
    if (!(nms_threshold > 0.0 && nms_threshold <= 1.0)) throw ConfigError("--nms must be in (0, 1]");
    if (!(soft_sigma > 0.0)) throw ConfigError("--soft-nms-sigma must be positive");
    cfg.conf_threshold = conf;
    cfg.nms_threshold = nms_threshold;
    cfg.nms_mode = soft ? NmsMode::Soft : NmsMode::Hard;
    cfg.soft_sigma = soft_sigma;
    return cfg;
}

std::vector<std::vector<Detection>> detect_all(const Model& model, const Dataset& data, const DetectorConfig& cfg) {
    constexpr std::size_t kBatch = 64;
    InferenceSession session(model);
    std::vector<std::vector<Detection>> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); i += kBatch) {
        std::vector<std::span<const float>> part;
        for (std::size_t k = i; k < std::min(data.size(), i + kBatch); ++k) part.emplace_back(data[k].values);
        for (auto& d : session.detect(part, cfg)) out.push_back(std::move(d));
    }
    return out;
}

void add_nms_options(CLI::App* cmd, double& conf, double& nms_threshold, bool& soft, double& sigma) {
    cmd->add_option("--conf", conf, "Confidence threshold")->capture_default_str();
    cmd->add_option("--nms", nms_threshold, "Plain NMS IoU threshold")->capture_default_str();
    cmd->add_flag("--soft-nms", soft, "Use Gaussian soft-NMS instead of plain NMS");
    cmd->add_option("--soft-nms-sigma", sigma, "Soft-NMS Gaussian sigma (implies --soft-nms)")
        ->capture_default_str()
        ->each([&soft](const std::string&) { soft = true; });
}

}  // namespace

// ---------------------------------------------------------------------------

void register_gen_data(CLI::App& app, const GlobalOptions& g) {
    struct Opts {
        std::string out;
        int count = 1000;
        std::string mix = "uniform";
        int min_length = 1800, max_length = 2000;
        int max_impairments = 4;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("gen-data", "Write a synthetic RxMER dataset");
    cmd->add_option("--out", o->out, "Output dataset file (JSON lines)")->required();
    cmd->add_option("--count", o->count, "Number of captures")->capture_default_str();
    cmd->add_option("--mix", o->mix, "Class mix: uniform or name=weight,...")->capture_default_str();
    cmd->add_option("--min-length", o->min_length, "Shortest capture (sub-carriers)")->capture_default_str();
    cmd->add_option("--max-length", o->max_length, "Longest capture (sub-carriers)")->capture_default_str();
    cmd->add_option("--max-impairments", o->max_impairments, "Impairments per capture, at most")
        ->capture_default_str();
    cmd->callback([o, &g] {
        if (o->count < 1) throw ConfigError("--count must be positive");
        if (o->max_impairments < 0) throw ConfigError("--max-impairments must be non-negative");
        SyntheticConfig cfg;
        cfg.min_length = o->min_length;
        cfg.max_length = o->max_length;
        cfg.max_impairments = o->max_impairments;
        const Dataset data = generate_synthetic(g.seed, ClassMix::parse(o->mix), o->count, cfg);
        if (const auto dir = fs::path(o->out).parent_path(); !dir.empty()) fs::create_directories(dir);
        save_dataset(o->out, data);
        std::size_t labels = 0;
        for (const auto& s : data) labels += s.annotations.size();
        std::cout << "wrote " << data.size() << " captures, " << labels << " anomalies to " << o->out << '\n';
    });
}

void register_compute_anchors(CLI::App& app) {
    struct Opts {
        std::string data, out;
        int k = AnchorSet::kCount;
        int input_size = 416;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("compute-anchors", "Fit anchor widths to a dataset (KDE-seeded k-means)");
    cmd->add_option("--data", o->data, "Dataset file")->required();
    cmd->add_option("--k", o->k, "Number of anchors")->capture_default_str();
    cmd->add_option("--input-size", o->input_size, "Network input size")->capture_default_str();
    cmd->add_option("--out", o->out, "Also write the anchors as JSON");
    cmd->callback([o] {
        if (o->k != AnchorSet::kCount) throw ConfigError("the network uses exactly 9 anchors (3 per layer)");
        if (o->input_size < 8) throw ConfigError("--input-size too small");
        const Dataset data = load_dataset(o->data);
        const AnchorSet a = compute_anchors(data, o->input_size, o->k);
        const char* grids[] = {"coarse", "middle", "fine"};
        for (int s = 0; s < 3; ++s) {
            std::printf("%-6s (%3d grids):", grids[s], o->input_size >> (5 - s));
            for (int k = 0; k < AnchorSet::kPerLayer; ++k) std::printf(" %8.3f", a.widths[AnchorSet::index_of(s, k)]);
            std::printf("\n");
        }
        if (!o->out.empty()) open_out(o->out) << anchors_json(a).dump(2) << '\n';
    });
}

void register_train(CLI::App& app, const GlobalOptions& g) {
    struct Opts {
        std::string train, test, val, config, out_weights = "best.ad1d", last_weights, metrics = "metrics.csv";
        std::string resume, anchors;
        std::vector<std::string> sets;
        long long start_batch = -1;
        bool reference_anchors = false;
        bool quiet = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("train", "Train a detector");
    cmd->add_option("--train", o->train, "Training dataset")->required();
    cmd->add_option("--test", o->test, "Held-out dataset scored at the end");
    cmd->add_option("--val", o->val, "Validation dataset used for model selection (default: --test)");
    cmd->add_option("--config", o->config, "Key-value config file (TrainConfig field names)");
    cmd->add_option("--set", o->sets, "Override one config key: key=value (repeatable)");
    cmd->add_option("--out-weights", o->out_weights, "Best weights file")->capture_default_str();
    cmd->add_option("--last-weights", o->last_weights, "Also write the final weights");
    cmd->add_option("--metrics", o->metrics, "Per-batch metrics CSV")->capture_default_str();
    cmd->add_option("--resume", o->resume, "Continue from a weights file (its anchors are kept)");
    cmd->add_option("--start-batch", o->start_batch, "Mini-batch count already done when resuming");
    cmd->add_option("--anchors", o->anchors, "Anchor JSON from compute-anchors (default: fit to --train)");
    cmd->add_flag("--reference-anchors", o->reference_anchors, "Use the fixed reference anchors");
    cmd->add_flag("--quiet", o->quiet, "Only print evaluations");
    cmd->callback([o, &g] {
        TrainConfig cfg;
        if (!o->config.empty()) cfg = TrainConfig::from_file(o->config);
        if (g.seed_given() || o->config.empty()) cfg.seed = g.seed;
        for (const auto& kv : o->sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (o->start_batch >= 0) cfg.start_batch = o->start_batch;
        cfg.validate();

        const Dataset train = load_dataset(o->train);
        const Dataset test = o->test.empty() ? Dataset{} : load_dataset(o->test);
        const Dataset val = o->val.empty() ? test : load_dataset(o->val);

        const NetworkSpec spec = make_reference_spec(416, static_cast<int>(default_class_names().size()));
        Model initial = [&] {
            if (!o->resume.empty()) {
                Model m = load_weights(o->resume);
                if (cfg.start_batch == 0)
                    warn("resuming with start_batch 0; the burn-in schedule restarts (pass --start-batch)");
                return m;
            }
            AnchorSet anchors;
            if (o->reference_anchors)
                anchors = AnchorSet::reference();
            else if (!o->anchors.empty())
                anchors = read_anchors(o->anchors, spec.input_size);
            else
                anchors = compute_anchors(train, spec.input_size);
            return Model::create(spec, anchors, default_class_names(), cfg.seed);
        }();
        std::printf("anchors:");
        for (double w : initial.anchors().widths) std::printf(" %.3f", w);
        std::printf("\nparameters: %zu\n", initial.parameter_count());

        auto metrics = open_out(o->metrics);
        write_metrics_header(metrics);
        const auto t0 = std::chrono::steady_clock::now();
        const bool quiet = o->quiet;
        const TrainResult r = train_loop(train, val, initial, cfg, [&](const TrainLogRow& row) {
            write_metrics_row(metrics, row);
            if (row.map50) {
                metrics.flush();
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::printf("batch %6lld  loss %9.4f  mAP50 %6.2f  mAP75 %6.2f  (%.0f s)\n", row.batch,
                            row.loss.total(), 100 * *row.map50, 100 * *row.map75, secs);
                std::fflush(stdout);
            } else if (!quiet && row.batch % 100 == 0) {
                std::printf("batch %6lld  lr %.3g  L1 %.4f  L2 %.4f  L3 %.4f  total %.4f\n", row.batch, row.lr,
                            row.loss.l1, row.loss.l2, row.loss.l3, row.loss.total());
                std::fflush(stdout);
            }
            return true;
        });
        save_weights(r.best, o->out_weights);
        if (!o->last_weights.empty()) save_weights(r.last, o->last_weights);
        std::printf("%s after %lld mini-batches; best at %lld (mAP50 %.2f, mAP75 %.2f); weights -> %s\n",
                    r.early_stopped ? "early stop" : "done", r.batches, r.best_batch, 100 * r.best_map50,
                    100 * r.best_map75, o->out_weights.c_str());
        if (!o->test.empty()) std::cout << evaluate(r.best, test, cfg.eval_detector).to_text();
    });
}

void register_detect(CLI::App& app) {
    struct Opts {
        std::string weights, input, format = "json", out;
        double conf = 0.5, nms = 0.5, sigma = 0.5;
        bool soft = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("detect", "Print detections for every capture of a dataset");
    cmd->add_option("--weights", o->weights, "Weights file")->required();
    cmd->add_option("--input", o->input, "Dataset file (labels are ignored)")->required();
    cmd->add_option("--format", o->format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_option("--out", o->out, "Write to a file instead of stdout");
    add_nms_options(cmd, o->conf, o->nms, o->soft, o->sigma);
    cmd->callback([o] {
        const DetectorConfig cfg = detector_config(o->conf, o->nms, o->soft, o->sigma);
        const Model model = load_weights(o->weights);
        const Dataset data = load_dataset(o->input);
        const auto dets = detect_all(model, data, cfg);

        std::ofstream file;
        if (!o->out.empty()) file = open_out(o->out);
        std::ostream& out = o->out.empty() ? std::cout : file;
        if (o->format == "json") {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < dets.size(); ++i)
                for (const auto& d : dets[i])
                    arr.push_back({{"sample_index", i},
                                   {"class", model.class_names().at(d.cls)},
                                   {"confidence", d.confidence},
                                   {"center", d.center},
                                   {"width", d.width},
                                   {"start", d.start()},
                                   {"end", d.end()}});
            out << arr.dump(2) << '\n';
        } else {
            out << "sample_index,class,confidence,center,width,start,end\n";
            char line[200];
            for (std::size_t i = 0; i < dets.size(); ++i)
                for (const auto& d : dets[i]) {
                    std::snprintf(line, sizeof line, "%zu,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", i,
                                  model.class_names().at(d.cls).c_str(), d.confidence, d.center, d.width, d.start(),
                                  d.end());
                    out << line;
                }
        }
    });
}

void register_eval(CLI::App& app) {
    struct Opts {
        std::string weights, data, json_out;
        std::vector<double> iou{0.5, 0.75};
        double conf = 0.5, nms = 0.5, sigma = 0.5;
        bool soft = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("eval", "Per-class AP and mAP on a labeled dataset");
    cmd->add_option("--weights", o->weights, "Weights file")->required();
    cmd->add_option("--data", o->data, "Labeled dataset")->required();
    cmd->add_option("--iou", o->iou, "IoU thresholds; 0.5 and 0.75 are always reported")->delimiter(',');
    cmd->add_option("--json", o->json_out, "Write the report as JSON");
    add_nms_options(cmd, o->conf, o->nms, o->soft, o->sigma);
    cmd->callback([o] {
        for (double t : o->iou)
            if (!(t > 0.0 && t <= 1.0)) throw ConfigError("--iou thresholds must be in (0, 1]");
        const DetectorConfig cfg = detector_config(o->conf, o->nms, o->soft, o->sigma);
        const Model model = load_weights(o->weights);
        const Dataset data = load_dataset(o->data);
        const auto dets = detect_all(model, data, cfg);
        const EvalReport rep = evaluate_detections(dets, data, model.class_names());
        std::cout << (o->soft ? "soft-NMS" : "NMS") << ", confidence >= " << o->conf << '\n' << rep.to_text();

        json extra = json::object();
        const int n = static_cast<int>(model.class_names().size());
        for (double t : o->iou) {
            if (t == 0.5 || t == 0.75) continue;
            const auto ap = class_ap_at(dets, data, n, t);
            double mean = 0.0;
            std::printf("AP@%.2f:", t);
            for (int c = 0; c < n; ++c) {
                std::printf(" %s %.2f", model.class_names()[c].c_str(), 100 * ap[c]);
                mean += ap[c] / n;
            }
            std::printf("  mAP %.2f\n", 100 * mean);
            char key[32];
            std::snprintf(key, sizeof key, "%g", t);
            extra[key] = {{"mAP", mean}, {"AP", ap}};
        }
        if (!o->json_out.empty()) {
            json j = json::parse(rep.to_json());
            j["nms"] = o->soft ? "soft" : "hard";
            if (!extra.empty()) j["other_iou"] = extra;
            open_out(o->json_out) << j.dump(2) << '\n';
        }
    });
}

void register_bench(CLI::App& app, const GlobalOptions& g) {
    struct Opts {
        std::string weights, data;
        int threads = 1, batch = 32, samples = 2000, repeats = 3;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("bench", "Inference throughput: down-sampling, forward pass, decode and NMS");
    cmd->add_option("--weights", o->weights, "Weights file")->required();
    cmd->add_option("--data", o->data, "Captures to run (default: synthetic)");
    cmd->add_option("--samples", o->samples, "Synthetic captures when --data is absent")->capture_default_str();
    cmd->add_option("--threads", o->threads, "Worker threads")->capture_default_str();
    cmd->add_option("--batch", o->batch, "Captures per forward pass")->capture_default_str();
    cmd->add_option("--repeats", o->repeats, "Timed passes over the data (best is reported)")->capture_default_str();
    cmd->callback([o, &g] {
        if (o->threads < 1 || o->batch < 1 || o->samples < 1 || o->repeats < 1)
            throw ConfigError("--threads, --batch, --samples and --repeats must be positive");
        const Model model = load_weights(o->weights);
        const Dataset data =
            o->data.empty() ? generate_synthetic(g.seed, ClassMix::uniform(), o->samples) : load_dataset(o->data);
        if (data.empty()) throw InputError("no captures to benchmark");

        const int T = std::min<int>(o->threads, static_cast<int>(data.size()));
        std::vector<std::unique_ptr<InferenceSession>> sessions;
        for (int t = 0; t < T; ++t) sessions.push_back(std::make_unique<InferenceSession>(model));
        std::vector<std::size_t> found(T, 0);
        auto work = [&](int t) {
            const std::size_t lo = data.size() * t / T, hi = data.size() * (t + 1) / T;
            std::vector<std::span<const float>> part;
            for (std::size_t i = lo; i < hi; i += o->batch) {
                part.clear();
                for (std::size_t k = i; k < std::min(hi, i + o->batch); ++k) part.emplace_back(data[k].values);
                for (const auto& d : sessions[t]->detect(part)) found[t] += d.size();
            }
        };
        double best = 1e300;
        for (int r = 0; r < o->repeats; ++r) {
            std::fill(found.begin(), found.end(), 0);
            const auto t0 = std::chrono::steady_clock::now();
            if (T == 1) {
                work(0);
            } else {
                std::vector<std::thread> pool;
                for (int t = 0; t < T; ++t) pool.emplace_back(work, t);
                for (auto& th : pool) th.join();
            }
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        std::size_t detections = 0;
        for (auto f : found) detections += f;
        std::size_t activations = 0;
        for (const auto& s : sessions) activations += s->activation_bytes();
        const std::size_t weights = model.weights().total_count() * sizeof(float);
        std::size_t input = 0;
        for (const auto& s : data) input += s.values.size() * sizeof(float);

        const double rate = static_cast<double>(data.size()) / best;
        std::printf("samples: %zu  threads: %d  batch: %d\n", data.size(), T, o->batch);
        std::printf("throughput: %.1f samples/s (best of %d, %.3f s)\n", rate, o->repeats, best);
        std::printf("detections: %zu\n", detections);
        std::printf("parameters: %zu\n", model.parameter_count());
        std::printf("memory estimate: %.2f MB (weights %.2f MB, activations %.2f MB, captures %.2f MB)\n",
                    (weights + activations + input) / 1e6, weights / 1e6, activations / 1e6, input / 1e6);
    });
}

void register_plot(CLI::App& app) {
    struct Opts {
        std::string weights, input, out_dir = "plots", metrics;
        std::vector<std::size_t> indices;
        int limit = 20;
        double conf = 0.5, nms = 0.5, sigma = 0.5;
        bool soft = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("plot", "Render captures with detections, or training curves, as SVG");
    cmd->add_option("--weights", o->weights, "Weights file (omit to draw ground truth only)");
    cmd->add_option("--input", o->input, "Dataset file");
    cmd->add_option("--metrics", o->metrics, "Metrics CSV from train: draw loss and mAP curves");
    cmd->add_option("--out-dir", o->out_dir, "Directory for the SVG files")->capture_default_str();
    cmd->add_option("--index", o->indices, "Capture indices to draw (default: the first --limit)");
    cmd->add_option("--limit", o->limit, "How many captures to draw")->capture_default_str();
    add_nms_options(cmd, o->conf, o->nms, o->soft, o->sigma);
    cmd->callback([o] {
        if (o->input.empty() && o->metrics.empty()) throw ConfigError("plot needs --input or --metrics");
        fs::create_directories(o->out_dir);
        if (!o->metrics.empty()) {
            const auto path = (fs::path(o->out_dir) / "training.svg").string();
            open_out(path) << metrics_svg(read_metrics_csv(o->metrics), "Training curves");
            std::cout << path << '\n';
        }
        if (o->input.empty()) return;
        const Dataset data = load_dataset(o->input);
        std::vector<std::size_t> idx = o->indices;
        if (idx.empty())
            for (std::size_t i = 0; i < std::min<std::size_t>(data.size(), std::max(0, o->limit)); ++i) idx.push_back(i);
        std::unique_ptr<Model> model;
        if (!o->weights.empty()) model = std::make_unique<Model>(load_weights(o->weights));
        const DetectorConfig cfg = detector_config(o->conf, o->nms, o->soft, o->sigma);
        const auto& names = model ? model->class_names() : default_class_names();
        for (std::size_t i : idx) {
            if (i >= data.size()) throw InputError("--index " + std::to_string(i) + " is past the end of the dataset");
            std::vector<Detection> dets;
            if (model) dets = model->detect(data[i].values, cfg);
            char name[32];
            std::snprintf(name, sizeof name, "sample_%05zu.svg", i);
            const auto path = (fs::path(o->out_dir) / name).string();
            open_out(path) << series_svg(data[i], dets, names,
                                         "capture " + std::to_string(i) + ": " + std::to_string(dets.size()) +
                                             " detections, " + std::to_string(data[i].annotations.size()) +
                                             " labeled");
            std::cout << path << '\n';
        }
    });
}

}  // namespace ad1d::tools
