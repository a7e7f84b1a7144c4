#include "ad1d/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ad1d/error.hpp"
#include "ad1d/preprocess.hpp"

namespace ad1d {

std::vector<int> match_detections(std::span<const Detection> dets, std::span<const Annotation> truths,
                                  double iou_threshold) {
    std::vector<int> out(dets.size(), -1);
    std::vector<bool> taken(truths.size(), false);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t t = 0; t < truths.size(); ++t) {
            if (taken[t] || truths[t].cls != dets[d].cls) continue;
            const double iou = iou_1d(dets[d].center, dets[d].width, truths[t].x, truths[t].w);
            if (iou >= iou_threshold && iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(t);
            }
        }
        if (best >= 0) {
            taken[best] = true;
            out[d] = best;
        }
    }
    return out;
}

namespace {

std::vector<PrPoint> pr_curve(std::span<const bool> tp, int n_truths) {
    std::vector<PrPoint> pts;
    pts.reserve(tp.size());
    int hits = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
        hits += tp[i] ? 1 : 0;
        pts.push_back({static_cast<double>(hits) / n_truths, static_cast<double>(hits) / static_cast<double>(i + 1)});
    }
    return pts;
}

}  // namespace

double average_precision(std::span<const bool> tp, int n_truths) {
    if (n_truths <= 0) return tp.empty() ? 1.0 : 0.0;
    auto pts = pr_curve(tp, n_truths);
    for (std::size_t i = pts.size(); i-- > 1;) pts[i - 1].precision = std::max(pts[i - 1].precision, pts[i].precision);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const auto& p : pts) {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return ap;
}

EvalReport evaluate_detections(std::span<const std::vector<Detection>> detections, const Dataset& data,
                               const std::vector<std::string>& class_names) {
    if (detections.size() != data.size())
        throw InputError("have detections for " + std::to_string(detections.size()) + " samples but " +
                         std::to_string(data.size()) + " samples");
    const int n_classes = static_cast<int>(class_names.size());

    struct Scored {
        double confidence;
        std::size_t sample;
        std::size_t order;  // rank within its sample
        bool tp50;
        bool tp75;
    };
    std::vector<std::vector<Scored>> per_class(n_classes);
    EvalReport report;
    report.samples = data.size();
    report.classes.resize(n_classes);
    for (int c = 0; c < n_classes; ++c) report.classes[c].name = class_names[c];

    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<Detection> dets = detections[i];
        std::stable_sort(dets.begin(), dets.end(), ranks_before);
        const auto& truths = data[i].annotations;
        for (const auto& t : truths) {
            if (t.cls < 0 || t.cls >= n_classes) throw InputError("annotation class out of range");
            ++report.classes[t.cls].n_truths;
        }
        const auto m50 = match_detections(dets, truths, 0.5);
        const auto m75 = match_detections(dets, truths, 0.75);
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (dets[d].cls < 0 || dets[d].cls >= n_classes) throw InputError("detection class out of range");
            per_class[dets[d].cls].push_back({dets[d].confidence, i, d, m50[d] >= 0, m75[d] >= 0});
        }
    }

    double sum50 = 0.0, sum75 = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        auto& list = per_class[c];
        // Global ranking by confidence; ties keep dataset order.
        std::stable_sort(list.begin(), list.end(), [](const Scored& a, const Scored& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            if (a.sample != b.sample) return a.sample < b.sample;
            return a.order < b.order;
        });
        const std::size_t n = list.size();
        auto f50 = std::make_unique<bool[]>(n);
        auto f75 = std::make_unique<bool[]>(n);
        for (std::size_t k = 0; k < n; ++k) {
            f50[k] = list[k].tp50;
            f75[k] = list[k].tp75;
        }
        const std::span<const bool> s50(f50.get(), n), s75(f75.get(), n);
        auto& cm = report.classes[c];
        cm.n_detections = static_cast<int>(n);
        cm.ap50 = average_precision(s50, cm.n_truths);
        cm.ap75 = average_precision(s75, cm.n_truths);
        cm.tp50 = static_cast<int>(std::count(s50.begin(), s50.end(), true));
        cm.tp75 = static_cast<int>(std::count(s75.begin(), s75.end(), true));
        cm.fp50 = cm.n_detections - cm.tp50;
        cm.fp75 = cm.n_detections - cm.tp75;
        cm.fn50 = cm.n_truths - cm.tp50;
        cm.fn75 = cm.n_truths - cm.tp75;
        if (cm.n_truths > 0) cm.curve50 = pr_curve(s50, cm.n_truths);
        if (cm.n_truths == 0)
            warn("class " + cm.name + " has no ground truth in the evaluation set; AP set to " +
                 (cm.n_detections == 0 ? "1 (never predicted)" : "0 (predicted anyway)"));
        sum50 += cm.ap50;
        sum75 += cm.ap75;
    }
    if (n_classes > 0) {
        report.map50 = sum50 / n_classes;
        report.map75 = sum75 / n_classes;
    }
    return report;
}

std::vector<double> class_ap_at(std::span<const std::vector<Detection>> detections, const Dataset& data,
                                int n_classes, double iou_threshold) {
    if (detections.size() != data.size()) throw InputError("detections and samples differ in count");
    struct Scored {
        double confidence;
        std::size_t sample, order;
        bool tp;
    };
    std::vector<std::vector<Scored>> per_class(n_classes);
    std::vector<int> truths(n_classes, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<Detection> dets = detections[i];
        std::stable_sort(dets.begin(), dets.end(), ranks_before);
        for (const auto& t : data[i].annotations) {
            if (t.cls < 0 || t.cls >= n_classes) throw InputError("annotation class out of range");
            ++truths[t.cls];
        }
        const auto m = match_detections(dets, data[i].annotations, iou_threshold);
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (dets[d].cls < 0 || dets[d].cls >= n_classes) throw InputError("detection class out of range");
            per_class[dets[d].cls].push_back({dets[d].confidence, i, d, m[d] >= 0});
        }
    }
    std::vector<double> ap(n_classes);
    for (int c = 0; c < n_classes; ++c) {
        auto& list = per_class[c];
        std::stable_sort(list.begin(), list.end(), [](const Scored& a, const Scored& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            if (a.sample != b.sample) return a.sample < b.sample;
            return a.order < b.order;
        });
        auto flags = std::make_unique<bool[]>(list.size());
        for (std::size_t k = 0; k < list.size(); ++k) flags[k] = list[k].tp;
        ap[c] = average_precision(std::span<const bool>(flags.get(), list.size()), truths[c]);
    }
    return ap;
}

EvalReport evaluate_prepared(const Model& model, std::span<const std::vector<float>> inputs, const Dataset& truths,
                             const DetectorConfig& cfg) {
    if (inputs.size() != truths.size()) throw InputError("inputs and truths differ in length");
    constexpr std::size_t kBatch = 64;
    InferenceSession session(model);
    std::vector<std::vector<Detection>> dets;
    dets.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); i += kBatch) {
        const std::size_t n = std::min(kBatch, inputs.size() - i);
        auto part = session.detect_prepared(inputs.subspan(i, n), cfg);
        for (auto& d : part) dets.push_back(std::move(d));
    }
    return evaluate_detections(dets, truths, model.class_names());
}

EvalReport evaluate(const Model& model, const Dataset& data, const DetectorConfig& cfg) {
    std::vector<std::vector<float>> inputs;
    inputs.reserve(data.size());
    for (const auto& s : data) inputs.push_back(prepare_input(s.values, model.spec().input_size));
    return evaluate_prepared(model, inputs, data, cfg);
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %8s %8s %7s %7s %7s %7s\n", "class", "AP50(%)", "AP75(%)", "truths",
                  "TP50", "FP50", "FN50");
    os << line;
    for (const auto& c : classes) {
        std::snprintf(line, sizeof line, "%-14s %8.2f %8.2f %7d %7d %7d %7d\n", c.name.c_str(), 100.0 * c.ap50,
                      100.0 * c.ap75, c.n_truths, c.tp50, c.fp50, c.fn50);
        os << line;
    }
    std::snprintf(line, sizeof line, "%-14s %8.2f %8.2f   (%zu samples)\n", "mAP", 100.0 * map50, 100.0 * map75,
                  samples);
    os << line;
    return os.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["samples"] = samples;
    j["mAP50"] = map50;
    j["mAP75"] = map75;
    auto& arr = j["classes"] = nlohmann::json::array();
    for (const auto& c : classes) {
        nlohmann::json cj{{"name", c.name},       {"truths", c.n_truths}, {"detections", c.n_detections},
                          {"AP50", c.ap50},       {"AP75", c.ap75},       {"TP50", c.tp50},
                          {"FP50", c.fp50},       {"FN50", c.fn50},       {"TP75", c.tp75},
                          {"FP75", c.fp75},       {"FN75", c.fn75}};
        auto& curve = cj["pr_curve50"] = nlohmann::json::array();
        for (const auto& p : c.curve50) curve.push_back({p.recall, p.precision});
        arr.push_back(std::move(cj));
    }
    return j.dump(2);
}

}  // namespace ad1d
