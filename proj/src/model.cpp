#include "ad1d/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "ad1d/preprocess.hpp"

namespace ad1d {

Model::Model(NetworkSpec spec, AnchorSet anchors, std::vector<std::string> class_names, WeightStore weights)
    : spec_(std::move(spec)), anchors_(anchors), class_names_(std::move(class_names)), weights_(std::move(weights)) {
    spec_.validate();
    anchors_.validate(spec_.input_size);
    if (static_cast<int>(class_names_.size()) != spec_.n_classes)
        throw ConfigError("model has " + std::to_string(class_names_.size()) + " class names for " +
                          std::to_string(spec_.n_classes) + " classes");
    Network<float> probe(spec_);
    probe.import_weights(weights_);
}

Model Model::create(NetworkSpec spec, AnchorSet anchors, std::vector<std::string> class_names, std::uint64_t seed) {
    Network<float> net(spec);
    net.initialize(seed);
    return Model(std::move(spec), anchors, std::move(class_names), net.export_weights());
}

std::vector<Detection> Model::detect(std::span<const float> series, const DetectorConfig& cfg) const {
    InferenceSession session(*this);
    const std::span<const float> one[] = {series};
    return std::move(session.detect(one, cfg).front());
}

std::vector<Detection> suppress(std::vector<Detection> dets, const DetectorConfig& cfg, int input_size) {
    const double min_width = 1.0 / input_size;
    if (cfg.nms_mode == NmsMode::Soft) return soft_nms(std::move(dets), cfg.soft_sigma, cfg.soft_final_threshold, min_width);
    return nms(std::move(dets), cfg.nms_threshold, min_width);
}

InferenceSession::InferenceSession(const Model& model) : model_(&model), net_(model.spec()) {
    net_.import_weights(model.weights());
}

std::size_t InferenceSession::activation_bytes() const {
    std::size_t n = batch_.values.size();
    for (std::size_t i = 0; i < net_.layer_count(); ++i) n += net_.layer(i).out.values.size();
    return n * sizeof(float);
}

std::vector<std::vector<Detection>> InferenceSession::detect(std::span<const std::span<const float>> series,
                                                             const DetectorConfig& cfg) {
    std::vector<std::vector<float>> inputs;
    inputs.reserve(series.size());
    for (auto s : series) inputs.push_back(prepare_input(s, model_->spec().input_size));
    return detect_prepared(inputs, cfg);
}

std::vector<std::vector<Detection>> InferenceSession::detect_prepared(std::span<const std::vector<float>> inputs,
                                                                      const DetectorConfig& cfg) {
    std::vector<std::vector<Detection>> out;
    if (inputs.empty()) return out;
    const auto& spec = model_->spec();
    batch_.reshape(static_cast<int>(inputs.size()), 1, spec.input_size);
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        if (inputs[b].size() != static_cast<std::size_t>(spec.input_size))
            throw InputError("prepared input has length " + std::to_string(inputs[b].size()) + ", expected " +
                             std::to_string(spec.input_size));
        std::copy(inputs[b].begin(), inputs[b].end(), batch_.values.begin() + b * spec.input_size);
    }
    net_.forward(batch_, nn::Phase::Infer);
    const std::array<const nn::Tensor1D<float>*, 3> maps{&net_.prediction(0), &net_.prediction(1),
                                                         &net_.prediction(2)};
    DecodeOptions opt;
    opt.conf_threshold = cfg.conf_threshold;
    opt.multi_label_top_n = cfg.multi_label_top_n;
    out.reserve(inputs.size());
    for (std::size_t b = 0; b < inputs.size(); ++b)
        out.push_back(suppress(decode(maps, static_cast<int>(b), model_->anchors(), spec, opt), cfg, spec.input_size));
    return out;
}

// ---------------------------------------------------------------------------
// Weights file

namespace {

constexpr char kMagic[4] = {'A', 'D', '1', 'D'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::string make_header(const Model& m) {
    const auto& spec = m.spec();
    std::ostringstream os;
    os << std::setprecision(17);
    os << "input_size " << spec.input_size << '\n';
    os << "n_classes " << spec.n_classes << '\n';
    os << "n_anchors " << spec.n_anchors << '\n';
    os << "n_downsample " << spec.n_downsample << '\n';
    os << "classes";
    for (const auto& c : m.class_names()) os << ' ' << c;
    os << '\n';
    os << "anchors";
    for (double a : m.anchors().widths) os << ' ' << a;
    os << '\n';
    os << "running_stats 1\n";
    os << "layers " << spec.layers.size() << '\n';
    os << layer_table_to_text(spec.layers);
    return os.str();
}

[[noreturn]] void header_error(const std::string& what) {
    throw WeightsError(WeightsError::Kind::BadHeader, "weights header: " + what);
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const Model& model) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kWeightsVersion);
    const std::string header = make_header(model);
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    for (const auto& block : model.weights().blocks)
        for (float v : block.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

Model deserialize_weights(std::span<const std::uint8_t> bytes) {
    using Kind = WeightsError::Kind;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw WeightsError(Kind::BadMagic, "not a weights file (bad magic)");
    if (bytes.size() < 12) throw WeightsError(Kind::Truncated, "weights file truncated in preamble");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != kWeightsVersion)
        throw WeightsError(Kind::BadVersion, "unsupported weights format version " + std::to_string(version));
    const std::uint32_t header_len = get_u32(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        throw WeightsError(Kind::Truncated, "weights file truncated in header");
    const std::string header(reinterpret_cast<const char*>(bytes.data() + 12), header_len);

    NetworkSpec spec;
    std::vector<std::string> classes;
    AnchorSet anchors;
    bool have_anchors = false;
    std::istringstream in(header);
    std::string line;
    std::size_t n_layers = 0;
    bool have_layers = false;
    while (!have_layers && std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "input_size") {
            ls >> spec.input_size;
        } else if (key == "n_classes") {
            ls >> spec.n_classes;
        } else if (key == "n_anchors") {
            ls >> spec.n_anchors;
        } else if (key == "n_downsample") {
            ls >> spec.n_downsample;
        } else if (key == "classes") {
            for (std::string c; ls >> c;) classes.push_back(c);
        } else if (key == "anchors") {
            for (auto& a : anchors.widths)
                if (!(ls >> a)) header_error("expected 9 anchor widths");
            have_anchors = true;
        } else if (key == "running_stats") {
            int flag = 0;
            ls >> flag;
            if (flag != 1) header_error("files without running statistics are not supported");
        } else if (key == "layers") {
            ls >> n_layers;
            have_layers = true;
        } else if (!key.empty()) {
            header_error("unknown key '" + key + "'");
        }
        if (ls.fail() && !ls.eof()) header_error("malformed line '" + line + "'");
    }
    if (!have_layers || !have_anchors) header_error("missing layers or anchors");
    std::string table((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        spec.layers = layer_table_from_text(table);
    } catch (const ConfigError& e) {
        header_error(e.what());
    }
    if (spec.layers.size() != n_layers) header_error("layer count mismatch");

    std::unique_ptr<Network<float>> net;
    try {
        net = std::make_unique<Network<float>>(spec);
        anchors.validate(spec.input_size);
    } catch (const ConfigError& e) {
        throw WeightsError(Kind::ShapeMismatch, std::string("weights file describes an invalid network: ") + e.what());
    }
    WeightStore store = net->export_weights();
    const std::size_t expected = store.total_count() * 4;
    const std::size_t available = bytes.size() - 12 - header_len;
    if (available < expected)
        throw WeightsError(Kind::Truncated, "weights file truncated: " + std::to_string(available) + " of " +
                                                std::to_string(expected) + " parameter bytes");
    if (available > expected)
        throw WeightsError(Kind::ShapeMismatch, "weights file has " + std::to_string(available - expected) +
                                                    " trailing bytes beyond the described layers");
    const std::uint8_t* p = bytes.data() + 12 + header_len;
    for (auto& block : store.blocks)
        for (auto& v : block.values) {
            v = std::bit_cast<float>(get_u32(p));
            p += 4;
        }
    try {
        return Model(std::move(spec), anchors, std::move(classes), std::move(store));
    } catch (const ConfigError& e) {
        throw WeightsError(Kind::ShapeMismatch, e.what());
    }
}

void save_weights(const Model& model, const std::string& path) {
    const auto bytes = serialize_weights(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WeightsError(WeightsError::Kind::Io, "cannot write weights file '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WeightsError(WeightsError::Kind::Io, "error writing weights file '" + path + "'");
}

Model load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightsError(WeightsError::Kind::Io, "cannot open weights file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

}  // namespace ad1d
