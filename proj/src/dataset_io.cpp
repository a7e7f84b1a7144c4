#include "ad1d/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ad1d/error.hpp"
#include "ad1d/network_spec.hpp"

namespace ad1d {

using nlohmann::json;

int class_index(std::string_view name) {
    const auto& names = default_class_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw InputError("unknown class '" + std::string(name) + "'");
}

const std::string& class_name(int cls) {
    const auto& names = default_class_names();
    if (cls < 0 || static_cast<std::size_t>(cls) >= names.size())
        throw InputError("class id " + std::to_string(cls) + " out of range");
    return names[cls];
}

void validate_sample(const Sample& s) {
    if (s.values.empty()) throw InputError("sample has no values");
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const float v = s.values[i];
        if (!(v >= 0.0f && v <= static_cast<float>(kMaxMer)))
            throw InputError("value " + std::to_string(v) + " at index " + std::to_string(i) +
                             " outside [0, 63.75]");
    }
    for (const auto& a : s.annotations) {
        class_name(a.cls);
        if (!(a.x >= 0.0 && a.x <= 1.0) || !(a.w > 0.0 && a.w <= 1.0))
            throw InputError("annotation x=" + std::to_string(a.x) + " w=" + std::to_string(a.w) +
                             " outside 0<=x<=1, 0<w<=1");
    }
}

namespace {

Sample sample_from_json(const json& j) {
    Sample s;
    const auto& values = j.at("values");
    if (!values.is_array()) throw InputError("'values' must be an array");
    s.values.reserve(values.size());
    for (const auto& v : values) {
        if (!v.is_number()) throw InputError("'values' must contain numbers");
        s.values.push_back(v.get<float>());
    }
    if (j.contains("labels")) {
        for (const auto& l : j.at("labels")) {
            Annotation a;
            a.cls = class_index(l.at("class").get<std::string>());
            a.x = l.at("x").get<double>();
            a.w = l.at("w").get<double>();
            s.annotations.push_back(a);
        }
    }
    if (j.contains("source")) {
        const auto src = j.at("source").get<std::string>();
        if (src == "synthetic")
            s.source = SampleSource::Synthetic;
        else if (src == "labeled")
            s.source = SampleSource::Labeled;
        else
            throw InputError("unknown source '" + src + "'");
    }
    validate_sample(s);
    return s;
}

json sample_to_json(const Sample& s) {
    json labels = json::array();
    for (const auto& a : s.annotations) labels.push_back({{"class", class_name(a.cls)}, {"x", a.x}, {"w", a.w}});
    json values = json::array();
    for (float v : s.values) values.push_back(v);
    return {{"values", std::move(values)},
            {"labels", std::move(labels)},
            {"source", s.source == SampleSource::Synthetic ? "synthetic" : "labeled"}};
}

}  // namespace

Dataset read_dataset(std::istream& in) {
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            data.push_back(sample_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw InputError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return data;
}

void write_dataset(std::ostream& out, const Dataset& data) {
    for (const auto& s : data) out << sample_to_json(s).dump() << '\n';
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write dataset '" + path + "'");
    write_dataset(out, data);
    if (!out) throw InputError("error writing dataset '" + path + "'");
}

}  // namespace ad1d
