#pragma once

#include <iosfwd>
#include <string>

#include "ad1d/sample.hpp"

namespace ad1d {

// Dataset files hold one JSON object per line:
//   {"values": [40.25, ...], "labels": [{"class": "spike", "x": 0.5, "w": 0.01}]}
// An optional "source" field ("synthetic" | "labeled") is written and read back.

Dataset read_dataset(std::istream& in);
void write_dataset(std::ostream& out, const Dataset& data);

Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& data);

/// Validates a single sample; throws InputError describing the first problem.
void validate_sample(const Sample& s);

}  // namespace ad1d
