#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace ad1d {

// Error categories map one-to-one onto the CLI exit codes.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-fatal diagnostics (clamped inputs, skipped augmentations, label
// collisions). The default sink writes to stderr; tests swap it out.
// Passing an empty sink restores the default.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace ad1d
