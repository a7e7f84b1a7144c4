#include "ad1d/error.hpp"

#include <iostream>
#include <mutex>

namespace ad1d {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

void to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

WarningSink& sink() {
    static WarningSink s = to_stderr;
    return s;
}

}  // namespace

void set_warning_sink(WarningSink s) {
    std::lock_guard lock(sink_mutex());
    sink() = s ? std::move(s) : WarningSink(to_stderr);
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    sink()(message);
}

}  // namespace ad1d
