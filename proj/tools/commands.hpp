#pragma once

#include <CLI11.hpp>

namespace ad1d::tools {

struct GlobalOptions {
    unsigned long long seed = 1;
    CLI::Option* seed_option = nullptr;

    bool seed_given() const { return seed_option != nullptr && seed_option->count() > 0; }
};

// Each register_* adds one subcommand whose callback does the work. Errors
// propagate as InputError / ConfigError / NumericError and are mapped to exit
// codes by main().
void register_gen_data(CLI::App& app, const GlobalOptions& g);
void register_compute_anchors(CLI::App& app);
void register_train(CLI::App& app, const GlobalOptions& g);
void register_detect(CLI::App& app);
void register_eval(CLI::App& app);
void register_bench(CLI::App& app, const GlobalOptions& g);
void register_plot(CLI::App& app);

}  // namespace ad1d::tools
