// ad1d: command-line front end for the 1-D anomaly detector.
//
// Exit codes: 0 success, 1 input error, 2 configuration error,
// 3 numeric/internal error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>

#include <CLI11.hpp>

#include "ad1d/error.hpp"
#include "commands.hpp"

namespace {

// Repeated warnings (label collisions during training, mostly) are shown a
// few times each and then only counted.
class WarningLimiter {
public:
    void operator()(const std::string& msg) {
        std::lock_guard lock(mu_);
        const auto key = msg.substr(0, std::min<std::size_t>(msg.size(), 28));
        if (++seen_[key] <= kShown) std::cerr << "warning: " << msg << '\n';
        if (seen_[key] == kShown) std::cerr << "warning: (further similar warnings are counted, not shown)\n";
    }
    void summary() {
        std::lock_guard lock(mu_);
        for (const auto& [key, n] : seen_)
            if (n > kShown) std::cerr << "warning: \"" << key << "...\" repeated " << n << " times\n";
    }

private:
    static constexpr int kShown = 5;
    std::mutex mu_;
    std::map<std::string, long long> seen_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ad1d: single-shot anomaly detection on 1-D RxMER captures"};
    app.require_subcommand(1);
    app.fallthrough();
    ad1d::tools::GlobalOptions global;
    global.seed_option = app.add_option("--seed", global.seed, "Seed for every random choice")->capture_default_str();

    ad1d::tools::register_gen_data(app, global);
    ad1d::tools::register_compute_anchors(app);
    ad1d::tools::register_train(app, global);
    ad1d::tools::register_detect(app);
    ad1d::tools::register_eval(app);
    ad1d::tools::register_bench(app, global);
    ad1d::tools::register_plot(app);

    static WarningLimiter limiter;
    ad1d::set_warning_sink([](const std::string& m) { limiter(m); });

    int code = 0;
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        code = 2;
    } catch (const ad1d::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        code = 1;
    } catch (const ad1d::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        code = 2;
    } catch (const ad1d::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        code = 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        code = 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        code = 3;
    }
    limiter.summary();
    return code;
}
