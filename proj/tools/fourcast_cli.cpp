// fourcast: command-line front end over the C interface.

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fourcast/fourcast.h"

namespace {

struct Options {
    std::string config;
    std::string e, eps, n, w, horizon, seed, trace, out;
    std::vector<std::string> extra;  // key=value
};

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config, "key = value settings file");
    cmd->add_option("--e", opt.e, "energy threshold(s), comma separated");
    cmd->add_option("--eps", opt.eps, "RMSE bound(s), comma separated; selects the rmse criterion");
    cmd->add_option("--n", opt.n, "steps per batch");
    cmd->add_option("--w", opt.w, "batches per input window");
    cmd->add_option("--horizon", opt.horizon, "forecast horizon in steps");
    cmd->add_option("--seed", opt.seed, "seed for training and sampling");
    cmd->add_option("--trace", opt.trace, "trace CSV (timestamp,machine_id,cpu_util,mem_util)");
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_option("--set", opt.extra, "extra key=value setting, repeatable");
}

int report(fc_status status, const char* what) {
    std::fprintf(stderr, "fourcast: error: %s: %s (%s)\n", what, fc_last_error(), fc_status_name(status));
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fourier-truncated telemetry collection and forecasting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(fc_version()));

    Options opt;
    const std::map<std::string, std::string> commands{
        {"synth", "write a synthetic daily-seasonal trace"},
        {"truncate", "savings and truncation error per threshold"},
        {"simulate", "run the node/controller protocol and keep the message stream"},
        {"train-eval", "train and score forecasters per threshold against the time-domain benchmark"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opt);

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    std::unique_ptr<fc_experiment, decltype(&fc_experiment_destroy)> exp(nullptr, fc_experiment_destroy);
    {
        fc_experiment* raw = nullptr;
        if (const auto st = fc_experiment_create(&raw); st != FC_OK) return report(st, "setup");
        exp.reset(raw);
    }
    if (!opt.config.empty())
        if (const auto st = fc_experiment_load_config(exp.get(), opt.config.c_str()); st != FC_OK)
            return report(st, "config");

    std::vector<std::pair<std::string, std::string>> settings;
    if (!opt.e.empty()) settings.emplace_back("e", opt.e), settings.emplace_back("criterion", "energy");
    if (!opt.eps.empty()) settings.emplace_back("eps", opt.eps), settings.emplace_back("criterion", "rmse");
    if (!opt.e.empty() && !opt.eps.empty()) {
        std::fprintf(stderr, "fourcast: error: --e and --eps are mutually exclusive\n");
        return 2;
    }
    for (const auto& [key, value] : std::vector<std::pair<const char*, std::string*>>{
             {"n", &opt.n}, {"w", &opt.w}, {"horizon", &opt.horizon}, {"seed", &opt.seed},
             {"trace", &opt.trace}, {"out", &opt.out}})
        if (!value->empty()) settings.emplace_back(key, *value);
    for (const auto& kv : opt.extra) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "fourcast: error: --set expects key=value, got '%s'\n", kv.c_str());
            return 2;
        }
        settings.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : settings)
        if (const auto st = fc_experiment_set(exp.get(), key.c_str(), value.c_str()); st != FC_OK)
            return report(st, "settings");

    if (const auto st = fc_experiment_run(exp.get(), command.c_str()); st != FC_OK) return report(st, command.c_str());

    std::printf("%s\n", fc_experiment_summary(exp.get()));
    for (std::size_t i = 0; i < fc_experiment_output_count(exp.get()); ++i)
        std::printf("wrote %s\n", fc_experiment_output_path(exp.get(), i));
    return 0;
}
