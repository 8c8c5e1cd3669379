// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace saeaudit::cli;
    CLI::App app{"Sparse-autoencoder interpretability and bias-audit pipeline"};
    app.set_version_flag("--version", SAEAUDIT_VERSION);
    app.require_subcommand(1);

    CommonOptions options;
    std::uint64_t seed = 0;
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name, command_description(name));
        sub->add_option("--config", options.config, "flat JSON config file");
        sub->add_option("--seed", seed, "base seed (overrides the config)");
        sub->add_option("--out-dir", options.out_dir, "output directory")->required();
        sub->add_option("--jobs", options.jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--strict", options.strict, "exit nonzero when degenerate statistics are flagged");
        sub->add_option("--precision", options.precision, "fp32 or fp64")->check(CLI::IsMember({"fp32", "fp64"}));
        sub->add_option("--set", options.overrides, "override a config value (key=value)");
        for (const char* input : {"corpus", "test-corpus", "model", "sae"}) {
            std::string key = input;
            std::replace(key.begin(), key.end(), '-', '_');
            sub->add_option(std::string("--") + input, options.inputs[key], std::string(input) + " artifact path");
        }
        subs[name] = sub;
    }
    CLI11_PARSE(app, argc, argv);

    for (auto it = options.inputs.begin(); it != options.inputs.end();)
        it = it->second.empty() ? options.inputs.erase(it) : std::next(it);
    for (const auto& [name, sub] : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) options.seed = seed;
        return run_command(name, options);
    }
    return kExitError;
}
