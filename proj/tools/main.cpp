#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "multidiffusion/config.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::string> seed, steps, mode, threads, out, report;
    std::optional<std::string> height, width, channels, window, stride, prompt, t_init, bootstrap;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key=value config file");
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_option("--steps", f.steps, "number of diffusion steps T");
    cmd->add_option("--mode", f.mode, "ancestral or deterministic");
    cmd->add_option("--threads", f.threads, "worker threads (0 = default)");
    cmd->add_option("--out", f.out, "output image (P5/P6)");
    cmd->add_option("--report", f.report, "plain-text report file");
    cmd->add_option("--height", f.height, "canvas height");
    cmd->add_option("--width", f.width, "canvas width");
    cmd->add_option("--channels", f.channels, "canvas channels");
}

mdiff::KeyValues overrides(const Flags& f) {
    mdiff::KeyValues kv;
    auto put = [&](const char* key, const std::optional<std::string>& v) {
        if (v) kv.emplace_back(key, *v);
    };
    put("seed", f.seed);
    put("steps", f.steps);
    put("mode", f.mode);
    put("threads", f.threads);
    put("out", f.out);
    put("report", f.report);
    put("height", f.height);
    put("width", f.width);
    put("channels", f.channels);
    put("window", f.window);
    put("stride", f.stride);
    put("prompt", f.prompt);
    put("t_init", f.t_init);
    put("bootstrap", f.bootstrap);
    return kv;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fused diffusion sampling with analytic denoisers"};
    app.require_subcommand(1);
    Flags flags;

    auto* panorama = app.add_subcommand("panorama", "sliding-window panorama");
    add_common(panorama, flags);
    panorama->add_option("--window", flags.window, "window size");
    panorama->add_option("--stride", flags.stride, "window stride");
    panorama->add_option("--prompt", flags.prompt, "token shared by all windows");

    auto* sample = app.add_subcommand("sample", "single full-canvas view");
    add_common(sample, flags);
    sample->add_option("--prompt", flags.prompt, "token");

    for (auto* cmd : {app.add_subcommand("region", "mask-conditioned generation"),
                      app.add_subcommand("ablate", "IoU with and without bootstrapping")}) {
        add_common(cmd, flags);
        cmd->add_option("--t-init", flags.t_init, "bootstrapping phase length in steps");
        cmd->add_option("--bootstrap", flags.bootstrap, "true or false");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const CLI::App* chosen = app.get_subcommands().front();
        const mdiff::Command command = mdiff::parse_command(chosen->get_name());
        const mdiff::RunConfig config =
            flags.config.empty() ? mdiff::parse_config(command, overrides(flags))
                                 : mdiff::parse_config_file(command, flags.config, overrides(flags));
        mdiff::run(config, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
