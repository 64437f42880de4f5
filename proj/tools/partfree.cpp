#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "partfree/app.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    int threads = 1;
};

std::optional<partfree::RunConfig> load(const Options& opt) {
    std::ifstream in(opt.config, std::ios::binary);
    if (!in) {
        fmt::print(stderr, "error: cannot read config `{}`\n", opt.config);
        return std::nullopt;
    }
    std::stringstream text;
    text << in.rdbuf();
    auto parsed = partfree::parse_config(text.str());
    if (!parsed.ok()) {
        for (const auto& e : parsed.errors) fmt::print(stderr, "{}: {}\n", opt.config, e.describe());
        return std::nullopt;
    }
    if (!opt.out.empty()) parsed.config->output.directory = opt.out;
    return parsed.config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partition-free transport: transient currents, transmittance and steady state"};
    app.set_version_flag("--version", partfree::kVersion);
    app.require_subcommand(1);

    Options opt;
    app.add_option("--config", opt.config, "Run configuration (YAML)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", opt.out, "Output directory; overrides output.directory");
    app.add_option("--threads", opt.threads, "Workers over the n list and the energy grid")
        ->check(CLI::PositiveNumber);
    app.fallthrough();

    auto* transient = app.add_subcommand("transient", "I(t, n) traces, one CSV per measurement site");
    auto* landauer = app.add_subcommand("landauer", "Transmittance spectrum and Landauer current");
    auto* verify = app.add_subcommand("verify", "Invariant suite with a pass/fail table");
    auto* bound = app.add_subcommand("bound-states", "Discrete spectrum of H + vP1 outside the bands");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : partfree::kExitConfigError;
    }

    const auto cfg = load(opt);
    if (!cfg) return partfree::kExitConfigError;

    try {
        if (transient->parsed()) {
            for (const auto& path : partfree::run_transient(*cfg, cfg->output.directory, opt.threads))
                fmt::print("wrote {}\n", path.string());
        } else if (landauer->parsed()) {
            for (const auto& path : partfree::run_landauer(*cfg, cfg->output.directory, opt.threads))
                fmt::print("wrote {}\n", path.string());
        } else if (verify->parsed()) {
            return partfree::run_verify(*cfg, std::cout);
        } else if (bound->parsed()) {
            const auto path = partfree::run_bound_states(*cfg, cfg->output.directory, std::cout);
            fmt::print("wrote {}\n", path.string());
        }
    } catch (const partfree::HorizonError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return partfree::kExitConfigError;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return partfree::kExitVerifyFailed;
    }
    return partfree::kExitOk;
}
