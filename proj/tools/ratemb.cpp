#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "ratemb/pipeline.hpp"
#include "ratemb/textio.hpp"

namespace fs = std::filesystem;
namespace pl = ratemb::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kStageFailed = 2;

std::string describe(const pl::KeySpec& k) {
    std::string s = k.help;
    if (k.role == pl::Role::input) s = "input: " + s;
    if (k.role == pl::Role::output) s = "output: " + s;
    if (k.required) s += " (required)";
    if (!k.fallback.empty()) s += " [default " + k.fallback + "]";
    if (!k.choices.empty()) {
        s += " {";
        for (std::size_t i = 0; i < k.choices.size(); ++i) s += (i ? "," : "") + k.choices[i];
        s += "}";
    }
    return s;
}

int execute(const pl::PipelineConfig& config, const pl::RunOptions& options, bool dry_run, bool echo_reports) {
    try {
        if (dry_run) {
            auto checked = config;
            if (options.seed) checked.seed = *options.seed;
            const auto order = pl::validate(checked, options.base_dir);
            for (const auto i : order) std::cout << checked.stages[i].name << ' ' << checked.stages[i].kind << '\n';
            return kOk;
        }
        const auto manifest = pl::run_pipeline(config, options);
        if (echo_reports)
            for (const auto& s : manifest.stages)
                for (const auto& f : s.outputs)
                    if (f.key == "report" || s.kind.rfind("eval-", 0) == 0)
                        std::cout << ratemb::read_file((options.base_dir / f.path).string());
        std::cerr << "digest " << manifest.digest() << '\n';
        return kOk;
    } catch (const pl::StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kStageFailed;
    } catch (const ratemb::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const pl::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Representation learning toolkit for ratemaking features"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ratemb 0.1.0");

    std::uint64_t seed = 0;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run every stage of a config file in dependency order");
    std::string config_path, workdir, manifest_path;
    bool dry_run = false;
    run->add_option("config", config_path, "pipeline config")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--workdir", workdir, "resolve relative paths here [default: the config's directory]");
    run->add_option("--manifest", manifest_path, "manifest path [default: config value, else manifest.txt]");
    run->add_flag("--dry-run", dry_run, "validate and print the execution order");
    run->add_flag("--quiet", quiet, "no progress lines");

    std::map<std::string, std::map<std::string, std::string>> values;
    std::map<std::string, CLI::App*> stage_apps;
    for (const auto& kind : pl::stage_kinds()) {
        auto* sub = app.add_subcommand(kind, std::string(pl::stage_summary(kind)));
        stage_apps[kind] = sub;
        for (const auto& key : pl::stage_keys(kind)) {
            if (key.name == "seed") continue;
            sub->add_option("--" + key.name, values[kind][key.name], describe(key));
        }
        sub->add_option("--seed", seed, "global seed; the stage seed derives from it");
        sub->add_option("--manifest", manifest_path, "also write a run manifest here");
        sub->add_flag("--quiet", quiet, "no progress lines");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    pl::RunOptions options;
    if (!quiet) options.log = &std::cerr;

    if (run->parsed()) {
        pl::PipelineConfig config;
        try {
            config = pl::parse_config_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kInvalid;
        }
        options.base_dir = workdir.empty() ? fs::absolute(config_path).parent_path() : fs::path(workdir);
        if (run->count("--seed")) options.seed = seed;
        if (!manifest_path.empty()) config.manifest = manifest_path;
        if (config.manifest.empty()) config.manifest = "manifest.txt";
        return execute(config, options, dry_run, false);
    }

    for (const auto& [kind, sub] : stage_apps) {
        if (!sub->parsed()) continue;
        pl::StageConfig stage;
        stage.name = kind;
        stage.kind = kind;
        stage.line = 0;
        for (const auto& [key, value] : values[kind])
            if (sub->count("--" + key)) stage.params[key] = value;
        pl::PipelineConfig config;
        config.seed = seed;
        config.manifest = manifest_path;
        config.stages.push_back(std::move(stage));
        options.base_dir = fs::current_path();
        return execute(config, options, false, true);
    }
    return kInvalid;
}
