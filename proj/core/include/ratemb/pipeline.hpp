#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratemb/error.hpp"

namespace ratemb::pipeline {

// A config that cannot run: unknown kind or key, missing parameter, bad
// value, cycle, or an input nobody produces.
class ValidationError : public SpecError {
public:
    using SpecError::SpecError;
};

// A stage raised while running. The message leads with the stage name; the
// original module error is kept as the cause.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what, std::exception_ptr cause)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)), cause_(std::move(cause)) {}

    const std::string& stage() const { return stage_; }
    std::exception_ptr cause() const { return cause_; }

private:
    std::string stage_;
    std::exception_ptr cause_;
};

struct StageConfig {
    std::string name;
    std::string kind;
    std::map<std::string, std::string> params;
    std::size_t line = 0;
};

/// Line-oriented config:
///   seed = 7
///   [stage-name]
///   kind = pca
///   input = data/x.emb
/// Blank lines and lines starting with '#' are ignored.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string manifest;
    std::vector<StageConfig> stages;

    /// Seed plus every stage with sorted keys; the manifest path is left out.
    std::string canonical() const;
};

PipelineConfig parse_config(std::istream& is);
PipelineConfig parse_config_file(const std::string& path);

enum class Role { input, output, param };

enum class ValueType { path, path_list, image_list, size, size_list, real, flag, text };

struct KeySpec {
    std::string name;
    Role role = Role::param;
    ValueType type = ValueType::text;
    bool required = false;
    std::string fallback;
    std::vector<std::string> choices;
    std::string help;
};

/// Every stage kind, in a fixed order.
const std::vector<std::string>& stage_kinds();
/// Keys a kind accepts. Throws ValidationError for an unknown kind.
const std::vector<KeySpec>& stage_keys(const std::string& kind);
std::string_view stage_summary(const std::string& kind);

/// Per-stage seed, a function of the global seed and the stage name.
std::uint64_t stage_seed(std::uint64_t global_seed, const std::string& stage_name);

struct RunOptions {
    /// Relative paths resolve against this directory.
    std::filesystem::path base_dir = ".";
    std::optional<std::uint64_t> seed;
    /// Progress lines go here when set.
    std::ostream* log = nullptr;
};

struct FileDigest {
    std::string key;
    std::string path;
    std::string checksum;
};

struct StageRecord {
    std::string name;
    std::string kind;
    std::uint64_t seed = 0;
    std::string params_checksum;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    double seconds = 0.0;
};

struct RunManifest {
    std::string config_checksum;
    std::uint64_t seed = 0;
    std::vector<StageRecord> stages;

    /// Checksum over everything except timings.
    std::string digest() const;
    std::string to_text() const;
};

/// Checks kinds, keys, values, the stage graph and input availability.
/// Returns stage indices in execution order: dependencies first, ties by
/// config order.
std::vector<std::size_t> validate(const PipelineConfig& config, const std::filesystem::path& base_dir);

RunManifest run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// FNV-1a over the file bytes; image lists fold in every listed image.
std::string file_checksum(const std::filesystem::path& path, ValueType type = ValueType::path);

/// One image path per line, relative to the list's directory.
std::vector<std::filesystem::path> read_image_list(const std::filesystem::path& path);

}  // namespace ratemb::pipeline
