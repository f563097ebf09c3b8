#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "multidiffusion/fusion.hpp"
#include "multidiffusion/panorama.hpp"
#include "multidiffusion/region.hpp"

namespace mdiff {

/// Problems with the config text or flags. The message names the key.
class ConfigError : public Error {
public:
    using Error::Error;
};

class UnknownKeyError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class MissingTokenError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class BadDimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

enum class Command { panorama, region, sample, ablate };

struct TokenSpec {
    enum class Kind { gaussian, pattern };
    enum class Shape { constant, stripes, disk };
    Kind kind = Kind::pattern;
    Shape shape = Shape::constant;
    Color color{0.5f};        // constant color, stripes first color, disk color, gaussian mean
    Color second{0.5f};       // stripes second color, disk background
    int period = 8;
    bool vertical = false;
    float radius = 4.0f;
    std::optional<std::pair<float, float>> center;
    float scale = 0.5f;
    float pull = 0.5f;
};

struct RegionConfig {
    std::string name;
    Mask mask;
    std::string token;
    bool score = true;
};

struct RunConfig {
    Command command = Command::panorama;

    int steps = 50;
    std::optional<std::pair<double, double>> beta;  // linear endpoints; desk schedule when unset
    StepMode mode = StepMode::deterministic;
    NoisePolicy noise_policy = NoisePolicy::shared_canvas;
    std::uint64_t seed = 0;
    int batch = 8;
    int threads = 0;

    int height = 64;
    int width = 64;
    int channels = 4;
    int window = 64;
    int stride = 8;
    std::string prompt = "stripes";

    std::map<std::string, TokenSpec> tokens;
    std::vector<RegionConfig> regions;
    std::optional<std::string> background_token;
    bool bootstrap = false;
    int t_init = 0;
    std::optional<Color> background_color;

    double decode_low = 0.0;
    double decode_high = 1.0;
    int upscale = 1;

    int ablate_seeds = 10;
    double ablate_tol = 0.5;

    std::filesystem::path out;
    std::filesystem::path report;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads `key = value` lines. '#' starts a comment; blank lines are skipped.
KeyValues read_key_values(const std::string& text);

/// Builds and validates a config. Later entries override earlier ones, so
/// command-line flags go after the file contents. Relative mask paths are
/// resolved against `base_dir`.
RunConfig parse_config(Command command, const KeyValues& entries, const std::filesystem::path& base_dir = {});
RunConfig parse_config_file(Command command, const std::filesystem::path& path, const KeyValues& overrides = {});

Command parse_command(const std::string& name);

/// Builtin tokens ("stripes", "gaussian", "flat") plus the declared ones.
DenoiserRegistry build_registry(const RunConfig& config);
NoiseSchedule build_schedule(const RunConfig& config);
FusionPlan build_plan(const RunConfig& config);
RegionSpec build_region_spec(const RunConfig& config);

/// Affine rescale from [decode_low, decode_high] to [0, 1], clamp, and
/// nearest-neighbor upscale.
LatentGrid decode(const RunConfig& config, const LatentGrid& latent);

/// Executes the command, writing the image and report atomically. Progress
/// and summaries go to `log`.
void run(const RunConfig& config, std::ostream& log);

}  // namespace mdiff
