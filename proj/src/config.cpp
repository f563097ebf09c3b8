#include "multidiffusion/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string_view>

#include "multidiffusion/metrics.hpp"
#include "multidiffusion/parallel.hpp"
#include "multidiffusion/pnm.hpp"

namespace mdiff {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep)) out.push_back(trim(part));
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end || value.empty()) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
    }
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(out)) throw ConfigError("key '" + key + "': value must be finite");
    }
    return out;
}

int parse_dimension(const std::string& key, const std::string& value) {
    const long long v = parse_number<long long>(key, value);
    if (v < 1 || v > (1 << 20)) throw BadDimensionError("key '" + key + "': dimension must be in 1..1048576, got " + value);
    return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<float> parse_list(const std::string& key, const std::string& value) {
    std::vector<float> out;
    for (const std::string& part : split(value, ',')) out.push_back(parse_number<float>(key, part));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::vector<float> parse_list(const std::string& key, const std::string& value, std::size_t n) {
    auto out = parse_list(key, value);
    if (out.size() != n) {
        throw ConfigError("key '" + key + "': expected " + std::to_string(n) + " comma-separated values");
    }
    return out;
}

void parse_token_key(TokenSpec& tok, const std::string& key, const std::string& field, const std::string& value) {
    if (field == "kind") {
        if (value == "gaussian") tok.kind = TokenSpec::Kind::gaussian;
        else if (value == "pattern") tok.kind = TokenSpec::Kind::pattern;
        else throw ConfigError("key '" + key + "': kind must be gaussian or pattern");
    } else if (field == "pattern") {
        if (value == "constant") tok.shape = TokenSpec::Shape::constant;
        else if (value == "stripes") tok.shape = TokenSpec::Shape::stripes;
        else if (value == "disk") tok.shape = TokenSpec::Shape::disk;
        else throw ConfigError("key '" + key + "': pattern must be constant, stripes or disk");
    } else if (field == "color" || field == "mean") {
        tok.color = parse_list(key, value);
    } else if (field == "second" || field == "background") {
        tok.second = parse_list(key, value);
    } else if (field == "period") {
        tok.period = parse_number<int>(key, value);
    } else if (field == "vertical") {
        tok.vertical = parse_bool(key, value);
    } else if (field == "radius") {
        tok.radius = parse_number<float>(key, value);
    } else if (field == "center") {
        const auto c = parse_list(key, value, 2);
        tok.center = std::pair{c[0], c[1]};
    } else if (field == "scale") {
        tok.scale = parse_number<float>(key, value);
    } else if (field == "pull") {
        tok.pull = parse_number<float>(key, value);
    } else {
        throw UnknownKeyError("unknown key '" + key + "'");
    }
}

struct RegionDraft {
    std::string name;
    std::optional<Mask> mask;
    std::string shape_key;
    std::string token;
    std::string token_key;
    bool score = true;
};

Mask rect_mask(int height, int width, const std::string& key, const std::vector<float>& r) {
    const int top = static_cast<int>(r[0]);
    const int left = static_cast<int>(r[1]);
    const int h = static_cast<int>(r[2]);
    const int w = static_cast<int>(r[3]);
    if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > height || left + w > width) {
        throw BadDimensionError("key '" + key + "': rectangle does not fit the " + std::to_string(height) + "x" +
                                std::to_string(width) + " canvas");
    }
    Mask m(height, width);
    for (int y = top; y < top + h; ++y)
        for (int x = left; x < left + w; ++x) m.set(y, x, true);
    return m;
}

Mask disk_mask(int height, int width, const std::vector<float>& d) {
    Mask m(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if ((y - d[0]) * (y - d[0]) + (x - d[1]) * (x - d[1]) <= d[2] * d[2]) m.set(y, x, true);
    return m;
}

const std::map<std::string, TokenSpec>& builtin_tokens() {
    static const std::map<std::string, TokenSpec> tokens = [] {
        std::map<std::string, TokenSpec> t;
        TokenSpec stripes;
        stripes.shape = TokenSpec::Shape::stripes;
        stripes.color = {0.2f};
        stripes.second = {0.8f};
        t["stripes"] = stripes;
        TokenSpec gaussian;
        gaussian.kind = TokenSpec::Kind::gaussian;
        t["gaussian"] = gaussian;
        t["flat"] = TokenSpec{};
        return t;
    }();
    return tokens;
}

void require_color_size(const Color& c, int channels, const std::string& what) {
    if (c.size() != 1 && static_cast<int>(c.size()) != channels) {
        throw BadDimensionError(what + ": color has " + std::to_string(c.size()) + " components, canvas has " +
                                std::to_string(channels) + " channels");
    }
}

std::string command_name(Command c) {
    switch (c) {
        case Command::panorama: return "panorama";
        case Command::region: return "region";
        case Command::sample: return "sample";
        case Command::ablate: return "ablate";
    }
    return "?";
}

}  // namespace

Command parse_command(const std::string& name) {
    if (name == "panorama") return Command::panorama;
    if (name == "region") return Command::region;
    if (name == "sample") return Command::sample;
    if (name == "ablate") return Command::ablate;
    throw ConfigError("unknown command '" + name + "'");
}

KeyValues read_key_values(const std::string& text) {
    KeyValues out;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
        out.emplace_back(std::move(key), trim(std::string_view(line).substr(eq + 1)));
    }
    return out;
}

RunConfig parse_config(Command command, const KeyValues& entries, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    cfg.command = command;
    std::optional<double> beta_start;
    std::optional<double> beta_end;
    std::optional<int> t_init;
    std::vector<RegionDraft> drafts;
    std::vector<std::pair<std::string, std::string>> shapes;  // (region, key=value) resolved after dimensions

    auto draft = [&](const std::string& name) -> RegionDraft& {
        for (auto& d : drafts)
            if (d.name == name) return d;
        drafts.emplace_back().name = name;
        return drafts.back();
    };

    for (const auto& [key, value] : entries) {
        if (key.rfind("token.", 0) == 0) {
            const auto dot = key.find('.', 6);
            if (dot == std::string::npos || dot == 6) throw UnknownKeyError("unknown key '" + key + "'");
            const std::string name = key.substr(6, dot - 6);
            auto [it, fresh] = cfg.tokens.try_emplace(name);
            if (fresh) {
                auto builtin = builtin_tokens().find(name);
                if (builtin != builtin_tokens().end()) it->second = builtin->second;
            }
            parse_token_key(it->second, key, key.substr(dot + 1), value);
            continue;
        }
        if (key.rfind("region.", 0) == 0) {
            const auto dot = key.find('.', 7);
            if (dot == std::string::npos || dot == 7) throw UnknownKeyError("unknown key '" + key + "'");
            RegionDraft& d = draft(key.substr(7, dot - 7));
            const std::string field = key.substr(dot + 1);
            if (field == "token") {
                d.token = value;
                d.token_key = key;
            } else if (field == "score") {
                d.score = parse_bool(key, value);
            } else if (field == "mask" || field == "rect" || field == "disk") {
                d.shape_key = key;
                shapes.emplace_back(d.name, key);
            } else {
                throw UnknownKeyError("unknown key '" + key + "'");
            }
            continue;
        }

        if (key == "steps") cfg.steps = parse_number<int>(key, value);
        else if (key == "beta_start") beta_start = parse_number<double>(key, value);
        else if (key == "beta_end") beta_end = parse_number<double>(key, value);
        else if (key == "mode") {
            if (value == "ancestral") cfg.mode = StepMode::ancestral;
            else if (value == "deterministic") cfg.mode = StepMode::deterministic;
            else throw ConfigError("key 'mode': expected ancestral or deterministic, got '" + value + "'");
        } else if (key == "noise_policy") {
            if (value == "shared_canvas") cfg.noise_policy = NoisePolicy::shared_canvas;
            else if (value == "per_view") cfg.noise_policy = NoisePolicy::per_view;
            else throw ConfigError("key 'noise_policy': expected shared_canvas or per_view");
        } else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "batch") cfg.batch = parse_number<int>(key, value);
        else if (key == "threads") cfg.threads = parse_number<int>(key, value);
        else if (key == "height") cfg.height = parse_dimension(key, value);
        else if (key == "width") cfg.width = parse_dimension(key, value);
        else if (key == "channels") cfg.channels = parse_dimension(key, value);
        else if (key == "window") cfg.window = parse_dimension(key, value);
        else if (key == "stride") cfg.stride = parse_dimension(key, value);
        else if (key == "prompt") cfg.prompt = value;
        else if (key == "bootstrap") cfg.bootstrap = parse_bool(key, value);
        else if (key == "t_init") t_init = parse_number<int>(key, value);
        else if (key == "background") {
            if (value == "random") cfg.background_color.reset();
            else cfg.background_color = parse_list(key, value);
        } else if (key == "background_token") {
            if (value.empty()) cfg.background_token.reset();
            else cfg.background_token = value;
        } else if (key == "decode.low") cfg.decode_low = parse_number<double>(key, value);
        else if (key == "decode.high") cfg.decode_high = parse_number<double>(key, value);
        else if (key == "decode.upscale") cfg.upscale = parse_dimension(key, value);
        else if (key == "ablate.seeds") cfg.ablate_seeds = parse_number<int>(key, value);
        else if (key == "ablate.tol") cfg.ablate_tol = parse_number<double>(key, value);
        else if (key == "out") cfg.out = value;
        else if (key == "report") cfg.report = value;
        else throw UnknownKeyError("unknown key '" + key + "'");
    }

    // Numeric ranges.
    if (cfg.steps < 1) throw RangeError("key 'steps': must be >= 1");
    if (beta_start.has_value() != beta_end.has_value()) {
        throw ConfigError(std::string("key '") + (beta_start ? "beta_end" : "beta_start") +
                          "': beta_start and beta_end must be given together");
    }
    if (beta_start) cfg.beta = std::pair{*beta_start, *beta_end};
    cfg.t_init = t_init.value_or(default_bootstrap_steps(cfg.steps));
    if (cfg.t_init < 0 || cfg.t_init > cfg.steps) {
        throw RangeError("key 't_init': " + std::to_string(cfg.t_init) + " outside 0.." + std::to_string(cfg.steps));
    }
    if (cfg.batch < 1) throw RangeError("key 'batch': must be >= 1");
    if (cfg.threads < 0) throw RangeError("key 'threads': must be >= 0");
    if (!(cfg.decode_high > cfg.decode_low)) throw RangeError("key 'decode.high': must exceed decode.low");
    if (cfg.ablate_seeds < 1) throw RangeError("key 'ablate.seeds': must be >= 1");
    if (!(cfg.ablate_tol >= 0.0)) throw RangeError("key 'ablate.tol': must be >= 0");
    if (cfg.channels == 2) throw BadDimensionError("key 'channels': 2-channel canvases cannot be written as P5 or P6");
    if (static_cast<long long>(cfg.height) * cfg.width * cfg.channels > (1LL << 32)) {
        throw BadDimensionError("key 'height': canvas has too many entries");
    }
    if (command == Command::panorama) {
        if (cfg.window > cfg.height || cfg.window > cfg.width) {
            throw BadDimensionError("key 'window': " + std::to_string(cfg.window) + " exceeds the " +
                                    std::to_string(cfg.height) + "x" + std::to_string(cfg.width) + " canvas");
        }
    }

    // Tokens.
    for (const auto& [name, tok] : cfg.tokens) {
        const std::string prefix = "token." + name;
        require_color_size(tok.color, cfg.channels, prefix);
        require_color_size(tok.second, cfg.channels, prefix);
        if (tok.kind == TokenSpec::Kind::gaussian && !(tok.scale >= 0.0f)) {
            throw RangeError("key '" + prefix + ".scale': must be >= 0");
        }
        if (tok.kind == TokenSpec::Kind::pattern && !(tok.pull > 0.0f && tok.pull <= 1.0f)) {
            throw RangeError("key '" + prefix + ".pull': must lie in (0, 1]");
        }
        if (tok.shape == TokenSpec::Shape::stripes && tok.period < 2) {
            throw RangeError("key '" + prefix + ".period': must be >= 2");
        }
        if (tok.shape == TokenSpec::Shape::disk && !(tok.radius > 0.0f)) {
            throw RangeError("key '" + prefix + ".radius': must be positive");
        }
    }
    auto require_token = [&](const std::string& token, const std::string& key) {
        if (token.empty()) throw MissingTokenError("key '" + key + "': no token given");
        if (!cfg.tokens.count(token) && !builtin_tokens().count(token)) {
            throw MissingTokenError("key '" + key + "': token '" + token + "' is not defined");
        }
    };
    if (cfg.background_color) require_color_size(*cfg.background_color, cfg.channels, "key 'background'");

    // Regions, now that the canvas extent is final.
    for (const auto& [name, key] : shapes) {
        RegionDraft& d = draft(name);
        if (key != d.shape_key) continue;  // a later shape key for this region wins
        const std::string field = key.substr(key.rfind('.') + 1);
        const auto value = std::find_if(entries.rbegin(), entries.rend(), [&](const auto& kv) { return kv.first == key; })->second;
        if (field == "mask") {
            std::filesystem::path path = value;
            if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
            d.mask = read_mask(path);
            if (d.mask->height() != cfg.height || d.mask->width() != cfg.width) {
                throw BadDimensionError("key '" + key + "': mask is " + std::to_string(d.mask->height()) + "x" +
                                        std::to_string(d.mask->width()) + ", canvas is " + std::to_string(cfg.height) +
                                        "x" + std::to_string(cfg.width));
            }
        } else if (field == "rect") {
            d.mask = rect_mask(cfg.height, cfg.width, key, parse_list(key, value, 4));
        } else {
            const auto disk = parse_list(key, value, 3);
            if (!(disk[2] > 0.0f)) throw BadDimensionError("key '" + key + "': radius must be positive");
            d.mask = disk_mask(cfg.height, cfg.width, disk);
        }
    }

    const bool regional = command == Command::region || command == Command::ablate;
    if (regional) {
        if (drafts.empty()) throw ConfigError("key 'region': the " + command_name(command) + " command needs regions");
        for (RegionDraft& d : drafts) {
            const std::string prefix = "region." + d.name;
            if (!d.mask) throw ConfigError("key '" + prefix + ".mask': region has no mask, rect or disk");
            require_token(d.token, d.token_key.empty() ? prefix + ".token" : d.token_key);
            cfg.regions.push_back(RegionConfig{d.name, std::move(*d.mask), d.token, d.score});
        }
        if (cfg.background_token) require_token(*cfg.background_token, "background_token");
    } else {
        require_token(cfg.prompt, "prompt");
    }
    if (command != Command::ablate && cfg.out.empty()) throw ConfigError("key 'out': an output path is required");
    return cfg;
}

RunConfig parse_config_file(Command command, const std::filesystem::path& path, const KeyValues& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    KeyValues entries = read_key_values(text.str());
    entries.insert(entries.end(), overrides.begin(), overrides.end());
    return parse_config(command, entries, path.parent_path());
}

DenoiserRegistry build_registry(const RunConfig& config) {
    std::map<std::string, TokenSpec> all = builtin_tokens();
    for (const auto& [name, tok] : config.tokens) all[name] = tok;

    DenoiserRegistry registry;
    for (const auto& [name, tok] : all) {
        if (tok.kind == TokenSpec::Kind::gaussian) {
            LatentGrid mean(1, 1, config.channels);
            for (int c = 0; c < config.channels; ++c) mean.at(0, 0, c) = tok.color.size() == 1 ? tok.color[0] : tok.color[c];
            registry.add(name, std::make_shared<GaussianDenoiser>(std::move(mean), tok.scale));
            continue;
        }
        Pattern pattern;
        switch (tok.shape) {
            case TokenSpec::Shape::constant: pattern = ConstantPattern{tok.color}; break;
            case TokenSpec::Shape::stripes: pattern = StripesPattern{tok.period, tok.color, tok.second, tok.vertical}; break;
            case TokenSpec::Shape::disk: pattern = DiskPattern{tok.radius, tok.center, tok.color, tok.second}; break;
        }
        registry.add(name, std::make_shared<PatternDenoiser>(std::move(pattern), tok.pull));
    }
    return registry;
}

NoiseSchedule build_schedule(const RunConfig& config) {
    if (config.beta) return linear_schedule(config.steps, config.beta->first, config.beta->second);
    return desk_schedule(config.steps);
}

RegionSpec build_region_spec(const RunConfig& config) {
    RegionSpec spec;
    spec.height = config.height;
    spec.width = config.width;
    spec.channels = config.channels;
    for (const RegionConfig& r : config.regions) spec.regions.push_back(Region{r.mask, r.token, r.score});
    spec.background_token = config.background_token;
    spec.bootstrap = config.bootstrap;
    spec.bootstrap_steps = config.t_init;
    spec.background = BackgroundSource{config.background_color};
    return spec;
}

FusionPlan build_plan(const RunConfig& config) {
    FusionPlan plan;
    switch (config.command) {
        case Command::panorama: {
            PanoramaSpec spec;
            spec.height = config.height;
            spec.width = config.width;
            spec.channels = config.channels;
            spec.window_height = config.window;
            spec.window_width = config.window;
            spec.stride = config.stride;
            spec.prompt = config.prompt;
            plan = build_panorama_plan(spec);
            break;
        }
        case Command::sample: {
            plan.height = config.height;
            plan.width = config.width;
            plan.channels = config.channels;
            plan.condition.prompts = {Condition{config.prompt}};
            plan.entries.push_back(PlanEntry{ViewMap::crop(0, 0, config.height, config.width), 0});
            break;
        }
        case Command::region:
        case Command::ablate: plan = build_region_plan(build_region_spec(config), config.steps); break;
    }
    plan.mode = config.mode;
    plan.noise_policy = config.noise_policy;
    plan.seed = config.seed;
    plan.batch_size = config.batch;
    plan.validate();
    return plan;
}

LatentGrid decode(const RunConfig& config, const LatentGrid& latent) {
    const int k = config.upscale;
    const double scale = 1.0 / (config.decode_high - config.decode_low);
    LatentGrid out(latent.height() * k, latent.width() * k, latent.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const float* in = latent.pixel(y / k, x / k);
            float* o = out.pixel(y, x);
            for (int c = 0; c < out.channels(); ++c) {
                o[c] = static_cast<float>(std::clamp((in[c] - config.decode_low) * scale, 0.0, 1.0));
            }
        }
    }
    return out;
}

void run(const RunConfig& config, std::ostream& log) {
    if (config.threads > 0) parallel::set_threads(config.threads);
    const NoiseSchedule schedule = build_schedule(config);
    const DenoiserRegistry registry = build_registry(config);
    std::ostringstream report;
    report << "command=" << command_name(config.command) << "\n";
    report << "steps=" << config.steps << "\n";
    report << "seed=" << config.seed << "\n";
    report.precision(9);

    if (config.command == Command::ablate) {
        std::vector<std::uint64_t> seeds;
        for (int i = 0; i < config.ablate_seeds; ++i) seeds.push_back(config.seed + static_cast<std::uint64_t>(i));
        AblationOptions options;
        options.tolerance = config.ablate_tol;
        options.mode = config.mode;
        options.noise_policy = config.noise_policy;
        const AblationReport result = run_region_ablation(build_region_spec(config), schedule, registry, seeds, options);
        for (std::size_t i = 0; i < result.seeds.size(); ++i) {
            report << "seed " << result.seeds[i] << " iou_bootstrap=" << result.iou_bootstrap[i]
                   << " iou_plain=" << result.iou_plain[i] << "\n";
        }
        report << "mean_iou_bootstrap=" << result.mean_bootstrap << "\n";
        report << "mean_iou_plain=" << result.mean_plain << "\n";
        log << report.str();
        if (!config.report.empty()) write_file_atomic(config.report, report.str());
        return;
    }

    const FusionPlan plan = build_plan(config);
    const SampleResult result = multidiffusion_sample(plan, schedule, registry);
    const LatentGrid image = decode(config, result.image);
    write_image(image, config.out, image.channels() == 1 ? ImageMode::gray : ImageMode::rgb);

    report << "views=" << plan.entries.size() << "\n";
    report << "final_loss=" << result.reports.back().ftd_loss_at_fused << "\n";
    report << "final_max_residual=" << result.reports.back().max_residual << "\n";
    if (config.command == Command::panorama) {
        const auto boundaries = tile_boundaries(config.width, config.window);
        if (!boundaries.empty()) report << "seam_score=" << seam_score(result.image, boundaries).mean << "\n";
    }
    const bool scorable = std::any_of(config.regions.begin(), config.regions.end(), [&](const RegionConfig& r) {
        return r.score;
    }) && std::all_of(config.regions.begin(), config.regions.end(), [&](const RegionConfig& r) {
        return !r.score || registry.resolve(r.token).foreground_color().has_value();
    });
    if (config.command == Command::region && scorable) {
        report << "iou=" << region_iou(build_region_spec(config), registry, result.image, config.ablate_tol) << "\n";
    }
    for (const StepReport& s : result.reports) {
        report << "step " << s.t << " " << s.ftd_loss_at_fused << " " << s.max_residual << "\n";
    }
    log << "wrote " << config.out.string() << " (" << image.height() << "x" << image.width() << ")\n";
    if (!config.report.empty()) write_file_atomic(config.report, report.str());
}

}  // namespace mdiff
