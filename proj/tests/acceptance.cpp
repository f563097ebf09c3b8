// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include "multidiffusion/config.hpp"
#include "multidiffusion/metrics.hpp"
#include "multidiffusion/panorama.hpp"
#include "multidiffusion/parallel.hpp"
#include "multidiffusion/region.hpp"
#include "support.hpp"

using namespace mdiff;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Closed-form fusion equals the least-squares and gradient-descent minimizers.
Outcome closed_form_optimality() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 gen(20240601);
    double worst_ls = 0.0;
    double worst_gd = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const FusionPlan plan = testing_support::random_plan(gen);
        const auto targets = testing_support::random_targets(plan, gen);
        const LatentGrid fused = fuse(plan, targets);
        worst_ls = std::max(worst_ls, max_abs_diff(fused, testing_support::dense_least_squares(plan, targets)));
        worst_gd = std::max(worst_gd, max_abs_diff(fused, oracle_minimize(plan, targets, 10000)));
    }
    const double elapsed = seconds_since(start);
    return {worst_ls <= 1e-5 && worst_gd <= 1e-5 && elapsed < 10.0,
            fmt("100 plans, max |fuse - LS| = %.2e, max |fuse - GD| = %.2e, %.2f s", worst_ls, worst_gd, elapsed)};
}

// 2. Disjoint tiles reproduce independent reference rollouts.
Outcome disjoint_tiles_exact() {
    const auto s = desk_schedule(50);
    std::mt19937_64 gen(7);
    DenoiserRegistry r;
    r.add("g", std::make_shared<GaussianDenoiser>(standard_normal(8, 8, 2, gen), 0.7f));
    FusionPlan plan;
    plan.height = 16;
    plan.width = 16;
    plan.channels = 2;
    plan.mode = StepMode::deterministic;
    plan.noise_policy = NoisePolicy::shared_canvas;
    plan.seed = 11;
    plan.condition.prompts = {Condition{"g"}};
    for (int top : {0, 8})
        for (int left : {0, 8}) plan.entries.push_back(PlanEntry{ViewMap::crop(top, left, 8, 8), 0});

    const SampleResult result = multidiffusion_sample(plan, s, r);
    const LatentGrid j_T = initial_noise(plan);
    const RegistryPredictor p(r, s);
    double worst = 0.0;
    for (const PlanEntry& e : plan.entries) {
        const auto& v = e.view;
        const LatentGrid tile = phi_rollout(p, s, j_T.crop(v.top(), v.left(), 8, 8), Condition{"g"},
                                            StepMode::deterministic);
        worst = std::max(worst, max_abs_diff(result.image.crop(v.top(), v.left(), 8, 8), tile));
    }
    double worst_loss = 0.0;
    for (const StepReport& rep : result.reports) worst_loss = std::max(worst_loss, rep.ftd_loss_at_fused);
    return {worst <= 1e-6 && worst_loss <= 1e-10 && result.reports.size() == 50,
            fmt("max tile deviation %.2e, max step loss %.2e over %zu steps", worst, worst_loss, result.reports.size())};
}

// Per-pixel z-scores of sample means against the prior mean.
double worst_z(const std::vector<LatentGrid>& samples, const LatentGrid& mean, int top, int left) {
    double worst = 0.0;
    const double n = static_cast<double>(samples.size());
    for (int y = 0; y < mean.height(); ++y) {
        for (int x = 0; x < mean.width(); ++x) {
            for (int c = 0; c < mean.channels(); ++c) {
                double sum = 0.0;
                double sq = 0.0;
                for (const LatentGrid& g : samples) {
                    const double v = g.at(top + y, left + x, c);
                    sum += v;
                    sq += v * v;
                }
                const double m = sum / n;
                const double var = (sq - n * m * m) / (n - 1.0);
                const double se = std::sqrt(var / n);
                worst = std::max(worst, std::abs(m - mean.at(y, x, c)) / se);
            }
        }
    }
    return worst;
}

// 3. Ancestral sampling with the Gaussian denoiser reproduces the prior mean.
Outcome distributional_consistency() {
    const auto s = desk_schedule(50);
    std::mt19937_64 gen(31);
    const LatentGrid m = standard_normal(8, 8, 1, gen);
    DenoiserRegistry r;
    r.add("g", std::make_shared<GaussianDenoiser>(m, 0.5f));
    const RegistryPredictor p(r, s);

    std::vector<LatentGrid> single;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const SeedTree seeds(1000 + seed);
        auto init = seeds.generator(Stream::init_noise);
        single.push_back(phi_rollout(p, s, standard_normal(8, 8, 1, init), Condition{"g"}, StepMode::ancestral,
                                     [&](int t) {
                                         auto g = seeds.generator(Stream::step_noise, static_cast<std::uint64_t>(t));
                                         return standard_normal(8, 8, 1, g);
                                     }));
    }
    const double z_single = worst_z(single, m, 0, 0);

    FusionPlan plan;
    plan.height = 16;
    plan.width = 16;
    plan.channels = 1;
    plan.mode = StepMode::ancestral;
    plan.condition.prompts = {Condition{"g"}};
    for (int top : {0, 8})
        for (int left : {0, 8}) plan.entries.push_back(PlanEntry{ViewMap::crop(top, left, 8, 8), 0});
    std::vector<LatentGrid> fused;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        plan.seed = 5000 + seed;
        fused.push_back(multidiffusion_sample(plan, s, r).image);
    }
    double z_fused = 0.0;
    for (int top : {0, 8})
        for (int left : {0, 8}) z_fused = std::max(z_fused, worst_z(fused, m, top, left));
    return {z_single < 5.0 && z_fused < 5.0,
            fmt("500 rollouts, max |mean - m| / SE = %.2f single, %.2f over fused tiles (limit 5)", z_single, z_fused)};
}

// 4. Overlapping fusion removes the seams of independently sampled tiles.
Outcome seam_reduction() {
    const auto start = std::chrono::steady_clock::now();
    const auto s = desk_schedule(50);
    DenoiserRegistry r;
    r.add("stripes", std::make_shared<PatternDenoiser>(StripesPattern{8, {0.2f}, {0.8f}, false}, 0.5f));
    PanoramaSpec spec;
    spec.height = 64;
    spec.width = 192;
    spec.channels = 1;
    spec.prompt = "stripes";
    FusionPlan fused_plan = build_panorama_plan(spec);
    const auto boundaries = tile_boundaries(192, 64);

    bool all = true;
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        fused_plan.seed = seed;
        const double fused = seam_score(multidiffusion_sample(fused_plan, s, r).image, boundaries).mean;

        LatentGrid tiles(64, 192, 1);
        for (int k = 0; k < 3; ++k) {
            FusionPlan tile;
            tile.height = 64;
            tile.width = 64;
            tile.channels = 1;
            tile.seed = seed * 100 + static_cast<std::uint64_t>(k);
            tile.condition.prompts = {Condition{"stripes"}};
            tile.entries.push_back(PlanEntry{ViewMap::crop(0, 0, 64, 64), 0});
            tiles.paste(multidiffusion_sample(tile, s, r).image, 0, 64 * k);
        }
        const double independent = seam_score(tiles, boundaries).mean;
        const double ratio = fused / independent;
        worst_ratio = std::max(worst_ratio, ratio);
        all = all && fused <= 0.5 * independent;
    }
    const double elapsed = seconds_since(start);
    return {all && elapsed < 30.0,
            fmt("5 seeds, worst fused/independent seam ratio %.3f (limit 0.5), %.2f s", worst_ratio, elapsed)};
}

// 5. Bootstrapping improves mask adherence; zero bootstrapping steps change nothing.
Outcome bootstrapping_direction() {
    const auto s = desk_schedule(50);
    DenoiserRegistry r;
    r.add("disk", std::make_shared<PatternDenoiser>(
                      DiskPattern{6.0f, std::nullopt, {1.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 1.0f}}, 0.5f));
    r.add("blue", std::make_shared<PatternDenoiser>(ConstantPattern{{0.0f, 0.0f, 1.0f}}, 0.5f));
    RegionSpec spec;
    spec.height = 32;
    spec.width = 32;
    spec.channels = 3;
    Mask disk(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if ((y - 8) * (y - 8) + (x - 9) * (x - 9) <= 36) disk.set(y, x, true);
    spec.regions.push_back(Region{disk, "disk"});
    spec.background_token = "blue";
    spec.bootstrap_steps = 40;

    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 10; ++i) seeds.push_back(i);
    const AblationReport report = run_region_ablation(spec, s, r, seeds);

    RegionSpec zero = spec;
    zero.bootstrap = true;
    zero.bootstrap_steps = 0;
    RegionSpec plain = spec;
    plain.bootstrap = false;
    bool identical = true;
    for (std::uint64_t seed : seeds) {
        FusionPlan a = build_region_plan(zero, 50);
        FusionPlan b = build_region_plan(plain, 50);
        a.seed = b.seed = seed;
        identical = identical &&
                    max_abs_diff(multidiffusion_sample(a, s, r).image, multidiffusion_sample(b, s, r).image) == 0.0;
    }
    return {report.mean_bootstrap > report.mean_plain && report.mean_bootstrap >= 0.6 && identical,
            fmt("10 seeds, mean IoU %.3f with bootstrapping vs %.3f without; t_init=0 bit-exact: %s",
                report.mean_bootstrap, report.mean_plain, identical ? "yes" : "no")};
}

bool covered(const FusionPlan& plan) {
    const WeightMap total = plan.total_weight();
    for (float w : total.values())
        if (!(w > 0.0f)) return false;
    return true;
}

// 6. Panorama window geometry.
Outcome panorama_geometry() {
    PanoramaSpec wide;
    wide.height = 64;
    wide.width = 576;
    wide.prompt = "p";
    const FusionPlan a = build_panorama_plan(wide);
    PanoramaSpec narrow = wide;
    narrow.width = 70;
    const FusionPlan b = build_panorama_plan(narrow);
    const bool offsets = b.entries.size() == 2 && b.entries[0].view.left() == 0 && b.entries[1].view.left() == 6;
    return {a.entries.size() == 65 && covered(a) && offsets && covered(b),
            fmt("64x576: %zu views, covered %s; 64x70: offsets {%d, %d}, covered %s", a.entries.size(),
                covered(a) ? "yes" : "no", b.entries[0].view.left(), b.entries.back().view.left(),
                covered(b) ? "yes" : "no")};
}

// 7. Output bytes do not depend on the thread count.
Outcome reproducibility() {
    const auto dir = std::filesystem::temp_directory_path() / "mdiff_acceptance";
    std::filesystem::create_directories(dir);
    std::string first;
    bool same = true;
    for (int threads : {1, 2, 8}) {
        const auto out = dir / ("threads" + std::to_string(threads) + ".ppm");
        const RunConfig cfg = parse_config(Command::panorama, {{"width", "192"},
                                                               {"seed", "17"},
                                                               {"threads", std::to_string(threads)},
                                                               {"out", out.string()}});
        std::ostringstream log;
        run(cfg, log);
        std::ifstream in(out, std::ios::binary);
        const std::string bytes{std::istreambuf_iterator<char>(in), {}};
        if (first.empty()) first = bytes;
        same = same && bytes == first && !bytes.empty();
    }
    parallel::set_threads(0);
    return {same, fmt("64x192x4 panorama at 1, 2 and 8 threads: %s", same ? "byte-identical" : "outputs differ")};
}

// 8. Initial noise statistics in every window of a wide panorama. The bound
// is about 4 standard errors, so a small fraction of seeds exceed it by
// chance; the rate over 200 seeds is reported and must stay below 2%.
Outcome noise_initialization() {
    PanoramaSpec spec;
    spec.height = 64;
    spec.width = 576;
    spec.prompt = "p";
    FusionPlan plan = build_panorama_plan(spec);
    const double mean_limit = 4.0 / std::sqrt(16384.0);
    auto check = [&](std::uint64_t seed, double& worst_mean, double& worst_var) {
        plan.seed = seed;
        const LatentGrid j = initial_noise(plan);
        worst_mean = 0.0;
        worst_var = 0.0;
        for (const PlanEntry& e : plan.entries) {
            const GaussianStats st = gaussian_stats(restrict_to_view(e.view, j));
            worst_mean = std::max(worst_mean, std::abs(st.mean));
            worst_var = std::max(worst_var, std::abs(st.variance - 1.0));
        }
        return worst_mean < mean_limit && worst_var < 0.1;
    };
    double worst_mean = 0.0;
    double worst_var = 0.0;
    const bool default_seed = check(0, worst_mean, worst_var);
    int misses = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        double m = 0.0;
        double v = 0.0;
        if (!check(seed, m, v)) ++misses;
    }
    return {default_seed && misses <= 4,
            fmt("seed 0: %zu crops, max |mean| %.4f (limit %.4f), max |var - 1| %.4f (limit 0.1); "
                "seeds 1-200 outside the bound: %d",
                plan.entries.size(), worst_mean, mean_limit, worst_var, misses)};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"closed-form optimality", closed_form_optimality},
        {"disjoint tiles exactness", disjoint_tiles_exact},
        {"distributional consistency", distributional_consistency},
        {"seam reduction", seam_reduction},
        {"bootstrapping direction", bootstrapping_direction},
        {"panorama geometry", panorama_geometry},
        {"reproducibility", reproducibility},
        {"noise initialization", noise_initialization},
    };
    int failures = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("criterion %d %s: %s (%s)\n", index, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
