#include <doctest.h>

#include <memory>
#include <random>
#include <string>

#include "multidiffusion/region.hpp"

using namespace mdiff;

namespace {

Mask columns(int h, int w, int from, int to) {
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = from; x < to; ++x) m.set(y, x, true);
    return m;
}

DenoiserRegistry colors() {
    DenoiserRegistry r;
    r.add("red", std::make_shared<PatternDenoiser>(ConstantPattern{{1.0f, 0.0f, 0.0f}}, 1.0f));
    r.add("blue", std::make_shared<PatternDenoiser>(ConstantPattern{{0.0f, 0.0f, 1.0f}}, 1.0f));
    r.add("soft_red", std::make_shared<PatternDenoiser>(ConstantPattern{{1.0f, 0.0f, 0.0f}}, 0.4f));
    r.add("soft_blue", std::make_shared<PatternDenoiser>(ConstantPattern{{0.0f, 0.0f, 1.0f}}, 0.4f));
    return r;
}

RegionSpec halves(const std::string& left, const std::string& right, int overlap = 0) {
    RegionSpec spec;
    spec.height = 6;
    spec.width = 8;
    spec.channels = 3;
    spec.regions.push_back(Region{columns(6, 8, 0, 4 + overlap), left});
    spec.regions.push_back(Region{columns(6, 8, 4 - overlap, 8), right});
    return spec;
}

std::vector<LatentGrid> step_targets(const FusionPlan& plan, const NoiseSchedule& s, const DenoiserRegistry& r,
                                     const LatentGrid& canvas, int t) {
    const RegistryPredictor p(r, s);
    std::vector<LatentGrid> out;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        out.push_back(phi_step(p, s, restrict_to_view(plan.entries[i].view, canvas), t, plan.condition_of(i),
                               StepMode::deterministic, {}));
    }
    return out;
}

}  // namespace

TEST_CASE("default bootstrapping length") {
    CHECK(default_bootstrap_steps(50) == 10);
    CHECK(default_bootstrap_steps(1000) == 200);
    CHECK(default_bootstrap_steps(7) == 1);
}

TEST_CASE("single full region is plain sampling") {
    const auto s = desk_schedule(20);
    const DenoiserRegistry r = colors();
    RegionSpec spec;
    spec.height = 5;
    spec.width = 5;
    spec.channels = 3;
    spec.regions.push_back(Region{Mask(5, 5, true), "soft_red"});
    FusionPlan plan = build_region_plan(spec, 20);
    plan.seed = 8;
    const RegistryPredictor p(r, s);
    const LatentGrid rollout =
        phi_rollout(p, s, initial_noise(plan), Condition{"soft_red"}, StepMode::deterministic);
    CHECK(max_abs_diff(multidiffusion_sample(plan, s, r).image, rollout) == 0.0);
}

TEST_CASE("disjoint regions follow their own direction") {
    const auto s = desk_schedule(20);
    const DenoiserRegistry r = colors();
    const FusionPlan plan = build_region_plan(halves("soft_red", "soft_blue"), 20);
    CHECK(plan.condition_of(0) == Condition{"soft_red"});
    CHECK(plan.condition_of(1) == Condition{"soft_blue"});
    std::mt19937_64 gen(4);
    const LatentGrid canvas = standard_normal(6, 8, 3, gen);
    const auto targets = step_targets(plan, s, r, canvas, 12);
    const LatentGrid fused = fuse(plan, targets);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) CHECK(fused.at(y, x, c) == targets[x < 4 ? 0 : 1].at(y, x, c));
}

TEST_CASE("overlapping band averages the directions") {
    const auto s = desk_schedule(20);
    const DenoiserRegistry r = colors();
    const FusionPlan plan = build_region_plan(halves("soft_red", "soft_blue", 1), 20);
    std::mt19937_64 gen(5);
    const LatentGrid canvas = standard_normal(6, 8, 3, gen);
    const auto targets = step_targets(plan, s, r, canvas, 9);
    const LatentGrid fused = fuse(plan, targets);
    for (int y = 0; y < 6; ++y) {
        for (int x = 3; x <= 4; ++x) {
            for (int c = 0; c < 3; ++c) {
                CHECK(fused.at(y, x, c) ==
                      doctest::Approx(0.5 * (targets[0].at(y, x, c) + targets[1].at(y, x, c))).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("region plan validation") {
    RegionSpec spec;
    spec.height = 4;
    spec.width = 4;
    spec.channels = 3;
    CHECK_THROWS_AS(build_region_plan(spec, 10), PlanError);

    spec.regions.push_back(Region{columns(4, 5, 0, 2), "red"});
    CHECK_THROWS_AS(build_region_plan(spec, 10), DimensionError);

    spec.regions[0].mask = columns(4, 4, 0, 2);
    try {
        build_region_plan(spec, 10);
        FAIL("expected a coverage error");
    } catch (const CoverageError& e) {
        CHECK(std::string(e.what()).find("background region") != std::string::npos);
    }

    spec.background_token = "blue";
    const FusionPlan plan = build_region_plan(spec, 10);
    REQUIRE(plan.entries.size() == 2);
    CHECK(plan.condition_of(1) == Condition{"blue"});
    const auto& bg = std::get<MaskedIdentityView>(plan.entries[1].view.kind()).mask;
    CHECK(bg == columns(4, 4, 2, 4));

    spec.bootstrap = true;
    spec.bootstrap_steps = 11;
    CHECK_THROWS_AS(build_region_plan(spec, 10), RangeError);
    spec.bootstrap_steps = 4;
    const FusionPlan boot = build_region_plan(spec, 10);
    const auto& view = std::get<BootstrapView>(boot.entries[0].view.kind());
    CHECK(view.stop_step == 6);
    CHECK(boot.entries[0].view.bootstrapping_at(7));
    CHECK_FALSE(boot.entries[0].view.bootstrapping_at(6));
}

TEST_CASE("exact denoisers on disjoint masks score perfectly") {
    const auto s = desk_schedule(20);
    const DenoiserRegistry r = colors();
    RegionSpec spec = halves("red", "blue");
    spec.bootstrap_steps = 4;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const AblationReport report = run_region_ablation(spec, s, r, seeds);
    CHECK(report.mean_bootstrap == 1.0);
    CHECK(report.mean_plain == 1.0);
    CHECK(report.iou_bootstrap.size() == 3);
}

TEST_CASE("zero bootstrapping steps reproduce plain sampling") {
    const auto s = desk_schedule(20);
    const DenoiserRegistry r = colors();
    RegionSpec plain = halves("soft_red", "soft_blue", 1);
    RegionSpec boot = plain;
    boot.bootstrap = true;
    boot.bootstrap_steps = 0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (StepMode mode : {StepMode::deterministic, StepMode::ancestral}) {
            FusionPlan a = build_region_plan(plain, 20);
            FusionPlan b = build_region_plan(boot, 20);
            a.seed = b.seed = seed;
            a.mode = b.mode = mode;
            CHECK(max_abs_diff(multidiffusion_sample(a, s, r).image, multidiffusion_sample(b, s, r).image) == 0.0);
        }
    }
}
