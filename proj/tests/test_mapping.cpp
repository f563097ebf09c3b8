#include <doctest.h>

#include <cmath>
#include <random>

#include "multidiffusion/fusion.hpp"
#include "multidiffusion/mapping.hpp"

using namespace mdiff;

namespace {

LatentGrid random_grid(int h, int w, int c, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    return standard_normal(h, w, c, gen);
}

Mask left_half(int h, int w) {
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w / 2; ++x) m.set(y, x, true);
    return m;
}

}  // namespace

TEST_CASE("full crop is the identity") {
    const LatentGrid canvas = random_grid(5, 7, 2, 1);
    const ViewMap v = ViewMap::crop(0, 0, 5, 7);
    CHECK(max_abs_diff(extract(v, canvas, 3), canvas) == 0.0);
}

TEST_CASE("crop extracts its window") {
    const LatentGrid canvas = random_grid(6, 8, 1, 2);
    const ViewMap v = ViewMap::crop(1, 3, 4, 5);
    CHECK(max_abs_diff(extract(v, canvas, 1), canvas.crop(1, 3, 4, 5)) == 0.0);
    CHECK_THROWS_AS(extract(ViewMap::crop(4, 0, 4, 4), canvas, 1), DimensionError);
    CHECK_THROWS_AS(ViewMap::crop(0, 0, 2, 2, WeightMap(3, 3)), DimensionError);
    CHECK_THROWS_AS(ViewMap::crop(-1, 0, 2, 2), DimensionError);
}

TEST_CASE("masked identity weight equals the mask") {
    const Mask m = left_half(4, 6);
    const ViewMap v = ViewMap::masked_identity(m);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) CHECK(v.weight()(y, x) == (m.contains(y, x) ? 1.0f : 0.0f));
}

TEST_CASE("bootstrapped view") {
    const auto s = desk_schedule(50);
    const SeedTree seeds(5);
    const BackgroundProcess bg(s, seeds, 6, 6, 3);
    const LatentGrid canvas = random_grid(6, 6, 3, 3);
    const Mask m = left_half(6, 6);
    const ViewMap v = ViewMap::bootstrapped(m, 40, BackgroundSource{});

    SUBCASE("at the stop step the canvas passes through") {
        CHECK_FALSE(v.bootstrapping_at(40));
        CHECK(max_abs_diff(extract(v, canvas, 40, &bg), canvas) == 0.0);
        CHECK(max_abs_diff(extract(v, canvas, 1, nullptr), canvas) == 0.0);
    }
    SUBCASE("an all-ones mask never replaces anything") {
        const ViewMap full = ViewMap::bootstrapped(Mask(6, 6, true), 40, BackgroundSource{});
        CHECK(max_abs_diff(extract(full, canvas, 50, &bg), canvas) == 0.0);
    }
    SUBCASE("outside the mask the noised background is used") {
        CHECK(v.bootstrapping_at(41));
        const LatentGrid out = extract(v, canvas, 50, &bg);
        const LatentGrid s_t = bg.realize(BackgroundSource{}, 50);
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                const LatentGrid& expected = m.contains(y, x) ? canvas : s_t;
                for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == expected.at(y, x, c));
            }
        }
        CHECK_THROWS_AS(extract(v, canvas, 50, nullptr), ParameterError);
    }
    SUBCASE("background draws are fixed per run and step") {
        CHECK(max_abs_diff(bg.realize(BackgroundSource{}, 45), bg.realize(BackgroundSource{}, 45)) == 0.0);
        CHECK(max_abs_diff(bg.realize(BackgroundSource{}, 45), bg.realize(BackgroundSource{}, 44)) > 0.0);
        for (float c : bg.run_color()) {
            CHECK(c >= 0.0f);
            CHECK(c <= 1.0f);
        }
        const auto quiet = linear_schedule(5, 1e-12, 1e-12);
        const BackgroundProcess clean(quiet, seeds, 6, 6, 3);
        const LatentGrid level = clean.realize(BackgroundSource{Color{0.0f, 0.0f, 1.0f}}, 1);
        CHECK(level.at(2, 2, 2) == doctest::Approx(1.0f).epsilon(1e-5));
        CHECK(std::abs(level.at(2, 2, 0)) < 1e-5);
    }
}

TEST_CASE("scatter accumulate counts") {
    LatentGrid num(6, 6, 1);
    LatentGrid den(6, 6, 1);
    const ViewMap a = ViewMap::crop(0, 0, 4, 4);
    scatter_accumulate(a, LatentGrid(4, 4, 1, 1.0f), num, den);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) CHECK(den.at(y, x, 0) == ((y < 4 && x < 4) ? 1.0f : 0.0f));

    const ViewMap b = ViewMap::crop(2, 2, 4, 4);
    scatter_accumulate(b, LatentGrid(4, 4, 1, 1.0f), num, den);
    CHECK(den.at(3, 3, 0) == 2.0f);
    CHECK(den.at(5, 5, 0) == 1.0f);
    CHECK(den.at(0, 5, 0) == 0.0f);

    LatentGrid num2(4, 6, 2);
    LatentGrid den2(4, 6, 1);
    const Mask m = left_half(4, 6);
    scatter_accumulate(ViewMap::masked_identity(m), random_grid(4, 6, 2, 9), num2, den2);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) CHECK(den2.at(y, x, 0) == (m.contains(y, x) ? 1.0f : 0.0f));
}

TEST_CASE("lambda map") {
    PlanCondition z{{Condition{"sky"}, Condition{"sea"}}};
    CHECK(lambda_map(PlanEntry{ViewMap::crop(0, 0, 1, 1), 0}, z) == Condition{"sky"});
    CHECK(lambda_map(PlanEntry{ViewMap::crop(0, 0, 1, 1), 1}, z) == Condition{"sea"});
    CHECK_THROWS_AS(lambda_map(PlanEntry{ViewMap::crop(0, 0, 1, 1), 2}, z), PlanError);
}

TEST_CASE("empty plan fails validation") {
    FusionPlan plan;
    plan.height = 4;
    plan.width = 4;
    plan.channels = 1;
    CHECK_THROWS_AS(plan.validate(), PlanError);
}
