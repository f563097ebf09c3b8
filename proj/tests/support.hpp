#pragma once

// Shared helpers for the test binaries: random fusion instances and an
// independent dense least-squares solver for the fusion objective.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "multidiffusion/fusion.hpp"

namespace testing_support {

using namespace mdiff;

inline LatentGrid random_grid(int h, int w, int c, std::mt19937_64& gen) {
    return standard_normal(h, w, c, gen);
}

inline float random_weight(std::mt19937_64& gen) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    if (u(gen) < 0.3f) return 0.0f;
    return 0.05f + 0.95f * u(gen);
}

/// Up to 4 views on a canvas of at most 6x6x2. View 0 spans the canvas and
/// gets a positive weight wherever nothing else covers a pixel.
inline FusionPlan random_plan(std::mt19937_64& gen) {
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_int_distribution<int> chans(1, 2);
    std::uniform_int_distribution<int> views(1, 4);
    FusionPlan plan;
    plan.height = dim(gen);
    plan.width = dim(gen);
    plan.channels = chans(gen);
    plan.condition.prompts = {Condition{"x"}};
    const int n = views(gen);

    WeightMap w0(plan.height, plan.width, 0.0f);
    for (int y = 0; y < plan.height; ++y)
        for (int x = 0; x < plan.width; ++x) w0.set(y, x, random_weight(gen));

    std::vector<ViewMap> others;
    WeightMap covered(plan.height, plan.width, 0.0f);
    for (int i = 1; i < n; ++i) {
        const int h = std::uniform_int_distribution<int>(1, plan.height)(gen);
        const int w = std::uniform_int_distribution<int>(1, plan.width)(gen);
        const int top = std::uniform_int_distribution<int>(0, plan.height - h)(gen);
        const int left = std::uniform_int_distribution<int>(0, plan.width - w)(gen);
        WeightMap weight(h, w, 0.0f);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float v = random_weight(gen);
                weight.set(y, x, v);
                covered.set(top + y, left + x, covered(top + y, left + x) + v);
            }
        }
        others.push_back(ViewMap::crop(top, left, h, w, std::move(weight)));
    }
    for (int y = 0; y < plan.height; ++y) {
        for (int x = 0; x < plan.width; ++x) {
            if (w0(y, x) + covered(y, x) <= 0.0f) w0.set(y, x, 0.05f + 0.95f * std::uniform_real_distribution<float>()(gen));
        }
    }
    plan.entries.push_back(PlanEntry{ViewMap::crop(0, 0, plan.height, plan.width, std::move(w0)), 0});
    for (auto& v : others) plan.entries.push_back(PlanEntry{std::move(v), 0});
    plan.validate();
    return plan;
}

inline std::vector<LatentGrid> random_targets(const FusionPlan& plan, std::mt19937_64& gen) {
    std::vector<LatentGrid> targets;
    for (const auto& e : plan.entries) targets.push_back(random_grid(e.view.height(), e.view.width(), plan.channels, gen));
    return targets;
}

/// Minimizes the fusion objective as one dense weighted least-squares
/// problem: each weighted target entry becomes a row sqrt(w) J[p] = sqrt(w) t.
inline LatentGrid dense_least_squares(const FusionPlan& plan, const std::vector<LatentGrid>& targets) {
    const int unknowns = plan.height * plan.width * plan.channels;
    std::vector<double> rhs;
    std::vector<std::pair<int, double>> entries;
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const ViewMap& v = plan.entries[i].view;
        for (int y = 0; y < v.height(); ++y) {
            for (int x = 0; x < v.width(); ++x) {
                const double w = v.weight()(y, x);
                if (w == 0.0) continue;
                for (int c = 0; c < plan.channels; ++c) {
                    const int col = ((v.top() + y) * plan.width + (v.left() + x)) * plan.channels + c;
                    entries.emplace_back(col, std::sqrt(w));
                    rhs.push_back(std::sqrt(w) * targets[i].at(y, x, c));
                }
            }
        }
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rhs.size()), unknowns);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rhs.size()));
    for (std::size_t r = 0; r < rhs.size(); ++r) {
        a(static_cast<Eigen::Index>(r), entries[r].first) = entries[r].second;
        b(static_cast<Eigen::Index>(r)) = rhs[r];
    }
    const Eigen::VectorXd j = a.colPivHouseholderQr().solve(b);
    LatentGrid out(plan.height, plan.width, plan.channels);
    for (int k = 0; k < unknowns; ++k) out.values()[static_cast<std::size_t>(k)] = static_cast<float>(j(k));
    return out;
}

}  // namespace testing_support
