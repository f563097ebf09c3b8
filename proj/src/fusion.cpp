#include "multidiffusion/fusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "multidiffusion/parallel.hpp"
#include "sampler_detail.hpp"

namespace mdiff {

void FusionPlan::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0) throw DimensionError("plan canvas dimensions must be positive");
    if (entries.empty()) throw PlanError("plan has no views");
    if (batch_size < 1) throw PlanError("batch size must be >= 1");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].view.require_fits(height, width);
        (void)condition_of(i);
    }
    const WeightMap total = total_weight();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (!(total(y, x) > 0.0f)) {
                throw CoverageError("zero total weight at pixel (" + std::to_string(y) + ", " + std::to_string(x) +
                                    "); every pixel must be covered by a view with positive weight");
            }
        }
    }
}

WeightMap FusionPlan::total_weight() const {
    WeightMap total(height, width, 0.0f);
    for (const auto& entry : entries) {
        const ViewMap& view = entry.view;
        view.require_fits(height, width);
        for (int y = 0; y < view.height(); ++y)
            for (int x = 0; x < view.width(); ++x)
                total.set(view.top() + y, view.left() + x,
                          total(view.top() + y, view.left() + x) + view.weight()(y, x));
    }
    return total;
}

namespace detail {

void require_targets(const FusionPlan& plan, std::span<const LatentGrid> targets) {
    if (targets.size() != plan.entries.size()) {
        throw DimensionError("expected " + std::to_string(plan.entries.size()) + " targets, got " +
                             std::to_string(targets.size()));
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const ViewMap& view = plan.entries[i].view;
        if (targets[i].height() != view.height() || targets[i].width() != view.width() ||
            targets[i].channels() != plan.channels) {
            throw DimensionError("target " + std::to_string(i) + " does not match its view extent");
        }
    }
}

StepReport make_report(const FusionPlan& plan, int t, const LatentGrid& canvas, std::span<const LatentGrid> targets) {
    StepReport report;
    report.t = t;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const ViewMap& view = plan.entries[i].view;
        const LatentGrid sampled = restrict_to_view(view, canvas);
        double term = 0.0;
        for (int y = 0; y < view.height(); ++y) {
            for (int x = 0; x < view.width(); ++x) {
                const double w = view.weight()(y, x);
                if (w == 0.0) continue;
                for (int c = 0; c < plan.channels; ++c) {
                    const double r = static_cast<double>(sampled.at(y, x, c)) - targets[i].at(y, x, c);
                    term += w * r * r;
                    report.max_residual = std::max(report.max_residual, std::abs(r));
                }
            }
        }
        report.ftd_loss_at_fused += term;
        report.residual_norms.push_back(std::sqrt(term));
    }
    return report;
}

}  // namespace detail

double ftd_loss(const FusionPlan& plan, const LatentGrid& canvas, std::span<const LatentGrid> targets) {
    detail::require_targets(plan, targets);
    if (canvas.height() != plan.height || canvas.width() != plan.width || canvas.channels() != plan.channels) {
        throw DimensionError("canvas does not match the plan");
    }
    return detail::make_report(plan, 0, canvas, targets).ftd_loss_at_fused;
}

LatentGrid fuse(const FusionPlan& plan, std::span<const LatentGrid> targets) {
    detail::require_targets(plan, targets);
    const int width = plan.width;
    const int channels = plan.channels;
    LatentGrid out(plan.height, width, channels);
    std::atomic<long long> first_gap{std::numeric_limits<long long>::max()};

    parallel::for_each_index(plan.height, [&](std::ptrdiff_t row) {
        const int y = static_cast<int>(row);
        std::vector<float> num(static_cast<std::size_t>(width) * channels, 0.0f);
        std::vector<float> den(width, 0.0f);
        for (std::size_t i = 0; i < plan.entries.size(); ++i) {
            const ViewMap& view = plan.entries[i].view;
            const int r = y - view.top();
            if (r < 0 || r >= view.height()) continue;
            const int left = view.left();
            for (int x = 0; x < view.width(); ++x) {
                const float w = view.weight()(r, x);
                if (w == 0.0f) continue;
                const float* v = targets[i].pixel(r, x);
                float* n = num.data() + static_cast<std::size_t>(left + x) * channels;
                for (int c = 0; c < channels; ++c) n[c] += w * v[c];
                den[left + x] += w;
            }
        }
        float* o = out.pixel(y, 0);
        for (int x = 0; x < width; ++x) {
            if (!(den[x] > 0.0f)) {
                const long long flat = static_cast<long long>(y) * width + x;
                long long seen = first_gap.load();
                while (flat < seen && !first_gap.compare_exchange_weak(seen, flat)) {
                }
                continue;
            }
            for (int c = 0; c < channels; ++c) o[x * channels + c] = num[x * channels + c] / den[x];
        }
    });

    if (first_gap.load() != std::numeric_limits<long long>::max()) {
        const long long flat = first_gap.load();
        throw CoverageError("zero total weight at pixel (" + std::to_string(flat / width) + ", " +
                            std::to_string(flat % width) + ")");
    }
    return out;
}

LatentGrid oracle_minimize(const FusionPlan& plan, std::span<const LatentGrid> targets, int iterations, double rate) {
    detail::require_targets(plan, targets);
    const std::size_t entries = static_cast<std::size_t>(plan.height) * plan.width * plan.channels;
    if (entries > 65536) throw ParameterError("oracle_minimize is limited to canvases of at most 65536 entries");
    if (iterations < 0) throw ParameterError("iterations must be >= 0");

    if (rate <= 0.0) {
        double max_total = 0.0;
        const WeightMap total = plan.total_weight();
        for (float w : total.values()) max_total = std::max(max_total, static_cast<double>(w));
        if (max_total <= 0.0) throw CoverageError("plan has no positive weight");
        rate = 1.0 / (2.0 * max_total);
    }

    std::vector<double> canvas(entries, 0.0);
    std::vector<double> grad(entries, 0.0);
    auto at = [&](int y, int x, int c) {
        return (static_cast<std::size_t>(y) * plan.width + x) * plan.channels + c;
    };
    auto gradient = [&]() {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < plan.entries.size(); ++i) {
            const ViewMap& view = plan.entries[i].view;
            for (int y = 0; y < view.height(); ++y) {
                for (int x = 0; x < view.width(); ++x) {
                    const double w = view.weight()(y, x);
                    for (int c = 0; c < plan.channels; ++c) {
                        const std::size_t k = at(view.top() + y, view.left() + x, c);
                        grad[k] += 2.0 * w * (canvas[k] - targets[i].at(y, x, c));
                    }
                }
            }
        }
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        return std::sqrt(norm);
    };

    double norm = gradient();
    for (int it = 0; it < iterations && norm > 1e-13; ++it) {
        for (std::size_t k = 0; k < entries; ++k) canvas[k] -= rate * grad[k];
        norm = gradient();
    }
    if (norm > 1e-6) {
        throw ConvergenceError("gradient descent did not converge: gradient norm " + std::to_string(norm) +
                               " after " + std::to_string(iterations) + " iterations");
    }
    LatentGrid out(plan.height, plan.width, plan.channels);
    auto ov = out.values();
    for (std::size_t k = 0; k < entries; ++k) ov[k] = static_cast<float>(canvas[k]);
    return out;
}

LatentGrid initial_noise(const FusionPlan& plan) {
    auto gen = SeedTree(plan.seed).generator(Stream::init_noise);
    return standard_normal(plan.height, plan.width, plan.channels, gen);
}

SampleResult multidiffusion_sample(const FusionPlan& plan, const NoiseSchedule& schedule,
                                   const DenoiserRegistry& registry) {
    return detail::sample(plan, schedule, registry, detail::Execution::parallel);
}

LatentGrid phi_rollout(const NoisePredictor& predictor, const NoiseSchedule& schedule, LatentGrid x_T,
                       const Condition& condition, StepMode mode, const std::function<LatentGrid(int)>& noise) {
    LatentGrid x = std::move(x_T);
    const LatentGrid none;
    for (int t = schedule.steps(); t >= 1; --t) {
        const bool inject = mode == StepMode::ancestral && t > 1;
        if (inject && !noise) throw ParameterError("ancestral rollout needs a noise source");
        x = phi_step(predictor, schedule, x, t, condition, mode, inject ? noise(t) : none);
    }
    return x;
}

}  // namespace mdiff
