#include "multidiffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdiff {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw RangeError("schedule needs at least one step, got " + std::to_string(steps));
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw RangeError("beta range must satisfy 0 < start <= end < 1");
    }
    NoiseSchedule s;
    s.beta_.assign(steps + 1, 0.0);
    s.alpha_bar_.assign(steps + 1, 1.0);
    s.sigma_.assign(steps + 1, 0.0);
    for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        s.beta_[t] = beta_start + frac * (beta_end - beta_start);
        s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
        s.sigma_[t] = std::sqrt(s.beta_[t] * (1.0 - s.alpha_bar_[t - 1]) / (1.0 - s.alpha_bar_[t]));
    }
    return s;
}

std::size_t NoiseSchedule::checked(int t) const {
    if (t < 1 || t > steps()) {
        throw RangeError("time step " + std::to_string(t) + " outside 1.." + std::to_string(steps()));
    }
    return static_cast<std::size_t>(t);
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bar_[checked(t)];
}

double NoiseSchedule::posterior_sigma(int t, StepMode mode) const {
    const double sigma = sigma_[checked(t)];
    return mode == StepMode::ancestral ? sigma : 0.0;
}

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
    return NoiseSchedule::linear(steps, beta_start, beta_end);
}

NoiseSchedule desk_schedule(int steps) {
    if (steps < 1) throw RangeError("schedule needs at least one step, got " + std::to_string(steps));
    const double scale = 1000.0 / steps;
    const double end = std::min(0.02 * scale, 0.999);
    const double start = std::min(1e-4 * scale, end);
    return NoiseSchedule::linear(steps, start, end);
}

LatentGrid add_noise(const NoiseSchedule& schedule, const LatentGrid& x0, int t, const LatentGrid& eps) {
    if (!x0.same_shape(eps)) throw DimensionError("add_noise: epsilon shape differs from x0");
    const double ab = schedule.alpha_bar(t);
    schedule.require_step(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    LatentGrid out(x0.height(), x0.width(), x0.channels());
    auto xv = x0.values();
    auto ev = eps.values();
    auto ov = out.values();
    const auto n = static_cast<std::ptrdiff_t>(ov.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) ov[i] = static_cast<float>(a * xv[i] + b * ev[i]);
    return out;
}

LatentGrid reverse_step(const NoiseSchedule& schedule, const LatentGrid& x_t, const LatentGrid& eps_hat, int t,
                        StepMode mode, const LatentGrid& z) {
    schedule.require_step(t);
    if (!x_t.same_shape(eps_hat)) throw DimensionError("reverse_step: eps_hat shape differs from x_t");
    const double sigma = schedule.posterior_sigma(t, mode);
    const bool inject = mode == StepMode::ancestral && t > 1 && sigma > 0.0;
    if (inject && !z.same_shape(x_t)) throw DimensionError("reverse_step: noise shape differs from x_t");

    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    // x_{t-1} = cx * x_t + ce * eps_hat (+ sigma * z)
    double cx = 0.0;
    double ce = 0.0;
    if (mode == StepMode::ancestral) {
        cx = 1.0 / std::sqrt(schedule.alpha(t));
        ce = -cx * schedule.beta(t) / std::sqrt(1.0 - ab);
    } else {
        cx = std::sqrt(ab_prev / ab);
        ce = std::sqrt(1.0 - ab_prev) - std::sqrt(ab_prev) * std::sqrt(1.0 - ab) / std::sqrt(ab);
    }

    LatentGrid out(x_t.height(), x_t.width(), x_t.channels());
    auto xv = x_t.values();
    auto ev = eps_hat.values();
    auto ov = out.values();
    const auto n = static_cast<std::ptrdiff_t>(ov.size());
    if (inject) {
        auto zv = z.values();
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) ov[i] = static_cast<float>(cx * xv[i] + ce * ev[i] + sigma * zv[i]);
    } else {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) ov[i] = static_cast<float>(cx * xv[i] + ce * ev[i]);
    }
    return out;
}

}  // namespace mdiff
