#pragma once

#include <vector>

#include "multidiffusion/grid.hpp"

namespace mdiff {

enum class StepMode { ancestral, deterministic };

/// Per-step diffusion coefficients for t = 1..T. Index 0 holds the clean
/// end of the chain (alpha_bar(0) = 1).
class NoiseSchedule {
public:
    static NoiseSchedule linear(int steps, double beta_start, double beta_end);

    int steps() const noexcept { return static_cast<int>(beta_.size()) - 1; }
    double beta(int t) const { return beta_[checked(t)]; }
    double alpha(int t) const { return 1.0 - beta(t); }
    double alpha_bar(int t) const;
    /// sqrt(beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)) in ancestral
    /// mode, zero in deterministic mode.
    double posterior_sigma(int t, StepMode mode) const;

    void require_step(int t) const { (void)checked(t); }

private:
    std::size_t checked(int t) const;

    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
    std::vector<double> sigma_;
};

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end);

/// Linear schedule with the DDPM endpoints (1e-4, 0.02) rescaled by
/// 1000 / steps, so short chains still end near pure noise. Identical to the
/// standard schedule at 1000 steps.
NoiseSchedule desk_schedule(int steps);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
LatentGrid add_noise(const NoiseSchedule& schedule, const LatentGrid& x0, int t, const LatentGrid& eps);

/// One reverse step x_t -> x_{t-1} given a noise prediction. `z` is only
/// read in ancestral mode with t > 1 and may be empty otherwise.
LatentGrid reverse_step(const NoiseSchedule& schedule, const LatentGrid& x_t, const LatentGrid& eps_hat, int t,
                        StepMode mode, const LatentGrid& z);

}  // namespace mdiff
