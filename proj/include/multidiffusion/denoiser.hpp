#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "multidiffusion/grid.hpp"
#include "multidiffusion/schedule.hpp"

namespace mdiff {

class UnknownTokenError : public Error {
public:
    using Error::Error;
};

/// Conditioning token y. Resolved to denoiser parameters by a registry.
struct Condition {
    std::string token;

    friend bool operator==(const Condition&, const Condition&) = default;
};

using Color = std::vector<float>;

/// Per-token denoiser parameters. Implementations are immutable and their
/// predictions are pure functions of (schedule, x_t, t).
class Denoiser {
public:
    virtual ~Denoiser() = default;

    /// Predicted clean image for the noisy input x_t.
    virtual LatentGrid predict_x0(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const = 0;

    /// eps_hat = (x_t - sqrt(alpha_bar_t) x0_hat) / sqrt(1 - alpha_bar_t)
    LatentGrid predict_eps(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const;

    /// Color used to threshold this token's foreground, if it has one.
    virtual std::optional<Color> foreground_color() const { return std::nullopt; }
};

/// Bayes-optimal denoiser for the prior x0 ~ N(mean, scale^2 I).
///
/// The posterior mean given x_t is
///   (sqrt(ab) s^2 x_t + (1 - ab) m) / (ab s^2 + 1 - ab).
/// A 1x1xC mean broadcasts over any spatial extent.
class GaussianDenoiser final : public Denoiser {
public:
    GaussianDenoiser(LatentGrid mean, float scale);

    LatentGrid predict_x0(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const override;

    const LatentGrid& mean() const noexcept { return mean_; }
    float scale() const noexcept { return scale_; }

private:
    LatentGrid mean_;
    float scale_;
};

struct ConstantPattern {
    Color color;
};

/// Bands along the vertical axis: rows with (y mod period) < period / 2 take
/// `first`, the rest take `second`. `vertical` switches to columns.
struct StripesPattern {
    int period = 8;
    Color first;
    Color second;
    bool vertical = false;
};

/// Disk of `color` on `background`. Without a center the disk is placed each
/// step where the view's content deviates most from its median color,
/// measured by a disk-shaped matched filter.
struct DiskPattern {
    float radius = 1.0f;
    std::optional<std::pair<float, float>> center;  // (row, column) in view coordinates
    Color color;
    Color background;
};

using Pattern = std::variant<ConstantPattern, StripesPattern, DiskPattern>;

/// Procedural-target denoiser. The implied clean image is
///   (1 - pull) * flat + pull * target,
/// where `flat` is the per-channel mean of sqrt(alpha_bar_t) x_t over the view.
class PatternDenoiser final : public Denoiser {
public:
    PatternDenoiser(Pattern pattern, float pull);

    LatentGrid predict_x0(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const override;
    std::optional<Color> foreground_color() const override;

    /// Target image the prediction is pulled toward for this input.
    LatentGrid target(const LatentGrid& x_t) const;

    const Pattern& pattern() const noexcept { return pattern_; }
    float pull() const noexcept { return pull_; }

private:
    Pattern pattern_;
    float pull_;
};

/// Center (row, column) of the best-matching disk of the given radius.
std::pair<int, int> locate_disk(const LatentGrid& view, float radius);

class DenoiserRegistry {
public:
    void add(std::string token, std::shared_ptr<const Denoiser> denoiser);
    bool contains(const std::string& token) const { return entries_.count(token) != 0; }
    const Denoiser& resolve(const std::string& token) const;
    std::vector<std::string> tokens() const;

private:
    std::map<std::string, std::shared_ptr<const Denoiser>> entries_;
};

/// The reference model's noise predictor: predict(x_t, t, y) -> eps_hat.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual LatentGrid predict(const LatentGrid& x_t, int t, const Condition& condition) const = 0;
};

/// Predictor backed by a token registry and a schedule.
class RegistryPredictor final : public NoisePredictor {
public:
    RegistryPredictor(const DenoiserRegistry& registry, const NoiseSchedule& schedule)
        : registry_(registry), schedule_(schedule) {}

    LatentGrid predict(const LatentGrid& x_t, int t, const Condition& condition) const override;

private:
    const DenoiserRegistry& registry_;
    const NoiseSchedule& schedule_;
};

/// One application of the reference model: reverse_step(x_t, predict(x_t)).
LatentGrid phi_step(const NoisePredictor& predictor, const NoiseSchedule& schedule, const LatentGrid& x_t, int t,
                    const Condition& condition, StepMode mode, const LatentGrid& z);

}  // namespace mdiff
