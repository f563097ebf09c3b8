#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "multidiffusion/denoiser.hpp"
#include "multidiffusion/grid.hpp"
#include "multidiffusion/rng.hpp"
#include "multidiffusion/schedule.hpp"

namespace mdiff {

class PlanError : public Error {
public:
    using Error::Error;
};

/// Constant background color for bootstrapping. Without a fixed color the
/// run draws one uniform color in [0, 1]^C and uses it for every step.
struct BackgroundSource {
    std::optional<Color> color;
};

struct CropView {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
};

struct MaskedIdentityView {
    Mask mask;
};

/// Time-dependent masked identity: for t <= stop_step the view is the canvas,
/// above it the out-of-mask pixels are replaced by the noised background S_t.
struct BootstrapView {
    Mask mask;
    int stop_step = 0;
    BackgroundSource background;
};

using ViewKind = std::variant<CropView, MaskedIdentityView, BootstrapView>;

/// Pixel-sampling map from the canvas to reference space plus its weights.
class ViewMap {
public:
    static ViewMap crop(int top, int left, int height, int width);
    static ViewMap crop(int top, int left, int height, int width, WeightMap weight);
    static ViewMap masked_identity(Mask mask);
    static ViewMap masked_identity(Mask mask, WeightMap weight);
    static ViewMap bootstrapped(Mask mask, int stop_step, BackgroundSource background);

    const ViewKind& kind() const noexcept { return kind_; }
    const WeightMap& weight() const noexcept { return weight_; }

    /// Reference-space extent and its placement on the canvas.
    int height() const noexcept { return weight_.height(); }
    int width() const noexcept { return weight_.width(); }
    int top() const noexcept;
    int left() const noexcept;

    bool bootstrapping_at(int t) const noexcept;

    /// Throws DimensionError unless the view fits a canvas of this extent.
    void require_fits(int canvas_height, int canvas_width) const;

private:
    ViewMap(ViewKind kind, WeightMap weight);

    ViewKind kind_;
    WeightMap weight_;
};

/// Realizes S_t for bootstrapped views of one run: a constant-color image
/// noised to level t, with one epsilon draw per (run, t).
class BackgroundProcess {
public:
    BackgroundProcess(const NoiseSchedule& schedule, const SeedTree& seeds, int height, int width, int channels);

    const Color& run_color() const noexcept { return run_color_; }
    LatentGrid realize(const BackgroundSource& source, int t) const;

private:
    const NoiseSchedule& schedule_;
    SeedTree seeds_;
    int height_;
    int width_;
    int channels_;
    Color run_color_;
};

/// Plain pixel sampling of the view's support (crop window or full canvas).
LatentGrid restrict_to_view(const ViewMap& view, const LatentGrid& canvas);

/// F_i(J_t, t). `background` is required only for bootstrapped views with
/// t above their stop step.
LatentGrid extract(const ViewMap& view, const LatentGrid& canvas, int t,
                   const BackgroundProcess* background = nullptr);

/// num[p] += w[q] * values[q], den[p] += w[q] for every canvas pixel p = F_i^{-1}(q).
/// `den` has one channel.
void scatter_accumulate(const ViewMap& view, const LatentGrid& values, LatentGrid& num, LatentGrid& den);

/// The condition z of a whole generation: one shared prompt for panoramas,
/// one prompt per region otherwise.
struct PlanCondition {
    std::vector<Condition> prompts;
};

struct PlanEntry {
    ViewMap view;
    std::size_t prompt_index = 0;
};

/// lambda_i(z): selects the component of z conditioning entry i.
Condition lambda_map(const PlanEntry& entry, const PlanCondition& z);

}  // namespace mdiff
