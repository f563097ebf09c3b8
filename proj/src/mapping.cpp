#include "multidiffusion/mapping.hpp"

#include <string>

namespace mdiff {

ViewMap::ViewMap(ViewKind kind, WeightMap weight) : kind_(std::move(kind)), weight_(std::move(weight)) {}

ViewMap ViewMap::crop(int top, int left, int height, int width) {
    return crop(top, left, height, width, WeightMap(height, width, 1.0f));
}

ViewMap ViewMap::crop(int top, int left, int height, int width, WeightMap weight) {
    if (top < 0 || left < 0) throw DimensionError("crop offsets must be nonnegative");
    require_same_extent(weight.height(), weight.width(), height, width, "crop weight");
    return ViewMap(CropView{top, left, height, width}, std::move(weight));
}

ViewMap ViewMap::masked_identity(Mask mask) {
    WeightMap weight = WeightMap::from_mask(mask);
    return ViewMap(MaskedIdentityView{std::move(mask)}, std::move(weight));
}

ViewMap ViewMap::masked_identity(Mask mask, WeightMap weight) {
    require_same_extent(weight.height(), weight.width(), mask.height(), mask.width(), "mask weight");
    return ViewMap(MaskedIdentityView{std::move(mask)}, std::move(weight));
}

ViewMap ViewMap::bootstrapped(Mask mask, int stop_step, BackgroundSource background) {
    if (stop_step < 0) throw RangeError("bootstrap stop step must be >= 0");
    WeightMap weight = WeightMap::from_mask(mask);
    return ViewMap(BootstrapView{std::move(mask), stop_step, std::move(background)}, std::move(weight));
}

int ViewMap::top() const noexcept {
    if (const auto* c = std::get_if<CropView>(&kind_)) return c->top;
    return 0;
}

int ViewMap::left() const noexcept {
    if (const auto* c = std::get_if<CropView>(&kind_)) return c->left;
    return 0;
}

bool ViewMap::bootstrapping_at(int t) const noexcept {
    const auto* b = std::get_if<BootstrapView>(&kind_);
    return b != nullptr && t > b->stop_step;
}

void ViewMap::require_fits(int canvas_height, int canvas_width) const {
    if (std::holds_alternative<CropView>(kind_)) {
        if (top() + height() > canvas_height || left() + width() > canvas_width) {
            throw DimensionError("crop window (" + std::to_string(top()) + "," + std::to_string(left()) + "," +
                                 std::to_string(height()) + "," + std::to_string(width()) + ") leaves the " +
                                 std::to_string(canvas_height) + "x" + std::to_string(canvas_width) + " canvas");
        }
    } else {
        require_same_extent(height(), width(), canvas_height, canvas_width, "identity view");
    }
}

BackgroundProcess::BackgroundProcess(const NoiseSchedule& schedule, const SeedTree& seeds, int height, int width,
                                     int channels)
    : schedule_(schedule), seeds_(seeds), height_(height), width_(width), channels_(channels) {
    auto gen = seeds_.generator(Stream::background_color);
    std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
    run_color_.resize(channels_);
    for (float& c : run_color_) c = uniform(gen);
}

LatentGrid BackgroundProcess::realize(const BackgroundSource& source, int t) const {
    const Color& color = source.color ? *source.color : run_color_;
    if (color.size() != 1 && static_cast<int>(color.size()) != channels_) {
        throw DimensionError("background color has " + std::to_string(color.size()) + " components");
    }
    LatentGrid clean(height_, width_, channels_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            for (int c = 0; c < channels_; ++c) clean.at(y, x, c) = color.size() == 1 ? color[0] : color[c];
    auto gen = seeds_.generator(Stream::background_noise, static_cast<std::uint64_t>(t));
    const LatentGrid eps = standard_normal(height_, width_, channels_, gen);
    return add_noise(schedule_, clean, t, eps);
}

LatentGrid restrict_to_view(const ViewMap& view, const LatentGrid& canvas) {
    view.require_fits(canvas.height(), canvas.width());
    if (std::holds_alternative<CropView>(view.kind())) {
        return canvas.crop(view.top(), view.left(), view.height(), view.width());
    }
    return canvas;
}

LatentGrid extract(const ViewMap& view, const LatentGrid& canvas, int t, const BackgroundProcess* background) {
    if (!view.bootstrapping_at(t)) return restrict_to_view(view, canvas);
    view.require_fits(canvas.height(), canvas.width());
    if (background == nullptr) throw ParameterError("bootstrapped view needs a background process");
    const auto& boot = std::get<BootstrapView>(view.kind());
    const LatentGrid s_t = background->realize(boot.background, t);
    if (!s_t.same_shape(canvas)) throw DimensionError("background shape differs from the canvas");
    LatentGrid out = canvas;
    for (int y = 0; y < canvas.height(); ++y) {
        for (int x = 0; x < canvas.width(); ++x) {
            if (boot.mask.contains(y, x)) continue;
            const float* s = s_t.pixel(y, x);
            float* o = out.pixel(y, x);
            for (int c = 0; c < canvas.channels(); ++c) o[c] = s[c];
        }
    }
    return out;
}

void scatter_accumulate(const ViewMap& view, const LatentGrid& values, LatentGrid& num, LatentGrid& den) {
    require_same_extent(values.height(), values.width(), view.height(), view.width(), "scatter values");
    if (num.channels() != values.channels() || den.channels() != 1 || num.height() != den.height() ||
        num.width() != den.width()) {
        throw DimensionError("scatter accumulators have inconsistent shapes");
    }
    view.require_fits(num.height(), num.width());
    const int top = view.top();
    const int left = view.left();
    const int channels = values.channels();
    const WeightMap& weight = view.weight();
    for (int y = 0; y < view.height(); ++y) {
        for (int x = 0; x < view.width(); ++x) {
            const float w = weight(y, x);
            if (w == 0.0f) continue;
            const float* v = values.pixel(y, x);
            float* n = num.pixel(top + y, left + x);
            for (int c = 0; c < channels; ++c) n[c] += w * v[c];
            den.at(top + y, left + x, 0) += w;
        }
    }
}

Condition lambda_map(const PlanEntry& entry, const PlanCondition& z) {
    if (entry.prompt_index >= z.prompts.size()) {
        throw PlanError("plan entry refers to prompt " + std::to_string(entry.prompt_index) + " but z has " +
                        std::to_string(z.prompts.size()));
    }
    return z.prompts[entry.prompt_index];
}

}  // namespace mdiff
