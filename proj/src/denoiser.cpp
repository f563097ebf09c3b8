#include "multidiffusion/denoiser.hpp"

#include <algorithm>
#include <cmath>


namespace mdiff {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

float channel_value(const Color& color, int c, int channels) {
    if (color.size() == 1) return color[0];
    if (static_cast<int>(color.size()) != channels) {
        throw DimensionError("pattern color has " + std::to_string(color.size()) + " components, view has " +
                             std::to_string(channels) + " channels");
    }
    return color[c];
}

void require_color(const Color& color, const char* what) {
    if (color.empty()) throw ParameterError(std::string(what) + " color is empty");
    for (float v : color)
        if (!std::isfinite(v)) throw ParameterError(std::string(what) + " color must be finite");
}

void fill_pixel(LatentGrid& out, int y, int x, const Color& color) {
    float* p = out.pixel(y, x);
    for (int c = 0; c < out.channels(); ++c) p[c] = channel_value(color, c, out.channels());
}

bool in_disk(double y, double x, double cy, double cx, double r) {
    return (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
}

// Largest h with h^2 <= r^2 - dy^2.
int chord_half_width(double radius, int dy) {
    const double rem = radius * radius - static_cast<double>(dy) * dy;
    if (rem < 0.0) return -1;
    int h = static_cast<int>(std::floor(std::sqrt(rem)));
    while (static_cast<double>(h + 1) * (h + 1) <= rem) ++h;
    while (h > 0 && static_cast<double>(h) * h > rem) --h;
    return h;
}

}  // namespace

LatentGrid Denoiser::predict_eps(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const {
    const LatentGrid x0 = predict_x0(schedule, x_t, t);
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double inv = 1.0 / std::sqrt(1.0 - ab);
    LatentGrid eps(x_t.height(), x_t.width(), x_t.channels());
    auto xv = x_t.values();
    auto hv = x0.values();
    auto ev = eps.values();
    for (std::size_t i = 0; i < ev.size(); ++i) ev[i] = static_cast<float>((xv[i] - a * hv[i]) * inv);
    return eps;
}

GaussianDenoiser::GaussianDenoiser(LatentGrid mean, float scale) : mean_(std::move(mean)), scale_(scale) {
    if (mean_.empty()) throw ParameterError("gaussian denoiser needs a mean grid");
    if (!(scale_ >= 0.0f) || !std::isfinite(scale_)) throw ParameterError("gaussian scale must be >= 0");
}

LatentGrid GaussianDenoiser::predict_x0(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const {
    const bool broadcast = mean_.height() == 1 && mean_.width() == 1;
    if (mean_.channels() != x_t.channels() ||
        (!broadcast && (mean_.height() != x_t.height() || mean_.width() != x_t.width()))) {
        throw DimensionError("gaussian mean shape does not match the view");
    }
    const double ab = schedule.alpha_bar(t);
    const double s2 = static_cast<double>(scale_) * scale_;
    const double denom = ab * s2 + (1.0 - ab);
    const double cx = std::sqrt(ab) * s2 / denom;
    const double cm = (1.0 - ab) / denom;
    LatentGrid out(x_t.height(), x_t.width(), x_t.channels());
    for (int y = 0; y < x_t.height(); ++y) {
        for (int x = 0; x < x_t.width(); ++x) {
            const float* m = broadcast ? mean_.pixel(0, 0) : mean_.pixel(y, x);
            const float* in = x_t.pixel(y, x);
            float* o = out.pixel(y, x);
            for (int c = 0; c < x_t.channels(); ++c) o[c] = static_cast<float>(cx * in[c] + cm * m[c]);
        }
    }
    return out;
}

PatternDenoiser::PatternDenoiser(Pattern pattern, float pull) : pattern_(std::move(pattern)), pull_(pull) {
    if (!(pull_ > 0.0f && pull_ <= 1.0f)) throw ParameterError("pattern pull must lie in (0, 1]");
    std::visit(overloaded{
                   [](const ConstantPattern& p) { require_color(p.color, "constant"); },
                   [](const StripesPattern& p) {
                       if (p.period < 2) throw ParameterError("stripes period must be >= 2");
                       require_color(p.first, "stripes");
                       require_color(p.second, "stripes");
                   },
                   [](const DiskPattern& p) {
                       if (!(p.radius > 0.0f)) throw ParameterError("disk radius must be positive");
                       require_color(p.color, "disk");
                       require_color(p.background, "disk background");
                   },
               },
               pattern_);
}

std::pair<int, int> locate_disk(const LatentGrid& view, float radius) {
    const int h = view.height();
    const int w = view.width();
    const int channels = view.channels();
    const int reach = static_cast<int>(std::floor(radius));
    if (h < 2 * reach + 1 || w < 2 * reach + 1) return {h / 2, w / 2};

    // Deviation from the per-channel median.
    std::vector<float> median(channels);
    {
        std::vector<float> column(static_cast<std::size_t>(h) * w);
        for (int c = 0; c < channels; ++c) {
            for (int i = 0; i < h * w; ++i) column[i] = view.values()[static_cast<std::size_t>(i) * channels + c];
            auto mid = column.begin() + column.size() / 2;
            std::nth_element(column.begin(), mid, column.end());
            median[c] = *mid;
        }
    }

    // Row prefix sums per channel: prefix[(y * (w + 1) + x) * C + c].
    std::vector<double> prefix(static_cast<std::size_t>(h) * (w + 1) * channels, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t here = (static_cast<std::size_t>(y) * (w + 1) + x) * channels + c;
                prefix[here + channels] = prefix[here] + (view.at(y, x, c) - median[c]);
            }
        }
    }
    std::vector<int> chord(2 * reach + 1);
    double area = 0.0;
    for (int dy = -reach; dy <= reach; ++dy) {
        chord[dy + reach] = chord_half_width(radius, dy);
        area += 2 * chord[dy + reach] + 1;
    }

    double best = -1.0;
    std::pair<int, int> where{h / 2, w / 2};
    std::vector<double> sums(channels);
    for (int cy = reach; cy < h - reach; ++cy) {
        for (int cx = reach; cx < w - reach; ++cx) {
            std::fill(sums.begin(), sums.end(), 0.0);
            for (int dy = -reach; dy <= reach; ++dy) {
                const int half = chord[dy + reach];
                const std::size_t row = static_cast<std::size_t>(cy + dy) * (w + 1);
                const std::size_t lo = (row + cx - half) * channels;
                const std::size_t hi = (row + cx + half + 1) * channels;
                for (int c = 0; c < channels; ++c) sums[c] += prefix[hi + c] - prefix[lo + c];
            }
            double score = 0.0;
            for (double s : sums) score += (s / area) * (s / area);
            if (score > best) {
                best = score;
                where = {cy, cx};
            }
        }
    }
    return where;
}

LatentGrid PatternDenoiser::target(const LatentGrid& x_t) const {
    LatentGrid out(x_t.height(), x_t.width(), x_t.channels());
    std::visit(overloaded{
                   [&](const ConstantPattern& p) {
                       for (int y = 0; y < out.height(); ++y)
                           for (int x = 0; x < out.width(); ++x) fill_pixel(out, y, x, p.color);
                   },
                   [&](const StripesPattern& p) {
                       for (int y = 0; y < out.height(); ++y) {
                           for (int x = 0; x < out.width(); ++x) {
                               const int coord = p.vertical ? x : y;
                               fill_pixel(out, y, x, (coord % p.period) < p.period / 2 ? p.first : p.second);
                           }
                       }
                   },
                   [&](const DiskPattern& p) {
                       double cy = 0.0;
                       double cx = 0.0;
                       if (p.center) {
                           cy = p.center->first;
                           cx = p.center->second;
                       } else {
                           const auto located = locate_disk(x_t, p.radius);
                           cy = located.first;
                           cx = located.second;
                       }
                       for (int y = 0; y < out.height(); ++y)
                           for (int x = 0; x < out.width(); ++x)
                               fill_pixel(out, y, x, in_disk(y, x, cy, cx, p.radius) ? p.color : p.background);
                   },
               },
               pattern_);
    return out;
}

LatentGrid PatternDenoiser::predict_x0(const NoiseSchedule& schedule, const LatentGrid& x_t, int t) const {
    const double a = std::sqrt(schedule.alpha_bar(t));
    const int channels = x_t.channels();
    std::vector<double> flat(channels, 0.0);
    for (int y = 0; y < x_t.height(); ++y)
        for (int x = 0; x < x_t.width(); ++x)
            for (int c = 0; c < channels; ++c) flat[c] += x_t.at(y, x, c);
    const double pixels = static_cast<double>(x_t.height()) * x_t.width();
    for (double& f : flat) f = a * f / pixels;

    LatentGrid out = target(x_t);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            float* p = out.pixel(y, x);
            for (int c = 0; c < channels; ++c) p[c] = static_cast<float>((1.0 - pull_) * flat[c] + pull_ * p[c]);
        }
    }
    return out;
}

std::optional<Color> PatternDenoiser::foreground_color() const {
    if (const auto* c = std::get_if<ConstantPattern>(&pattern_)) return c->color;
    if (const auto* d = std::get_if<DiskPattern>(&pattern_)) return d->color;
    return std::nullopt;
}

void DenoiserRegistry::add(std::string token, std::shared_ptr<const Denoiser> denoiser) {
    if (token.empty()) throw ParameterError("token name must not be empty");
    if (!denoiser) throw ParameterError("token '" + token + "' has no denoiser");
    entries_[std::move(token)] = std::move(denoiser);
}

const Denoiser& DenoiserRegistry::resolve(const std::string& token) const {
    auto it = entries_.find(token);
    if (it == entries_.end()) throw UnknownTokenError("unknown token '" + token + "'");
    return *it->second;
}

std::vector<std::string> DenoiserRegistry::tokens() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

LatentGrid RegistryPredictor::predict(const LatentGrid& x_t, int t, const Condition& condition) const {
    schedule_.require_step(t);
    return registry_.resolve(condition.token).predict_eps(schedule_, x_t, t);
}

LatentGrid phi_step(const NoisePredictor& predictor, const NoiseSchedule& schedule, const LatentGrid& x_t, int t,
                    const Condition& condition, StepMode mode, const LatentGrid& z) {
    const LatentGrid eps_hat = predictor.predict(x_t, t, condition);
    if (!eps_hat.same_shape(x_t)) throw DimensionError("noise prediction shape differs from its input");
    return reverse_step(schedule, x_t, eps_hat, t, mode, z);
}

}  // namespace mdiff
