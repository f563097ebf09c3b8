#include "multidiffusion/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <system_error>

namespace mdiff {

namespace {

std::uint8_t quantize(float v) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

class HeaderReader {
public:
    explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    int next_int() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw FormatError("pnm: malformed header");
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > 1'000'000) throw FormatError("pnm: header value too large");
        }
        return static_cast<int>(value);
    }

    std::size_t body_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("pnm: malformed header");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 2;
};

struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::size_t offset = 0;
};

Raster parse_header(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("pnm: expected P5 or P6 magic");
    }
    HeaderReader reader(bytes);
    Raster r;
    r.channels = bytes[1] == '5' ? 1 : 3;
    r.width = reader.next_int();
    r.height = reader.next_int();
    const int maxval = reader.next_int();
    if (r.width <= 0 || r.height <= 0) throw FormatError("pnm: non-positive dimensions");
    if (maxval != 255) throw FormatError("pnm: only maxval 255 is supported");
    r.offset = reader.body_start();
    const std::size_t expected = static_cast<std::size_t>(r.width) * r.height * r.channels;
    if (bytes.size() - r.offset < expected) throw FormatError("pnm: truncated pixel data");
    return r;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> header(char kind, int width, int height) {
    const std::string text = std::string("P") + kind + "\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
    return {text.begin(), text.end()};
}

}  // namespace

std::vector<std::uint8_t> encode_pnm(const LatentGrid& grid, ImageMode mode) {
    const int out_channels = mode == ImageMode::gray ? 1 : 3;
    if (grid.channels() < out_channels) {
        throw DimensionError("rgb output needs at least 3 channels, grid has " + std::to_string(grid.channels()));
    }
    auto bytes = header(mode == ImageMode::gray ? '5' : '6', grid.width(), grid.height());
    bytes.reserve(bytes.size() + static_cast<std::size_t>(grid.width()) * grid.height() * out_channels);
    for (int y = 0; y < grid.height(); ++y)
        for (int x = 0; x < grid.width(); ++x)
            for (int c = 0; c < out_channels; ++c) bytes.push_back(quantize(grid.at(y, x, c)));
    return bytes;
}

void write_image(const LatentGrid& grid, const std::filesystem::path& path, ImageMode mode) {
    write_file_atomic(path, encode_pnm(grid, mode));
}

LatentGrid decode_pnm(const std::vector<std::uint8_t>& bytes) {
    const Raster r = parse_header(bytes);
    LatentGrid out(r.height, r.width, r.channels);
    auto values = out.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = bytes[r.offset + i] / 255.0f;
    return out;
}

LatentGrid read_image(const std::filesystem::path& path) { return decode_pnm(read_bytes(path)); }

Mask read_mask(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    const Raster r = parse_header(bytes);
    if (r.channels != 1) throw FormatError(path.string() + ": mask must be a P5 graymap");
    Mask mask(r.height, r.width);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            const std::uint8_t v = bytes[r.offset + static_cast<std::size_t>(y) * r.width + x];
            if (v != 0 && v != 255) {
                throw FormatError(path.string() + ": non-binary mask value " + std::to_string(v) + " at (" +
                                  std::to_string(y) + "," + std::to_string(x) + ")");
            }
            mask.set(y, x, v == 255);
        }
    }
    return mask;
}

void write_mask(const Mask& mask, const std::filesystem::path& path) {
    auto bytes = header('5', mask.width(), mask.height());
    for (std::uint8_t v : mask.values()) bytes.push_back(v ? 255 : 0);
    write_file_atomic(path, bytes);
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw Error("write failed for " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace mdiff
