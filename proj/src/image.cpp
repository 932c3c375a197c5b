#include "grapetrack/image.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <fmt/format.h>

#include "grapetrack/error.hpp"

namespace grapetrack {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::span<const std::uint8_t> bytes, std::size_t& at) {
    while (at < bytes.size()) {
        const char c = char(bytes[at]);
        if (c == '#') {
            while (at < bytes.size() && bytes[at] != '\n') ++at;
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++at;
        } else {
            break;
        }
    }
    std::string tok;
    while (at < bytes.size() && !std::isspace(bytes[at])) tok.push_back(char(bytes[at++]));
    return tok;
}

int ppm_int(std::span<const std::uint8_t> bytes, std::size_t& at) {
    const std::string tok = ppm_token(bytes, at);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw FormatError("bad PPM header");
        return v;
    } catch (const std::logic_error&) {
        throw FormatError(fmt::format("bad PPM header token '{}'", tok));
    }
}

}  // namespace

RgbImage read_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t at = 0;
    if (ppm_token(bytes, at) != "P6") throw FormatError("not a binary PPM (P6) image");
    RgbImage img;
    img.width = ppm_int(bytes, at);
    img.height = ppm_int(bytes, at);
    const int maxval = ppm_int(bytes, at);
    if (img.width <= 0 || img.height <= 0) throw FormatError("PPM dimensions must be positive");
    if (maxval != 255) throw FormatError(fmt::format("PPM maxval {} unsupported (only 255)", maxval));
    ++at;  // single whitespace before the raster
    const std::size_t n = std::size_t(img.width) * img.height * 3;
    if (at + n > bytes.size()) throw FormatError("truncated PPM raster");
    img.rgb.assign(bytes.begin() + at, bytes.begin() + at + n);
    return img;
}

std::vector<std::uint8_t> write_ppm(const RgbImage& image) {
    const std::string header = fmt::format("P6\n{} {}\n255\n", image.width, image.height);
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.rgb.begin(), image.rgb.end());
    return out;
}

GrayImage luminance(const RgbImage& image) {
    GrayImage out{image.width, image.height, std::vector<double>(std::size_t(image.width) * image.height)};
    for (std::size_t p = 0; p < out.values.size(); ++p) {
        const std::uint8_t* c = image.rgb.data() + 3 * p;
        out.values[p] = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    }
    return out;
}

GrayImage morphological_gradient(const GrayImage& image) {
    GrayImage out{image.width, image.height, std::vector<double>(image.values.size())};
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double lo = image.at(x, y);
            double hi = lo;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= image.width || ny >= image.height) continue;
                    lo = std::min(lo, image.at(nx, ny));
                    hi = std::max(hi, image.at(nx, ny));
                }
            }
            out.values[std::size_t(y) * image.width + x] = hi - lo;
        }
    }
    return out;
}

}  // namespace grapetrack
