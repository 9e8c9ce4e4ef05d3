#include "gatedflow/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>

namespace gatedflow {

namespace {

void check_intensity(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("pixel intensity outside [0,1]: " + std::to_string(v));
    }
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path, "cannot open for reading");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError(path, "read failed");
    }
    return bytes;
}

// Cursor over a PNM header: whitespace-separated ASCII tokens with '#'
// comments running to end of line.
class HeaderReader {
public:
    explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::string token(const std::string& field) {
        skip_space_and_comments();
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) {
            throw ParseError(field, "missing " + field + " in PGM header");
        }
        return out;
    }

    long number(const std::string& field, long lo, long hi) {
        const std::string tok = token(field);
        if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
            tok.size() > 9) {
            throw ParseError(field, "invalid " + field + " in PGM header: '" + tok + "'");
        }
        const long v = std::stol(tok);
        if (v < lo || v > hi) {
            throw ParseError(field, field + " out of range in PGM header: " + tok);
        }
        return v;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void end_of_header() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw ParseError("maxval", "missing whitespace after maxval");
        }
        ++pos_;
    }

    std::size_t offset() const noexcept { return pos_; }

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

    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t read_be32(std::span<const unsigned char> b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
           (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

}  // namespace

Image::Image(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionError("pixel count does not match width x height");
    }
    std::for_each(pixels_.begin(), pixels_.end(), check_intensity);
}

void Image::set(int row, int col, double v) { set(index(row, col), v); }

void Image::set(std::size_t i, double v) {
    check_intensity(v);
    pixels_.at(i) = v;
}

std::size_t Image::count_on() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(pixels_.begin(), pixels_.end(), [](double v) { return v >= 0.5; }));
}

Image quantize8(const Image& img) {
    std::vector<double> q(img.pixels().begin(), img.pixels().end());
    for (double& v : q) v = std::round(v * 255.0) / 255.0;
    return Image(img.width(), img.height(), std::move(q));
}

void pgm_write(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<char> body(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        body[i] = static_cast<char>(static_cast<unsigned char>(std::lround(img[i] * 255.0)));
    }
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) {
        throw IoError(path, "write failed");
    }
}

Image pgm_decode(std::span<const unsigned char> bytes) {
    HeaderReader hdr(bytes);
    if (hdr.token("magic") != "P5") {
        throw ParseError("magic", "not a binary PGM (expected magic P5)");
    }
    constexpr long kMaxDim = 1L << 20;
    const int width = static_cast<int>(hdr.number("width", 1, kMaxDim));
    const int height = static_cast<int>(hdr.number("height", 1, kMaxDim));
    const long maxval = hdr.number("maxval", 1, 255);
    hdr.end_of_header();

    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - hdr.offset() < n) {
        throw ParseError("pixels", "short pixel data");
    }
    std::vector<double> px(n);
    const auto body = bytes.subspan(hdr.offset(), n);
    for (std::size_t i = 0; i < n; ++i) {
        if (body[i] > maxval) {
            throw ParseError("pixels", "pixel value exceeds maxval");
        }
        px[i] = static_cast<double>(body[i]) / static_cast<double>(maxval);
    }
    return Image(width, height, std::move(px));
}

Image pgm_read(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    return pgm_decode(bytes);
}

std::vector<Image> idx_decode_images(std::span<const unsigned char> bytes) {
    if (bytes.size() < 16) {
        throw ParseError("header", "IDX header truncated");
    }
    if (read_be32(bytes, 0) != 0x00000803u) {
        throw ParseError("magic", "not an IDX3 image file");
    }
    const std::uint32_t count = read_be32(bytes, 4);
    const std::uint32_t rows = read_be32(bytes, 8);
    const std::uint32_t cols = read_be32(bytes, 12);
    if (rows == 0 || cols == 0 || rows > (1u << 16) || cols > (1u << 16)) {
        throw ParseError("dims", "invalid IDX image dimensions");
    }
    const std::uint64_t per = std::uint64_t{rows} * cols;
    if (std::uint64_t{count} * per != bytes.size() - 16) {
        throw ParseError("payload", "IDX payload size does not match count x rows x cols");
    }
    std::vector<Image> images;
    images.reserve(count);
    std::size_t off = 16;
    for (std::uint32_t n = 0; n < count; ++n) {
        std::vector<double> px(per);
        for (std::uint64_t i = 0; i < per; ++i) {
            px[i] = static_cast<double>(bytes[off++]) / 255.0;
        }
        images.emplace_back(static_cast<int>(cols), static_cast<int>(rows), std::move(px));
    }
    return images;
}

std::vector<Image> idx_read_images(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    return idx_decode_images(bytes);
}

Image mnist_to_13(const Image& img28) {
    if (img28.width() != 28 || img28.height() != 28) {
        throw DimensionError("mnist_to_13 expects a 28x28 image");
    }
    // Crop rows/cols 1..26, then pool 2x2 blocks.
    Image out(13, 13);
    for (int r = 0; r < 13; ++r) {
        for (int c = 0; c < 13; ++c) {
            double m = 0.0;
            for (int dr = 0; dr < 2; ++dr) {
                for (int dc = 0; dc < 2; ++dc) {
                    m = std::max(m, img28.at(1 + 2 * r + dr, 1 + 2 * c + dc));
                }
            }
            out.set(r, c, m >= 0.5 ? 1.0 : 0.0);
        }
    }
    return out;
}

}  // namespace gatedflow
