#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gatedflow {

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(what + ": " + path.string()), path_(path) {}

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Raised when a file is readable but its content is malformed.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}

    /// Name of the header field or section that failed to parse.
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PixelPos {
    int row = 0;
    int col = 0;

    friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Grayscale image with intensities in [0,1], stored row-major.
///
/// Linear index i corresponds to (row, col) = (i / width, i % width). Every
/// vector of visible units in the library uses this ordering.
class Image {
public:
    Image() = default;
    Image(int width, int height);
    Image(int width, int height, std::vector<double> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    double operator[](std::size_t i) const { return pixels_[i]; }
    double at(int row, int col) const { return pixels_[index(row, col)]; }
    void set(int row, int col, double v);
    void set(std::size_t i, double v);

    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }
    PixelPos position(std::size_t i) const noexcept {
        return {static_cast<int>(i / static_cast<std::size_t>(width_)),
                static_cast<int>(i % static_cast<std::size_t>(width_))};
    }

    std::span<const double> pixels() const noexcept { return pixels_; }

    /// Number of pixels with intensity >= 0.5.
    std::size_t count_on() const noexcept;

    bool same_shape(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// Rounds every intensity to the nearest multiple of 1/255.
Image quantize8(const Image& img);

/// Writes a binary P5 PGM with maxval 255; v is stored as round(v * 255).
void pgm_write(const Image& img, const std::filesystem::path& path);

/// Reads a binary P5 PGM (comments allowed in the header, maxval 1..255).
Image pgm_read(const std::filesystem::path& path);

/// Parses an in-memory P5 PGM.
Image pgm_decode(std::span<const unsigned char> bytes);

/// Reads an IDX3 image file (MNIST layout), scaling bytes by 1/255.
std::vector<Image> idx_read_images(const std::filesystem::path& path);

std::vector<Image> idx_decode_images(std::span<const unsigned char> bytes);

/// 28x28 MNIST digit to a binary 13x13 image: center crop to 26x26,
/// 2x2 max-pool, threshold at 0.5.
Image mnist_to_13(const Image& img28);

}  // namespace gatedflow
