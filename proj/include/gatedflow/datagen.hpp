#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gatedflow/image.hpp"

namespace gatedflow {

/// All stochastic code draws from this engine, seeded explicitly.
using Rng = std::mt19937_64;

/// Engine for an independent stream of `seed`; distinct `stream` values give
/// unrelated sequences for the same user seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

struct Translation {
    int dx = 0;  // columns, positive = right
    int dy = 0;  // rows, positive = down

    friend bool operator==(const Translation&, const Translation&) = default;
};

struct Rotation {
    double theta = 0.0;  // degrees counterclockwise, in [0, 360)

    friend bool operator==(const Rotation&, const Rotation&) = default;
};

struct Identity {
    friend bool operator==(const Identity&, const Identity&) = default;
};

using TransformLabel = std::variant<Translation, Rotation, Identity>;

/// Reduces an angle in degrees to [0, 360).
double wrap_degrees(double theta);

struct ImagePair {
    Image x;  // previous frame
    Image y;  // current frame
    TransformLabel label = Identity{};
};

struct Mask {
    Mask() = default;
    Mask(int width, int height)
        : width(width), height(height),
          foreground(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), false) {}

    int width = 0;
    int height = 0;
    std::vector<bool> foreground;  // row-major

    std::size_t count() const noexcept;
    friend bool operator==(const Mask&, const Mask&) = default;
};

struct Scene {
    ImagePair pair;
    Mask truth_mask;  // foreground pixels on the x frame
};

struct Rect {
    int row = 0;
    int col = 0;
    int height = 0;
    int width = 0;

    bool contains(int r, int c) const noexcept {
        return r >= row && r < row + height && c >= col && c < col + width;
    }
};

enum class PairKind { Translation9, RotationUniform };

Image random_dots(int width, int height, double density, std::uint64_t seed);

/// Toroidal shift: out(r, c) = in((r - dy) mod h, (c - dx) mod w).
Image translate_wrap(const Image& img, int dx, int dy);

/// Nearest-neighbour rotation about ((w-1)/2, (h-1)/2) by inverse mapping.
/// Positive theta turns the picture counterclockwise as displayed (row 0 at
/// the top). Sources outside the grid read as 0.
Image rotate_nn(const Image& img, double theta_deg);

/// Forward image of pixel `p` under the same rotation rotate_nn applies,
/// rounded to the nearest grid point (may fall outside the grid).
PixelPos rotate_position(PixelPos p, int width, int height, double theta_deg);

/// Applies a label's transform to an image.
Image apply_transform(const Image& img, const TransformLabel& label);

/// The nine unit shifts, in (dy, dx) lexicographic order.
const std::vector<Translation>& unit_shifts();

std::vector<ImagePair> make_pairs(PairKind kind, int n, int size, double density,
                                  std::uint64_t seed);

/// Background dots move by `bg_shift`, dots inside `fg_rect` by `fg_shift`,
/// both with wrap-around. The truth mask marks `fg_rect`.
Scene make_scene(int size, double density, Translation bg_shift, Rect fg_rect,
                 Translation fg_shift, std::uint64_t seed);

/// Dataset on disk: x_NNNNN.pgm / y_NNNNN.pgm plus manifest.txt with lines
/// "index kind dx dy theta".
void write_dataset(const std::vector<ImagePair>& pairs, const std::filesystem::path& dir);
std::vector<ImagePair> read_dataset(const std::filesystem::path& dir);

std::string manifest_line(std::size_t index, const TransformLabel& label);
TransformLabel parse_manifest_line(const std::string& line, std::size_t* index = nullptr);

}  // namespace gatedflow
