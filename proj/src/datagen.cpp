#include "gatedflow/datagen.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "gatedflow/random.hpp"

namespace gatedflow {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

double wrap_degrees(double theta) {
    double t = std::fmod(theta, 360.0);
    if (t < 0.0) t += 360.0;
    if (t >= 360.0) t = 0.0;
    return t;
}

std::size_t Mask::count() const noexcept {
    std::size_t n = 0;
    for (bool b : foreground) n += b ? 1 : 0;
    return n;
}

Image random_dots(int width, int height, double density, std::uint64_t seed) {
    if (!(density >= 0.0 && density <= 1.0)) {
        throw std::invalid_argument("density must lie in [0,1]");
    }
    Image img(width, height);
    Rng rng = make_rng(seed, 0x646f7473);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (uniform01(rng) < density) img.set(i, 1.0);
    }
    return img;
}

namespace {

int wrap_index(int v, int n) {
    const int m = v % n;
    return m < 0 ? m + n : m;
}

// Exact sine/cosine at multiples of 90 degrees so quarter turns are exact
// permutations.
void sincos_deg(double theta, double& s, double& c) {
    const double t = wrap_degrees(theta);
    if (t == 0.0) {
        s = 0.0; c = 1.0;
    } else if (t == 90.0) {
        s = 1.0; c = 0.0;
    } else if (t == 180.0) {
        s = 0.0; c = -1.0;
    } else if (t == 270.0) {
        s = -1.0; c = 0.0;
    } else {
        const double rad = t * std::numbers::pi / 180.0;
        s = std::sin(rad);
        c = std::cos(rad);
    }
}

}  // namespace

Image translate_wrap(const Image& img, int dx, int dy) {
    Image out(img.width(), img.height());
    const int w = img.width();
    const int h = img.height();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            out.set(r, c, img.at(wrap_index(r - dy, h), wrap_index(c - dx, w)));
        }
    }
    return out;
}

Image rotate_nn(const Image& img, double theta_deg) {
    double s = 0.0;
    double c = 1.0;
    sincos_deg(theta_deg, s, c);
    const int w = img.width();
    const int h = img.height();
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    Image out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            // Upward-y frame centred on the image; rotate back by theta.
            const double u = col - cx;
            const double v = cy - r;
            const double su = u * c + v * s;
            const double sv = -u * s + v * c;
            const long sr = std::lround(cy - sv);
            const long sc = std::lround(cx + su);
            if (sr >= 0 && sr < h && sc >= 0 && sc < w) {
                out.set(r, col, img.at(static_cast<int>(sr), static_cast<int>(sc)));
            }
        }
    }
    return out;
}

PixelPos rotate_position(PixelPos p, int width, int height, double theta_deg) {
    double s = 0.0;
    double c = 1.0;
    sincos_deg(theta_deg, s, c);
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    const double u = p.col - cx;
    const double v = cy - p.row;
    const double ru = u * c - v * s;
    const double rv = u * s + v * c;
    return {static_cast<int>(std::lround(cy - rv)), static_cast<int>(std::lround(cx + ru))};
}

Image apply_transform(const Image& img, const TransformLabel& label) {
    return std::visit(
        [&](const auto& t) -> Image {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, Translation>) {
                return translate_wrap(img, t.dx, t.dy);
            } else if constexpr (std::is_same_v<T, Rotation>) {
                return rotate_nn(img, t.theta);
            } else {
                return img;
            }
        },
        label);
}

const std::vector<Translation>& unit_shifts() {
    static const std::vector<Translation> shifts = [] {
        std::vector<Translation> v;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) v.push_back({dx, dy});
        return v;
    }();
    return shifts;
}

std::vector<ImagePair> make_pairs(PairKind kind, int n, int size, double density,
                                  std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("make_pairs needs n >= 1");
    }
    if (size < 1) {
        throw std::invalid_argument("image size must be positive");
    }
    Rng rng = make_rng(seed, 0x70616972);
    std::vector<ImagePair> pairs;
    pairs.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        TransformLabel label;
        if (kind == PairKind::Translation9) {
            label = unit_shifts()[uniform_index(rng, 9)];
        } else {
            label = Rotation{wrap_degrees(360.0 * uniform01(rng))};
        }
        Image x = random_dots(size, size, density, rng());
        Image y = apply_transform(x, label);
        pairs.push_back({std::move(x), std::move(y), label});
    }
    return pairs;
}

Scene make_scene(int size, double density, Translation bg_shift, Rect fg_rect,
                 Translation fg_shift, std::uint64_t seed) {
    if (fg_rect.row < 0 || fg_rect.col < 0 || fg_rect.height < 0 || fg_rect.width < 0 ||
        fg_rect.row + fg_rect.height > size || fg_rect.col + fg_rect.width > size) {
        throw std::out_of_range("foreground rectangle lies outside the image");
    }
    if (fg_shift == bg_shift) {
        throw std::invalid_argument("foreground shift must differ from background shift");
    }
    Scene scene;
    scene.pair.x = random_dots(size, size, density, seed);
    scene.pair.y = Image(size, size);
    scene.pair.label = bg_shift;
    scene.truth_mask = Mask(size, size);
    const Image& x = scene.pair.x;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const bool fg = fg_rect.contains(r, c);
            scene.truth_mask.foreground[x.index(r, c)] = fg;
            const double v = x.at(r, c);
            if (v == 0.0) continue;
            const Translation& t = fg ? fg_shift : bg_shift;
            const int tr = wrap_index(r + t.dy, size);
            const int tc = wrap_index(c + t.dx, size);
            scene.pair.y.set(tr, tc, std::max(scene.pair.y.at(tr, tc), v));
        }
    }
    return scene;
}

std::string manifest_line(std::size_t index, const TransformLabel& label) {
    std::ostringstream os;
    os << index << ' ';
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, Translation>) {
                os << "translation " << t.dx << ' ' << t.dy << " 0";
            } else if constexpr (std::is_same_v<T, Rotation>) {
                os << "rotation 0 0 " << std::setprecision(17) << t.theta;
            } else {
                os << "identity 0 0 0";
            }
        },
        label);
    return os.str();
}

TransformLabel parse_manifest_line(const std::string& line, std::size_t* index) {
    std::istringstream is(line);
    std::size_t idx = 0;
    std::string kind;
    int dx = 0;
    int dy = 0;
    double theta = 0.0;
    if (!(is >> idx >> kind >> dx >> dy >> theta)) {
        throw ParseError("manifest", "malformed manifest line: '" + line + "'");
    }
    if (index) *index = idx;
    if (kind == "translation") return Translation{dx, dy};
    if (kind == "rotation") return Rotation{wrap_degrees(theta)};
    if (kind == "identity") return Identity{};
    throw ParseError("kind", "unknown transform kind in manifest: '" + kind + "'");
}

namespace {

std::string frame_name(char prefix, std::size_t i) {
    std::ostringstream os;
    os << prefix << '_' << std::setw(5) << std::setfill('0') << i << ".pgm";
    return os.str();
}

}  // namespace

void write_dataset(const std::vector<ImagePair>& pairs, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError(dir, "cannot create directory");
    }
    const auto manifest = dir / "manifest.txt";
    std::ofstream out(manifest);
    if (!out) {
        throw IoError(manifest, "cannot open for writing");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pgm_write(pairs[i].x, dir / frame_name('x', i));
        pgm_write(pairs[i].y, dir / frame_name('y', i));
        out << manifest_line(i, pairs[i].label) << '\n';
    }
    if (!out) {
        throw IoError(manifest, "write failed");
    }
}

std::vector<ImagePair> read_dataset(const std::filesystem::path& dir) {
    const auto manifest = dir / "manifest.txt";
    std::ifstream in(manifest);
    if (!in) {
        throw IoError(manifest, "cannot open for reading");
    }
    std::vector<ImagePair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t idx = 0;
        TransformLabel label = parse_manifest_line(line, &idx);
        ImagePair p{pgm_read(dir / frame_name('x', idx)), pgm_read(dir / frame_name('y', idx)),
                    label};
        if (!p.x.same_shape(p.y)) {
            throw DimensionError("pair " + std::to_string(idx) + " has mismatched frames");
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace gatedflow
