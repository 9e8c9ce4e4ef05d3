#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gatedflow/datagen.hpp"
#include "gatedflow/model.hpp"

namespace gatedflow {

struct Displacement {
    int dcol = 0;
    int drow = 0;

    friend bool operator==(const Displacement&, const Displacement&) = default;
};

/// Max-flow field: every input pixel points at exactly one output pixel.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<std::size_t> target;  // output pixel index per input pixel
    std::vector<bool> active;         // x_i >= 0.5

    std::size_t size() const noexcept { return target.size(); }
    PixelPos source_pos(std::size_t i) const noexcept {
        return {static_cast<int>(i / static_cast<std::size_t>(width)),
                static_cast<int>(i % static_cast<std::size_t>(width))};
    }
    PixelPos target_pos(std::size_t i) const noexcept { return source_pos(target[i]); }

    /// pos(target) - pos(source) on the plain grid.
    Displacement displacement(std::size_t i) const noexcept;

    /// Shortest toroidal representative of the displacement, each component
    /// in [-n/2, n/2).
    Displacement wrapped_displacement(std::size_t i) const noexcept;

    std::size_t active_count() const noexcept;
};

/// Runs the max-flow search with hidden activities `h` held fixed.
FlowField max_flow_field_given_hidden(const FactoredGRBM& m, const Image& x, const VectorXd& h);

/// h = P(h | y; x); then for each input pixel i the one-hot input mask e_i
/// scores output pixels by s_j = sum_f wyf(j,f) wxf(i,f) (h.whf_f), and the
/// target is the argmax (smallest j on ties).
FlowField max_flow_field(const FactoredGRBM& m, const ImagePair& pair);

/// Applies the transformation inferred from `exemplar` to `novel_x`:
/// hidden probabilities thresholded at 0.5, then P(y | h; novel_x) > 0.5.
Image analogy_reconstruct(const FactoredGRBM& m, const ImagePair& exemplar, const Image& novel_x);

enum class FlowRender { ArrowsText, ColorPpm };

/// ArrowsText: header "# flow <width> <height>" then "row col drow dcol" per
/// active pixel. ColorPpm: P6 where hue is direction and saturation is
/// magnitude; inactive pixels are black.
void render_flow(const FlowField& flow, const std::filesystem::path& path, FlowRender mode);

/// Parses the ArrowsText format. Pixels not listed come back inactive,
/// mapped to themselves.
FlowField read_flow_arrows(const std::filesystem::path& path);

}  // namespace gatedflow
