#pragma once

#include <limits>
#include <variant>

#include "gatedflow/datagen.hpp"
#include "gatedflow/flow.hpp"

namespace gatedflow {

struct UnknownMotion {
    friend bool operator==(const UnknownMotion&, const UnknownMotion&) = default;
};

struct GlobalMotion {
    std::variant<Translation, Rotation, UnknownMotion> kind = UnknownMotion{};
    double consensus = 0.0;  // fraction of active pixels agreeing

    bool is_unknown() const noexcept { return std::holds_alternative<UnknownMotion>(kind); }
};

using SegMask = Mask;

struct TranslationEstimate {
    Translation shift;
    double consensus = 0.0;
};

struct RotationEstimate {
    double theta = 0.0;
    double consensus = 0.0;
};

/// Raised when a flow field has no active pixels to vote with.
class EmptyEvidence : public std::runtime_error {
public:
    EmptyEvidence() : std::runtime_error("empty evidence") {}
};

/// Modal wrapped displacement over active pixels. Ties go to the smaller
/// (dy, dx) in lexicographic order.
TranslationEstimate estimate_translation(const FlowField& flow);

/// Grid search over whole degrees. A pixel agrees with theta when its target
/// is within one pixel (max-norm) of its rotated position. Among equal
/// consensus the smaller mean squared distance to the exact rotated position
/// wins, then the smaller theta.
RotationEstimate estimate_rotation(const FlowField& flow);

/// Rotation wins only when its exact hit rate beats the translation
/// consensus (translation on ties). The winner reports its own consensus and
/// becomes Unknown when that is below `min_consensus`.
GlobalMotion classify_global_motion(const FlowField& flow, double min_consensus = 0.5);

/// Where `gm` sends input pixel i. Translations wrap around the grid.
PixelPos predicted_target(const GlobalMotion& gm, PixelPos p, int width, int height);

/// Active pixels whose target misses the global prediction by more than
/// `tol` (max-norm, toroidal for translations) are foreground. No smoothing.
SegMask violation_mask(const FlowField& flow, const GlobalMotion& gm, double tol = 1.0);

/// One pass of 3x3 majority voting among active pixels; inactive pixels stay
/// background and an even split keeps the current label.
SegMask majority_smooth(const SegMask& mask, const std::vector<bool>& active);

/// violation_mask followed by majority_smooth. Throws std::invalid_argument
/// ("no global motion") when gm is Unknown.
SegMask segment_foreground(const FlowField& flow, const GlobalMotion& gm, double tol = 1.0);

/// |a & b| / |a | b| over foreground; 1 when both are empty.
double mask_iou(const SegMask& a, const SegMask& b);

/// Restricts a mask to the pixels flagged in `keep`.
SegMask mask_restrict(const SegMask& m, const std::vector<bool>& keep);

/// PGM with 0 = background and 255 = foreground.
void write_mask(const SegMask& m, const std::filesystem::path& path);

}  // namespace gatedflow
