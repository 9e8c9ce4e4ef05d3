#include "gatedflow/motion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>

namespace gatedflow {

namespace {

int wrap_index(int v, int n) {
    const int m = v % n;
    return m < 0 ? m + n : m;
}

int toroidal_gap(int a, int b, int n) {
    const int d = std::abs(a - b) % n;
    return std::min(d, n - d);
}

void require_active(const FlowField& flow) {
    if (flow.active_count() == 0) throw EmptyEvidence();
}

// Fraction of active pixels landing exactly on their rotated position. The
// one-pixel slack used by the theta search lets a near-zero rotation absorb
// every unit shift, so the class contest uses exact hits on both sides.
double exact_rotation_hits(const FlowField& flow, double theta) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        if (!flow.active[i]) continue;
        const PixelPos pred = rotate_position(flow.source_pos(i), flow.width, flow.height, theta);
        const PixelPos dst = flow.target_pos(i);
        if (pred.row == dst.row && pred.col == dst.col) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(flow.active_count());
}

}  // namespace

TranslationEstimate estimate_translation(const FlowField& flow) {
    require_active(flow);
    // Keyed by (dy, dx) so iteration order matches the tie-break.
    std::map<std::pair<int, int>, std::size_t> votes;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        if (!flow.active[i]) continue;
        const Displacement d = flow.wrapped_displacement(i);
        ++votes[{d.drow, d.dcol}];
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return {Translation{best->first.second, best->first.first},
            static_cast<double>(best->second) / static_cast<double>(flow.active_count())};
}

RotationEstimate estimate_rotation(const FlowField& flow) {
    require_active(flow);
    const double cx = (flow.width - 1) / 2.0;
    const double cy = (flow.height - 1) / 2.0;
    const double active = static_cast<double>(flow.active_count());

    RotationEstimate best{0.0, -1.0};
    double best_residual = std::numeric_limits<double>::infinity();
    for (int deg = 0; deg < 360; ++deg) {
        const double rad = deg * std::numbers::pi / 180.0;
        const double s = std::sin(rad);
        const double c = std::cos(rad);
        std::size_t agree = 0;
        double residual = 0.0;
        for (std::size_t i = 0; i < flow.size(); ++i) {
            if (!flow.active[i]) continue;
            const PixelPos src = flow.source_pos(i);
            const PixelPos dst = flow.target_pos(i);
            const PixelPos pred = rotate_position(src, flow.width, flow.height, deg);
            if (std::abs(pred.row - dst.row) <= 1 && std::abs(pred.col - dst.col) <= 1) ++agree;
            const double u = src.col - cx;
            const double v = cy - src.row;
            const double er = (cy - (u * s + v * c)) - dst.row;
            const double ec = (cx + (u * c - v * s)) - dst.col;
            residual += er * er + ec * ec;
        }
        const double consensus = static_cast<double>(agree) / active;
        if (consensus > best.consensus ||
            (consensus == best.consensus && residual < best_residual)) {
            best = {static_cast<double>(deg), consensus};
            best_residual = residual;
        }
    }
    return best;
}

GlobalMotion classify_global_motion(const FlowField& flow, double min_consensus) {
    if (flow.active_count() == 0) return {};
    const TranslationEstimate t = estimate_translation(flow);
    const RotationEstimate r = estimate_rotation(flow);
    GlobalMotion gm;
    if (t.consensus >= exact_rotation_hits(flow, r.theta)) {
        gm = {t.shift, t.consensus};
    } else {
        gm = {Rotation{r.theta}, r.consensus};
    }
    if (gm.consensus < min_consensus) gm.kind = UnknownMotion{};
    return gm;
}

PixelPos predicted_target(const GlobalMotion& gm, PixelPos p, int width, int height) {
    if (const auto* t = std::get_if<Translation>(&gm.kind)) {
        return {wrap_index(p.row + t->dy, height), wrap_index(p.col + t->dx, width)};
    }
    if (const auto* r = std::get_if<Rotation>(&gm.kind)) {
        return rotate_position(p, width, height, r->theta);
    }
    throw std::invalid_argument("no global motion");
}

SegMask violation_mask(const FlowField& flow, const GlobalMotion& gm, double tol) {
    if (gm.is_unknown()) {
        throw std::invalid_argument("no global motion");
    }
    const bool wrap = std::holds_alternative<Translation>(gm.kind);
    SegMask mask(flow.width, flow.height);
    for (std::size_t i = 0; i < flow.size(); ++i) {
        if (!flow.active[i]) continue;
        const PixelPos pred = predicted_target(gm, flow.source_pos(i), flow.width, flow.height);
        const PixelPos got = flow.target_pos(i);
        const int dr = wrap ? toroidal_gap(pred.row, got.row, flow.height) : std::abs(pred.row - got.row);
        const int dc = wrap ? toroidal_gap(pred.col, got.col, flow.width) : std::abs(pred.col - got.col);
        mask.foreground[i] = static_cast<double>(std::max(dr, dc)) > tol;
    }
    return mask;
}

SegMask majority_smooth(const SegMask& mask, const std::vector<bool>& active) {
    if (active.size() != mask.foreground.size()) {
        throw DimensionError("majority_smooth: activity map size differs from mask");
    }
    SegMask out(mask.width, mask.height);
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            const auto i = static_cast<std::size_t>(r * mask.width + c);
            if (!active[i]) continue;
            int fg = 0;
            int votes = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr;
                    const int cc = c + dc;
                    if (rr < 0 || rr >= mask.height || cc < 0 || cc >= mask.width) continue;
                    const auto j = static_cast<std::size_t>(rr * mask.width + cc);
                    if (!active[j]) continue;
                    ++votes;
                    fg += mask.foreground[j] ? 1 : 0;
                }
            }
            out.foreground[i] = 2 * fg == votes ? mask.foreground[i] : 2 * fg > votes;
        }
    }
    return out;
}

SegMask segment_foreground(const FlowField& flow, const GlobalMotion& gm, double tol) {
    return majority_smooth(violation_mask(flow, gm, tol), flow.active);
}

double mask_iou(const SegMask& a, const SegMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw DimensionError("mask_iou: mask dimensions differ");
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.foreground.size(); ++i) {
        inter += (a.foreground[i] && b.foreground[i]) ? 1 : 0;
        uni += (a.foreground[i] || b.foreground[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SegMask mask_restrict(const SegMask& m, const std::vector<bool>& keep) {
    if (keep.size() != m.foreground.size()) {
        throw DimensionError("mask_restrict: size mismatch");
    }
    SegMask out = m;
    for (std::size_t i = 0; i < keep.size(); ++i) out.foreground[i] = m.foreground[i] && keep[i];
    return out;
}

void write_mask(const SegMask& m, const std::filesystem::path& path) {
    Image img(m.width, m.height);
    for (std::size_t i = 0; i < m.foreground.size(); ++i) {
        if (m.foreground[i]) img.set(i, 1.0);
    }
    pgm_write(img, path);
}

}  // namespace gatedflow
