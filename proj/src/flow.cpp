#include "gatedflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace gatedflow {

namespace {

int wrap_component(int d, int n) {
    int m = ((d % n) + n) % n;
    if (m >= n - n / 2) m -= n;  // [-n/2, n - n/2)
    return m;
}

struct Rgb {
    unsigned char r, g, b;
};

// HSV with value fixed at 1.
Rgb hue_sat(double hue_deg, double sat) {
    const double h = std::fmod(hue_deg, 360.0) / 60.0;
    const int sector = static_cast<int>(std::floor(h)) % 6;
    const double f = h - std::floor(h);
    const double p = 1.0 - sat;
    const double q = 1.0 - sat * f;
    const double t = 1.0 - sat * (1.0 - f);
    double r = 1.0, g = 1.0, b = 1.0;
    switch (sector) {
        case 0: r = 1; g = t; b = p; break;
        case 1: r = q; g = 1; b = p; break;
        case 2: r = p; g = 1; b = t; break;
        case 3: r = p; g = q; b = 1; break;
        case 4: r = t; g = p; b = 1; break;
        default: r = 1; g = p; b = q; break;
    }
    auto byte = [](double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    return {byte(r), byte(g), byte(b)};
}

}  // namespace

Displacement FlowField::displacement(std::size_t i) const noexcept {
    const PixelPos s = source_pos(i);
    const PixelPos t = target_pos(i);
    return {t.col - s.col, t.row - s.row};
}

Displacement FlowField::wrapped_displacement(std::size_t i) const noexcept {
    const Displacement d = displacement(i);
    return {wrap_component(d.dcol, width), wrap_component(d.drow, height)};
}

std::size_t FlowField::active_count() const noexcept {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

FlowField max_flow_field_given_hidden(const FactoredGRBM& m, const Image& x, const VectorXd& h) {
    m.validate();
    if (static_cast<Eigen::Index>(x.size()) != m.inputs() || h.size() != m.hidden()) {
        throw DimensionError("max_flow_field: dimension mismatch");
    }
    if (m.outputs() != m.inputs()) {
        throw DimensionError("max_flow_field: input and output frames differ in size");
    }
    const VectorXd fh = m.whf.transpose() * h;
    // Row i holds the output scores for the one-hot input mask e_i.
    const MatrixXd scores = (m.wxf * fh.asDiagonal()) * m.wyf.transpose();

    FlowField flow;
    flow.width = x.width();
    flow.height = x.height();
    flow.target.resize(x.size());
    flow.active.resize(x.size());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < scores.cols(); ++j) {
            if (scores(i, j) > scores(i, best)) best = j;
        }
        flow.target[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
        flow.active[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] >= 0.5;
    }
    return flow;
}

FlowField max_flow_field(const FactoredGRBM& m, const ImagePair& pair) {
    if (!pair.x.same_shape(pair.y)) {
        throw DimensionError("max_flow_field: frames differ in shape");
    }
    const VectorXd h = prob_h_cond(m, to_vector(pair.x), to_vector(pair.y)).probs;
    return max_flow_field_given_hidden(m, pair.x, h);
}

Image analogy_reconstruct(const FactoredGRBM& m, const ImagePair& exemplar, const Image& novel_x) {
    if (!exemplar.x.same_shape(exemplar.y) || !exemplar.x.same_shape(novel_x)) {
        throw DimensionError("analogy_reconstruct: image shapes differ");
    }
    const VectorXd hp = prob_h_cond(m, to_vector(exemplar.x), to_vector(exemplar.y)).probs;
    const VectorXd h = (hp.array() > 0.5).cast<double>().matrix();
    const VectorXd y = prob_y_cond(m, to_vector(novel_x), h);
    Image out(novel_x.width(), novel_x.height());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        if (y[j] > 0.5) out.set(static_cast<std::size_t>(j), 1.0);
    }
    return out;
}

void render_flow(const FlowField& flow, const std::filesystem::path& path, FlowRender mode) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path, "cannot open for writing");
    }
    if (mode == FlowRender::ArrowsText) {
        out << "# flow " << flow.width << ' ' << flow.height << '\n';
        for (std::size_t i = 0; i < flow.size(); ++i) {
            if (!flow.active[i]) continue;
            const PixelPos p = flow.source_pos(i);
            const Displacement d = flow.displacement(i);
            out << p.row << ' ' << p.col << ' ' << d.drow << ' ' << d.dcol << '\n';
        }
    } else {
        double max_mag = 0.0;
        for (std::size_t i = 0; i < flow.size(); ++i) {
            if (!flow.active[i]) continue;
            const Displacement d = flow.wrapped_displacement(i);
            max_mag = std::max(max_mag, std::hypot(d.dcol, d.drow));
        }
        out << "P6\n" << flow.width << ' ' << flow.height << "\n255\n";
        for (std::size_t i = 0; i < flow.size(); ++i) {
            Rgb c{0, 0, 0};
            if (flow.active[i]) {
                const Displacement d = flow.wrapped_displacement(i);
                // Angle with rows flipped so up is +90 degrees.
                double hue = std::atan2(-d.drow, d.dcol) * 180.0 / std::numbers::pi;
                if (hue < 0.0) hue += 360.0;
                const double sat = max_mag > 0.0 ? std::hypot(d.dcol, d.drow) / max_mag : 0.0;
                c = hue_sat(hue, sat);
            }
            out.put(static_cast<char>(c.r)).put(static_cast<char>(c.g)).put(static_cast<char>(c.b));
        }
    }
    if (!out) {
        throw IoError(path, "write failed");
    }
}

FlowField read_flow_arrows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(path, "cannot open for reading");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("header", "flow file is empty");
    }
    std::istringstream hdr(line);
    std::string hash, tag;
    FlowField flow;
    if (!(hdr >> hash >> tag >> flow.width >> flow.height) || hash != "#" || tag != "flow" ||
        flow.width <= 0 || flow.height <= 0) {
        throw ParseError("header", "bad flow header: '" + line + "'");
    }
    const auto n = static_cast<std::size_t>(flow.width) * static_cast<std::size_t>(flow.height);
    flow.target.resize(n);
    flow.active.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) flow.target[i] = i;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        int row = 0, col = 0, drow = 0, dcol = 0;
        if (!(ls >> row >> col >> drow >> dcol)) {
            throw ParseError("arrow", "bad flow line: '" + line + "'");
        }
        const int tr = row + drow;
        const int tc = col + dcol;
        if (row < 0 || row >= flow.height || col < 0 || col >= flow.width || tr < 0 ||
            tr >= flow.height || tc < 0 || tc >= flow.width) {
            throw ParseError("arrow", "flow arrow leaves the grid: '" + line + "'");
        }
        const auto i = static_cast<std::size_t>(row) * static_cast<std::size_t>(flow.width) +
                       static_cast<std::size_t>(col);
        flow.target[i] = static_cast<std::size_t>(tr) * static_cast<std::size_t>(flow.width) +
                         static_cast<std::size_t>(tc);
        flow.active[i] = true;
    }
    return flow;
}

}  // namespace gatedflow
