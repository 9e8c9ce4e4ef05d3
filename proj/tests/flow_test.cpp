#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "gatedflow/flow.hpp"
#include "gatedflow/train.hpp"
#include "test_util.hpp"

using namespace gatedflow;

namespace {

// One factor per input pixel routed to a chosen output pixel, gated by a
// single always-on hidden unit. The max-flow of input i is then route[i].
FactoredGRBM routing_model(const std::vector<std::size_t>& route) {
    const auto n = static_cast<Eigen::Index>(route.size());
    FactoredGRBM m = FactoredGRBM::zeros(n, n, 1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        m.wxf(i, i) = 1.0;
        m.wyf(static_cast<Eigen::Index>(route[static_cast<std::size_t>(i)]), i) = 1.0;
        m.whf(0, i) = 1.0;
    }
    return m;
}

std::vector<std::size_t> shift_route(int side, int dx, int dy) {
    std::vector<std::size_t> r(static_cast<std::size_t>(side * side));
    for (int row = 0; row < side; ++row)
        for (int col = 0; col < side; ++col)
            r[static_cast<std::size_t>(row * side + col)] =
                static_cast<std::size_t>(((row + dy + side) % side) * side + (col + dx + side) % side);
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const FactoredGRBM& identity_model() {
    static const FactoredGRBM m = [] {
        std::vector<ImagePair> pairs;
        for (std::uint64_t s = 0; s < 1000; ++s) {
            const Image x = random_dots(8, 8, 0.1, s);
            pairs.push_back({x, x, Identity{}});
        }
        TrainConfig cfg;
        cfg.factors = 64;
        cfg.hidden = 32;
        cfg.epochs = 40;
        cfg.batch_size = 10;
        cfg.seed = 3;
        return train(pairs, cfg).model;
    }();
    return m;
}

}  // namespace

TEST(MaxFlow, FollowsConstructedRouting) {
    const auto route = shift_route(6, 1, -1);
    const FactoredGRBM m = routing_model(route);
    const Image x = random_dots(6, 6, 0.3, 1);
    const FlowField f = max_flow_field_given_hidden(m, x, VectorXd::Ones(1));
    ASSERT_EQ(f.size(), 36u);
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_EQ(f.target[i], route[i]);
        EXPECT_EQ(f.active[i], x[i] >= 0.5);
        EXPECT_EQ(f.wrapped_displacement(i), (Displacement{1, -1}));
    }
}

TEST(MaxFlow, TiesGoToSmallestOutput) {
    const FactoredGRBM zero = FactoredGRBM::zeros(9, 9, 2, 3);
    const FlowField f = max_flow_field_given_hidden(zero, Image(3, 3), VectorXd::Ones(2));
    for (std::size_t t : f.target) EXPECT_EQ(t, 0u);
    EXPECT_EQ(f.active_count(), 0u);
}

TEST(MaxFlow, PositiveScalingKeepsTargets) {
    std::mt19937_64 rng(7);
    const FactoredGRBM m = test::random_model(25, 25, 6, 10, rng);
    const Image x = random_dots(5, 5, 0.4, 2);
    const VectorXd h = prob_h_cond(m, to_vector(x), to_vector(random_dots(5, 5, 0.4, 3))).probs;
    const FlowField base = max_flow_field_given_hidden(m, x, h);
    for (double c : {0.01, 3.0, 250.0}) {
        FactoredGRBM s = m;
        s.wxf *= c;
        s.wyf *= c;
        s.whf *= c;
        EXPECT_EQ(max_flow_field_given_hidden(s, x, h).target, base.target) << c;
    }
}

TEST(MaxFlow, DisplacementConventions) {
    FlowField f;
    f.width = 5;
    f.height = 4;
    f.target = {19};  // only pixel 0 matters here
    f.target.resize(20, 0);
    f.active.assign(20, false);
    EXPECT_EQ(f.displacement(0), (Displacement{4, 3}));
    EXPECT_EQ(f.wrapped_displacement(0), (Displacement{-1, -1}));
}

TEST(MaxFlow, DimensionMismatch) {
    const FactoredGRBM m = FactoredGRBM::zeros(9, 9, 2, 3);
    EXPECT_THROW(max_flow_field(m, {Image(4, 4), Image(4, 4), Identity{}}), DimensionError);
    EXPECT_THROW(max_flow_field(m, {Image(3, 3), Image(9, 1), Identity{}}), DimensionError);
}

TEST(MaxFlow, IdentityModelPointsHome) {
    std::size_t still = 0, active = 0;
    for (std::uint64_t s = 5000; s < 5050; ++s) {
        const Image x = random_dots(8, 8, 0.1, s);
        const FlowField f = max_flow_field(identity_model(), {x, x, Identity{}});
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!f.active[i]) continue;
            ++active;
            if (f.displacement(i) == Displacement{}) ++still;
        }
    }
    ASSERT_GT(active, 0u);
    EXPECT_GE(static_cast<double>(still) / static_cast<double>(active), 0.9);
}

TEST(Analogy, IdentityExemplarCopiesNovelImage) {
    double agree = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Image ex = random_dots(8, 8, 0.1, 7000 + s);
        const Image nx = random_dots(8, 8, 0.1, 8000 + s);
        const Image out = analogy_reconstruct(identity_model(), {ex, ex, Identity{}}, nx);
        std::size_t same = 0;
        for (std::size_t i = 0; i < out.size(); ++i) same += (out[i] >= 0.5) == (nx[i] >= 0.5);
        agree += static_cast<double>(same) / 64.0;
    }
    EXPECT_GE(agree / 20.0, 0.9);
}

TEST(Analogy, ZeroNovelImageWithZeroBiasIsBlank) {
    std::mt19937_64 rng(8);
    FactoredGRBM m = test::random_model(16, 16, 4, 6, rng);
    m.ybias.setZero();
    const Image ex = random_dots(4, 4, 0.5, 1);
    EXPECT_EQ(analogy_reconstruct(m, {ex, ex, Identity{}}, Image(4, 4)), Image(4, 4));
}

TEST(Analogy, ConstructedShiftModel) {
    // A routing model with ybias pushing off-pixels down reproduces the shift.
    FactoredGRBM m = routing_model(shift_route(6, 0, 1));
    m.ybias.setConstant(-0.5);
    const Image nx = random_dots(6, 6, 0.3, 4);
    const Image ex = random_dots(6, 6, 0.3, 5);
    EXPECT_EQ(analogy_reconstruct(m, {ex, translate_wrap(ex, 0, 1), Identity{}}, nx), translate_wrap(nx, 0, 1));
}

TEST(RenderFlow, UniformShiftLines) {
    const FactoredGRBM m = routing_model(shift_route(5, 1, 0));
    const Image x = random_dots(5, 5, 0.4, 3);
    const FlowField f = max_flow_field_given_hidden(m, x, VectorXd::Ones(1));
    test::TempDir dir;
    render_flow(f, dir / "f.txt", FlowRender::ArrowsText);
    std::istringstream in(slurp(dir / "f.txt"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# flow 5 5");
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        const bool wraps = line.size() >= 6 && line.substr(line.size() - 4) == "0 -4";
        EXPECT_TRUE(line.substr(line.size() - 3) == "0 1" || wraps) << line;
    }
    EXPECT_EQ(lines, x.count_on());
}

TEST(RenderFlow, EmptyActiveSetIsHeaderOnly) {
    const FlowField f = max_flow_field_given_hidden(FactoredGRBM::zeros(12, 12, 1, 1), Image(4, 3),
                                                    VectorXd::Ones(1));
    test::TempDir dir;
    render_flow(f, dir / "e.txt", FlowRender::ArrowsText);
    EXPECT_EQ(slurp(dir / "e.txt"), "# flow 4 3\n");
}

TEST(RenderFlow, ArrowsRoundTrip) {
    std::mt19937_64 rng(9);
    test::TempDir dir;
    for (int trial = 0; trial < 20; ++trial) {
        FlowField f;
        f.width = 7;
        f.height = 6;
        f.target.resize(42);
        f.active.resize(42);
        for (std::size_t i = 0; i < 42; ++i) {
            f.target[i] = rng() % 42;
            f.active[i] = (rng() & 1u) != 0;
        }
        render_flow(f, dir / "r.txt", FlowRender::ArrowsText);
        const FlowField back = read_flow_arrows(dir / "r.txt");
        EXPECT_EQ(back.active, f.active);
        for (std::size_t i = 0; i < 42; ++i) {
            if (f.active[i]) EXPECT_EQ(back.displacement(i), f.displacement(i));
        }
    }
}

TEST(RenderFlow, ParseErrors) {
    test::TempDir dir;
    std::ofstream(dir / "bad.txt") << "# flow 3 3\n0 0 5 5\n";
    EXPECT_THROW(read_flow_arrows(dir / "bad.txt"), ParseError);
    std::ofstream(dir / "hdr.txt") << "flow 3\n";
    EXPECT_THROW(read_flow_arrows(dir / "hdr.txt"), ParseError);
    EXPECT_THROW(read_flow_arrows(dir / "missing.txt"), IoError);
}

TEST(RenderFlow, ColorPpmLayout) {
    const FactoredGRBM m = routing_model(shift_route(4, 1, 0));
    Image x(4, 4);
    x.set(1, 1, 1.0);
    const FlowField f = max_flow_field_given_hidden(m, x, VectorXd::Ones(1));
    test::TempDir dir;
    render_flow(f, dir / "f.ppm", FlowRender::ColorPpm);
    const std::string s = slurp(dir / "f.ppm");
    const std::string header = "P6\n4 4\n255\n";
    ASSERT_EQ(s.size(), header.size() + 48);
    EXPECT_EQ(s.substr(0, header.size()), header);
    // Rightward at full magnitude is pure red; everything else is black.
    const std::size_t px = header.size() + 3 * 5;
    EXPECT_EQ(static_cast<unsigned char>(s[px]), 255);
    EXPECT_EQ(static_cast<unsigned char>(s[px + 1]), 0);
    EXPECT_EQ(static_cast<unsigned char>(s[px + 2]), 0);
    EXPECT_EQ(static_cast<unsigned char>(s[header.size()]), 0);
}
