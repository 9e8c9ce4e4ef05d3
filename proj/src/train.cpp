#include "gatedflow/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <thread>

#include "gatedflow/random.hpp"

namespace gatedflow {

namespace {

// Items per statistics chunk. Partial sums are always formed per chunk and
// reduced in chunk order, so the thread count never changes the result.
constexpr Eigen::Index kChunkRows = 16;

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kTrainStream = 0x74726169;

// Per-chunk buffers, reused across steps so large temporaries are not
// reallocated for every minibatch.
struct ChunkWork {
    MatrixXd fx, fy, fxy, hpos, hsample, fhs, fxs, yrec, fyr, fxr, hneg, fhp, fhn, a, b;
    FactoredGRBM grad;  // sums over the chunk, not means
    double sq_err = 0.0;
    VectorXd hidden_sum;
};

void sigmoid_inplace(MatrixXd& a) {
    a = a.unaryExpr([](double v) { return sigmoid(v); });
}

void chunk_stats(const FactoredGRBM& m, const Eigen::Ref<const MatrixXd>& x,
                 const Eigen::Ref<const MatrixXd>& y, const Eigen::Ref<const MatrixXd>& u,
                 ChunkWork& w) {
    w.fx.noalias() = x * m.wxf;
    w.fy.noalias() = y * m.wyf;

    // Positive phase.
    w.fxy = w.fx.cwiseProduct(w.fy);
    w.hpos.noalias() = w.fxy * m.whf.transpose();
    w.hpos.rowwise() += m.hbias.transpose();
    sigmoid_inplace(w.hpos);
    w.hsample = (u.array() < w.hpos.array()).cast<double>().matrix();

    // Mean-field reconstruction and negative phase.
    w.fhs.noalias() = w.hsample * m.whf;
    w.fxs = w.fx.cwiseProduct(w.fhs);
    w.yrec.noalias() = w.fxs * m.wyf.transpose();
    w.yrec.rowwise() += m.ybias.transpose();
    sigmoid_inplace(w.yrec);
    w.fyr.noalias() = w.yrec * m.wyf;
    w.fxr = w.fx.cwiseProduct(w.fyr);
    w.hneg.noalias() = w.fxr * m.whf.transpose();
    w.hneg.rowwise() += m.hbias.transpose();
    sigmoid_inplace(w.hneg);

    w.fhp.noalias() = w.hpos * m.whf;
    w.fhn.noalias() = w.hneg * m.whf;

    w.a = w.fy.cwiseProduct(w.fhp) - w.fyr.cwiseProduct(w.fhn);
    w.grad.wxf.noalias() = x.transpose() * w.a;
    w.a = w.fx.cwiseProduct(w.fhp);
    w.b = w.fx.cwiseProduct(w.fhn);
    w.grad.wyf.noalias() = y.transpose() * w.a;
    w.grad.wyf.noalias() -= w.yrec.transpose() * w.b;
    w.grad.whf.noalias() = w.hpos.transpose() * w.fxy;
    w.grad.whf.noalias() -= w.hneg.transpose() * w.fxr;
    w.grad.ybias = (y - w.yrec).colwise().sum().transpose();
    w.grad.hbias = (w.hpos - w.hneg).colwise().sum().transpose();
    w.sq_err = (y - w.yrec).squaredNorm();
    w.hidden_sum = w.hpos.colwise().sum().transpose();
}

void check_finite(const FactoredGRBM& g) {
    auto check = [](const auto& block, const char* name) {
        if (!block.allFinite()) {
            throw TrainingError(name, std::string("non-finite gradient in parameter block ") + name);
        }
    };
    check(g.wxf, "wxf");
    check(g.wyf, "wyf");
    check(g.whf, "whf");
    check(g.ybias, "ybias");
    check(g.hbias, "hbias");
}

MatrixXd stack_frames(std::span<const ImagePair> batch, bool outputs) {
    const Image& first = outputs ? batch.front().y : batch.front().x;
    MatrixXd out(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(first.size()));
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const Image& img = outputs ? batch[n].y : batch[n].x;
        if (img.size() != first.size()) {
            throw DimensionError("batch frames differ in size");
        }
        for (std::size_t i = 0; i < img.size(); ++i) {
            out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) = img[i];
        }
    }
    return out;
}

void draw_uniforms(Rng& rng, Eigen::Index rows, Eigen::Index cols, MatrixXd& u) {
    u.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) u(r, c) = uniform01(rng);
}

}  // namespace

void TrainConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    need(factors > 0, "factors must be positive");
    need(hidden > 0, "hidden must be positive");
    need(epochs >= 0, "epochs must be non-negative");
    need(batch_size > 0, "batch_size must be positive");
    need(learning_rate >= 0.0, "learning_rate must be non-negative");
    need(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0,1)");
    need(target_hidden >= 0.0 && target_hidden <= 1.0, "target_hidden must lie in [0,1]");
    need(effective_sparsity_rate() >= 0.0, "sparsity_rate must be non-negative");
    need(weight_init_std >= 0.0, "weight_init_std must be non-negative");
    need(cd_steps == 1, "only cd_steps = 1 is supported");
    need(threads >= 1, "threads must be at least 1");
}

FactoredGRBM init_model(Eigen::Index inputs, Eigen::Index outputs, const TrainConfig& cfg) {
    cfg.validate();
    if (inputs <= 0 || outputs <= 0) {
        throw std::invalid_argument("model dimensions must be positive");
    }
    FactoredGRBM m = FactoredGRBM::zeros(inputs, outputs, cfg.hidden, cfg.factors);
    if (cfg.weight_init_std == 0.0) return m;
    Rng rng = make_rng(cfg.seed, kInitStream);
    std::normal_distribution<double> normal(0.0, cfg.weight_init_std);
    for (MatrixXd* block : {&m.wxf, &m.wyf, &m.whf}) {
        for (Eigen::Index r = 0; r < block->rows(); ++r)
            for (Eigen::Index c = 0; c < block->cols(); ++c) (*block)(r, c) = normal(rng);
    }
    return m;
}

namespace {

struct Cd1Workspace {
    std::vector<ChunkWork> chunks;
    BatchGradient out;
    MatrixXd uniforms;
};

void cd1_gradient_into(const FactoredGRBM& m, const MatrixXd& x, const MatrixXd& y,
                       const MatrixXd& uniforms, int threads, Cd1Workspace& ws) {
    m.validate();
    const Eigen::Index n = x.rows();
    if (n == 0) {
        throw std::invalid_argument("empty batch");
    }
    if (x.cols() != m.inputs() || y.cols() != m.outputs() || y.rows() != n ||
        uniforms.rows() != n || uniforms.cols() != m.hidden()) {
        throw DimensionError("cd1_gradient: batch shape does not match model");
    }

    const Eigen::Index chunks = (n + kChunkRows - 1) / kChunkRows;
    if (ws.chunks.size() < static_cast<std::size_t>(chunks)) {
        ws.chunks.resize(static_cast<std::size_t>(chunks));
    }
    auto run = [&](Eigen::Index c) {
        const Eigen::Index begin = c * kChunkRows;
        const Eigen::Index rows = std::min(kChunkRows, n - begin);
        chunk_stats(m, x.middleRows(begin, rows), y.middleRows(begin, rows),
                    uniforms.middleRows(begin, rows), ws.chunks[static_cast<std::size_t>(c)]);
    };
    const int workers = static_cast<int>(std::min<Eigen::Index>(std::max(threads, 1), chunks));
    if (workers <= 1) {
        for (Eigen::Index c = 0; c < chunks; ++c) run(c);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                for (Eigen::Index c = t; c < chunks; c += workers) run(c);
            });
        }
    }

    BatchGradient& out = ws.out;
    const ChunkWork& first = ws.chunks.front();
    out.grad = first.grad;
    double sq_err = first.sq_err;
    out.mean_hidden = first.hidden_sum;
    for (Eigen::Index c = 1; c < chunks; ++c) {
        const ChunkWork& p = ws.chunks[static_cast<std::size_t>(c)];
        out.grad.add_scaled(p.grad, 1.0);
        sq_err += p.sq_err;
        out.mean_hidden += p.hidden_sum;
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.grad.scale(inv);
    out.mean_hidden *= inv;
    out.mse = sq_err * inv / static_cast<double>(m.outputs());
}

double apply_step(FactoredGRBM& m, FactoredGRBM& velocity, const MatrixXd& x, const MatrixXd& y,
                  const TrainConfig& cfg, Rng& rng, Cd1Workspace& ws, VectorXd* mean_hidden) {
    draw_uniforms(rng, x.rows(), m.hidden(), ws.uniforms);
    cd1_gradient_into(m, x, y, ws.uniforms, cfg.threads, ws);
    const BatchGradient& g = ws.out;
    check_finite(g.grad);

    const double mom = cfg.momentum;
    const double lr = cfg.learning_rate;
    velocity.wxf = mom * velocity.wxf + lr * g.grad.wxf;
    velocity.wyf = mom * velocity.wyf + lr * g.grad.wyf;
    velocity.whf = mom * velocity.whf + lr * g.grad.whf;
    velocity.ybias = mom * velocity.ybias + lr * g.grad.ybias;
    velocity.hbias = mom * velocity.hbias + lr * g.grad.hbias;
    m.add_scaled(velocity, 1.0);

    const double sr = cfg.effective_sparsity_rate();
    if (sr != 0.0) {
        m.hbias.array() += sr * (cfg.target_hidden - g.mean_hidden.array());
    }
    if (!m.all_finite()) {
        throw TrainingError("model", "parameters became non-finite after update");
    }
    if (mean_hidden) *mean_hidden = g.mean_hidden;
    return g.mse;
}

}  // namespace

BatchGradient cd1_gradient(const FactoredGRBM& m, const MatrixXd& x, const MatrixXd& y,
                           const MatrixXd& uniforms, int threads) {
    Cd1Workspace ws;
    cd1_gradient_into(m, x, y, uniforms, threads, ws);
    return std::move(ws.out);
}

double cd1_step(FactoredGRBM& m, FactoredGRBM& velocity, const MatrixXd& x, const MatrixXd& y,
                const TrainConfig& cfg, Rng& rng, VectorXd* mean_hidden) {
    Cd1Workspace ws;
    return apply_step(m, velocity, x, y, cfg, rng, ws, mean_hidden);
}

double cd1_step(FactoredGRBM& m, FactoredGRBM& velocity, std::span<const ImagePair> batch,
                const TrainConfig& cfg, Rng& rng) {
    if (batch.empty()) {
        throw std::invalid_argument("empty batch");
    }
    return cd1_step(m, velocity, stack_frames(batch, false), stack_frames(batch, true), cfg, rng);
}

TrainReport train(std::span<const ImagePair> dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    const MatrixXd xs = stack_frames(dataset, false);
    const MatrixXd ys = stack_frames(dataset, true);

    TrainReport report;
    report.model = init_model(xs.cols(), ys.cols(), cfg);
    FactoredGRBM velocity = FactoredGRBM::zeros(xs.cols(), ys.cols(), cfg.hidden, cfg.factors);
    Rng rng = make_rng(cfg.seed, kTrainStream);

    const auto n = static_cast<Eigen::Index>(dataset.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    Cd1Workspace ws;
    MatrixXd bx;
    MatrixXd by;
    VectorXd mh;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // Fisher-Yates with the library's own index sampler.
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[uniform_index(rng, i + 1)]);
        }
        double sq_err = 0.0;
        double hidden = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index rows = std::min<Eigen::Index>(cfg.batch_size, n - start);
            bx.resize(rows, xs.cols());
            by.resize(rows, ys.cols());
            for (Eigen::Index r = 0; r < rows; ++r) {
                bx.row(r) = xs.row(order[static_cast<std::size_t>(start + r)]);
                by.row(r) = ys.row(order[static_cast<std::size_t>(start + r)]);
            }
            const double mse = apply_step(report.model, velocity, bx, by, cfg, rng, ws, &mh);
            sq_err += mse * static_cast<double>(rows);
            hidden += mh.sum() / static_cast<double>(cfg.hidden) * static_cast<double>(rows);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.mse = sq_err / static_cast<double>(n);
        stats.mean_hidden = hidden / static_cast<double>(n);
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.history.push_back(stats);
        if (on_epoch) on_epoch(stats, report.model);
    }
    return report;
}

double recon_error(const FactoredGRBM& m, const ImagePair& pair) {
    if (!pair.x.same_shape(pair.y)) {
        throw DimensionError("recon_error: frames differ in shape");
    }
    const VectorXd x = to_vector(pair.x);
    const VectorXd y = to_vector(pair.y);
    const VectorXd h = prob_h_cond(m, x, y).probs;
    const VectorXd yhat = prob_y_cond(m, x, h);
    return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace gatedflow
