#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gatedflow/datagen.hpp"
#include "gatedflow/model.hpp"

namespace gatedflow {

struct TrainConfig {
    int factors = 200;
    int hidden = 100;
    int epochs = 500;
    int batch_size = 100;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double target_hidden = 0.02;
    std::optional<double> sparsity_rate;  // unset: 0.1 * learning_rate
    double weight_init_std = 0.01;
    std::uint64_t seed = 0;
    int cd_steps = 1;
    /// Worker threads for per-batch statistics. Results do not depend on it.
    int threads = 1;

    double effective_sparsity_rate() const noexcept {
        return sparsity_rate.value_or(0.1 * learning_rate);
    }
    /// Throws std::invalid_argument naming the first bad field.
    void validate() const;
};

/// Raised when a training step produces non-finite values.
class TrainingError : public std::runtime_error {
public:
    TrainingError(std::string block, const std::string& what)
        : std::runtime_error(what), block_(std::move(block)) {}
    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double mse = 0.0;
    double mean_hidden = 0.0;  // mean positive-phase hidden probability
    double seconds = 0.0;
};

struct TrainReport {
    FactoredGRBM model;
    std::vector<EpochStats> history;
};

/// Batch statistics of one CD-1 half cycle, before any parameter update.
struct BatchGradient {
    FactoredGRBM grad;     // <-dE/dtheta>_data - <-dE/dtheta>_recon, batch mean
    double mse = 0.0;      // mean over items and output pixels of (y - y_hat)^2
    VectorXd mean_hidden;  // per-unit batch mean of the positive hidden probabilities
};

FactoredGRBM init_model(Eigen::Index inputs, Eigen::Index outputs, const TrainConfig& cfg);

/// Rows of `x`/`y` are batch items. `uniforms` (items x hidden) drives the
/// Bernoulli draw of the hidden sample: h = 1 iff u < p.
BatchGradient cd1_gradient(const FactoredGRBM& m, const MatrixXd& x, const MatrixXd& y,
                           const MatrixXd& uniforms, int threads = 1);

/// One CD-1 update in place. Returns the batch reconstruction error.
double cd1_step(FactoredGRBM& m, FactoredGRBM& velocity, std::span<const ImagePair> batch,
                const TrainConfig& cfg, Rng& rng);

double cd1_step(FactoredGRBM& m, FactoredGRBM& velocity, const MatrixXd& x, const MatrixXd& y,
                const TrainConfig& cfg, Rng& rng, VectorXd* mean_hidden = nullptr);

using EpochCallback = std::function<void(const EpochStats&, const FactoredGRBM&)>;

TrainReport train(std::span<const ImagePair> dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Deterministic reconstruction error: y_hat = P(y | h+; x) with h+ the
/// positive hidden probabilities.
double recon_error(const FactoredGRBM& m, const ImagePair& pair);

}  // namespace gatedflow
