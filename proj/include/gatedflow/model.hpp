#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gatedflow/image.hpp"

namespace gatedflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Logistic sigmoid, branch form so neither exp() overflows.
inline double sigmoid(double a) noexcept {
    if (a >= 0.0) {
        return 1.0 / (1.0 + std::exp(-a));
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

VectorXd sigmoid(const VectorXd& a);

/// Visible units of an image, in row-major pixel order.
VectorXd to_vector(const Image& img);

/// Image from a vector of probabilities in [0,1].
Image to_image(const VectorXd& v, int width, int height);

/// Ordinary binary RBM: W is (visible x hidden).
struct BaselineRBM {
    MatrixXd w;
    VectorXd b;  // visible bias
    VectorXd c;  // hidden bias
};

double baseline_energy(const BaselineRBM& m, const VectorXd& x, const VectorXd& h);
VectorXd baseline_cond_h(const BaselineRBM& m, const VectorXd& x);
VectorXd baseline_cond_v(const BaselineRBM& m, const VectorXd& h);

/// Factored three-way (gated) RBM modelling y conditioned on x.
///
/// The interaction tensor is W_ijk = sum_f wxf(i,f) * wyf(j,f) * whf(k,f),
/// and the conditional energy is
///
///   E(y, h; x) = -sum_f (x.wxf_f)(y.wyf_f)(h.whf_f) - ybias.y - hbias.h
///
/// There is no bias on x: the model is conditional on it.
struct FactoredGRBM {
    MatrixXd wxf;  // input pixels  I x F
    MatrixXd wyf;  // output pixels J x F
    MatrixXd whf;  // hidden units  K x F
    VectorXd ybias;
    VectorXd hbias;

    /// All-zero parameters of the given shape.
    static FactoredGRBM zeros(Eigen::Index inputs, Eigen::Index outputs, Eigen::Index hidden,
                              Eigen::Index factors);

    Eigen::Index inputs() const noexcept { return wxf.rows(); }
    Eigen::Index outputs() const noexcept { return wyf.rows(); }
    Eigen::Index hidden() const noexcept { return whf.rows(); }
    Eigen::Index factors() const noexcept { return wxf.cols(); }

    /// Throws DimensionError when the blocks disagree in shape.
    void validate() const;
    bool all_finite() const;

    /// Elementwise a += s * b across every block.
    void add_scaled(const FactoredGRBM& b, double s);
    void scale(double s);

    friend bool operator==(const FactoredGRBM&, const FactoredGRBM&);
};

struct HiddenState {
    VectorXd probs;
    VectorXd sample;  // empty unless sampled

    bool has_sample() const noexcept { return sample.size() != 0; }
};

/// Dense I x J x K interaction tensor; small models only. Element (i,j,k)
/// lives at index (i * J + j) * K + k.
struct Tensor3 {
    Eigen::Index ni = 0;
    Eigen::Index nj = 0;
    Eigen::Index nk = 0;
    std::vector<double> data;

    double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
        return data[static_cast<std::size_t>((i * nj + j) * nk + k)];
    }
};

Tensor3 full_tensor(const FactoredGRBM& m);

/// Energy from an explicit interaction tensor plus the model's biases.
double tensor_energy(const Tensor3& w, const FactoredGRBM& m, const VectorXd& x,
                     const VectorXd& y, const VectorXd& h);

double cond_energy(const FactoredGRBM& m, const VectorXd& x, const VectorXd& y,
                   const VectorXd& h);

/// P(h_k = 1 | y; x).
HiddenState prob_h_cond(const FactoredGRBM& m, const VectorXd& x, const VectorXd& y);

/// P(y_j = 1 | h; x). `h` may hold probabilities as well as binary states.
VectorXd prob_y_cond(const FactoredGRBM& m, const VectorXd& x, const VectorXd& h);

/// Tied-weight covariance case: the image is paired with itself through wxf,
/// E(x, h) = -sum_f (x.wxf_f)^2 (h.whf_f) - ybias.x - hbias.h. The ybias term
/// is dropped when its length differs from x, and never affects P(h | x).
double spatial_energy(const FactoredGRBM& m, const VectorXd& x, const VectorXd& h);
HiddenState spatial_prob_h(const FactoredGRBM& m, const VectorXd& x);

/// Copy of `m` with wyf replaced by wxf.
FactoredGRBM tie_weights(const FactoredGRBM& m);

/// -dE/dtheta at (x, y, h) for every parameter block. Because E is linear in
/// h, passing hidden probabilities gives the expectation over h.
FactoredGRBM neg_energy_grad(const FactoredGRBM& m, const VectorXd& x, const VectorXd& y,
                             const VectorXd& h);

/// GRBM1 file: "GRBM1\n", "I J K F\n", then little-endian float64 blocks
/// wxf, wyf, whf, ybias, hbias, each row-major.
void save_model(const FactoredGRBM& m, const std::filesystem::path& path);
FactoredGRBM load_model(const std::filesystem::path& path);

std::vector<unsigned char> encode_model(const FactoredGRBM& m);
FactoredGRBM decode_model(std::span<const unsigned char> bytes);

}  // namespace gatedflow
