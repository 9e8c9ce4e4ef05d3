#include "gatedflow/model.hpp"

#include <string>

namespace gatedflow {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace

VectorXd sigmoid(const VectorXd& a) {
    return a.unaryExpr([](double v) { return sigmoid(v); });
}

VectorXd to_vector(const Image& img) {
    const auto px = img.pixels();
    VectorXd v(static_cast<Eigen::Index>(px.size()));
    for (std::size_t i = 0; i < px.size(); ++i) v[static_cast<Eigen::Index>(i)] = px[i];
    return v;
}

Image to_image(const VectorXd& v, int width, int height) {
    require(v.size() == static_cast<Eigen::Index>(width) * height, "vector length != width x height");
    return Image(width, height, std::vector<double>(v.data(), v.data() + v.size()));
}

// ---- baseline RBM ---------------------------------------------------------

double baseline_energy(const BaselineRBM& m, const VectorXd& x, const VectorXd& h) {
    require(x.size() == m.w.rows() && h.size() == m.w.cols() && m.b.size() == m.w.rows() &&
                m.c.size() == m.w.cols(),
            "baseline_energy: dimension mismatch");
    return -x.dot(m.w * h) - m.b.dot(x) - m.c.dot(h);
}

VectorXd baseline_cond_h(const BaselineRBM& m, const VectorXd& x) {
    require(x.size() == m.w.rows() && m.c.size() == m.w.cols(), "baseline_cond_h: dimension mismatch");
    return sigmoid(m.c + m.w.transpose() * x);
}

VectorXd baseline_cond_v(const BaselineRBM& m, const VectorXd& h) {
    require(h.size() == m.w.cols() && m.b.size() == m.w.rows(), "baseline_cond_v: dimension mismatch");
    return sigmoid(m.b + m.w * h);
}

// ---- factored model -------------------------------------------------------

FactoredGRBM FactoredGRBM::zeros(Eigen::Index inputs, Eigen::Index outputs, Eigen::Index hidden,
                                 Eigen::Index factors) {
    FactoredGRBM m;
    m.wxf = MatrixXd::Zero(inputs, factors);
    m.wyf = MatrixXd::Zero(outputs, factors);
    m.whf = MatrixXd::Zero(hidden, factors);
    m.ybias = VectorXd::Zero(outputs);
    m.hbias = VectorXd::Zero(hidden);
    return m;
}

void FactoredGRBM::validate() const {
    require(wyf.cols() == wxf.cols() && whf.cols() == wxf.cols(), "factor dimension differs across blocks");
    require(ybias.size() == wyf.rows(), "ybias length != output units");
    require(hbias.size() == whf.rows(), "hbias length != hidden units");
}

bool FactoredGRBM::all_finite() const {
    return wxf.allFinite() && wyf.allFinite() && whf.allFinite() && ybias.allFinite() &&
           hbias.allFinite();
}

void FactoredGRBM::add_scaled(const FactoredGRBM& b, double s) {
    wxf += s * b.wxf;
    wyf += s * b.wyf;
    whf += s * b.whf;
    ybias += s * b.ybias;
    hbias += s * b.hbias;
}

void FactoredGRBM::scale(double s) {
    wxf *= s;
    wyf *= s;
    whf *= s;
    ybias *= s;
    hbias *= s;
}

bool operator==(const FactoredGRBM& a, const FactoredGRBM& b) {
    auto same = [](const auto& p, const auto& q) {
        return p.rows() == q.rows() && p.cols() == q.cols() && p == q;
    };
    return same(a.wxf, b.wxf) && same(a.wyf, b.wyf) && same(a.whf, b.whf) &&
           same(a.ybias, b.ybias) && same(a.hbias, b.hbias);
}

Tensor3 full_tensor(const FactoredGRBM& m) {
    m.validate();
    Tensor3 t{m.inputs(), m.outputs(), m.hidden(), {}};
    t.data.assign(static_cast<std::size_t>(t.ni * t.nj * t.nk), 0.0);
    for (Eigen::Index i = 0; i < t.ni; ++i)
        for (Eigen::Index j = 0; j < t.nj; ++j)
            for (Eigen::Index k = 0; k < t.nk; ++k) {
                double s = 0.0;
                for (Eigen::Index f = 0; f < m.factors(); ++f)
                    s += m.wxf(i, f) * m.wyf(j, f) * m.whf(k, f);
                t.data[static_cast<std::size_t>((i * t.nj + j) * t.nk + k)] = s;
            }
    return t;
}

double tensor_energy(const Tensor3& w, const FactoredGRBM& m, const VectorXd& x,
                     const VectorXd& y, const VectorXd& h) {
    require(x.size() == w.ni && y.size() == w.nj && h.size() == w.nk, "tensor_energy: dimension mismatch");
    double e = 0.0;
    for (Eigen::Index i = 0; i < w.ni; ++i)
        for (Eigen::Index j = 0; j < w.nj; ++j)
            for (Eigen::Index k = 0; k < w.nk; ++k) e += x[i] * y[j] * h[k] * w(i, j, k);
    return -e - m.ybias.dot(y) - m.hbias.dot(h);
}

namespace {

void check_xyh(const FactoredGRBM& m, const VectorXd& x, const VectorXd* y, const VectorXd* h,
               const char* op) {
    m.validate();
    const std::string msg = std::string(op) + ": dimension mismatch";
    require(x.size() == m.inputs(), msg.c_str());
    if (y) require(y->size() == m.outputs(), msg.c_str());
    if (h) require(h->size() == m.hidden(), msg.c_str());
}

}  // namespace

double cond_energy(const FactoredGRBM& m, const VectorXd& x, const VectorXd& y,
                   const VectorXd& h) {
    check_xyh(m, x, &y, &h, "cond_energy");
    const VectorXd fx = m.wxf.transpose() * x;
    const VectorXd fy = m.wyf.transpose() * y;
    const VectorXd fh = m.whf.transpose() * h;
    return -(fx.array() * fy.array() * fh.array()).sum() - m.ybias.dot(y) - m.hbias.dot(h);
}

HiddenState prob_h_cond(const FactoredGRBM& m, const VectorXd& x, const VectorXd& y) {
    check_xyh(m, x, &y, nullptr, "prob_h_cond");
    const VectorXd fx = m.wxf.transpose() * x;
    const VectorXd fy = m.wyf.transpose() * y;
    const VectorXd fxy = (fx.array() * fy.array()).matrix();
    return {sigmoid(m.whf * fxy + m.hbias), {}};
}

VectorXd prob_y_cond(const FactoredGRBM& m, const VectorXd& x, const VectorXd& h) {
    check_xyh(m, x, nullptr, &h, "prob_y_cond");
    const VectorXd fx = m.wxf.transpose() * x;
    const VectorXd fh = m.whf.transpose() * h;
    const VectorXd fxh = (fx.array() * fh.array()).matrix();
    return sigmoid(m.wyf * fxh + m.ybias);
}

double spatial_energy(const FactoredGRBM& m, const VectorXd& x, const VectorXd& h) {
    check_xyh(m, x, nullptr, &h, "spatial_energy");
    const VectorXd fx = m.wxf.transpose() * x;
    const VectorXd fh = m.whf.transpose() * h;
    const VectorXd ybias = m.ybias.size() == x.size() ? m.ybias : VectorXd::Zero(x.size());
    return -(fx.array() * fx.array() * fh.array()).sum() - ybias.dot(x) - m.hbias.dot(h);
}

HiddenState spatial_prob_h(const FactoredGRBM& m, const VectorXd& x) {
    check_xyh(m, x, nullptr, nullptr, "spatial_prob_h");
    const VectorXd fx = m.wxf.transpose() * x;
    const VectorXd fx2 = fx.array().square().matrix();
    return {sigmoid(m.whf * fx2 + m.hbias), {}};
}

FactoredGRBM tie_weights(const FactoredGRBM& m) {
    FactoredGRBM t = m;
    t.wyf = m.wxf;
    if (t.ybias.size() != t.wyf.rows()) t.ybias = VectorXd::Zero(t.wyf.rows());
    return t;
}

FactoredGRBM neg_energy_grad(const FactoredGRBM& m, const VectorXd& x, const VectorXd& y,
                             const VectorXd& h) {
    check_xyh(m, x, &y, &h, "neg_energy_grad");
    const Eigen::ArrayXd fx = m.wxf.transpose() * x;
    const Eigen::ArrayXd fy = m.wyf.transpose() * y;
    const Eigen::ArrayXd fh = m.whf.transpose() * h;
    FactoredGRBM g;
    g.wxf = x * (fy * fh).matrix().transpose();
    g.wyf = y * (fx * fh).matrix().transpose();
    g.whf = h * (fx * fy).matrix().transpose();
    g.ybias = y;
    g.hbias = h;
    return g;
}

}  // namespace gatedflow
