#define EIGEN_DONT_PARALLELIZE
#include "cugr/nn/layers.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace cugr::nn {

namespace {
using MatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
} // namespace

Conv2d::Conv2d(std::string name, int in_c_, int out_c_, int kernel_, int stride_, int pad_,
               int dilation_)
    : w(name + ".w", {out_c_, in_c_ * kernel_ * kernel_}),
      b(name + ".b", {out_c_}),
      in_c(in_c_),
      out_c(out_c_),
      kernel(kernel_),
      stride(stride_),
      pad(pad_),
      dilation(dilation_) {}

void Conv2d::init_he(Rng& rng) {
    double fan_in = static_cast<double>(in_c) * kernel * kernel;
    double std = std::sqrt(2.0 / fan_in);
    for (float& v : w.value.data) v = static_cast<float>(rng.normal() * std);
    b.value.zero();
}

void Conv2d::init_zero() {
    w.value.zero();
    b.value.zero();
}

int Conv2d::out_size(int in_size) const {
    return (in_size + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
}

Tensor Conv2d::forward(const Tensor& x) {
    check(x.shape.size() == 3 && x.dim(0) == in_c, "conv " + w.name + ": bad input shape");
    const int h = x.dim(1), wd = x.dim(2);
    const int oh = out_size(h), ow = out_size(wd);
    check(oh > 0 && ow > 0, "conv " + w.name + ": output collapses to zero");
    last_h_ = h;
    last_w_ = wd;

    const int rows = in_c * kernel * kernel;
    const size_t cols = static_cast<size_t>(oh) * ow;
    col_.shape = {rows, oh * ow};
    col_.data.assign(static_cast<size_t>(rows) * cols, 0.0f);

    const float* src = x.ptr();
    float* col = col_.ptr();
    for (int ic = 0; ic < in_c; ++ic) {
        const float* plane = src + static_cast<size_t>(ic) * h * wd;
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                float* row = col + (static_cast<size_t>(ic) * kernel * kernel +
                                    static_cast<size_t>(ky) * kernel + kx) *
                                       cols;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride - pad + ky * dilation;
                    float* dst = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) continue; // stays zero
                    const float* srow = plane + static_cast<size_t>(iy) * wd;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride - pad + kx * dilation;
                        if (ix >= 0 && ix < wd) dst[ox] = srow[ix];
                    }
                }
            }
        }
    }

    Tensor y({out_c, oh, ow});
    MatMap ym(y.ptr(), out_c, static_cast<Eigen::Index>(cols));
    ConstMatMap wm(w.value.ptr(), out_c, rows);
    ConstMatMap cm(col, rows, static_cast<Eigen::Index>(cols));
    ym.noalias() = wm * cm;
    for (int oc = 0; oc < out_c; ++oc) {
        float bias = b.value.data[oc];
        float* row = y.ptr() + static_cast<size_t>(oc) * cols;
        for (size_t i = 0; i < cols; ++i) row[i] += bias;
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const int oh = dy.dim(1), ow = dy.dim(2);
    const int rows = in_c * kernel * kernel;
    const size_t cols = static_cast<size_t>(oh) * ow;
    check(dy.dim(0) == out_c && col_.size() == static_cast<size_t>(rows) * cols,
          "conv " + w.name + ": backward without matching forward");

    ConstMatMap dym(dy.ptr(), out_c, static_cast<Eigen::Index>(cols));
    ConstMatMap cm(col_.ptr(), rows, static_cast<Eigen::Index>(cols));
    MatMap dwm(w.grad.ptr(), out_c, rows);
    dwm.noalias() += dym * cm.transpose();
    for (int oc = 0; oc < out_c; ++oc) {
        double acc = 0.0;
        const float* row = dy.ptr() + static_cast<size_t>(oc) * cols;
        for (size_t i = 0; i < cols; ++i) acc += row[i];
        b.grad.data[oc] += static_cast<float>(acc);
    }

    // dcol = W^T * dy, then scatter back (col2im)
    Tensor dcol({rows, oh * ow});
    MatMap dcm(dcol.ptr(), rows, static_cast<Eigen::Index>(cols));
    ConstMatMap wm(w.value.ptr(), out_c, rows);
    dcm.noalias() = wm.transpose() * dym;

    Tensor dx({in_c, last_h_, last_w_});
    float* dst = dx.ptr();
    const float* dc = dcol.ptr();
    for (int ic = 0; ic < in_c; ++ic) {
        float* plane = dst + static_cast<size_t>(ic) * last_h_ * last_w_;
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const float* row = dc + (static_cast<size_t>(ic) * kernel * kernel +
                                         static_cast<size_t>(ky) * kernel + kx) *
                                            cols;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= last_h_) continue;
                    float* drow = plane + static_cast<size_t>(iy) * last_w_;
                    const float* srow = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride - pad + kx * dilation;
                        if (ix >= 0 && ix < last_w_) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
    return dx;
}

Linear::Linear(std::string name, int in_dim_, int out_dim_, bool bias)
    : w(name + ".w", {out_dim_, in_dim_}),
      b(bias ? Param(name + ".b", {out_dim_}) : Param()),
      in_dim(in_dim_),
      out_dim(out_dim_),
      has_bias(bias) {
    if (!has_bias) b.name = name + ".b(unused)";
}

void Linear::init_he(Rng& rng) {
    double std = std::sqrt(2.0 / in_dim);
    for (float& v : w.value.data) v = static_cast<float>(rng.normal() * std);
    if (has_bias) b.value.zero();
}

void Linear::init_zero() {
    w.value.zero();
    if (has_bias) b.value.zero();
}

Tensor Linear::forward(const Tensor& x) {
    check(static_cast<int>(x.size()) == in_dim, "linear " + w.name + ": bad input size");
    x_ = x;
    Tensor y({out_dim});
    ConstMatMap wm(w.value.ptr(), out_dim, in_dim);
    Eigen::Map<const Eigen::VectorXf> xv(x.ptr(), in_dim);
    Eigen::Map<Eigen::VectorXf> yv(y.ptr(), out_dim);
    yv.noalias() = wm * xv;
    if (has_bias)
        for (int i = 0; i < out_dim; ++i) y.data[i] += b.value.data[i];
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    check(static_cast<int>(dy.size()) == out_dim, "linear " + w.name + ": bad grad size");
    MatMap dwm(w.grad.ptr(), out_dim, in_dim);
    Eigen::Map<const Eigen::VectorXf> dyv(dy.ptr(), out_dim);
    Eigen::Map<const Eigen::VectorXf> xv(x_.ptr(), in_dim);
    dwm.noalias() += dyv * xv.transpose();
    if (has_bias)
        for (int i = 0; i < out_dim; ++i) b.grad.data[i] += dy.data[i];
    Tensor dx(x_.shape);
    Eigen::Map<Eigen::VectorXf> dxv(dx.ptr(), in_dim);
    ConstMatMap wm(w.value.ptr(), out_dim, in_dim);
    dxv.noalias() = wm.transpose() * dyv;
    return dx;
}

Tensor Relu::forward(const Tensor& x) {
    Tensor y = x;
    mask_.resize(x.size());
    for (size_t i = 0; i < y.size(); ++i) {
        bool pos = y.data[i] > 0.0f;
        mask_[i] = pos;
        if (!pos) y.data[i] = 0.0f;
    }
    return y;
}

Tensor Relu::backward(const Tensor& dy) const {
    check(dy.size() == mask_.size(), "relu: backward without matching forward");
    Tensor dx = dy;
    for (size_t i = 0; i < dx.size(); ++i)
        if (!mask_[i]) dx.data[i] = 0.0f;
    return dx;
}

Tensor BilinearUpsample::forward(const Tensor& x) const {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = h * factor_, ow = w * factor_;
    Tensor y({c, oh, ow});
    for (int oy = 0; oy < oh; ++oy) {
        double sy = (oy + 0.5) / factor_ - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double fy = sy - y0;
        int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
        for (int ox = 0; ox < ow; ++ox) {
            double sx = (ox + 0.5) / factor_ - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double fx = sx - x0;
            int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
            double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
            double w10 = fy * (1 - fx), w11 = fy * fx;
            for (int ch = 0; ch < c; ++ch) {
                const float* p = x.ptr() + static_cast<size_t>(ch) * h * w;
                double v = w00 * p[y0c * w + x0c] + w01 * p[y0c * w + x1c] +
                           w10 * p[y1c * w + x0c] + w11 * p[y1c * w + x1c];
                y.data[(static_cast<size_t>(ch) * oh + oy) * ow + ox] = static_cast<float>(v);
            }
        }
    }
    return y;
}

Tensor BilinearUpsample::backward(const Tensor& dy, int in_h, int in_w) const {
    const int c = dy.dim(0), oh = dy.dim(1), ow = dy.dim(2);
    Tensor dx({c, in_h, in_w});
    for (int oy = 0; oy < oh; ++oy) {
        double sy = (oy + 0.5) / factor_ - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double fy = sy - y0;
        int y0c = std::clamp(y0, 0, in_h - 1), y1c = std::clamp(y0 + 1, 0, in_h - 1);
        for (int ox = 0; ox < ow; ++ox) {
            double sx = (ox + 0.5) / factor_ - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double fx = sx - x0;
            int x0c = std::clamp(x0, 0, in_w - 1), x1c = std::clamp(x0 + 1, 0, in_w - 1);
            double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
            double w10 = fy * (1 - fx), w11 = fy * fx;
            for (int ch = 0; ch < c; ++ch) {
                float g = dy.data[(static_cast<size_t>(ch) * oh + oy) * ow + ox];
                float* p = dx.ptr() + static_cast<size_t>(ch) * in_h * in_w;
                p[y0c * in_w + x0c] += static_cast<float>(w00 * g);
                p[y0c * in_w + x1c] += static_cast<float>(w01 * g);
                p[y1c * in_w + x0c] += static_cast<float>(w10 * g);
                p[y1c * in_w + x1c] += static_cast<float>(w11 * g);
            }
        }
    }
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2), "concat: spatial mismatch");
    Tensor y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.size());
    return y;
}

Tensor slice_channels(const Tensor& t, int from, int to) {
    check(from >= 0 && to <= t.dim(0) && from < to, "slice_channels: bad range");
    const size_t plane = static_cast<size_t>(t.dim(1)) * t.dim(2);
    Tensor y({to - from, t.dim(1), t.dim(2)});
    std::copy(t.data.begin() + from * plane, t.data.begin() + to * plane, y.data.begin());
    return y;
}

void global_avg_pool(const Tensor& x, double* out) {
    const int c = x.dim(0);
    const size_t plane = static_cast<size_t>(x.dim(1)) * x.dim(2);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const float* p = x.ptr() + static_cast<size_t>(ch) * plane;
        for (size_t i = 0; i < plane; ++i) acc += p[i];
        out[ch] = acc / static_cast<double>(plane);
    }
}

} // namespace cugr::nn
