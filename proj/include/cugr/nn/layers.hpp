#pragma once

#include "cugr/nn/tensor.hpp"
#include "cugr/rng.hpp"

#include <string>

namespace cugr::nn {

// 2D convolution on a single CHW image, im2col + GEMM. backward() must be
// called with the caches of the immediately preceding forward(); it
// accumulates into w.grad / b.grad and returns the input gradient.
class Conv2d {
public:
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
           int dilation = 1);

    void init_he(Rng& rng);
    void init_zero();

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

    int out_size(int in_size) const;

    Param w; // {out_c, in_c*k*k}
    Param b; // {out_c}
    int in_c, out_c, kernel, stride, pad, dilation;

private:
    Tensor col_; // cached im2col of the last input, {in_c*k*k, oh*ow}
    int last_h_ = 0, last_w_ = 0;
};

// Fully connected layer on a flattened input.
class Linear {
public:
    Linear(std::string name, int in_dim, int out_dim, bool bias = true);

    void init_he(Rng& rng);
    void init_zero();

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

    Param w; // {out_dim, in_dim}
    Param b; // {out_dim}, empty when bias = false
    int in_dim, out_dim;
    bool has_bias;

private:
    Tensor x_;
};

// ReLU keeping the activation mask of the last forward.
class Relu {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    std::vector<uint8_t> mask_;
};

// Bilinear upsampling by an integer factor (align_corners = false).
class BilinearUpsample {
public:
    explicit BilinearUpsample(int factor) : factor_(factor) {}
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& dy, int in_h, int in_w) const;

private:
    int factor_;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
// channels [from, to) of a CHW gradient
Tensor slice_channels(const Tensor& t, int from, int to);

// Per-channel spatial mean, accumulated in double.
void global_avg_pool(const Tensor& x, double* out);

} // namespace cugr::nn
