#pragma once

#include "cugr/nn/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cugr::nn {

// Plain SGD with momentum: v = mu*v - lr*g; w += v.
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    void step(const std::vector<Param*>& params, double lr_scale = 1.0) const {
        double lr = lr_ * lr_scale;
        for (Param* p : params) {
            for (size_t i = 0; i < p->value.size(); ++i) {
                float v = static_cast<float>(momentum_) * p->vel.data[i] -
                          static_cast<float>(lr) * p->grad.data[i];
                p->vel.data[i] = v;
                p->value.data[i] += v;
            }
        }
    }

    double base_lr() const { return lr_; }

private:
    double lr_;
    double momentum_;
};

inline void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

// Cosine decay over whole epochs: scale = 0.5*(1 + cos(pi * e / total)).
inline double cosine_scale(int epoch, int total_epochs) {
    if (total_epochs <= 1) return 1.0;
    return 0.5 * (1.0 + std::cos(3.141592653589793 * epoch / total_epochs));
}

} // namespace cugr::nn
