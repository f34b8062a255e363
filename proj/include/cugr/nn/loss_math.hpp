#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>

// Loss kernels shared by training (float) and the verification tests
// (double). Gradients are analytic; every kernel optionally writes the
// gradient with respect to its first argument.
namespace cugr::nn {

constexpr double kProbEps = 1e-12; // probabilities are clamped here before log

// Mean softmax cross entropy over K pixels with 2 classes.
// logits layout is class-major: logits[c*K + j]. Gradient is w.r.t. logits.
template <typename T>
double softmax_ce_mean(const T* logits, const uint8_t* labels, size_t K, T* dlogits) {
    double total = 0.0;
    for (size_t j = 0; j < K; ++j) {
        T z0 = logits[j], z1 = logits[K + j];
        T m = std::max(z0, z1);
        double e0 = std::exp(static_cast<double>(z0 - m));
        double e1 = std::exp(static_cast<double>(z1 - m));
        double sum = e0 + e1;
        double p0 = e0 / sum, p1 = e1 / sum;
        double pt = labels[j] == 0 ? p0 : p1;
        total -= std::log(std::max(pt, kProbEps));
        if (dlogits) {
            double inv = 1.0 / static_cast<double>(K);
            dlogits[j] = static_cast<T>((p0 - (labels[j] == 0 ? 1.0 : 0.0)) * inv);
            dlogits[K + j] = static_cast<T>((p1 - (labels[j] == 1 ? 1.0 : 0.0)) * inv);
        }
    }
    return total / static_cast<double>(K);
}

// Mean cross entropy straight from per-pixel probabilities of the true class.
template <typename T>
double ce_mean_from_probs(const T* prob_true, size_t K) {
    double total = 0.0;
    for (size_t j = 0; j < K; ++j)
        total -= std::log(std::max(static_cast<double>(prob_true[j]), kProbEps));
    return total / static_cast<double>(K);
}

// (1/n) * sum |pred - truth|; gradient w.r.t. pred.
template <typename T>
double l1_mean(const T* pred, const T* truth, size_t n, T* dpred) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
        total += std::abs(d);
        if (dpred) dpred[i] = static_cast<T>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n);
    }
    return total / static_cast<double>(n);
}

// Focal loss -(1-p_t)^gamma * log(p_t) on softmax(logits); true_index is
// 0-based. gamma = 0 reduces exactly to cross entropy. Gradient w.r.t.
// logits (accumulated scaled by `grad_scale`).
template <typename T>
double focal_loss(const T* logits, int num_classes, int true_index, double gamma, T* dlogits,
                  double grad_scale = 1.0) {
    T m = logits[0];
    for (int c = 1; c < num_classes; ++c) m = std::max(m, logits[c]);
    double sum = 0.0;
    double p[64]; // num_classes is small (levels)
    for (int c = 0; c < num_classes; ++c) {
        p[c] = std::exp(static_cast<double>(logits[c] - m));
        sum += p[c];
    }
    for (int c = 0; c < num_classes; ++c) p[c] /= sum;
    double pt = p[true_index];
    double log_pt = std::log(std::max(pt, kProbEps));
    double u = 1.0 - pt;

    double loss, coeff; // dFL/dz_k = coeff * (delta_kt - p_k)
    if (gamma == 0.0) {
        loss = -log_pt;
        coeff = -1.0;
    } else if (u < 1e-15) {
        loss = 0.0;
        coeff = 0.0;
    } else {
        double ug = std::pow(u, gamma);
        loss = -ug * log_pt;
        coeff = gamma * pt * std::pow(u, gamma - 1.0) * log_pt - ug;
    }
    if (dlogits) {
        for (int c = 0; c < num_classes; ++c) {
            double delta = (c == true_index) ? 1.0 : 0.0;
            dlogits[c] += static_cast<T>(grad_scale * coeff * (delta - p[c]));
        }
    }
    return loss;
}

// Loss3 = alpha * |mass_pred - mass_true| + (1 - alpha) * FL(logits, level).
inline double loss3_combine(double l1, double fl, double alpha) {
    return alpha * l1 + (1.0 - alpha) * fl;
}

template <typename T>
double loss3(T mass_pred, T mass_true, const T* level_logits, int num_levels, int true_level,
             double alpha, double gamma, T* dmass, T* dlogits) {
    double diff = static_cast<double>(mass_pred) - static_cast<double>(mass_true);
    double l1 = std::abs(diff);
    if (dmass) *dmass = static_cast<T>(alpha * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)));
    double fl =
        focal_loss(level_logits, num_levels, true_level - 1, gamma, dlogits, 1.0 - alpha);
    return loss3_combine(l1, fl, alpha);
}

} // namespace cugr::nn
