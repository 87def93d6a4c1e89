#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "semaug/error.hpp"
#include "semaug/params.hpp"

namespace semaug {

struct AdamWConfig {
    double lr_encoder = 1e-3;
    double lr_fusion = 5e-3;
    double lr_crf = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    double lr_for(ParamGroup g) const {
        switch (g) {
            case ParamGroup::encoder: return lr_encoder;
            case ParamGroup::fusion: return lr_fusion;
            case ParamGroup::crf: return lr_crf;
        }
        return 0.0;
    }
};

/// Linear warmup over the first warmup_steps, then linear decay to zero at
/// total_steps. Returns the multiplier for 0-based step `step`.
inline double warmup_linear_decay(std::size_t step, std::size_t total_steps, std::size_t warmup_steps) {
    if (total_steps == 0) return 0.0;
    if (step < warmup_steps) return static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    if (step >= total_steps) return 0.0;
    return static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup_steps);
}

/// Adam with decoupled weight decay. Moment buffers follow the model's visit
/// order, which must stay fixed across steps.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    template <typename Model>
    void step(Model& model, double lr_scale) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        std::size_t slot = 0;
        model.visit([&](const std::string& name, Param& p) {
            if (slot == m_.size()) {
                m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
                v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
            }
            Matrix& m = m_[slot];
            Matrix& v = v_[slot];
            ++slot;
            if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
                throw ConfigError("optimizer state does not match parameter " + name);
            }
            const double lr = cfg_.lr_for(p.group) * lr_scale;
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
            if (p.decay) p.value *= 1.0 - lr * cfg_.weight_decay;
            p.value.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
        });
    }

    std::size_t steps() const { return t_; }

private:
    AdamWConfig cfg_;
    std::size_t t_ = 0;
    std::vector<Matrix> m_, v_;
};

}  // namespace semaug
