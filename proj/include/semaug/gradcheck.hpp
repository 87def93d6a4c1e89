#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "semaug/error.hpp"
#include "semaug/params.hpp"
#include "semaug/tensor.hpp"

namespace semaug {

/// A parameter tensor exposed to the checker: its value is perturbed in
/// place; `grad` holds the analytic gradient computed beforehand.
struct ParamRef {
    std::string name;
    Matrix* value = nullptr;
    const Matrix* grad = nullptr;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "name[index]" of the worst coordinate
};

struct GradCheckOptions {
    std::size_t min_samples = 50;
    std::uint64_t seed = 0;
    // Denominator floor for the relative error, so coordinates whose true
    // gradient is zero are judged by absolute error.
    double floor = 1e-6;
    // Check every coordinate of every tensor instead of sampling.
    bool exhaustive = false;
};

/// Central differences (f(x+eps) - f(x-eps)) / (2 eps) at sampled
/// coordinates. Every tensor contributes at least one coordinate; the
/// remaining samples are spread round-robin across tensors. In exhaustive
/// mode every coordinate is checked once.
template <typename LossFn>
GradCheckResult finite_difference_check(LossFn&& loss, const std::vector<ParamRef>& params, double eps,
                                        const GradCheckOptions& opt = {}) {
    if (!(eps > 0.0)) throw ArgumentError("finite_difference_check: eps must be positive");
    if (params.empty()) throw ArgumentError("finite_difference_check: no parameters");
    auto eval = [&]() {
        const double f = loss();
        if (!std::isfinite(f)) throw NumericError("finite_difference_check: loss is not finite");
        return f;
    };
    eval();

    GradCheckResult r;
    auto check = [&](const ParamRef& p, Eigen::Index idx) {
        double& x = p.value->data()[idx];
        const double saved = x;
        x = saved + eps;
        const double plus = eval();
        x = saved - eps;
        const double minus = eval();
        x = saved;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double analytic = p.grad->data()[idx];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), opt.floor});
        const double rel = std::abs(numeric - analytic) / denom;
        ++r.checked;
        if (rel >= r.max_rel_error) {
            r.max_rel_error = rel;
            r.worst = p.name + "[" + std::to_string(idx) + "]";
        }
    };
    if (opt.exhaustive) {
        for (const auto& p : params)
            for (Eigen::Index i = 0; i < p.value->size(); ++i) check(p, i);
        return r;
    }
    Rng rng(opt.seed, "gradcheck");
    const std::size_t total = std::max(opt.min_samples, params.size());
    for (std::size_t s = 0; s < total; ++s) {
        const auto& p = params[s % params.size()];
        const auto size = static_cast<std::uint64_t>(p.value->size());
        if (size == 0) continue;
        check(p, static_cast<Eigen::Index>(rng.below(size)));
    }
    return r;
}

}  // namespace semaug
