#pragma once

#include <string>
#include <string_view>

#include "semaug/error.hpp"
#include "semaug/tensor.hpp"

namespace semaug {

/// Optimizer parameter groups, each with its own learning rate.
enum class ParamGroup { encoder, fusion, crf };

inline std::string_view to_string(ParamGroup g) {
    switch (g) {
        case ParamGroup::encoder: return "encoder";
        case ParamGroup::fusion: return "fusion";
        case ParamGroup::crf: return "crf";
    }
    return "?";
}

/// A trainable tensor with its accumulated gradient.
struct Param {
    Matrix value;
    Matrix grad;
    ParamGroup group = ParamGroup::encoder;
    bool decay = true;

    Param() = default;
    Param(Eigen::Index rows, Eigen::Index cols, ParamGroup g, bool decay_ = true)
        : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)), group(g), decay(decay_) {}

    void zero_grad() { grad.setZero(); }
};

inline void check_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ArgumentError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
    }
}

}  // namespace semaug
