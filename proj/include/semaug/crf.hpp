#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "semaug/error.hpp"
#include "semaug/params.hpp"
#include "semaug/tensor.hpp"

namespace semaug {

using LabelPath = std::vector<int>;

/// Linear-chain CRF head. transitions(i, j) scores moving from label i to j.
struct CrfParams {
    Param w_e;          // d x n_labels
    Param b_e;          // 1 x n_labels
    Param transitions;  // n_labels x n_labels
    Param start;        // 1 x n_labels
    Param end;          // 1 x n_labels

    std::size_t n_labels() const { return static_cast<std::size_t>(transitions.value.rows()); }

    template <typename F>
    void visit(F&& f) {
        f("crf.w_e", w_e);
        f("crf.b_e", b_e);
        f("crf.transitions", transitions);
        f("crf.start", start);
        f("crf.end", end);
    }
};

inline CrfParams init_crf(std::size_t d_model, std::size_t n_labels, std::uint64_t seed) {
    if (n_labels == 0) throw ConfigError("crf: n_labels must be >= 1");
    const auto d = static_cast<Eigen::Index>(d_model);
    const auto n = static_cast<Eigen::Index>(n_labels);
    constexpr auto G = ParamGroup::crf;
    CrfParams p{Param(d, n, G), Param(1, n, G, false), Param(n, n, G, false), Param(1, n, G, false),
                Param(1, n, G, false)};
    Rng rng(seed, "crf.w_e");
    fill_uniform(p.w_e.value, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    return p;
}

/// Row t = fused[t] * W_e + bias for the first n_real rows.
inline Matrix emissions(const Matrix& fused, std::size_t n_real, const CrfParams& p) {
    if (n_real > static_cast<std::size_t>(fused.rows())) throw ArgumentError("emissions: n_real exceeds rows");
    return (fused.topRows(static_cast<Eigen::Index>(n_real)) * p.w_e.value).rowwise() + p.b_e.value.row(0);
}

/// Raw CRF scores, separated from Param so tests can drive them directly.
struct CrfScores {
    const Matrix& transitions;
    const RowVector start;
    const RowVector end;

    explicit CrfScores(const CrfParams& p)
        : transitions(p.transitions.value), start(p.start.value.row(0)), end(p.end.value.row(0)) {}
    CrfScores(const Matrix& t, RowVector s, RowVector e) : transitions(t), start(std::move(s)), end(std::move(e)) {}
};

namespace detail {

inline void check_crf(const Matrix& em, const CrfScores& s) {
    if (em.rows() == 0) throw ArgumentError("crf: empty sequence");
    const auto n = em.cols();
    if (s.transitions.rows() != n || s.transitions.cols() != n || s.start.size() != n || s.end.size() != n) {
        throw ArgumentError("crf: score shapes do not match n_labels");
    }
}

inline double log_sum_exp(const RowVector& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace detail

/// s[y_1] + sum_t em[t][y_t] + sum_t T[y_{t-1}][y_t] + e[y_L]
inline double path_score(const Matrix& em, const LabelPath& path, const CrfScores& s) {
    detail::check_crf(em, s);
    if (path.size() != static_cast<std::size_t>(em.rows())) throw ArgumentError("crf: path length mismatch");
    for (int y : path) {
        if (y < 0 || y >= em.cols()) throw ArgumentError("crf: label index out of range");
    }
    double score = s.start(path.front()) + s.end(path.back());
    for (std::size_t t = 0; t < path.size(); ++t) {
        score += em(static_cast<Eigen::Index>(t), path[t]);
        if (t > 0) score += s.transitions(path[t - 1], path[t]);
    }
    return score;
}

/// Forward variables alpha[t][j] in log space.
inline Matrix forward_log_alphas(const Matrix& em, const CrfScores& s) {
    detail::check_crf(em, s);
    const auto L = em.rows(), n = em.cols();
    Matrix alpha(L, n);
    alpha.row(0) = s.start + em.row(0);
    RowVector tmp(n);
    for (Eigen::Index t = 1; t < L; ++t) {
        for (Eigen::Index j = 0; j < n; ++j) {
            tmp = alpha.row(t - 1) + s.transitions.col(j).transpose();
            alpha(t, j) = detail::log_sum_exp(tmp) + em(t, j);
        }
    }
    return alpha;
}

inline Matrix backward_log_betas(const Matrix& em, const CrfScores& s) {
    const auto L = em.rows(), n = em.cols();
    Matrix beta(L, n);
    beta.row(L - 1) = s.end;
    RowVector tmp(n);
    for (Eigen::Index t = L - 1; t-- > 0;) {
        for (Eigen::Index i = 0; i < n; ++i) {
            tmp = s.transitions.row(i) + em.row(t + 1) + beta.row(t + 1);
            beta(t, i) = detail::log_sum_exp(tmp);
        }
    }
    return beta;
}

inline double log_partition(const Matrix& em, const CrfScores& s) {
    const Matrix alpha = forward_log_alphas(em, s);
    return detail::log_sum_exp(alpha.row(alpha.rows() - 1) + s.end);
}

/// Negative log-likelihood of the gold path, logZ - score(gold).
inline double nll(const Matrix& em, const LabelPath& gold, const CrfScores& s) {
    const double score = path_score(em, gold, s);
    const double log_z = log_partition(em, s);
    return std::max(0.0, log_z - score);
}

struct CrfGrads {
    Matrix d_emissions;
    Matrix d_transitions;
    RowVector d_start;
    RowVector d_end;
};

/// Gradient of nll: expected feature counts (forward-backward marginals)
/// minus the gold path's counts.
inline CrfGrads nll_backward(const Matrix& em, const LabelPath& gold, const CrfScores& s) {
    detail::check_crf(em, s);
    if (gold.size() != static_cast<std::size_t>(em.rows())) throw ArgumentError("crf: gold length mismatch");
    const auto L = em.rows(), n = em.cols();
    const Matrix alpha = forward_log_alphas(em, s);
    const Matrix beta = backward_log_betas(em, s);
    const double log_z = detail::log_sum_exp(alpha.row(L - 1) + s.end);

    CrfGrads g{Matrix(L, n), Matrix::Zero(n, n), RowVector(n), RowVector(n)};
    for (Eigen::Index t = 0; t < L; ++t) {
        g.d_emissions.row(t) = (alpha.row(t) + beta.row(t)).array() - log_z;
        g.d_emissions.row(t) = g.d_emissions.row(t).array().exp();
    }
    g.d_start = g.d_emissions.row(0);
    g.d_end = g.d_emissions.row(L - 1);
    for (Eigen::Index t = 1; t < L; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                g.d_transitions(i, j) +=
                    std::exp(alpha(t - 1, i) + s.transitions(i, j) + em(t, j) + beta(t, j) - log_z);
            }
        }
    }
    g.d_start(gold.front()) -= 1.0;
    g.d_end(gold.back()) -= 1.0;
    for (Eigen::Index t = 0; t < L; ++t) {
        g.d_emissions(t, gold[static_cast<std::size_t>(t)]) -= 1.0;
        if (t > 0) g.d_transitions(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1.0;
    }
    return g;
}

struct ViterbiResult {
    LabelPath path;
    double score = 0.0;
};

/// Max-score path. Ties go to the lower label index at every step.
inline ViterbiResult viterbi(const Matrix& em, const CrfScores& s) {
    detail::check_crf(em, s);
    const auto L = em.rows(), n = em.cols();
    RowVector score = s.start + em.row(0);
    RowVector next(n);
    std::vector<std::vector<int>> back(static_cast<std::size_t>(L), std::vector<int>(static_cast<std::size_t>(n), 0));
    for (Eigen::Index t = 1; t < L; ++t) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = score(i) + s.transitions(i, j);
                if (v > best) {
                    best = v;
                    arg = static_cast<int>(i);
                }
            }
            next(j) = best + em(t, j);
            back[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = arg;
        }
        score.swap(next);
    }
    score += s.end;
    ViterbiResult r;
    int last = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
        if (score(j) > score(last)) last = static_cast<int>(j);
    }
    r.score = score(last);
    r.path.assign(static_cast<std::size_t>(L), 0);
    r.path.back() = last;
    for (Eigen::Index t = L - 1; t > 0; --t) {
        r.path[static_cast<std::size_t>(t - 1)] =
            back[static_cast<std::size_t>(t)][static_cast<std::size_t>(r.path[static_cast<std::size_t>(t)])];
    }
    return r;
}

}  // namespace semaug
