#pragma once

// Contrastive (NT-Xent, SupCon) and binary cross-entropy objectives with
// analytic gradients. Everything here is a pure function of its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clv/error.hpp"

namespace clv {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Rows are views; views cut from the same clip share an origin id.
template <typename Scalar>
struct EmbeddingBatch {
    MatrixX<Scalar> vectors;
    std::vector<int> origin_ids;
    std::optional<std::vector<int>> labels;
    bool normalized = false;

    Eigen::Index rows() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
};

enum class EmptyPositivePolicy { skip, error };
enum class Reduction { mean_over_anchors };

struct LossConfig {
    double temperature = 0.5;
    Reduction reduction = Reduction::mean_over_anchors;
    EmptyPositivePolicy empty_positive = EmptyPositivePolicy::skip;
};

inline constexpr double kNtXentDefaultTemperature = 0.5;
inline constexpr double kSupConDefaultTemperature = 0.1;

template <typename Scalar>
struct LossResult {
    Scalar value = 0;
    /// One entry per anchor that contributed to `value`.
    VectorX<Scalar> per_anchor;
    /// Row index of each entry of `per_anchor`.
    std::vector<Eigen::Index> anchor_rows;
    /// d value / d vectors, same shape as the batch.
    MatrixX<Scalar> gradient;
    /// Anchors dropped by EmptyPositivePolicy::skip.
    int skipped_anchors = 0;
};

/// Tolerance on unit norm used to validate `normalized` batches.
template <typename Scalar>
constexpr Scalar unit_norm_tolerance() {
    return std::max<Scalar>(Scalar(1e-6), Scalar(100) * std::numeric_limits<Scalar>::epsilon());
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size()) {
        throw ContractError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    }
    const Scalar na = a.norm();
    const Scalar nb = b.norm();
    if (!(na > 0)) throw DomainError("cosine_similarity: first vector has zero norm");
    if (!(nb > 0)) throw DomainError("cosine_similarity: second vector has zero norm");
    const Scalar c = a.dot(b) / (na * nb);
    return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Row-wise L2 normalization. Throws DomainError naming the first zero row.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Scalar n = x.row(r).norm();
        if (!(n > 0) || !std::isfinite(n)) {
            throw DomainError("normalize_rows: row " + std::to_string(r) + " has zero or non-finite norm");
        }
        out.row(r) = x.row(r) / n;
    }
    return out;
}

/// Backprop of y = x / |x| row-wise: dx = (dy - y (y . dy)) / |x|.
template <typename Scalar>
MatrixX<Scalar> normalize_rows_backward(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y,
                                        const MatrixX<Scalar>& dy) {
    MatrixX<Scalar> dx(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Scalar n = x.row(r).norm();
        const Scalar proj = y.row(r).dot(dy.row(r));
        dx.row(r) = (dy.row(r) - proj * y.row(r)) / n;
    }
    return dx;
}

namespace detail {

template <typename Scalar>
Scalar log_sum_exp_excluding(const Eigen::Ref<const VectorX<Scalar>>& s, Eigen::Index skip) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (k != skip) mx = std::max(mx, s(k));
    }
    Scalar acc = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (k != skip) acc += std::exp(s(k) - mx);
    }
    return mx + std::log(acc);
}

inline void require_temperature(double tau) {
    if (!(tau > 0) || !std::isfinite(tau)) {
        throw ContractError("loss: temperature must be positive and finite, got " + std::to_string(tau));
    }
}

template <typename Scalar>
void require_normalized(const EmbeddingBatch<Scalar>& batch, const char* who) {
    if (!batch.normalized) {
        throw ContractError(std::string(who) + ": batch is not flagged as normalized");
    }
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        const Scalar n = batch.vectors.row(r).norm();
        if (std::abs(n - Scalar(1)) > unit_norm_tolerance<Scalar>()) {
            throw ContractError(std::string(who) + ": row " + std::to_string(r) + " has norm " +
                                std::to_string(static_cast<double>(n)) + ", expected 1");
        }
    }
}

template <typename Scalar>
void require_shape(const EmbeddingBatch<Scalar>& batch, const char* who) {
    if (batch.rows() < 2 || batch.dim() < 1) {
        throw ContractError(std::string(who) + ": need at least 2 rows and 1 column");
    }
    if (static_cast<Eigen::Index>(batch.origin_ids.size()) != batch.rows()) {
        throw ContractError(std::string(who) + ": origin_ids length does not match rows");
    }
}

}  // namespace detail

/// Row index of each row's paired view. Every origin group must have exactly two rows.
inline std::vector<Eigen::Index> pair_partners(const std::vector<int>& origin_ids) {
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t r = 0; r < origin_ids.size(); ++r) {
        groups[origin_ids[r]].push_back(static_cast<Eigen::Index>(r));
    }
    std::vector<Eigen::Index> partner(origin_ids.size(), -1);
    for (const auto& [id, rows] : groups) {
        if (rows.size() != 2) {
            throw StructureError("nt_xent: origin group " + std::to_string(id) + " has " +
                                 std::to_string(rows.size()) + " rows, expected 2");
        }
        partner[rows[0]] = rows[1];
        partner[rows[1]] = rows[0];
    }
    return partner;
}

namespace loss_kernels {

/// NT-Xent on arbitrary (not necessarily unit) rows using cosine similarity.
/// Every row is an anchor; its positive is `partner[i]`; the denominator runs
/// over all other rows, positive included.
template <typename Scalar>
LossResult<Scalar> nt_xent(const MatrixX<Scalar>& vectors, const std::vector<Eigen::Index>& partner,
                           double temperature) {
    const Eigen::Index m = vectors.rows();
    const Scalar inv_tau = Scalar(1) / static_cast<Scalar>(temperature);
    const MatrixX<Scalar> u = normalize_rows(vectors);
    const MatrixX<Scalar> s = (u * u.transpose()) * inv_tau;

    LossResult<Scalar> out;
    out.per_anchor.resize(m);
    out.anchor_rows.resize(m);
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(m, m);  // d value / d s
    for (Eigen::Index i = 0; i < m; ++i) {
        const VectorX<Scalar> row = s.row(i).transpose();
        const Scalar lse = detail::log_sum_exp_excluding<Scalar>(row, i);
        out.per_anchor(i) = lse - row(partner[i]);
        out.anchor_rows[i] = i;
        for (Eigen::Index k = 0; k < m; ++k) {
            if (k == i) continue;
            g(i, k) = std::exp(row(k) - lse);
        }
        g(i, partner[i]) -= Scalar(1);
    }
    out.value = out.per_anchor.mean();
    g /= static_cast<Scalar>(m);

    const MatrixX<Scalar> du = ((g + g.transpose()) * u) * inv_tau;
    out.gradient = normalize_rows_backward<Scalar>(vectors, u, du);
    return out;
}

/// SupCon on raw dot products. `labels` decide P(i); A is every row but i.
template <typename Scalar>
LossResult<Scalar> supcon(const MatrixX<Scalar>& vectors, const std::vector<int>& labels, double temperature,
                          EmptyPositivePolicy policy) {
    const Eigen::Index m = vectors.rows();
    const Scalar inv_tau = Scalar(1) / static_cast<Scalar>(temperature);
    const MatrixX<Scalar> s = (vectors * vectors.transpose()) * inv_tau;

    LossResult<Scalar> out;
    std::vector<Scalar> values;
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<Eigen::Index> positives;
        for (Eigen::Index p = 0; p < m; ++p) {
            if (p != i && labels[p] == labels[i]) positives.push_back(p);
        }
        if (positives.empty()) {
            if (policy == EmptyPositivePolicy::error) {
                throw PolicyError("supcon: anchor " + std::to_string(i) + " has no positive (label " +
                                  std::to_string(labels[i]) + " occurs once)");
            }
            ++out.skipped_anchors;
            continue;
        }
        const VectorX<Scalar> row = s.row(i).transpose();
        const Scalar lse = detail::log_sum_exp_excluding<Scalar>(row, i);
        const Scalar inv_p = Scalar(1) / static_cast<Scalar>(positives.size());
        Scalar acc = 0;
        for (Eigen::Index p : positives) acc += lse - row(p);
        values.push_back(acc * inv_p);
        out.anchor_rows.push_back(i);
        for (Eigen::Index a = 0; a < m; ++a) {
            if (a != i) g(i, a) = std::exp(row(a) - lse);
        }
        for (Eigen::Index p : positives) g(i, p) -= inv_p;
    }
    if (values.empty()) {
        throw PolicyError("supcon: no anchor has a positive; every label occurs once");
    }
    out.per_anchor = Eigen::Map<const VectorX<Scalar>>(values.data(), static_cast<Eigen::Index>(values.size()));
    out.value = out.per_anchor.mean();
    g /= static_cast<Scalar>(values.size());
    out.gradient = ((g + g.transpose()) * vectors) * inv_tau;
    return out;
}

}  // namespace loss_kernels

/// Self-supervised NT-Xent averaged over all 2N ordered anchor->positive pairs.
template <typename Scalar>
LossResult<Scalar> nt_xent_loss(const EmbeddingBatch<Scalar>& batch, const LossConfig& cfg) {
    detail::require_temperature(cfg.temperature);
    detail::require_shape(batch, "nt_xent");
    detail::require_normalized(batch, "nt_xent");
    return loss_kernels::nt_xent<Scalar>(batch.vectors, pair_partners(batch.origin_ids), cfg.temperature);
}

/// Supervised contrastive loss; 1/|P(i)| sits outside the sum of log-probabilities.
template <typename Scalar>
LossResult<Scalar> supcon_loss(const EmbeddingBatch<Scalar>& batch, const LossConfig& cfg) {
    detail::require_temperature(cfg.temperature);
    detail::require_shape(batch, "supcon");
    if (!batch.labels || static_cast<Eigen::Index>(batch.labels->size()) != batch.rows()) {
        throw ContractError("supcon: every row needs a label");
    }
    detail::require_normalized(batch, "supcon");
    return loss_kernels::supcon<Scalar>(batch.vectors, *batch.labels, cfg.temperature, cfg.empty_positive);
}

/// Mean binary cross-entropy on logits, computed as max(x,0) - x*y + log1p(exp(-|x|)).
template <typename DerivedL, typename DerivedT>
typename DerivedL::Scalar binary_cross_entropy(const Eigen::MatrixBase<DerivedL>& logits,
                                               const Eigen::MatrixBase<DerivedT>& targets) {
    using Scalar = typename DerivedL::Scalar;
    if (logits.size() != targets.size() || logits.size() < 1) {
        throw ContractError("binary_cross_entropy: logits and targets must have equal nonzero length (" +
                            std::to_string(logits.size()) + " vs " + std::to_string(targets.size()) + ")");
    }
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const Scalar x = logits(i);
        const Scalar y = static_cast<Scalar>(targets(i));
        acc += std::max(x, Scalar(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    return acc / static_cast<Scalar>(logits.size());
}

/// d mean-BCE / d logits = (sigmoid(x) - y) / n.
template <typename DerivedL, typename DerivedT>
VectorX<typename DerivedL::Scalar> binary_cross_entropy_gradient(const Eigen::MatrixBase<DerivedL>& logits,
                                                                 const Eigen::MatrixBase<DerivedT>& targets) {
    using Scalar = typename DerivedL::Scalar;
    if (logits.size() != targets.size() || logits.size() < 1) {
        throw ContractError("binary_cross_entropy_gradient: length mismatch");
    }
    VectorX<Scalar> g(logits.size());
    const Scalar n = static_cast<Scalar>(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const Scalar x = logits(i);
        const Scalar sig = x >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-x)) : std::exp(x) / (Scalar(1) + std::exp(x));
        g(i) = (sig - static_cast<Scalar>(targets(i))) / n;
    }
    return g;
}

}  // namespace clv
