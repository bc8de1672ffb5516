#pragma once

#include <Eigen/Dense>

#include <string>

namespace clv::nn {

using Index = Eigen::Index;

/// Batch of 3-channel-or-more spatiotemporal volumes, N x C x T x H x W.
struct Shape5 {
    Index n = 0, c = 0, t = 0, h = 0, w = 0;

    Index positions() const { return t * h * w; }
    bool operator==(const Shape5&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(t) + "x" + std::to_string(h) +
               "x" + std::to_string(w) + ")";
    }
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Activations stored channel-major: row c holds every (n, t, h, w) position,
/// sample n occupying columns [n*T*H*W, (n+1)*T*H*W).
template <typename Scalar>
struct Volume {
    Shape5 shape;
    RowMatrix<Scalar> data;

    Volume() = default;
    explicit Volume(const Shape5& s) : shape(s), data(RowMatrix<Scalar>::Zero(s.c, s.n * s.positions())) {}

    auto sample(Index i) { return data.middleCols(i * shape.positions(), shape.positions()); }
    auto sample(Index i) const { return data.middleCols(i * shape.positions(), shape.positions()); }

    Scalar& at(Index n, Index c, Index t, Index y, Index x) {
        return data(c, n * shape.positions() + (t * shape.h + y) * shape.w + x);
    }
    Scalar at(Index n, Index c, Index t, Index y, Index x) const {
        return data(c, n * shape.positions() + (t * shape.h + y) * shape.w + x);
    }
};

}  // namespace clv::nn
