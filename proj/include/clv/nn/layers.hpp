#pragma once

// Minimal layer library for (2+1)D-factorized video encoders. Each layer
// caches what its backward pass needs from the most recent forward call.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "clv/error.hpp"
#include "clv/nn/volume.hpp"

namespace clv::nn {

enum class Mode { train, inference };

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Named tensor owned by a layer. Non-trainable entries (BatchNorm running
/// statistics) are checkpointed but never touched by optimizers.
template <typename Scalar>
struct Parameter {
    std::string name;
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    bool trainable = true;

    Parameter(std::string n, Matrix<Scalar> v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())),
          trainable(train) {}
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

template <typename Scalar>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Volume<Scalar> forward(const Volume<Scalar>& x, Mode mode) = 0;
    /// Accumulates parameter gradients and returns d loss / d input.
    virtual Volume<Scalar> backward(const Volume<Scalar>& dy) = 0;
    virtual Shape5 output_shape(const Shape5& in) const = 0;
    virtual void collect(ParameterList<Scalar>&) {}
};

struct Conv3dOptions {
    Index in_channels = 0, out_channels = 0;
    std::array<Index, 3> kernel{1, 1, 1};
    std::array<Index, 3> stride{1, 1, 1};
    std::array<Index, 3> padding{0, 0, 0};
    bool bias = false;
};

/// 3-D convolution as im2col + GEMM, one sample at a time.
template <typename Scalar>
class Conv3d final : public Layer<Scalar> {
public:
    Conv3d(std::string name, const Conv3dOptions& opt, std::mt19937_64& rng)
        : opt_(opt),
          weight_(name + ".weight", Matrix<Scalar>(opt.out_channels, opt.in_channels * kernel_volume())),
          bias_(name + ".bias", Matrix<Scalar>::Zero(opt.bias ? opt.out_channels : 0, 1)) {
        // Kaiming normal, fan_out, gain sqrt(2).
        const double fan_out = static_cast<double>(opt.out_channels * kernel_volume());
        std::normal_distribution<double> g(0.0, std::sqrt(2.0 / fan_out));
        for (Index i = 0; i < weight_.value.size(); ++i) weight_.value(i) = static_cast<Scalar>(g(rng));
    }

    /// Skip computing d input (first layer of a network).
    void set_needs_input_grad(bool v) { needs_input_grad_ = v; }

    Shape5 output_shape(const Shape5& in) const override {
        if (in.c != opt_.in_channels) {
            throw ContractError(weight_.name + ": expected " + std::to_string(opt_.in_channels) +
                                " input channels, got " + std::to_string(in.c));
        }
        Shape5 out{in.n, opt_.out_channels, out_extent(in.t, 0), out_extent(in.h, 1), out_extent(in.w, 2)};
        if (out.t < 1 || out.h < 1 || out.w < 1) {
            throw ContractError(weight_.name + ": input " + in.str() + " too small for kernel");
        }
        return out;
    }

    Volume<Scalar> forward(const Volume<Scalar>& x, Mode) override {
        input_ = x;
        Volume<Scalar> y(output_shape(x.shape));
        RowMatrix<Scalar> cols;
        for (Index n = 0; n < x.shape.n; ++n) {
            im2col(x, n, y.shape, cols);
            y.sample(n).noalias() = weight_.value * cols;
            if (opt_.bias) y.sample(n).colwise() += bias_.value.col(0);
        }
        return y;
    }

    Volume<Scalar> backward(const Volume<Scalar>& dy) override {
        Volume<Scalar> dx(input_.shape);
        RowMatrix<Scalar> cols, dcols;
        for (Index n = 0; n < input_.shape.n; ++n) {
            im2col(input_, n, dy.shape, cols);
            weight_.grad.noalias() += dy.sample(n) * cols.transpose();
            if (opt_.bias) bias_.grad.col(0) += dy.sample(n).rowwise().sum();
            if (needs_input_grad_) {
                dcols.noalias() = weight_.value.transpose() * dy.sample(n);
                col2im(dcols, n, dy.shape, dx);
            }
        }
        return dx;
    }

    void collect(ParameterList<Scalar>& out) override {
        out.push_back(&weight_);
        if (opt_.bias) out.push_back(&bias_);
    }

    const Conv3dOptions& options() const { return opt_; }

private:
    Index kernel_volume() const { return opt_.kernel[0] * opt_.kernel[1] * opt_.kernel[2]; }
    Index out_extent(Index in, int axis) const {
        return (in + 2 * opt_.padding[axis] - opt_.kernel[axis]) / opt_.stride[axis] + 1;
    }

    void im2col(const Volume<Scalar>& x, Index n, const Shape5& os, RowMatrix<Scalar>& cols) const {
        const auto& is = x.shape;
        const auto [kt, kh, kw] = opt_.kernel;
        const auto [st, sh, sw] = opt_.stride;
        const auto [pt, ph, pw] = opt_.padding;
        cols.resize(is.c * kernel_volume(), os.positions());
        const Index in_base = n * is.positions();
        Index r = 0;
        for (Index c = 0; c < is.c; ++c) {
            const Scalar* src = x.data.row(c).data() + in_base;
            for (Index dt = 0; dt < kt; ++dt) {
                for (Index dy = 0; dy < kh; ++dy) {
                    for (Index dx = 0; dx < kw; ++dx, ++r) {
                        Scalar* dst = cols.row(r).data();
                        for (Index ot = 0; ot < os.t; ++ot) {
                            const Index it = ot * st - pt + dt;
                            for (Index oy = 0; oy < os.h; ++oy) {
                                const Index iy = oy * sh - ph + dy;
                                Scalar* out = dst + (ot * os.h + oy) * os.w;
                                if (it < 0 || it >= is.t || iy < 0 || iy >= is.h) {
                                    std::fill(out, out + os.w, Scalar(0));
                                    continue;
                                }
                                const Scalar* line = src + (it * is.h + iy) * is.w;
                                for (Index ox = 0; ox < os.w; ++ox) {
                                    const Index ix = ox * sw - pw + dx;
                                    out[ox] = (ix >= 0 && ix < is.w) ? line[ix] : Scalar(0);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    void col2im(const RowMatrix<Scalar>& cols, Index n, const Shape5& os, Volume<Scalar>& dx) const {
        const auto& is = dx.shape;
        const auto [kt, kh, kw] = opt_.kernel;
        const auto [st, sh, sw] = opt_.stride;
        const auto [pt, ph, pw] = opt_.padding;
        const Index in_base = n * is.positions();
        Index r = 0;
        for (Index c = 0; c < is.c; ++c) {
            Scalar* dst = dx.data.row(c).data() + in_base;
            for (Index dt = 0; dt < kt; ++dt) {
                for (Index dy = 0; dy < kh; ++dy) {
                    for (Index ddx = 0; ddx < kw; ++ddx, ++r) {
                        const Scalar* src = cols.row(r).data();
                        for (Index ot = 0; ot < os.t; ++ot) {
                            const Index it = ot * st - pt + dt;
                            if (it < 0 || it >= is.t) continue;
                            for (Index oy = 0; oy < os.h; ++oy) {
                                const Index iy = oy * sh - ph + dy;
                                if (iy < 0 || iy >= is.h) continue;
                                const Scalar* in = src + (ot * os.h + oy) * os.w;
                                Scalar* line = dst + (it * is.h + iy) * is.w;
                                for (Index ox = 0; ox < os.w; ++ox) {
                                    const Index ix = ox * sw - pw + ddx;
                                    if (ix >= 0 && ix < is.w) line[ix] += in[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Conv3dOptions opt_;
    Parameter<Scalar> weight_;
    Parameter<Scalar> bias_;
    Volume<Scalar> input_;
    bool needs_input_grad_ = true;
};

/// Per-channel batch normalization over (N, T, H, W).
template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
public:
    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

    BatchNorm(std::string name, Index channels)
        : gamma_(name + ".weight", Matrix<Scalar>::Ones(channels, 1)),
          beta_(name + ".bias", Matrix<Scalar>::Zero(channels, 1)),
          running_mean_(name + ".running_mean", Matrix<Scalar>::Zero(channels, 1), false),
          running_var_(name + ".running_var", Matrix<Scalar>::Ones(channels, 1), false) {}

    Shape5 output_shape(const Shape5& in) const override {
        if (in.c != gamma_.value.rows()) throw ContractError(gamma_.name + ": channel mismatch");
        return in;
    }

    Volume<Scalar> forward(const Volume<Scalar>& x, Mode mode) override {
        output_shape(x.shape);
        mode_ = mode;
        const Index channels = x.shape.c;
        const Index m = x.data.cols();
        Volume<Scalar> y(x.shape);
        inv_std_.resize(channels);
        if (mode == Mode::train) {
            xhat_ = Volume<Scalar>(x.shape);
            for (Index c = 0; c < channels; ++c) {
                const auto row = x.data.row(c);
                const Scalar mean = row.mean();
                const Scalar var = (row.array() - mean).square().sum() / static_cast<Scalar>(m);
                const Scalar inv = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kEps));
                inv_std_(c) = inv;
                xhat_.data.row(c) = (row.array() - mean) * inv;
                y.data.row(c) = xhat_.data.row(c).array() * gamma_.value(c) + beta_.value(c);
                const Scalar unbiased = m > 1 ? var * static_cast<Scalar>(m) / static_cast<Scalar>(m - 1) : var;
                const auto mom = static_cast<Scalar>(kMomentum);
                running_mean_.value(c) = (1 - mom) * running_mean_.value(c) + mom * mean;
                running_var_.value(c) = (1 - mom) * running_var_.value(c) + mom * unbiased;
            }
        } else {
            xhat_ = Volume<Scalar>(x.shape);
            for (Index c = 0; c < channels; ++c) {
                const Scalar inv = Scalar(1) / std::sqrt(running_var_.value(c) + static_cast<Scalar>(kEps));
                inv_std_(c) = inv;
                xhat_.data.row(c) = (x.data.row(c).array() - running_mean_.value(c)) * inv;
                y.data.row(c) = xhat_.data.row(c).array() * gamma_.value(c) + beta_.value(c);
            }
        }
        return y;
    }

    Volume<Scalar> backward(const Volume<Scalar>& dy) override {
        Volume<Scalar> dx(dy.shape);
        const Index m = dy.data.cols();
        for (Index c = 0; c < dy.shape.c; ++c) {
            const auto g = dy.data.row(c).array();
            const auto xh = xhat_.data.row(c).array();
            const Scalar sum_g = g.sum();
            const Scalar sum_gx = (g * xh).sum();
            gamma_.grad(c) += sum_gx;
            beta_.grad(c) += sum_g;
            if (mode_ == Mode::train) {
                const Scalar k = gamma_.value(c) * inv_std_(c) / static_cast<Scalar>(m);
                dx.data.row(c) = k * (static_cast<Scalar>(m) * g - sum_g - xh * sum_gx);
            } else {
                // Running statistics are constants in inference mode.
                dx.data.row(c) = g * (gamma_.value(c) * inv_std_(c));
            }
        }
        return dx;
    }

    void collect(ParameterList<Scalar>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }

private:
    Parameter<Scalar> gamma_, beta_, running_mean_, running_var_;
    Volume<Scalar> xhat_;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std_;
    Mode mode_ = Mode::train;
};

template <typename Scalar>
class ReLU final : public Layer<Scalar> {
public:
    Shape5 output_shape(const Shape5& in) const override { return in; }

    Volume<Scalar> forward(const Volume<Scalar>& x, Mode) override {
        Volume<Scalar> y;
        y.shape = x.shape;
        y.data = x.data.cwiseMax(Scalar(0));
        output_ = y.data;
        return y;
    }

    Volume<Scalar> backward(const Volume<Scalar>& dy) override {
        Volume<Scalar> dx;
        dx.shape = dy.shape;
        dx.data = (output_.array() > Scalar(0)).select(dy.data, Scalar(0));
        return dx;
    }

private:
    RowMatrix<Scalar> output_;
};

template <typename Scalar>
class Sequential : public Layer<Scalar> {
public:
    Sequential& add(std::unique_ptr<Layer<Scalar>> layer) {
        layers_.push_back(std::move(layer));
        return *this;
    }
    template <typename L, typename... Args>
    L& emplace(Args&&... args) {
        auto p = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *p;
        layers_.push_back(std::move(p));
        return ref;
    }

    Shape5 output_shape(const Shape5& in) const override {
        Shape5 s = in;
        for (const auto& l : layers_) s = l->output_shape(s);
        return s;
    }

    Volume<Scalar> forward(const Volume<Scalar>& x, Mode mode) override {
        if (layers_.empty()) return x;
        Volume<Scalar> h = layers_.front()->forward(x, mode);
        for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode);
        return h;
    }

    Volume<Scalar> backward(const Volume<Scalar>& dy) override {
        if (layers_.empty()) return dy;
        Volume<Scalar> g = layers_.back()->backward(dy);
        for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
        return g;
    }

    void collect(ParameterList<Scalar>& out) override {
        for (auto& l : layers_) l->collect(out);
    }

    bool empty() const { return layers_.empty(); }
    Layer<Scalar>& front() { return *layers_.front(); }

private:
    std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

/// Spatial (1xkxk) conv, BN, ReLU, temporal (kx1x1) conv.
template <typename Scalar>
void append_conv2plus1d(Sequential<Scalar>& seq, const std::string& name, Index in, Index out, Index mid,
                        Index stride, std::mt19937_64& rng) {
    seq.template emplace<Conv3d<Scalar>>(name + ".0",
                                         Conv3dOptions{in, mid, {1, 3, 3}, {1, stride, stride}, {0, 1, 1}, false}, rng);
    seq.template emplace<BatchNorm<Scalar>>(name + ".1", mid);
    seq.template emplace<ReLU<Scalar>>();
    seq.template emplace<Conv3d<Scalar>>(name + ".3",
                                         Conv3dOptions{mid, out, {3, 1, 1}, {stride, 1, 1}, {1, 0, 0}, false}, rng);
}

/// Residual block of two (2+1)D convolutions; 1x1x1 projection shortcut when
/// the shape changes.
template <typename Scalar>
class ResidualBlock final : public Layer<Scalar> {
public:
    ResidualBlock(const std::string& name, Index in, Index out, Index stride, std::mt19937_64& rng) {
        const Index mid = (in * out * 3 * 3 * 3) / (in * 3 * 3 + 3 * out);
        append_conv2plus1d(main_, name + ".conv1.0", in, out, mid, stride, rng);
        main_.template emplace<BatchNorm<Scalar>>(name + ".conv1.1", out);
        main_.template emplace<ReLU<Scalar>>();
        append_conv2plus1d(main_, name + ".conv2.0", out, out, mid, 1, rng);
        main_.template emplace<BatchNorm<Scalar>>(name + ".conv2.1", out);
        if (stride != 1 || in != out) {
            shortcut_.template emplace<Conv3d<Scalar>>(
                name + ".downsample.0", Conv3dOptions{in, out, {1, 1, 1}, {stride, stride, stride}, {0, 0, 0}, false},
                rng);
            shortcut_.template emplace<BatchNorm<Scalar>>(name + ".downsample.1", out);
        }
    }

    Shape5 output_shape(const Shape5& in) const override { return main_.output_shape(in); }

    Volume<Scalar> forward(const Volume<Scalar>& x, Mode mode) override {
        Volume<Scalar> y = main_.forward(x, mode);
        if (shortcut_.empty()) {
            y.data += x.data;
        } else {
            y.data += shortcut_.forward(x, mode).data;
        }
        return relu_.forward(y, mode);
    }

    Volume<Scalar> backward(const Volume<Scalar>& dy) override {
        const Volume<Scalar> g = relu_.backward(dy);
        Volume<Scalar> dx = main_.backward(g);
        if (shortcut_.empty()) {
            dx.data += g.data;
        } else {
            dx.data += shortcut_.backward(g).data;
        }
        return dx;
    }

    void collect(ParameterList<Scalar>& out) override {
        main_.collect(out);
        shortcut_.collect(out);
    }

private:
    Sequential<Scalar> main_;
    Sequential<Scalar> shortcut_;
    ReLU<Scalar> relu_;
};

/// Mean over (T, H, W): Volume -> N x C feature matrix.
template <typename Scalar>
class GlobalAvgPool {
public:
    Matrix<Scalar> forward(const Volume<Scalar>& x) {
        shape_ = x.shape;
        Matrix<Scalar> f(x.shape.n, x.shape.c);
        for (Index n = 0; n < x.shape.n; ++n) f.row(n) = x.sample(n).rowwise().mean().transpose();
        return f;
    }

    Volume<Scalar> backward(const Matrix<Scalar>& df) const {
        Volume<Scalar> dx(shape_);
        const Scalar inv = Scalar(1) / static_cast<Scalar>(shape_.positions());
        for (Index n = 0; n < shape_.n; ++n) {
            dx.sample(n).colwise() = (df.row(n).transpose() * inv).eval();
        }
        return dx;
    }

private:
    Shape5 shape_;
};

/// y = x W^T + b on row-per-sample matrices.
template <typename Scalar>
class Linear {
public:
    Linear(std::string name, Index in, Index out, std::mt19937_64& rng)
        : weight_(name + ".weight", Matrix<Scalar>(out, in)), bias_(name + ".bias", Matrix<Scalar>(out, 1)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Index i = 0; i < weight_.value.size(); ++i) weight_.value(i) = static_cast<Scalar>(u(rng));
        for (Index i = 0; i < bias_.value.size(); ++i) bias_.value(i) = static_cast<Scalar>(u(rng));
    }

    Index in_features() const { return weight_.value.cols(); }
    Index out_features() const { return weight_.value.rows(); }

    Matrix<Scalar> forward(const Matrix<Scalar>& x) {
        if (x.cols() != in_features()) {
            throw ContractError(weight_.name + ": expected " + std::to_string(in_features()) + " input features, got " +
                                std::to_string(x.cols()));
        }
        input_ = x;
        Matrix<Scalar> y = x * weight_.value.transpose();
        y.rowwise() += bias_.value.col(0).transpose();
        return y;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
        weight_.grad.noalias() += dy.transpose() * input_;
        bias_.grad.col(0) += dy.colwise().sum().transpose();
        return dy * weight_.value;
    }

    void collect(ParameterList<Scalar>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Parameter<Scalar>& weight() { return weight_; }
    Parameter<Scalar>& bias() { return bias_; }
    const Parameter<Scalar>& weight() const { return weight_; }
    const Parameter<Scalar>& bias() const { return bias_; }

private:
    Parameter<Scalar> weight_, bias_;
    Matrix<Scalar> input_;
};

template <typename Scalar>
void zero_grad(const ParameterList<Scalar>& params) {
    for (auto* p : params) p->grad.setZero();
}

template <typename Scalar>
Index count_trainable(const ParameterList<Scalar>& params) {
    Index n = 0;
    for (const auto* p : params) {
        if (p->trainable) n += p->value.size();
    }
    return n;
}

}  // namespace clv::nn
