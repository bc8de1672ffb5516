#pragma once

// Encoder e(), projection head h() and linear classifier.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>

#include "clv/error.hpp"
#include "clv/losses.hpp"
#include "clv/nn/layers.hpp"

namespace clv {

using nn::Mode;

enum class Architecture { r2plus1d_18, tiny3d };

inline std::string to_string(Architecture a) {
    return a == Architecture::r2plus1d_18 ? "r2plus1d-18" : "tiny3d";
}

inline Architecture parse_architecture(std::string_view s) {
    if (s == "r2plus1d-18") return Architecture::r2plus1d_18;
    if (s == "tiny3d") return Architecture::tiny3d;
    throw ConfigError("unknown encoder architecture '" + std::string(s) + "'");
}

inline constexpr int kFeatureDim = 512;
inline constexpr int kProjectionDim = 256;

/// Trainable parameter counts of each named encoder (BatchNorm running
/// statistics excluded).
inline constexpr std::int64_t kR2Plus1d18Parameters = 31'300'125;
inline constexpr std::int64_t kTiny3dParameters = 297'944;

struct EncoderSpec {
    Architecture architecture = Architecture::tiny3d;
    int frames = 8;
    int height = 32;
    int width = 32;
    int feature_dim = kFeatureDim;
};

struct ProjectionSpec {
    int input_dim = kFeatureDim;
    int hidden_dim = kFeatureDim;
    int output_dim = kProjectionDim;
};

struct ClassifierSpec {
    int input_dim = kFeatureDim;
};

template <typename Scalar>
class Encoder {
public:
    Encoder(const EncoderSpec& spec, std::uint64_t seed) : spec_(spec) {
        if (spec.feature_dim != kFeatureDim) {
            throw ConfigError("encoder feature_dim must be " + std::to_string(kFeatureDim));
        }
        std::mt19937_64 rng(seed);
        if (spec.architecture == Architecture::r2plus1d_18) {
            build_r2plus1d_18(rng);
        } else {
            build_tiny3d(rng);
        }
        trunk_.output_shape(input_shape(1));
        trunk_.collect(params_);
    }

    Encoder(const Encoder&) = delete;
    Encoder& operator=(const Encoder&) = delete;

    const EncoderSpec& spec() const { return spec_; }
    nn::Shape5 input_shape(nn::Index batch) const { return {batch, 3, spec_.frames, spec_.height, spec_.width}; }

    /// B clips -> B x 512 features.
    nn::Matrix<Scalar> encode(const nn::Volume<Scalar>& clips, Mode mode) {
        const nn::Shape5 want = input_shape(clips.shape.n);
        if (clips.shape.n < 1 || !(clips.shape == want)) {
            throw ContractError("encode: expected clip batch " + want.str() + ", got " + clips.shape.str());
        }
        return pool_.forward(trunk_.forward(clips, mode));
    }

    void backward(const nn::Matrix<Scalar>& dfeatures) { trunk_.backward(pool_.backward(dfeatures)); }

    const nn::ParameterList<Scalar>& parameters() const { return params_; }

private:
    void build_r2plus1d_18(std::mt19937_64& rng) {
        using nn::Conv3d;
        using nn::Conv3dOptions;
        auto& first = trunk_.template emplace<Conv3d<Scalar>>(
            "stem.0", Conv3dOptions{3, 45, {1, 7, 7}, {1, 2, 2}, {0, 3, 3}, false}, rng);
        first.set_needs_input_grad(false);
        trunk_.template emplace<nn::BatchNorm<Scalar>>("stem.1", 45);
        trunk_.template emplace<nn::ReLU<Scalar>>();
        trunk_.template emplace<Conv3d<Scalar>>("stem.3", Conv3dOptions{45, 64, {3, 1, 1}, {1, 1, 1}, {1, 0, 0}, false},
                                                rng);
        trunk_.template emplace<nn::BatchNorm<Scalar>>("stem.4", 64);
        trunk_.template emplace<nn::ReLU<Scalar>>();
        nn::Index in = 64;
        const nn::Index planes[4] = {64, 128, 256, 512};
        for (int layer = 0; layer < 4; ++layer) {
            const std::string name = "layer" + std::to_string(layer + 1);
            const nn::Index stride = layer == 0 ? 1 : 2;
            trunk_.template emplace<nn::ResidualBlock<Scalar>>(name + ".0", in, planes[layer], stride, rng);
            trunk_.template emplace<nn::ResidualBlock<Scalar>>(name + ".1", planes[layer], planes[layer], 1, rng);
            in = planes[layer];
        }
    }

    // Three factorized blocks: spatial conv, BN, ReLU, temporal conv, BN, ReLU.
    void build_tiny3d(std::mt19937_64& rng) {
        struct Block {
            nn::Index in, mid, out, spatial_stride, temporal_stride;
        };
        const Block blocks[3] = {{3, 24, 32, 2, 1}, {32, 48, 64, 2, 2}, {64, 128, kFeatureDim, 2, 1}};
        for (int b = 0; b < 3; ++b) {
            const auto& k = blocks[b];
            const std::string name = "block" + std::to_string(b + 1);
            auto& spatial = trunk_.template emplace<nn::Conv3d<Scalar>>(
                name + ".0",
                nn::Conv3dOptions{k.in, k.mid, {1, 3, 3}, {1, k.spatial_stride, k.spatial_stride}, {0, 1, 1}, false},
                rng);
            if (b == 0) spatial.set_needs_input_grad(false);
            trunk_.template emplace<nn::BatchNorm<Scalar>>(name + ".1", k.mid);
            trunk_.template emplace<nn::ReLU<Scalar>>();
            trunk_.template emplace<nn::Conv3d<Scalar>>(
                name + ".3", nn::Conv3dOptions{k.mid, k.out, {3, 1, 1}, {k.temporal_stride, 1, 1}, {1, 0, 0}, false},
                rng);
            trunk_.template emplace<nn::BatchNorm<Scalar>>(name + ".4", k.out);
            trunk_.template emplace<nn::ReLU<Scalar>>();
        }
    }

    EncoderSpec spec_;
    nn::Sequential<Scalar> trunk_;
    nn::GlobalAvgPool<Scalar> pool_;
    nn::ParameterList<Scalar> params_;
};

/// Two-layer MLP h() followed by row-wise L2 normalization.
template <typename Scalar>
class ProjectionHead {
public:
    ProjectionHead(const ProjectionSpec& spec, std::uint64_t seed)
        : spec_(spec), rng_(seed), fc1_("head.0", spec.input_dim, spec.hidden_dim, rng_),
          fc2_("head.2", spec.hidden_dim, spec.output_dim, rng_) {
        fc1_.collect(params_);
        fc2_.collect(params_);
    }

    ProjectionHead(const ProjectionHead&) = delete;
    ProjectionHead& operator=(const ProjectionHead&) = delete;

    const ProjectionSpec& spec() const { return spec_; }

    /// Unit-norm rows. A zero output row raises DomainError instead of producing NaN.
    nn::Matrix<Scalar> forward(const nn::Matrix<Scalar>& features) {
        if (features.cols() != spec_.input_dim) {
            throw ContractError("project: expected " + std::to_string(spec_.input_dim) + " features, got " +
                                std::to_string(features.cols()));
        }
        hidden_ = fc1_.forward(features).cwiseMax(Scalar(0));
        raw_ = fc2_.forward(hidden_);
        normalized_ = normalize_rows(raw_);
        return normalized_;
    }

    nn::Matrix<Scalar> backward(const nn::Matrix<Scalar>& dz) {
        nn::Matrix<Scalar> draw = normalize_rows_backward<Scalar>(raw_, normalized_, dz);
        nn::Matrix<Scalar> dh = fc2_.backward(draw);
        dh = (hidden_.array() > Scalar(0)).select(dh, Scalar(0));
        return fc1_.backward(dh);
    }

    const nn::ParameterList<Scalar>& parameters() const { return params_; }

private:
    ProjectionSpec spec_;
    std::mt19937_64 rng_;
    nn::Linear<Scalar> fc1_, fc2_;
    nn::ParameterList<Scalar> params_;
    nn::Matrix<Scalar> hidden_, raw_, normalized_;
};

/// Single affine map to one logit; logit > 0 means ASD (label 1).
template <typename Scalar>
class Classifier {
public:
    Classifier(const ClassifierSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed), fc_("fc", spec.input_dim, 1, rng_) {
        fc_.collect(params_);
    }

    Classifier(const Classifier&) = delete;
    Classifier& operator=(const Classifier&) = delete;

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const nn::Matrix<Scalar>& features) {
        if (features.cols() != spec_.input_dim) {
            throw ContractError("classify: expected " + std::to_string(spec_.input_dim) + " features, got " +
                                std::to_string(features.cols()));
        }
        return fc_.forward(features).col(0);
    }

    nn::Matrix<Scalar> backward(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dlogits) {
        return fc_.backward(dlogits);
    }

    nn::Linear<Scalar>& linear() { return fc_; }
    const nn::ParameterList<Scalar>& parameters() const { return params_; }

private:
    ClassifierSpec spec_;
    std::mt19937_64 rng_;
    nn::Linear<Scalar> fc_;
    nn::ParameterList<Scalar> params_;
};

inline bool predicts_asd(double logit) { return logit > 0.0; }

/// Wraps projection output as a normalized batch ready for either contrastive loss.
template <typename Scalar>
EmbeddingBatch<Scalar> as_embedding_batch(nn::Matrix<Scalar> z, std::vector<int> origin_ids,
                                          std::optional<std::vector<int>> labels = std::nullopt) {
    EmbeddingBatch<Scalar> b;
    b.vectors = std::move(z);
    b.origin_ids = std::move(origin_ids);
    b.labels = std::move(labels);
    b.normalized = true;
    return b;
}

}  // namespace clv
