#pragma once

// Adam with decoupled weight decay and SGD with momentum and coupled (L2 in
// gradient) weight decay. Both skip non-trainable parameters.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "clv/error.hpp"
#include "clv/nn/layers.hpp"

namespace clv {

enum class OptimizerKind { adam, sgd };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double momentum = 0.0;  // sgd only

    void validate() const {
        if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
        if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
        if (kind == OptimizerKind::sgd && !(momentum >= 0)) throw ConfigError("sgd momentum must be >= 0");
    }
};

template <typename Scalar>
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, nn::ParameterList<Scalar> params) : cfg_(cfg) {
        cfg_.validate();
        for (auto* p : params) {
            if (!p->trainable) continue;
            params_.push_back(p);
            first_.push_back(nn::Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
            second_.push_back(nn::Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->grad.setZero();
    }

    void step() {
        ++steps_;
        const auto lr = static_cast<Scalar>(cfg_.learning_rate);
        const auto wd = static_cast<Scalar>(cfg_.weight_decay);
        if (cfg_.kind == OptimizerKind::adam) {
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            const auto c1 = static_cast<Scalar>(1.0 - std::pow(b1, steps_));
            const auto c2 = static_cast<Scalar>(1.0 - std::pow(b2, steps_));
            for (std::size_t i = 0; i < params_.size(); ++i) {
                auto& p = *params_[i];
                p.value *= Scalar(1) - lr * wd;
                first_[i] = Scalar(b1) * first_[i] + Scalar(1 - b1) * p.grad;
                second_[i] = Scalar(b2) * second_[i] + Scalar(1 - b2) * p.grad.cwiseAbs2();
                p.value.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + Scalar(eps));
            }
        } else {
            const auto mom = static_cast<Scalar>(cfg_.momentum);
            for (std::size_t i = 0; i < params_.size(); ++i) {
                auto& p = *params_[i];
                const nn::Matrix<Scalar> g = p.grad + wd * p.value;
                first_[i] = steps_ == 1 ? g : (mom * first_[i] + g).eval();
                p.value -= lr * first_[i];
            }
        }
    }

    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    nn::ParameterList<Scalar> params_;
    std::vector<nn::Matrix<Scalar>> first_, second_;
    long steps_ = 0;
};

}  // namespace clv
