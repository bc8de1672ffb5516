#pragma once

// The three training regimes (end-to-end BCE, self-supervised contrastive,
// supervised contrastive) and the linear probe fitted on top of a
// contrastively pretrained encoder.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "clv/data/clip_set.hpp"
#include "clv/losses.hpp"
#include "clv/models.hpp"
#include "clv/optim.hpp"

namespace clv {

enum class Method { binclassifier, simclr, supcon };
enum class ProbeMode { frozen, finetune };
/// `full`: real datasets (100 epochs, batch 8); `desk`: tiny encoder on synthetic data (10 epochs, batch 16).
enum class DataScale { full, desk };

std::string to_string(Method m);
std::string to_string(ProbeMode p);
std::string to_string(DataScale s);
Method parse_method(std::string_view s);
ProbeMode parse_probe(std::string_view s);
DataScale parse_scale(std::string_view s);

/// Logistic-regression probe on frozen, standardized features (full batch, Adam).
struct ProbeConfig {
    int steps = 300;
    double learning_rate = 0.05;
    double weight_decay = 0.0;
};

struct RegimeConfig {
    Method method = Method::simclr;
    OptimizerConfig optimizer;
    int epochs = 100;
    int batch_size = 8;
    LossConfig loss;
    std::uint64_t seed = 0;
    ProbeMode probe = ProbeMode::frozen;
    ProbeConfig probe_config;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

RegimeConfig default_regime(Method method, DataScale scale = DataScale::full);

nlohmann::ordered_json to_json(const RegimeConfig& r);
RegimeConfig regime_from_json(const nlohmann::ordered_json& j);

/// Encoder e(), projection head h() and classifier, seeded from one value.
class Network {
public:
    Network(const EncoderSpec& spec, std::uint64_t seed);

    Encoder<float> encoder;
    ProjectionHead<float> head;
    Classifier<float> classifier;

    /// Encoder, head and classifier parameters in a fixed order.
    nn::ParameterList<float> all_parameters() const;
    /// FNV-1a over the raw bytes of the given parameters.
    static std::uint64_t checksum(const nn::ParameterList<float>& params);
};

struct TrainHistory {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_seconds;
    int skipped_batches = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Batches of clip indices for one epoch. supcon alternates labels so every
/// batch holds both classes whenever the data allows it; batches with fewer
/// than `min_size` clips are dropped.
std::vector<std::vector<std::size_t>> epoch_batches(Method method, const std::vector<int>& labels, int batch_size,
                                                    std::mt19937_64& rng, std::size_t min_size = 1);

/// Trains e() and h() jointly with nt_xent (simclr) or supcon. Throws
/// DivergenceError on a non-finite loss.
TrainHistory pretrain_contrastive(const RegimeConfig& regime, const ClipSet& train, Network& net,
                                  const EpochCallback& on_epoch = {});

/// Trains e() and the classifier end to end with BCE.
TrainHistory train_baseline(const RegimeConfig& regime, const ClipSet& train, Network& net,
                            const EpochCallback& on_epoch = {});

struct ProbeResult {
    double train_accuracy = 0;
    int steps = 0;
    std::vector<double> loss;
};

/// Fits the classifier on top of e() (h() is not used). Frozen mode leaves
/// every encoder parameter and statistic untouched; finetune mode retrains
/// e() and the classifier end to end with the baseline optimizer settings.
/// Throws ContractError naming the missing class on single-class data.
ProbeResult fit_probe(const RegimeConfig& regime, const ClipSet& train, Network& net);

/// Inference-mode features, processed in chunks; one row per clip.
nn::Matrix<float> extract_features(Network& net, const ClipSet& clips, int chunk = 32);
/// Inference-mode logits; logit > 0 predicts ASD.
Eigen::VectorXf predict_logits(Network& net, const ClipSet& clips, int chunk = 32);

/// Runs the regime's full training pipeline: baseline training, or
/// contrastive pretraining followed by the probe.
struct TrainOutcome {
    TrainHistory history;
    ProbeResult probe;
};
TrainOutcome train_method(const RegimeConfig& regime, const ClipSet& train, Network& net,
                          const EpochCallback& on_epoch = {});

}  // namespace clv
