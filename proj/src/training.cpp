#include "clv/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "clv/data/sampling.hpp"
#include "clv/seed.hpp"

namespace clv {
namespace {

using Clock = std::chrono::steady_clock;

nn::ParameterList<float> concat(const nn::ParameterList<float>& a, const nn::ParameterList<float>& b) {
    nn::ParameterList<float> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::vector<std::size_t> iota_indices(std::size_t n, std::size_t from = 0) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), from);
    return idx;
}

[[noreturn]] void diverged(const RegimeConfig& r, int epoch, std::size_t batch, double value) {
    std::ostringstream msg;
    msg << to_string(r.method) << ": non-finite loss " << value << " at epoch " << epoch << ", batch " << batch
        << " (lr=" << r.optimizer.learning_rate << ", batch_size=" << r.batch_size << ")";
    throw DivergenceError(msg.str());
}

void require_both_classes(const ClipSet& data, const char* who) {
    if (data.count(Label::asd) == 0) throw ContractError(std::string(who) + ": training data has no ASD clips");
    if (data.count(Label::control) == 0) throw ContractError(std::string(who) + ": training data has no Control clips");
}

double accuracy(const Eigen::VectorXf& logits, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    int correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        correct += (predicts_asd(logits(static_cast<Eigen::Index>(i))) ? 1 : 0) == labels[i];
    }
    return 100.0 * correct / static_cast<double>(labels.size());
}

Eigen::VectorXd targets_of(const std::vector<int>& labels) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
    return y;
}

}  // namespace

// ------------------------------------------------------------------ config

std::string to_string(Method m) {
    switch (m) {
        case Method::binclassifier: return "binclassifier";
        case Method::simclr: return "simclr";
        case Method::supcon: return "supcon";
    }
    return "?";
}

std::string to_string(ProbeMode p) { return p == ProbeMode::frozen ? "frozen" : "finetune"; }
std::string to_string(DataScale s) { return s == DataScale::full ? "full" : "desk"; }

Method parse_method(std::string_view s) {
    if (s == "binclassifier") return Method::binclassifier;
    if (s == "simclr") return Method::simclr;
    if (s == "supcon") return Method::supcon;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected binclassifier, simclr or supcon)");
}

ProbeMode parse_probe(std::string_view s) {
    if (s == "frozen") return ProbeMode::frozen;
    if (s == "finetune") return ProbeMode::finetune;
    throw ConfigError("unknown probe mode '" + std::string(s) + "' (expected frozen or finetune)");
}

DataScale parse_scale(std::string_view s) {
    if (s == "full") return DataScale::full;
    if (s == "desk") return DataScale::desk;
    throw ConfigError("unknown data scale '" + std::string(s) + "' (expected full or desk)");
}

void RegimeConfig::validate() const {
    optimizer.validate();
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(loss.temperature > 0) || !std::isfinite(loss.temperature)) throw ConfigError("temperature must be > 0");
    if (probe_config.steps < 0) throw ConfigError("probe steps must be >= 0");
    if (!(probe_config.learning_rate >= 0)) throw ConfigError("probe learning rate must be >= 0");
    if (!(probe_config.weight_decay >= 0)) throw ConfigError("probe weight decay must be >= 0");
}

RegimeConfig default_regime(Method method, DataScale scale) {
    RegimeConfig r;
    r.method = method;
    r.optimizer.weight_decay = 1e-6;
    switch (method) {
        case Method::simclr:
            r.optimizer.kind = OptimizerKind::adam;
            r.optimizer.learning_rate = 1e-4;
            r.loss.temperature = kNtXentDefaultTemperature;
            break;
        case Method::supcon:
            r.optimizer.kind = OptimizerKind::sgd;
            r.optimizer.learning_rate = 1e-3;
            r.optimizer.momentum = 0.9;
            r.loss.temperature = kSupConDefaultTemperature;
            break;
        case Method::binclassifier:
            r.optimizer.kind = OptimizerKind::adam;
            r.optimizer.learning_rate = 1e-3;
            r.loss.temperature = kNtXentDefaultTemperature;
            break;
    }
    if (scale == DataScale::full) {
        r.epochs = 100;
        r.batch_size = 8;
    } else {
        r.epochs = 10;
        r.batch_size = 16;
    }
    return r;
}

nlohmann::ordered_json to_json(const RegimeConfig& r) {
    nlohmann::ordered_json j;
    j["method"] = to_string(r.method);
    j["optimizer"] = to_string(r.optimizer.kind);
    j["learning_rate"] = r.optimizer.learning_rate;
    j["weight_decay"] = r.optimizer.weight_decay;
    j["momentum"] = r.optimizer.momentum;
    j["epochs"] = r.epochs;
    j["batch_size"] = r.batch_size;
    j["temperature"] = r.loss.temperature;
    j["empty_positive"] = r.loss.empty_positive == EmptyPositivePolicy::skip ? "skip" : "error";
    j["seed"] = r.seed;
    j["probe"] = to_string(r.probe);
    j["probe_steps"] = r.probe_config.steps;
    j["probe_learning_rate"] = r.probe_config.learning_rate;
    j["probe_weight_decay"] = r.probe_config.weight_decay;
    return j;
}

RegimeConfig regime_from_json(const nlohmann::ordered_json& j) {
    RegimeConfig r = default_regime(parse_method(j.at("method").get<std::string>()));
    r.optimizer.kind = parse_optimizer(j.at("optimizer").get<std::string>());
    r.optimizer.learning_rate = j.at("learning_rate").get<double>();
    r.optimizer.weight_decay = j.at("weight_decay").get<double>();
    r.optimizer.momentum = j.at("momentum").get<double>();
    r.epochs = j.at("epochs").get<int>();
    r.batch_size = j.at("batch_size").get<int>();
    r.loss.temperature = j.at("temperature").get<double>();
    r.loss.empty_positive =
        j.at("empty_positive").get<std::string>() == "error" ? EmptyPositivePolicy::error : EmptyPositivePolicy::skip;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.probe = parse_probe(j.at("probe").get<std::string>());
    r.probe_config.steps = j.at("probe_steps").get<int>();
    r.probe_config.learning_rate = j.at("probe_learning_rate").get<double>();
    r.probe_config.weight_decay = j.at("probe_weight_decay").get<double>();
    r.validate();
    return r;
}

// ----------------------------------------------------------------- network

Network::Network(const EncoderSpec& spec, std::uint64_t seed)
    : encoder(spec, derive_seed(seed, 1)),
      head(ProjectionSpec{}, derive_seed(seed, 2)),
      classifier(ClassifierSpec{}, derive_seed(seed, 3)) {}

nn::ParameterList<float> Network::all_parameters() const {
    return concat(concat(encoder.parameters(), head.parameters()), classifier.parameters());
}

std::uint64_t Network::checksum(const nn::ParameterList<float>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        const auto n = static_cast<std::size_t>(p->value.size()) * sizeof(float);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// ---------------------------------------------------------------- batching

std::vector<std::vector<std::size_t>> epoch_batches(Method method, const std::vector<int>& labels, int batch_size,
                                                    std::mt19937_64& rng, std::size_t min_size) {
    if (batch_size < 1) throw ContractError("epoch_batches: batch_size must be >= 1");
    std::vector<std::size_t> order;
    if (method == Method::supcon) {
        // Spread each label evenly over the epoch: item j of a label with n_l
        // items sits at (j + 0.5) / n_l, so every window mixes both labels.
        std::vector<std::size_t> by_label[2];
        for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i] != 0 ? 1 : 0].push_back(i);
        std::vector<std::pair<double, std::size_t>> keyed;
        for (int l = 0; l < 2; ++l) {
            auto& v = by_label[l];
            std::shuffle(v.begin(), v.end(), rng);
            for (std::size_t j = 0; j < v.size(); ++j) {
                keyed.emplace_back((static_cast<double>(j) + 0.5) / static_cast<double>(v.size()) + 1e-9 * l, v[j]);
            }
        }
        std::sort(keyed.begin(), keyed.end());
        for (const auto& [k, i] : keyed) order.push_back(i);
    } else {
        order = iota_indices(labels.size());
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<std::vector<std::size_t>> batches;
    const auto bs = static_cast<std::size_t>(batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<std::size_t> b(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(std::min(order.size(), start + bs)));
        if (b.size() >= min_size) batches.push_back(std::move(b));
    }
    return batches;
}

// ---------------------------------------------------------------- training

TrainHistory pretrain_contrastive(const RegimeConfig& regime, const ClipSet& train, Network& net,
                                  const EpochCallback& on_epoch) {
    regime.validate();
    if (regime.method == Method::binclassifier) {
        throw ConfigError("pretrain_contrastive: method must be simclr or supcon");
    }
    if (train.size() < 2) throw ContractError("pretrain_contrastive: need at least 2 training clips");
    if (regime.method == Method::supcon) require_both_classes(train, "supcon pretraining");

    Optimizer<float> opt(regime.optimizer, concat(net.encoder.parameters(), net.head.parameters()));
    std::mt19937_64 rng(derive_seed(regime.seed, 11));
    TrainHistory hist;
    for (int epoch = 0; epoch < regime.epochs; ++epoch) {
        const auto t0 = Clock::now();
        const auto batches = epoch_batches(regime.method, train.labels, regime.batch_size, rng, 2);
        if (batches.empty()) throw ContractError("pretrain_contrastive: batch_size leaves no batch with 2 clips");
        double sum = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            opt.zero_grad();
            const ViewBatch vb = make_view_batch(train.pointers(batches[b]), train.labels_of(batches[b]));
            nn::Matrix<float> z;
            try {
                z = net.head.forward(net.encoder.encode(vb.views, Mode::train));
            } catch (const DomainError&) {
                // Non-finite or vanished projections: the weights have blown up.
                diverged(regime, epoch, b, std::numeric_limits<double>::quiet_NaN());
            }
            std::optional<std::vector<int>> labels;
            if (regime.method == Method::supcon) labels = vb.labels;
            const auto eb = as_embedding_batch<double>(z.cast<double>(), vb.origin_ids, labels);
            const auto res = regime.method == Method::simclr ? nt_xent_loss(eb, regime.loss) : supcon_loss(eb, regime.loss);
            if (!std::isfinite(res.value)) diverged(regime, epoch, b, res.value);
            net.encoder.backward(net.head.backward(res.gradient.cast<float>()));
            opt.step();
            sum += res.value;
        }
        hist.epoch_loss.push_back(sum / static_cast<double>(batches.size()));
        hist.epoch_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        if (on_epoch) on_epoch(epoch, hist.epoch_loss.back());
    }
    return hist;
}

TrainHistory train_baseline(const RegimeConfig& regime, const ClipSet& train, Network& net,
                            const EpochCallback& on_epoch) {
    regime.validate();
    if (train.empty()) throw ContractError("train_baseline: empty training set");
    require_both_classes(train, "binary classifier training");

    Optimizer<float> opt(regime.optimizer, concat(net.encoder.parameters(), net.classifier.parameters()));
    std::mt19937_64 rng(derive_seed(regime.seed, 12));
    TrainHistory hist;
    for (int epoch = 0; epoch < regime.epochs; ++epoch) {
        const auto t0 = Clock::now();
        const auto batches = epoch_batches(Method::binclassifier, train.labels, regime.batch_size, rng, 1);
        double sum = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            opt.zero_grad();
            const auto& idx = batches[b];
            const nn::Matrix<float> features = net.encoder.encode(stack_clips(train.pointers(idx)), Mode::train);
            const Eigen::VectorXd logits = net.classifier.forward(features).cast<double>();
            const Eigen::VectorXd y = targets_of(train.labels_of(idx));
            const double value = binary_cross_entropy(logits, y);
            if (!std::isfinite(value)) diverged(regime, epoch, b, value);
            const Eigen::VectorXf g = binary_cross_entropy_gradient(logits, y).cast<float>();
            net.encoder.backward(net.classifier.backward(g));
            opt.step();
            sum += value;
        }
        hist.epoch_loss.push_back(sum / static_cast<double>(batches.size()));
        hist.epoch_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        if (on_epoch) on_epoch(epoch, hist.epoch_loss.back());
    }
    return hist;
}

nn::Matrix<float> extract_features(Network& net, const ClipSet& clips, int chunk) {
    if (chunk < 1) throw ContractError("extract_features: chunk must be >= 1");
    nn::Matrix<float> out(static_cast<Eigen::Index>(clips.size()), kFeatureDim);
    for (std::size_t start = 0; start < clips.size(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(chunk), clips.size() - start);
        out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) =
            net.encoder.encode(stack_clips(clips.pointers(iota_indices(n, start))), Mode::inference);
    }
    return out;
}

Eigen::VectorXf predict_logits(Network& net, const ClipSet& clips, int chunk) {
    if (clips.empty()) return Eigen::VectorXf();
    return net.classifier.forward(extract_features(net, clips, chunk));
}

ProbeResult fit_probe(const RegimeConfig& regime, const ClipSet& train, Network& net) {
    regime.validate();
    require_both_classes(train, "probe");
    ProbeResult out;
    if (regime.probe == ProbeMode::finetune) {
        RegimeConfig ft = regime;
        ft.method = Method::binclassifier;
        ft.optimizer = default_regime(Method::binclassifier).optimizer;
        const auto hist = train_baseline(ft, train, net);
        out.loss = hist.epoch_loss;
        out.steps = ft.epochs;
        out.train_accuracy = accuracy(predict_logits(net, train), train.labels);
        return out;
    }

    // Frozen: logistic regression on standardized features, folded back into
    // the classifier's affine map afterwards.
    const Eigen::MatrixXd f = extract_features(net, train).cast<double>();
    const Eigen::RowVectorXd mean = f.colwise().mean();
    Eigen::RowVectorXd scale = ((f.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (!(scale(j) > 1e-8)) scale(j) = 1.0;
    }
    const Eigen::MatrixXd x = (f.rowwise() - mean).array().rowwise() / scale.array();
    const Eigen::VectorXd y = targets_of(train.labels);

    nn::Parameter<double> w("probe.weight", Eigen::MatrixXd::Zero(x.cols(), 1));
    nn::Parameter<double> b("probe.bias", Eigen::MatrixXd::Zero(1, 1));
    OptimizerConfig oc;
    oc.kind = OptimizerKind::adam;
    oc.learning_rate = regime.probe_config.learning_rate;
    oc.weight_decay = regime.probe_config.weight_decay;
    Optimizer<double> opt(oc, {&w, &b});
    for (int step = 0; step < regime.probe_config.steps; ++step) {
        opt.zero_grad();
        const Eigen::VectorXd logits = (x * w.value.col(0)).array() + b.value(0, 0);
        const double value = binary_cross_entropy(logits, y);
        if (!std::isfinite(value)) diverged(regime, 0, static_cast<std::size_t>(step), value);
        const Eigen::VectorXd g = binary_cross_entropy_gradient(logits, y);
        w.grad.col(0) = x.transpose() * g;
        b.grad(0, 0) = g.sum();
        opt.step();
        out.loss.push_back(value);
    }
    out.steps = regime.probe_config.steps;

    auto& fc = net.classifier.linear();
    const Eigen::RowVectorXd weff = w.value.col(0).transpose().array() / scale.array();
    fc.weight().value = weff.cast<float>();
    fc.bias().value(0, 0) = static_cast<float>(b.value(0, 0) - weff.dot(mean));
    out.train_accuracy = accuracy(net.classifier.forward(f.cast<float>()), train.labels);
    return out;
}

TrainOutcome train_method(const RegimeConfig& regime, const ClipSet& train, Network& net, const EpochCallback& on_epoch) {
    TrainOutcome out;
    if (regime.method == Method::binclassifier) {
        out.history = train_baseline(regime, train, net, on_epoch);
        out.probe.train_accuracy = accuracy(predict_logits(net, train), train.labels);
        return out;
    }
    out.history = pretrain_contrastive(regime, train, net, on_epoch);
    out.probe = fit_probe(regime, train, net);
    return out;
}

}  // namespace clv
