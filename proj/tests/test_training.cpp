#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "clv/data/sampling.hpp"
#include "clv/training.hpp"

namespace clv {
namespace {

EncoderSpec tiny_spec() {
    EncoderSpec s;
    s.architecture = Architecture::tiny3d;
    return s;
}

ClipSet synthetic_set(int subjects, int clips, double separation, std::uint64_t seed) {
    SyntheticOptions o;
    o.n_subjects = subjects;
    o.clips_per_subject = clips;
    o.separation = separation;
    o.seed = seed;
    return clip_set_from_synthetic(render_synthetic(o), default_clip_length(DatasetId::synth), PreprocessConfig{});
}

RegimeConfig quick(Method m, int epochs, int batch = 8) {
    RegimeConfig r = default_regime(m, DataScale::desk);
    r.epochs = epochs;
    r.batch_size = batch;
    r.seed = 5;
    return r;
}

std::vector<nn::Matrix<float>> snapshot(const nn::ParameterList<float>& params) {
    std::vector<nn::Matrix<float>> out;
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

bool equal(const std::vector<nn::Matrix<float>>& a, const nn::ParameterList<float>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!(a[i].array() == params[i]->value.array()).all()) return false;
    }
    return true;
}

// ------------------------------------------------------------------ config

TEST(DefaultRegime, SimclrUsesAdam) {
    const auto r = default_regime(Method::simclr);
    EXPECT_EQ(r.optimizer.kind, OptimizerKind::adam);
    EXPECT_DOUBLE_EQ(r.optimizer.learning_rate, 1e-4);
    EXPECT_DOUBLE_EQ(r.optimizer.weight_decay, 1e-6);
    EXPECT_DOUBLE_EQ(r.loss.temperature, 0.5);
    EXPECT_EQ(r.probe, ProbeMode::frozen);
}

TEST(DefaultRegime, SupconUsesSgdWithMomentum) {
    const auto r = default_regime(Method::supcon);
    EXPECT_EQ(r.optimizer.kind, OptimizerKind::sgd);
    EXPECT_DOUBLE_EQ(r.optimizer.learning_rate, 1e-3);
    EXPECT_DOUBLE_EQ(r.optimizer.weight_decay, 1e-6);
    EXPECT_DOUBLE_EQ(r.optimizer.momentum, 0.9);
    EXPECT_DOUBLE_EQ(r.loss.temperature, 0.1);
}

TEST(DefaultRegime, BinclassifierSharesSupconRates) {
    const auto r = default_regime(Method::binclassifier);
    EXPECT_EQ(r.optimizer.kind, OptimizerKind::adam);
    EXPECT_DOUBLE_EQ(r.optimizer.learning_rate, 1e-3);
    EXPECT_DOUBLE_EQ(r.optimizer.weight_decay, 1e-6);
}

TEST(DefaultRegime, EpochsAndBatchByScale) {
    EXPECT_EQ(default_regime(Method::simclr, DataScale::full).epochs, 100);
    EXPECT_EQ(default_regime(Method::simclr, DataScale::full).batch_size, 8);
    EXPECT_EQ(default_regime(Method::simclr, DataScale::desk).epochs, 10);
    EXPECT_EQ(default_regime(Method::simclr, DataScale::desk).batch_size, 16);
}

TEST(DefaultRegime, UnknownNamesRaiseConfigError) {
    EXPECT_THROW(parse_method("moco"), ConfigError);
    EXPECT_THROW(parse_probe("partial"), ConfigError);
    EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

TEST(RegimeConfig, JsonRoundTrip) {
    RegimeConfig r = default_regime(Method::supcon, DataScale::desk);
    r.seed = 1234567890123ULL;
    r.probe = ProbeMode::finetune;
    r.loss.temperature = 0.07;
    const auto back = regime_from_json(to_json(r));
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
}

TEST(RegimeConfig, ValidateRejectsBadValues) {
    RegimeConfig r = default_regime(Method::simclr);
    r.loss.temperature = 0;
    EXPECT_THROW(r.validate(), ConfigError);
    r = default_regime(Method::simclr);
    r.batch_size = 0;
    EXPECT_THROW(r.validate(), ConfigError);
    r = default_regime(Method::supcon);
    r.optimizer.momentum = -0.1;
    EXPECT_THROW(r.validate(), ConfigError);
}

// --------------------------------------------------------------- optimizer

TEST(Optimizer, ZeroLearningRateChangesNothing) {
    Network net(tiny_spec(), 1);
    const auto params = net.all_parameters();
    for (auto* p : params) p->grad.setConstant(0.5f);
    for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::sgd}) {
        OptimizerConfig cfg{kind, 0.0, 1e-2, 0.9};
        const auto before = snapshot(params);
        Optimizer<float> opt(cfg, params);
        opt.step();
        EXPECT_TRUE(equal(before, params)) << to_string(kind);
    }
}

TEST(Optimizer, WeightDecayShrinksByExactFactor) {
    for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::sgd}) {
        nn::Parameter<double> p("p", Eigen::MatrixXd::Random(4, 3));
        const Eigen::MatrixXd before = p.value;
        const double lr = 0.1, wd = 0.01;
        Optimizer<double> opt({kind, lr, wd, 0.9}, {&p});
        opt.step();
        EXPECT_TRUE(p.value.isApprox(before * (1 - lr * wd), 1e-15)) << to_string(kind);
    }
}

TEST(Optimizer, SkipsNonTrainableParameters) {
    nn::Parameter<float> frozen("running_mean", nn::Matrix<float>::Ones(2, 1), false);
    frozen.grad.setConstant(1.0f);
    Optimizer<float> opt({OptimizerKind::sgd, 1.0, 0.0, 0.0}, {&frozen});
    opt.step();
    EXPECT_TRUE((frozen.value.array() == 1.0f).all());
}

// ---------------------------------------------------------------- batching

TEST(EpochBatches, CoversEveryClipOnce) {
    std::mt19937_64 rng(1);
    std::vector<int> labels(23, 0);
    for (int i = 0; i < 9; ++i) labels[static_cast<std::size_t>(i)] = 1;
    for (Method m : {Method::simclr, Method::supcon, Method::binclassifier}) {
        const auto batches = epoch_batches(m, labels, 5, rng);
        std::vector<std::size_t> all;
        for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> want(23);
        std::iota(want.begin(), want.end(), 0);
        EXPECT_EQ(all, want) << to_string(m);
    }
}

TEST(EpochBatches, SupconBatchesHoldBothLabels) {
    std::mt19937_64 rng(3);
    std::vector<int> labels(40, 0);
    for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(i * 4)] = 1;
    for (int rep = 0; rep < 20; ++rep) {
        for (const auto& b : epoch_batches(Method::supcon, labels, 8, rng)) {
            std::set<int> seen;
            for (auto i : b) seen.insert(labels[i]);
            EXPECT_EQ(seen.size(), 2u);
        }
    }
}

TEST(EpochBatches, DropsUndersizedBatches) {
    std::mt19937_64 rng(0);
    const std::vector<int> labels(9, 0);
    const auto batches = epoch_batches(Method::simclr, labels, 4, rng, 2);
    ASSERT_EQ(batches.size(), 2u);
    EXPECT_EQ(batches[0].size(), 4u);
}

// ----------------------------------------------------------------- regimes

TEST(Pretrain, ZeroEpochsLeavesEverythingBitEqual) {
    const auto data = synthetic_set(4, 2, 0.5, 0);
    for (Method m : {Method::simclr, Method::supcon}) {
        Network net(tiny_spec(), 2);
        const auto before = Network::checksum(net.all_parameters());
        const auto hist = pretrain_contrastive(quick(m, 0), data, net);
        EXPECT_TRUE(hist.epoch_loss.empty());
        EXPECT_EQ(Network::checksum(net.all_parameters()), before);
    }
}

TEST(Baseline, ZeroEpochsLeavesEverythingBitEqual) {
    const auto data = synthetic_set(4, 2, 0.5, 0);
    Network net(tiny_spec(), 2);
    const auto before = Network::checksum(net.all_parameters());
    train_baseline(quick(Method::binclassifier, 0), data, net);
    EXPECT_EQ(Network::checksum(net.all_parameters()), before);
}

TEST(Pretrain, ViewOrderDoesNotChangeBatchLoss) {
    const auto data = synthetic_set(4, 1, 0.5, 1);
    Network net(tiny_spec(), 3);
    std::vector<std::size_t> idx{0, 1, 2, 3};
    const ViewBatch vb = make_view_batch(data.pointers(idx), data.labels_of(idx));
    const nn::Matrix<float> z = net.head.forward(net.encoder.encode(vb.views, Mode::inference));
    const auto base = nt_xent_loss(as_embedding_batch<double>(z.cast<double>(), vb.origin_ids), LossConfig{});
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<Eigen::Index> perm(8);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd zp(8, z.cols());
        std::vector<int> origins(8);
        for (int r = 0; r < 8; ++r) {
            zp.row(r) = z.row(perm[static_cast<std::size_t>(r)]).cast<double>();
            origins[static_cast<std::size_t>(r)] = vb.origin_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
        }
        const auto shuffled = nt_xent_loss(as_embedding_batch<double>(zp, origins), LossConfig{});
        EXPECT_NEAR(shuffled.value, base.value, 1e-6);
    }
}

TEST(Pretrain, DeterministicForFixedSeed) {
    const auto data = synthetic_set(4, 3, 0.5, 2);
    std::vector<double> hist[2];
    std::uint64_t sums[2];
    for (int run = 0; run < 2; ++run) {
        Network net(tiny_spec(), 7);
        hist[run] = pretrain_contrastive(quick(Method::simclr, 2, 4), data, net).epoch_loss;
        sums[run] = Network::checksum(net.all_parameters());
    }
    EXPECT_EQ(hist[0], hist[1]);
    EXPECT_EQ(sums[0], sums[1]);
}

TEST(Pretrain, SimclrLossDecreases) {
    const auto data = synthetic_set(8, 4, 0.5, 3);
    Network net(tiny_spec(), 4);
    const auto hist = pretrain_contrastive(quick(Method::simclr, 5, 16), data, net);
    ASSERT_EQ(hist.epoch_loss.size(), 5u);
    for (double v : hist.epoch_loss) EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(hist.epoch_loss.back(), hist.epoch_loss.front());
}

TEST(Pretrain, SupconLossDecreases) {
    const auto data = synthetic_set(8, 4, 0.5, 3);
    Network net(tiny_spec(), 4);
    const auto hist = pretrain_contrastive(quick(Method::supcon, 5, 16), data, net);
    for (double v : hist.epoch_loss) EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(hist.epoch_loss.back(), hist.epoch_loss.front());
}

TEST(Pretrain, DivergenceNamesLearningRateAndEpoch) {
    const auto data = synthetic_set(4, 2, 0.5, 0);
    Network net(tiny_spec(), 1);
    auto r = quick(Method::simclr, 3, 4);
    r.optimizer.learning_rate = 1e30;
    try {
        pretrain_contrastive(r, data, net);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("lr="), std::string::npos);
        EXPECT_NE(msg.find("epoch"), std::string::npos);
    }
}

TEST(Pretrain, RejectsBinclassifier) {
    const auto data = synthetic_set(2, 2, 0.5, 0);
    Network net(tiny_spec(), 1);
    EXPECT_THROW(pretrain_contrastive(quick(Method::binclassifier, 1), data, net), ConfigError);
}

TEST(Baseline, TrainingLossDecreases) {
    const auto data = synthetic_set(8, 4, 1.0, 4);
    Network net(tiny_spec(), 5);
    const auto hist = train_baseline(quick(Method::binclassifier, 20, 16), data, net);
    ASSERT_EQ(hist.epoch_loss.size(), 20u);
    EXPECT_LT(hist.epoch_loss.back(), hist.epoch_loss.front());
}

TEST(Baseline, DeterministicForFixedSeed) {
    const auto data = synthetic_set(4, 3, 1.0, 4);
    Eigen::VectorXf logits[2];
    for (int run = 0; run < 2; ++run) {
        Network net(tiny_spec(), 6);
        train_baseline(quick(Method::binclassifier, 2, 4), data, net);
        logits[run] = predict_logits(net, data);
    }
    EXPECT_TRUE((logits[0].array() == logits[1].array()).all());
}

// ------------------------------------------------------------------- probe

TEST(Probe, FrozenModeLeavesEncoderUntouched) {
    const auto data = synthetic_set(4, 3, 0.5, 5);
    Network net(tiny_spec(), 8);
    const auto enc = Network::checksum(net.encoder.parameters());
    const auto head = Network::checksum(net.head.parameters());
    const auto cls = Network::checksum(net.classifier.parameters());
    fit_probe(quick(Method::simclr, 1), data, net);
    EXPECT_EQ(Network::checksum(net.encoder.parameters()), enc);
    EXPECT_EQ(Network::checksum(net.head.parameters()), head);
    EXPECT_NE(Network::checksum(net.classifier.parameters()), cls);
}

TEST(Probe, FinetuneModeUpdatesEncoder) {
    const auto data = synthetic_set(4, 3, 0.5, 5);
    Network net(tiny_spec(), 8);
    const auto enc = Network::checksum(net.encoder.parameters());
    auto r = quick(Method::simclr, 1);
    r.probe = ProbeMode::finetune;
    fit_probe(r, data, net);
    EXPECT_NE(Network::checksum(net.encoder.parameters()), enc);
}

TEST(Probe, SeparableFeaturesReachFullAccuracyWithin200Steps) {
    // Clips that are constant +c or -c per class give well separated features.
    ClipSet data;
    std::mt19937_64 rng(1);
    std::normal_distribution<float> noise(0.0f, 0.3f);
    for (int i = 0; i < 24; ++i) {
        Clip c;
        c.frames = 8;
        c.height = 32;
        c.width = 32;
        c.data.resize(3, 8 * 32 * 32);
        const float level = i % 2 ? 1.0f : -1.0f;
        for (Eigen::Index k = 0; k < c.data.size(); ++k) c.data.data()[k] = level + noise(rng);
        data.push_back(std::move(c), i % 2 ? Label::asd : Label::control, "Reach", "s" + std::to_string(i), std::to_string(i));
    }
    Network net(tiny_spec(), 9);
    auto r = quick(Method::simclr, 0);
    r.probe_config.steps = 200;
    const auto res = fit_probe(r, data, net);
    EXPECT_DOUBLE_EQ(res.train_accuracy, 100.0);
    EXPECT_LT(res.loss.back(), res.loss.front());
}

TEST(Probe, SingleClassDataNamesMissingClass) {
    auto data = synthetic_set(2, 2, 0.5, 0);
    ClipSet asd_only;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] == 1) {
            asd_only.push_back(data.clips[i], Label::asd, data.action_classes[i], data.subject_ids[i], data.clip_ids[i]);
        }
    }
    Network net(tiny_spec(), 1);
    try {
        fit_probe(quick(Method::simclr, 0), asd_only, net);
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("Control"), std::string::npos);
    }
}

TEST(Probe, FoldedStandardizationMatchesLogits) {
    const auto data = synthetic_set(4, 3, 0.5, 6);
    Network net(tiny_spec(), 10);
    const auto res = fit_probe(quick(Method::simclr, 0), data, net);
    const Eigen::VectorXf logits = predict_logits(net, data);
    int correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) correct += (logits(static_cast<Eigen::Index>(i)) > 0) == (data.labels[i] == 1);
    EXPECT_DOUBLE_EQ(res.train_accuracy, 100.0 * correct / static_cast<double>(data.size()));
}

}  // namespace
}  // namespace clv
