#include <gtest/gtest.h>

#include <cmath>

#include "driftbench/splits.hpp"
#include "driftbench/synth.hpp"
#include "driftbench/training.hpp"
#include "error_matchers.hpp"
#include "oracles.hpp"

namespace driftbench {
namespace {

using testing::KindOf;

LabeledData SyntheticData(std::size_t classes, double noise, std::size_t per_cell, std::uint64_t seed = 1) {
    SyntheticSpec spec;
    spec.n_domains = 3;
    spec.n_classes = classes;
    spec.samples_per_cell = per_cell;
    spec.feature_dim = std::max<std::size_t>(classes + 1, 8);
    spec.noise_scale = noise;
    const auto ds = Generate(spec, seed);
    return LabeledData::Build(ds.manifest, ds.features, Pooling::kMean);
}

TrainConfig SmallConfig() {
    TrainConfig c;
    c.hidden1 = 32;
    c.hidden2 = 16;
    c.epochs = 5;
    c.batch_size = 32;
    c.drop_prob = 0.2;
    c.seed = 3;
    return c;
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    MlpParams p = InitParams({4, 3, 2, 2}, 1);
    const MlpParams before = p;
    AdamState state = AdamState::For(p);
    AdamStep(p, MlpParams::Zeros(p.shape), state, TrainConfig{});
    EXPECT_TRUE(p == before);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    std::vector<double> w{0.5}, g{1.0}, m{0.0}, v{0.0};
    AdamUpdate(w, g, m, v, 1, cfg);
    EXPECT_NEAR(0.5 - w[0], 0.01, 1e-9);
}

TEST(Adam, DescendsOnSquare) {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    std::vector<double> w{1.0}, m{0.0}, v{0.0};
    double previous = std::abs(w[0]);
    for (std::uint64_t step = 1; step <= 10; ++step) {
        std::vector<double> grad{2.0 * w[0]};
        AdamUpdate(w, grad, m, v, step, cfg);
        EXPECT_LT(std::abs(w[0]), previous) << "step " << step;
        previous = std::abs(w[0]);
    }
}

TEST(Adam, NonFiniteGradientIsRejected) {
    std::vector<double> w{1.0}, g{std::nan("")}, m{0.0}, v{0.0};
    EXPECT_EQ(KindOf([&] { AdamUpdate(w, g, m, v, 1, TrainConfig{}); }), ErrorKind::kNonFinite);
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
    const LabeledData data = SyntheticData(3, 1.0, 10);
    TrainConfig cfg = SmallConfig();
    cfg.epochs = 0;
    const TrainResult r = Train(data, BuildLodoSplit(data.manifest, "domain0", 0.2, 0), cfg);
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(r.best_epoch, 0);
    EXPECT_TRUE(r.best == InitParams({8, 32, 16, 3}, cfg.seed));
}

TEST(Train, SameSeedSameRun) {
    const LabeledData data = SyntheticData(3, 1.0, 20);
    const SplitSpec split = BuildLodoSplit(data.manifest, "domain1", 0.24, 0);
    const TrainResult a = Train(data, split, SmallConfig());
    const TrainResult b = Train(data, split, SmallConfig());
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].val_top1, b.history[i].val_top1);
    }
    EXPECT_TRUE(a.best == b.best);
}

TEST(Train, LearnsSeparableNineClassData) {
    const LabeledData data = SyntheticData(9, 0.25, 20);
    const SplitSpec split = BuildLodoSplit(data.manifest, "domain2", 0.24, 0);
    TrainConfig cfg = SmallConfig();
    cfg.hidden1 = 128;
    cfg.hidden2 = 64;
    cfg.epochs = 30;
    cfg.drop_prob = 0.5;
    const TrainResult r = Train(data, split, cfg);
    const EvalReport report = Evaluate(r.best, data, split.test_ids);
    EXPECT_GE(report.overall_top1, 95.0);
    EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
}

TEST(Train, WithoutValidationKeepsLastEpoch) {
    const LabeledData data = SyntheticData(3, 1.0, 10);
    const SplitSpec split = BuildLodoSplit(data.manifest, "domain0", 0.0, 0);
    TrainConfig cfg = SmallConfig();
    cfg.epochs = 3;
    const TrainResult r = Train(data, split, cfg);
    EXPECT_EQ(r.best_epoch, 3);
    EXPECT_FALSE(r.history.back().val_top1.has_value());
}

TEST(Train, OverflowingStepReportsDivergence) {
    const LabeledData data = SyntheticData(3, 1.0, 10);
    const SplitSpec split = BuildLodoSplit(data.manifest, "domain0", 0.2, 0);
    TrainConfig cfg = SmallConfig();
    cfg.learning_rate = 1e300;
    EXPECT_EQ(KindOf([&] { Train(data, split, cfg); }), ErrorKind::kDivergence);
}

TEST(Train, RejectsOverlappingRoles) {
    const LabeledData data = SyntheticData(3, 1.0, 10);
    SplitSpec split = BuildLodoSplit(data.manifest, "domain0", 0.2, 0);
    split.test_ids.push_back(split.train_ids.front());
    EXPECT_EQ(KindOf([&] { Train(data, split, SmallConfig()); }), ErrorKind::kInvalidArgument);
    split = BuildLodoSplit(data.manifest, "domain0", 0.2, 0);
    split.train_ids.push_back("nope");
    EXPECT_EQ(KindOf([&] { Train(data, split, SmallConfig()); }), ErrorKind::kUnknownId);
}

TEST(Evaluate, ConstantPredictorCountsItsClass) {
    std::vector<ClipRecord> records;
    for (std::size_t i = 0; i < 10; ++i) {
        records.push_back({"c" + std::to_string(i), "d", i < 4 ? "a" : (i < 7 ? "b" : "c"), i});
    }
    FeatureSet fs;
    fs.n_clips = 10;
    fs.temporal_count = 1;
    fs.feature_dim = 2;
    fs.values.assign(20, 0.25f);
    const LabeledData data = LabeledData::Build(MakeManifest(records), fs, Pooling::kMean);
    MlpParams always_a = MlpParams::Zeros({2, 3, 3, 3});
    always_a.head_b(0) = 1.0;
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.clip_id);
    const EvalReport r = Evaluate(always_a, data, ids);
    EXPECT_DOUBLE_EQ(r.overall_top1, 40.0);
    EXPECT_EQ(r.confusion[1][0], 3u);
    EXPECT_EQ(KindOf([&] { Evaluate(always_a, data, std::vector<std::string>{}); }), ErrorKind::kInvalidArgument);
}

TEST(Evaluate, PerfectParametersGiveDiagonalConfusion) {
    SyntheticSpec spec;
    spec.n_domains = 2;
    spec.n_classes = 3;
    spec.feature_dim = 3;
    spec.noise_scale = 0.0;
    spec.samples_per_cell = 4;
    const auto ds = Generate(spec, 0);
    const LabeledData data = LabeledData::Build(ds.manifest, ds.features, Pooling::kMean);
    // Identity layers keep the class axis as the unique positive activation.
    MlpParams p = MlpParams::Zeros({3, 3, 3, 3});
    p.w1.setIdentity();
    p.w2.setIdentity();
    p.head_w.setIdentity();
    p.ln1_gain.setOnes();
    p.ln2_gain.setOnes();
    std::vector<std::string> ids;
    for (const auto& r : ds.manifest.records) ids.push_back(r.clip_id);
    const EvalReport r = Evaluate(p, data, ids);
    EXPECT_DOUBLE_EQ(r.overall_top1, 100.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.confusion[i][j], i == j ? 8u : 0u);
    }
    EXPECT_DOUBLE_EQ(r.per_domain_top1.at("domain0"), 100.0);
}

TEST(Evaluate, TopOneMatchesDirectCount) {
    const LabeledData data = SyntheticData(4, 2.0, 15);
    const MlpParams p = InitParams({8, 16, 8, 4}, 5);
    std::vector<std::string> ids;
    for (const auto& r : data.manifest.records) ids.push_back(r.clip_id);
    const EvalReport r = Evaluate(p, data, ids);
    const auto pred = Predict(Forward(p, data.inputs));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
    EXPECT_NEAR(r.overall_top1, 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size()), 1e-12);
    const EvalReport back = EvalReportFromJson(nlohmann::json::parse(ToJson(r).dump()));
    EXPECT_EQ(back.confusion, r.confusion);
    EXPECT_EQ(back.per_domain_count, r.per_domain_count);
}

TEST(Baseline, UniformRandom) {
    EXPECT_NEAR(UniformRandomBaseline(9), 11.11, 0.005);
    EXPECT_DOUBLE_EQ(UniformRandomBaseline(1), 100.0);
    EXPECT_NEAR(UniformRandomBaseline(60), 1.67, 0.005);
    EXPECT_EQ(KindOf([] { UniformRandomBaseline(0); }), ErrorKind::kInvalidArgument);
}

TEST(History, CsvLeavesMissingValidationBlank) {
    EXPECT_EQ(HistoryCsv({{1, 0.5, std::nullopt}, {2, 0.25, 80.0}}), "epoch,train_loss,val_top1\n1,0.5,\n2,0.25,80\n");
}

}  // namespace
}  // namespace driftbench
