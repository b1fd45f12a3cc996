#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kjm/cnn.hpp"
#include "kjm/error.hpp"

using namespace kjm;
using namespace kjm::cnn;

namespace {

const char* kTiny = "in1x6x6,conv2k3s1p0,pool2s2,fc4,out";

std::vector<Tensor> random_inputs(std::size_t n, std::size_t size, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> d(0.0f, 255.0f);
    std::vector<Tensor> out(n, Tensor(size));
    for (auto& x : out) {
        for (auto& v : x) v = d(gen);
    }
    return out;
}

std::vector<double> random_targets(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = d(gen);
    return out;
}

template <class Fn>
ErrorCode code_of(Fn fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

}  // namespace

TEST(Architecture, DeskShapes) {
    const auto arch = ArchitectureSpec::desk();
    const auto shapes = chain_shapes(arch, 59);
    ASSERT_EQ(shapes.size(), 6u);
    EXPECT_EQ(shapes[0], (Shape{16, 56, 56}));
    EXPECT_EQ(shapes[1], (Shape{16, 27, 27}));
    EXPECT_EQ(shapes[2], (Shape{32, 27, 27}));
    EXPECT_EQ(shapes[3], (Shape{32, 13, 13}));
    EXPECT_EQ(shapes[5], (Shape{59, 1, 1}));
    const auto w = weight_shapes(arch, 59);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_EQ(w[0], (std::vector<int>{16, 3, 7, 7}));
    EXPECT_EQ(w[2], (std::vector<int>{32 * 13 * 13, 256}));
    EXPECT_EQ(w[3], (std::vector<int>{256, 59}));
}

TEST(Architecture, ReferenceShapes) {
    const auto arch = ArchitectureSpec::reference();
    const auto shapes = chain_shapes(arch, 10);
    EXPECT_EQ(shapes[0], (Shape{96, 55, 55}));
    EXPECT_EQ(shapes[1], (Shape{96, 27, 27}));
    EXPECT_EQ(shapes[3], (Shape{256, 13, 13}));
    EXPECT_EQ(shapes[7], (Shape{256, 6, 6}));
    const auto w = weight_shapes(arch, 10);
    EXPECT_EQ(w[5], (std::vector<int>{9216, 4096}));
    EXPECT_EQ(w.back(), (std::vector<int>{4096, 10}));
}

TEST(Architecture, DescribeParsesBack) {
    for (const auto& arch : {ArchitectureSpec::desk(), ArchitectureSpec::reference(), ArchitectureSpec::parse(kTiny)}) {
        EXPECT_EQ(ArchitectureSpec::parse(arch.describe()), arch);
    }
    EXPECT_EQ(ArchitectureSpec::parse("desk"), ArchitectureSpec::desk());
}

TEST(Architecture, RejectsBadChains) {
    EXPECT_EQ(code_of([] { chain_shapes(ArchitectureSpec::parse("in1x4x4,conv2k5s1p0,out"), 1); }),
              ErrorCode::IncompatibleArchitecture);
    EXPECT_EQ(code_of([] { chain_shapes(ArchitectureSpec::parse("in1x8x8,fc4,conv2k3s1p0,out"), 1); }),
              ErrorCode::IncompatibleArchitecture);
    EXPECT_EQ(code_of([] { ArchitectureSpec::parse("in1x8x8,banana,out"); }), ErrorCode::IncompatibleArchitecture);
    EXPECT_EQ(code_of([] { chain_shapes(ArchitectureSpec::parse("in1x8x8,fc4"), 1); }),
              ErrorCode::IncompatibleArchitecture);
}

TEST(Loss, EuclideanHandCase) {
    const std::vector<double> pred = {1.0, 2.0};
    const std::vector<double> target = {0.0, 0.0};
    const auto r = euclidean_loss(pred, target);
    EXPECT_DOUBLE_EQ(r.loss, 2.5);
    EXPECT_EQ(r.grad, pred);
    EXPECT_EQ(code_of([&] { euclidean_loss(pred, std::vector<double>{1.0}); }), ErrorCode::ShapeMismatch);
}

TEST(Net, ZeroWeightsPredictOutputBias) {
    auto model = build(ArchitectureSpec::parse(kTiny), 3, 1);
    for (auto& l : model.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0f);
        std::fill(l.biases.begin(), l.biases.end(), 0.0f);
    }
    model.layers.back().biases = {1.0f, -2.0f, 3.0f};
    const auto x = random_inputs(1, 36, 5)[0];
    EXPECT_EQ(predict(model, x), (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Net, BatchPredictionMatchesSingle) {
    const auto model = build(ArchitectureSpec::parse(kTiny), 2, 3);
    const auto xs = random_inputs(5, 36, 7);
    const auto rows = predict_batch(model, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(rows[i], predict(model, xs[i]));
}

TEST(Net, InputNormalizationStatistics) {
    auto model = build(ArchitectureSpec::parse("in1x1x2,fc2,out"), 1, 1);
    const std::vector<Tensor> xs = {{0.0f, 10.0f}, {2.0f, 14.0f}};
    fit_input_normalization(model, xs);
    EXPECT_EQ(model.input_mean, (std::vector<float>{1.0f, 12.0f}));
    // deviations +-1 and +-2: pooled sd = sqrt((1 + 1 + 4 + 4) / 4)
    EXPECT_FLOAT_EQ(model.input_scale, static_cast<float>(1.0 / std::sqrt(2.5)));
}

TEST(Net, GradientsMatchFiniteDifferences) {
    auto model = build(ArchitectureSpec::parse(kTiny), 2, 11);
    const auto xs = random_inputs(4, 36, 12);
    const auto ts = random_targets(4 * 2, 13);
    fit_input_normalization(model, xs);
    const auto report = gradients(model, xs, ts);

    std::vector<std::vector<double>> w, b;
    for (const auto& l : model.layers) {
        w.emplace_back(l.weights.begin(), l.weights.end());
        b.emplace_back(l.biases.begin(), l.biases.end());
    }
    EXPECT_NEAR(batch_loss(model, w, b, xs, ts), report.loss, 1e-12);
    const double eps = 1e-6;
    auto check = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + eps;
        const double up = batch_loss(model, w, b, xs, ts);
        slot = keep - eps;
        const double down = batch_loss(model, w, b, xs, ts);
        slot = keep;
        const double numeric = (up - down) / (2.0 * eps);
        EXPECT_NEAR(analytic, numeric, 1e-5 * std::max(1.0, std::abs(numeric)));
    };
    for (std::size_t j = 0; j < w.size(); ++j) {
        for (std::size_t i = 0; i < w[j].size(); ++i) check(w[j][i], report.weight_grads[j][i]);
        for (std::size_t i = 0; i < b[j].size(); ++i) check(b[j][i], report.bias_grads[j][i]);
    }
}

TEST(Train, LossFallsOnLearnableTargets) {
    auto model = build(ArchitectureSpec::parse(kTiny), 1, 21);
    const auto xs = random_inputs(32, 36, 22);
    std::vector<double> ts;
    for (const auto& x : xs) ts.push_back((x[0] + x[35]) / 255.0 - 1.0);
    fit_input_normalization(model, xs);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 8;
    cfg.epochs = 30;
    cfg.seed = 4;
    std::size_t calls = 0;
    cfg.on_epoch = [&](std::size_t, double) { ++calls; };
    const auto r = train(model, xs, ts, cfg);
    ASSERT_EQ(r.loss_history.size(), 30u);
    EXPECT_EQ(calls, 30u);
    EXPECT_LT(r.loss_history.back(), 0.5 * r.loss_history.front());

    const auto again = train(model, xs, ts, cfg);
    EXPECT_EQ(again.model, r.model);
}

TEST(Train, ZeroEpochsLeavesWeightsAlone) {
    const auto model = build(ArchitectureSpec::parse(kTiny), 1, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.batch_size = 2;
    const auto r = train(model, random_inputs(2, 36, 1), random_targets(2, 1), cfg);
    EXPECT_EQ(r.model, model);
    EXPECT_TRUE(r.loss_history.empty());
}

TEST(Train, Preconditions) {
    const auto model = build(ArchitectureSpec::parse(kTiny), 1, 1);
    TrainConfig cfg;
    cfg.batch_size = 4;
    EXPECT_EQ(code_of([&] { train(model, random_inputs(3, 36, 1), random_targets(3, 1), cfg); }),
              ErrorCode::TooFewSamples);
    EXPECT_EQ(code_of([&] { train(model, random_inputs(4, 35, 1), random_targets(4, 1), cfg); }),
              ErrorCode::ShapeMismatch);
    cfg.learning_rate = 0.0;
    EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::InvalidArgument);
}

TEST(Transfer, CopiesTrunkAndRecordsProvenance) {
    const auto arch = ArchitectureSpec::parse(kTiny);
    auto donor = build(arch, 5, 1, "GRFM");
    fit_input_normalization(donor, random_inputs(3, 36, 2));
    const auto model = transfer(donor, arch, 2, 9, "KJM");
    ASSERT_EQ(model.layers.size(), donor.layers.size());
    for (std::size_t j = 0; j + 1 < model.layers.size(); ++j) {
        EXPECT_EQ(model.layers[j].weights, donor.layers[j].weights);
        EXPECT_TRUE(model.layers[j].transferred);
    }
    EXPECT_FALSE(model.layers.back().transferred);
    EXPECT_EQ(model.layers.back().weight_shape, (std::vector<int>{4, 2}));
    EXPECT_EQ(model.input_mean, donor.input_mean);
    EXPECT_EQ(model.provenance, Provenance::Cascade);
    EXPECT_EQ(model.donor_id, weights_digest(donor));
    EXPECT_EQ(model.chain, (std::vector<std::string>{"scratch:GRFM", "cascade:KJM"}));
    EXPECT_EQ(transfer(donor, arch, 2, 9, "GRFM").provenance, Provenance::Finetune);
}

TEST(Transfer, MismatchedTrunkIsRejected) {
    const auto donor = build(ArchitectureSpec::parse(kTiny), 2, 1);
    EXPECT_EQ(code_of([&] { transfer(donor, ArchitectureSpec::parse("in1x6x6,conv3k3s1p0,pool2s2,fc4,out"), 2, 1); }),
              ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { transfer(donor, ArchitectureSpec::parse("in1x8x8,conv2k3s1p0,pool2s2,fc4,out"), 2, 1); }),
              ErrorCode::ShapeMismatch);
}
