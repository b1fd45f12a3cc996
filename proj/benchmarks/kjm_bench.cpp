#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "kjm/c3d.hpp"
#include "kjm/cnn.hpp"
#include "kjm/image_codec.hpp"
#include "kjm/pca.hpp"
#include "kjm/spline.hpp"
#include "kjm/synthetic.hpp"
#include "kjm/trial_prep.hpp"

using namespace kjm;

namespace {

std::vector<float> random_pixels(std::size_t n, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<float> d(0.0f, 255.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

const synth::SyntheticTrial& sample_trial() {
    static const auto t = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Sidestep, 3));
    return t;
}

}  // namespace

static void BM_SplineResample(benchmark::State& state) {
    std::vector<double> y(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(0.05 * static_cast<double>(i));
    for (auto _ : state) {
        benchmark::DoNotOptimize(resample(y, 3.5, static_cast<double>(y.size()) - 2.0, 125));
    }
}
BENCHMARK(BM_SplineResample)->Arg(150)->Arg(1200);

static void BM_C3dParse(benchmark::State& state) {
    const auto bytes = c3d::write(synth::to_c3d(sample_trial()));
    for (auto _ : state) {
        benchmark::DoNotOptimize(c3d::parse(bytes));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_C3dParse);

static void BM_PrepareTrial(benchmark::State& state) {
    const auto& t = sample_trial();
    for (auto _ : state) {
        benchmark::DoNotOptimize(prepare_trial(t.input));
    }
}
BENCHMARK(BM_PrepareTrial);

static void BM_EncodeTrial(benchmark::State& state) {
    const auto s = prepare_trial(sample_trial().input);
    const std::vector<float> row(s.predictor.begin(), s.predictor.end());
    ScalerParams scaler;
    scaler.axis_min = {-1500.0, -1500.0, -1500.0};
    scaler.axis_max = {1500.0, 1500.0, 1500.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_trial(std::span<const double>(s.predictor), scaler));
    }
}
BENCHMARK(BM_EncodeTrial);

static void BM_PcaFit(benchmark::State& state) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> d;
    std::vector<double> rows(static_cast<std::size_t>(state.range(0)) * 90);
    for (auto& v : rows) v = d(gen);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_pca(rows, 90));
    }
}
BENCHMARK(BM_PcaFit)->Arg(300)->Arg(1200);

static void BM_DeskForward(benchmark::State& state) {
    const auto model = cnn::build(cnn::ArchitectureSpec::desk(), 59, 1);
    const auto x = random_pixels(kImagePixels, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cnn::predict(model, x));
    }
}
BENCHMARK(BM_DeskForward)->Unit(benchmark::kMillisecond);

static void BM_DeskTrainEpoch(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const auto model = cnn::build(cnn::ArchitectureSpec::desk(), 59, 1);
    std::vector<cnn::Tensor> xs;
    for (std::size_t i = 0; i < batch; ++i) xs.push_back(random_pixels(kImagePixels, static_cast<unsigned>(i)));
    std::vector<double> ts(batch * 59, 0.1);
    cnn::TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.epochs = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cnn::train(model, xs, ts, cfg));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}
BENCHMARK(BM_DeskTrainEpoch)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
